//! Linear sampled-data state feedback `v = k'x(τ_i)` with a guaranteed
//! maximum sampling period.
//!
//! ```
//! use smallgain::design::{max_sampling_period, solve_design, LinearPlant};
//! use smallgain::linalg::Mat;
//!
//! let plant = LinearPlant::new(Mat::from_rows(&[vec![0.0]])?, Mat::column(&[1.0]))?;
//! let design = solve_design(&plant, &[-1.0], 0.25, 1.0)?;
//! let r = max_sampling_period(&plant, &design)?;
//! assert!((r - 1.0 / 7.0).abs() < 1e-12);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gain::grid::default_s_grid;
use crate::gain::{a3_check, check_class, Certificate, GainClass, GainError, GainFn, TimeWeight, Tracker};
use crate::linalg::{char_poly, is_hurwitz, poly_from_roots, poly_matrix, solve_lyapunov, sym_eigen, LinalgError, Mat};
use crate::sim::{Block, SimError, SystemDef};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("(A, B) is not controllable (smallest/largest singular value ratio {ratio:.3e})")]
    NotControllable { ratio: f64 },
    #[error("A + Bk' + 2μI is not Hurwitz for μ = {mu}: no P exists for this k; use a larger pole margin or a smaller μ")]
    DecayTooFast { mu: f64 },
    #[error("design inequality infeasible for this (k, μ, R): {0}; use a larger pole margin or a smaller μ")]
    Infeasible(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Gain(#[from] GainError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Single-input plant `x' = Ax + Bv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlantData")]
pub struct LinearPlant {
    pub a: Mat,
    pub b: Mat,
}

#[derive(Deserialize)]
struct PlantData {
    a: Mat,
    b: Mat,
}

impl TryFrom<PlantData> for LinearPlant {
    type Error = DesignError;
    fn try_from(d: PlantData) -> Result<Self, Self::Error> {
        LinearPlant::new(d.a, d.b)
    }
}

const CONTROLLABILITY_TOL: f64 = 1e-8;

impl LinearPlant {
    /// Checks shapes only; controllability is checked where it matters.
    pub fn new(a: Mat, b: Mat) -> Result<Self, DesignError> {
        if !a.is_square() {
            return Err(DesignError::Dimension(format!("A is {}x{}", a.rows(), a.cols())));
        }
        if b.rows() != a.rows() || b.cols() != 1 {
            return Err(DesignError::Dimension(format!(
                "B is {}x{}, expected {}x1",
                b.rows(),
                b.cols(),
                a.rows()
            )));
        }
        Ok(Self { a, b })
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    /// `[B, AB, ..., A^(n-1)B]`.
    pub fn controllability_matrix(&self) -> Mat {
        let n = self.dim();
        let mut cols = Vec::with_capacity(n);
        let mut v: Vec<f64> = self.b.as_slice().to_vec();
        for _ in 0..n {
            cols.push(v.clone());
            v = self.a.mul_vec(&v);
        }
        Mat::from_rows(&cols).expect("square").transpose()
    }

    /// Ratio of the smallest to the largest singular value of the
    /// controllability matrix.
    pub fn controllability_ratio(&self) -> f64 {
        let c = self.controllability_matrix();
        let gram = c.transpose().matmul(&c).expect("square");
        match sym_eigen(&gram) {
            Ok(e) if e.max() > 0.0 => (e.min().max(0.0) / e.max()).sqrt(),
            _ => 0.0,
        }
    }

    pub fn check_controllable(&self) -> Result<(), DesignError> {
        let ratio = self.controllability_ratio();
        if ratio >= CONTROLLABILITY_TOL {
            Ok(())
        } else {
            Err(DesignError::NotControllable { ratio })
        }
    }

    /// `A + Bk'`.
    pub fn closed_loop(&self, k: &[f64]) -> Result<Mat, DesignError> {
        if k.len() != self.dim() {
            return Err(DesignError::Dimension(format!("k has {} entries, expected {}", k.len(), self.dim())));
        }
        Ok(self.a.add(&self.bk(k))?)
    }

    /// `Bk'`.
    pub fn bk(&self, k: &[f64]) -> Mat {
        let b = self.b.as_slice();
        let data = b.iter().flat_map(|bi| k.iter().map(move |kj| bi * kj)).collect();
        Mat::from_row_major(b.len(), k.len(), data).expect("outer product")
    }
}

/// Gain vector `k` placing the poles of `A + Bk'` at `-margin - j`,
/// `j = 0..n-1` (Ackermann's formula).
pub fn place_poles(plant: &LinearPlant, margin: f64) -> Result<Vec<f64>, DesignError> {
    if !(margin > 0.0 && margin.is_finite()) {
        return Err(DesignError::InvalidParameter(format!("pole margin {margin} must be positive")));
    }
    let poles: Vec<f64> = (0..plant.dim()).map(|j| -margin - j as f64).collect();
    place_poles_at(plant, &poles)
}

/// Ackermann's formula for the given real poles.
pub fn place_poles_at(plant: &LinearPlant, poles: &[f64]) -> Result<Vec<f64>, DesignError> {
    let n = plant.dim();
    if poles.len() != n {
        return Err(DesignError::Dimension(format!("{} poles for a plant of order {n}", poles.len())));
    }
    plant.check_controllable()?;
    let target = poly_from_roots(poles);
    let p_a = poly_matrix(&target, &plant.a)?;
    // k' = -e_n' C^-1 p(A): solve C' y = e_n, then k = -p(A)' y
    let c = plant.controllability_matrix();
    let mut e_n = vec![0.0; n];
    e_n[n - 1] = 1.0;
    let y = c.transpose().solve(&e_n)?;
    Ok(p_a.transpose().mul_vec(&y).into_iter().map(|v| -v).collect())
}

/// `P`, `k` and the constants of the quadratic decay inequality; `r` is
/// filled in by [`max_sampling_period`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledDesign {
    pub p: Mat,
    pub k: Vec<f64>,
    pub q1: f64,
    pub q2: f64,
    pub mu: f64,
    #[serde(rename = "R")]
    pub reserve: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub r: Option<f64>,
}

/// `λ_max((A+Bk')'P + P(A+Bk') + 4μP + (4μR²/Q1) P B B' P)` with
/// `Q1 = λ_min(P)`. Non-positive exactly when the quadratic decay
/// inequality holds for all `(x, u)`.
pub fn design_residual(plant: &LinearPlant, k: &[f64], p: &Mat, mu: f64, reserve: f64) -> Result<f64, DesignError> {
    Ok(sym_eigen(&design_matrix(plant, k, p, mu, reserve)?)?.max())
}

fn design_matrix(plant: &LinearPlant, k: &[f64], p: &Mat, mu: f64, reserve: f64) -> Result<Mat, DesignError> {
    let a_cl = plant.closed_loop(k)?;
    let q1 = sym_eigen(p)?.min();
    if !(q1 > 0.0) {
        return Err(DesignError::Infeasible(format!("P is not positive definite (λ_min = {q1})")));
    }
    let pb = p.matmul(&plant.b)?;
    let quad = pb.matmul(&pb.transpose())?.scale(4.0 * mu * reserve * reserve / q1);
    let lin = a_cl.transpose().matmul(p)?.add(&p.matmul(&a_cl)?)?;
    Ok(lin.add(&p.scale(4.0 * mu))?.add(&quad)?.symmetrize())
}

/// Residual of `cP`. It equals `c` times the residual of `P`, so its sign
/// does not depend on `c`.
pub fn scaled_residual(plant: &LinearPlant, k: &[f64], p: &Mat, mu: f64, reserve: f64, c: f64) -> Result<f64, DesignError> {
    design_residual(plant, k, &p.scale(c), mu, reserve)
}

fn check_params(mu: f64, reserve: f64) -> Result<(), DesignError> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(DesignError::InvalidParameter(format!("μ = {mu} must be positive")));
    }
    if !(reserve >= 1.0 && reserve.is_finite()) {
        return Err(DesignError::InvalidParameter(format!("R = {reserve} must be at least 1")));
    }
    Ok(())
}

/// Solution `P0` of `(A+Bk'+2μI)'P0 + P0(A+Bk'+2μI) = -I`.
pub fn shifted_lyapunov(plant: &LinearPlant, k: &[f64], mu: f64) -> Result<Mat, DesignError> {
    let shifted = shifted_closed_loop(plant, k, mu)?;
    Ok(solve_lyapunov(&shifted, &Mat::identity(plant.dim()))?)
}

fn shifted_closed_loop(plant: &LinearPlant, k: &[f64], mu: f64) -> Result<Mat, DesignError> {
    let a_cl = plant.closed_loop(k)?;
    let shifted = a_cl.add(&Mat::identity(plant.dim()).scale(2.0 * mu))?;
    if !is_hurwitz(&shifted) {
        return Err(DesignError::DecayTooFast { mu });
    }
    Ok(shifted)
}

fn assemble(p: Mat, k: &[f64], mu: f64, reserve: f64) -> Result<SampledDesign, DesignError> {
    let eig = sym_eigen(&p)?;
    let (q1, q2) = (eig.min(), eig.max());
    Ok(SampledDesign { p, k: k.to_vec(), q1, q2, mu, reserve, m: q2 / q1, r: None })
}

/// Find `P` satisfying the quadratic decay inequality for the given `k`.
///
/// Tries the shifted Lyapunov solution `P0` first. Since the residual is
/// homogeneous in `P`, rescaling cannot repair a failing `P0`; the fallback
/// works with `X = P^-1`, for which the inequality reads
/// `A_s X + X A_s' + 4μR² λ_max(X) BB' <= 0` (`A_s = A + Bk' + 2μI`). Its
/// smallest solution with `λ_max(X) = 1` is the Gramian `X_min` of
/// `A_s X + X A_s' + 4μR² BB' = 0`, so the inequality is solvable iff
/// `λ_max(X_min) <= 1`. A strictly feasible `X = X_min + ηY` is picked by
/// bisection on `η`, with `Y` the solution of `A_s Y + Y A_s' + I = 0`.
pub fn solve_design(plant: &LinearPlant, k: &[f64], mu: f64, reserve: f64) -> Result<SampledDesign, DesignError> {
    check_params(mu, reserve)?;
    let shifted = shifted_closed_loop(plant, k, mu)?;
    let n = plant.dim();
    let p0 = solve_lyapunov(&shifted, &Mat::identity(n))?;
    if design_residual(plant, k, &p0, mu, reserve)? <= residual_tol(plant, k, &p0, mu, reserve)? {
        return assemble(p0, k, mu, reserve);
    }

    let at = shifted.transpose();
    let bb = plant.b.matmul(&plant.b.transpose())?;
    let x_min = solve_lyapunov(&at, &bb.scale(4.0 * mu * reserve * reserve))?;
    let top = sym_eigen(&x_min)?.max();
    if !(top <= 1.0 + 1e-12) {
        return Err(DesignError::Infeasible(format!(
            "the smallest normalized solution has λ_max = {top:.6} > 1"
        )));
    }
    let x = if top >= 1.0 - 1e-12 {
        x_min
    } else {
        let y = solve_lyapunov(&at, &Mat::identity(n))?;
        let goal = 0.5 * (1.0 + top);
        let lam = |eta: f64| -> Result<f64, DesignError> { Ok(sym_eigen(&x_min.add(&y.scale(eta))?)?.max()) };
        let mut hi = 1.0;
        while lam(hi)? < goal {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if lam(mid)? < goal {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * hi {
                break;
            }
        }
        x_min.add(&y.scale(lo))?
    };
    let p = x.inverse()?.symmetrize();
    if design_residual(plant, k, &p, mu, reserve)? > residual_tol(plant, k, &p, mu, reserve)? {
        return Err(DesignError::Infeasible("no P found within tolerance".into()));
    }
    assemble(p, k, mu, reserve)
}

/// Use a caller-supplied `P` after checking the inequality.
pub fn design_from_candidate(plant: &LinearPlant, k: &[f64], p: Mat, mu: f64, reserve: f64) -> Result<SampledDesign, DesignError> {
    check_params(mu, reserve)?;
    if p.rows() != plant.dim() || !p.is_square() {
        return Err(DesignError::Dimension(format!("P is {}x{}", p.rows(), p.cols())));
    }
    let residual = design_residual(plant, k, &p, mu, reserve)?;
    if residual > residual_tol(plant, k, &p, mu, reserve)? {
        return Err(DesignError::Infeasible(format!("candidate P has residual {residual:.3e}")));
    }
    assemble(p, k, mu, reserve)
}

const RELATIVE_TOL: f64 = 1e-10;

/// Absolute slack for the matrix residual: `1e-10` relative to the size of
/// the terms that enter it.
fn residual_tol(plant: &LinearPlant, k: &[f64], p: &Mat, mu: f64, reserve: f64) -> Result<f64, DesignError> {
    let a_cl = plant.closed_loop(k)?;
    let q1 = sym_eigen(p)?.min().max(f64::MIN_POSITIVE);
    let pb = p.matmul(&plant.b)?.frobenius();
    let scale = p.frobenius() * (2.0 * a_cl.frobenius() + 4.0 * mu) + 4.0 * mu * reserve * reserve * pb * pb / q1;
    Ok(RELATIVE_TOL * scale.max(1.0))
}

/// Probe points `(x, u)`: `x` ranges over 101 magnitudes in `[-1, 1]` along
/// each coordinate axis (and the diagonal when `n > 1`), `u` over 101 values
/// in `[-1, 1]`.
pub fn default_probes(n: usize) -> Vec<(Vec<f64>, f64)> {
    let lin = |i: usize| -1.0 + 2.0 * i as f64 / 100.0;
    let mut dirs: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect();
    if n > 1 {
        dirs.push(vec![1.0 / (n as f64).sqrt(); n]);
    }
    let mut probes = Vec::with_capacity(dirs.len() * 101 * 101);
    for dir in &dirs {
        for i in 0..=100 {
            let x: Vec<f64> = dir.iter().map(|d| d * lin(i)).collect();
            for j in 0..=100 {
                probes.push((x.clone(), lin(j)));
            }
        }
    }
    probes
}

/// Certificate with a `matrix` component (eigenvalue residual) and a
/// `pointwise` component: `2x'P(A+Bk')x + 2x'PBu + 4μx'Px - (Q1/(4μR²))u²`
/// on the probes. Both are compared against a `1e-10` relative slack.
pub fn verify_design(plant: &LinearPlant, design: &SampledDesign, probes: &[(Vec<f64>, f64)]) -> Result<Certificate, DesignError> {
    let (k, p, mu, reserve) = (&design.k, &design.p, design.mu, design.reserve);
    let mut matrix = Tracker::new("matrix");
    let slack = residual_tol(plant, k, p, mu, reserve)?;
    let residual = design_residual(plant, k, p, mu, reserve)?;
    matrix.observe(residual - slack, &[("lambda_max", residual)]);

    let a_cl = plant.closed_loop(k)?;
    let pa = p.matmul(&a_cl)?;
    let pb = p.matmul(&plant.b)?;
    let weight = design.q1 / (4.0 * mu * reserve * reserve);
    let mut pointwise = Tracker::new("pointwise");
    for (x, u) in probes {
        if x.len() != plant.dim() {
            return Err(DesignError::Dimension(format!("probe x has {} entries", x.len())));
        }
        let xpb: f64 = x.iter().zip(pb.as_slice()).map(|(a, b)| a * b).sum();
        let lhs = 2.0 * pa.quad(x) + 2.0 * xpb * u;
        let rhs = -4.0 * mu * p.quad(x) + weight * u * u;
        let mut witness: Vec<(&str, f64)> = x.iter().enumerate().map(|(i, v)| (PROBE_NAMES[i.min(PROBE_NAMES.len() - 1)], *v)).collect();
        witness.push(("u", *u));
        pointwise.observe(lhs - rhs - RELATIVE_TOL * (lhs.abs() + rhs.abs()), &witness);
    }
    let grid = format!("{} (x, u) probes", probes.len());
    Ok(Certificate::from_components("design_inequality", grid, vec![matrix.finish(), pointwise.finish()]))
}

const PROBE_NAMES: [&str; 9] = ["x_1", "x_2", "x_3", "x_4", "x_5", "x_6", "x_7", "x_8", "x_n"];

/// Spectral norms entering the sampling-period bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignNorms {
    pub a: f64,
    pub b: f64,
    pub bk: f64,
    pub a_cl: f64,
}

impl DesignNorms {
    pub fn of(plant: &LinearPlant, k: &[f64]) -> Result<Self, DesignError> {
        Ok(Self {
            a: plant.a.spectral_norm(),
            b: plant.b.spectral_norm(),
            bk: plant.bk(k).spectral_norm(),
            a_cl: plant.closed_loop(k)?.spectral_norm(),
        })
    }
}

/// The two upper bounds on the sampling period:
///
/// * `2μ / (M|Bk'||A+Bk'|(2|A+Bk'| + |B|) + 2μ|A| + 2μ|A+Bk'|)`
/// * `1 / (4μR²M|B|(|Bk'| + |A| + |A+Bk'|))`
///
/// A zero denominator gives an infinite bound.
pub fn sampling_bounds(norms: &DesignNorms, mu: f64, reserve: f64, m: f64) -> (f64, f64) {
    let d1 = m * norms.bk * norms.a_cl * (2.0 * norms.a_cl + norms.b) + 2.0 * mu * norms.a + 2.0 * mu * norms.a_cl;
    let d2 = 4.0 * mu * reserve * reserve * m * norms.b * (norms.bk + norms.a + norms.a_cl);
    let bound = |num: f64, den: f64| if den > 0.0 { num / den } else { f64::INFINITY };
    (bound(2.0 * mu, d1), bound(1.0, d2))
}

/// `r = min(bound1, bound2)` with spectral norms.
pub fn max_sampling_period(plant: &LinearPlant, design: &SampledDesign) -> Result<f64, DesignError> {
    let norms = DesignNorms::of(plant, &design.k)?;
    let (b1, b2) = sampling_bounds(&norms, design.mu, design.reserve, design.m);
    let r = b1.min(b2);
    if !r.is_finite() {
        return Err(DesignError::InvalidParameter("both sampling-period bounds are unbounded (A = 0 and k = 0)".into()));
    }
    Ok(r)
}

/// Plant `x' = Ax + Bk'x(τ_i) + Bu` with `τ_{i+1} = τ_i + exp(-w(τ_i)) r`,
/// `w >= 0`. Inputs: `u` (one component) and `w` (one component).
pub fn closed_loop_system(plant: &LinearPlant, k: &[f64], r: f64) -> Result<SystemDef, DesignError> {
    plant.closed_loop(k)?;
    if !(r.is_finite() && r > 0.0) {
        return Err(DesignError::InvalidParameter(format!("sampling bound r = {r} must be positive")));
    }
    let n = plant.dim();
    let (a, b, k) = (plant.a.clone(), plant.b.as_slice().to_vec(), k.to_vec());
    let block = Block::sampled("linear-closed-loop", n, 1, r, move |s| (-s.w[0].max(0.0)).exp() * r, move |c, dx| {
        let held = &c.sample.expect("sampled block").x;
        let v: f64 = k.iter().zip(held).map(|(ki, xi)| ki * xi).sum::<f64>() + c.u[0];
        let ax = a.mul_vec(c.x);
        for i in 0..n {
            dx[i] = ax[i] + b[i] * v;
        }
    })
    .with_exogenous(0, 1);
    Ok(SystemDef::leaf(block)?)
}

/// How strong a stability property the closed loop inherits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityClass {
    #[serde(rename = "WISS")]
    Wiss,
    #[serde(rename = "ISS")]
    Iss,
    #[serde(rename = "UISS")]
    Uiss,
}

/// Gains of the driven subsystem (`z`) and of the coupling into the plant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineGains {
    pub gamma1: GainFn,
    #[serde(default = "GainFn::zero")]
    pub gamma1_u: GainFn,
    #[serde(default = "TimeWeight::one")]
    pub beta: TimeWeight,
    #[serde(default = "TimeWeight::one")]
    pub delta1_u: TimeWeight,
    pub gamma2: GainFn,
    #[serde(default = "GainFn::zero")]
    pub gamma2_u: GainFn,
    #[serde(default = "TimeWeight::one")]
    pub delta2_u: TimeWeight,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineRequest {
    pub plant: LinearPlant,
    pub gains: PipelineGains,
    pub rho: GainFn,
    #[serde(rename = "R", default = "one")]
    pub reserve: f64,
    pub mu: f64,
    #[serde(default = "one")]
    pub margin: f64,
    /// Fixed feedback gain; pole placement is skipped when present.
    #[serde(default)]
    pub k: Option<Vec<f64>>,
    /// Candidate `P`; used as is when it satisfies the inequality.
    #[serde(default)]
    pub p: Option<Mat>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutcome {
    /// Absent when the small-gain condition fails.
    pub design: Option<SampledDesign>,
    pub certificate: Certificate,
    pub stability: Option<StabilityClass>,
}

/// Check the small-gain condition, then place poles (unless `k` is given),
/// find `P`, verify it and compute `r`.
pub fn design_pipeline(req: &PipelineRequest) -> Result<PipelineOutcome, DesignError> {
    let g = &req.gains;
    let s_grid = default_s_grid();
    let mut parts = Vec::new();
    for (name, gain) in [("gamma1", &g.gamma1), ("gamma1_u", &g.gamma1_u), ("gamma2", &g.gamma2), ("gamma2_u", &g.gamma2_u)] {
        let mut cert = check_class(gain, GainClass::N, &s_grid)?;
        cert.check = format!("class_{name}");
        parts.push(cert);
    }
    for w in [&g.beta, &g.delta1_u, &g.delta2_u] {
        w.validate()?;
    }
    let a3 = a3_check(&g.gamma1, &g.gamma2, &req.rho, req.reserve, &s_grid)?;
    parts.push(a3);
    if parts.iter().any(|c| !c.passed()) {
        return Ok(PipelineOutcome {
            design: None,
            certificate: Certificate::combine("design_pipeline", &parts),
            stability: None,
        });
    }

    let k = match &req.k {
        Some(k) => k.clone(),
        None => place_poles(&req.plant, req.margin)?,
    };
    let mut design = match &req.p {
        Some(p) => design_from_candidate(&req.plant, &k, p.clone(), req.mu, req.reserve)?,
        None => solve_design(&req.plant, &k, req.mu, req.reserve)?,
    };
    parts.push(verify_design(&req.plant, &design, &default_probes(req.plant.dim()))?);
    design.r = Some(max_sampling_period(&req.plant, &design)?);
    let stability = if !(g.delta1_u.is_bounded() && g.delta2_u.is_bounded()) {
        StabilityClass::Wiss
    } else if g.beta.is_bounded() {
        StabilityClass::Uiss
    } else {
        StabilityClass::Iss
    };
    Ok(PipelineOutcome {
        design: Some(design),
        certificate: Certificate::combine("design_pipeline", &parts),
        stability: Some(stability),
    })
}

/// Characteristic polynomial of `A + Bk'`, highest degree first.
pub fn closed_loop_char_poly(plant: &LinearPlant, k: &[f64]) -> Result<Vec<f64>, DesignError> {
    Ok(char_poly(&plant.closed_loop(k)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar() -> LinearPlant {
        LinearPlant::new(Mat::from_rows(&[vec![0.0]]).unwrap(), Mat::column(&[1.0])).unwrap()
    }

    fn double_integrator() -> LinearPlant {
        LinearPlant::new(Mat::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap(), Mat::column(&[0.0, 1.0])).unwrap()
    }

    #[test]
    fn ackermann_examples() {
        assert_eq!(place_poles(&scalar(), 1.0).unwrap(), vec![-1.0]);
        let k = place_poles(&double_integrator(), 1.0).unwrap();
        assert!((k[0] + 2.0).abs() < 1e-12 && (k[1] + 3.0).abs() < 1e-12, "{k:?}");
        let cp = closed_loop_char_poly(&double_integrator(), &k).unwrap();
        assert!((cp[1] - 3.0).abs() < 1e-12 && (cp[2] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn uncontrollable_plant_rejected() {
        let plant = LinearPlant::new(Mat::zeros(2, 2), Mat::column(&[0.0, 0.0])).unwrap();
        assert!(matches!(place_poles(&plant, 1.0), Err(DesignError::NotControllable { .. })));
    }

    #[test]
    fn scalar_design_reproduces_one_seventh() {
        let plant = scalar();
        let design = solve_design(&plant, &[-1.0], 0.25, 1.0).unwrap();
        assert_eq!(design.p.as_slice(), &[1.0]);
        assert_eq!((design.q1, design.q2, design.m), (1.0, 1.0, 1.0));
        assert_eq!(design_residual(&plant, &[-1.0], &design.p, 0.25, 1.0).unwrap(), 0.0);
        let r = max_sampling_period(&plant, &design).unwrap();
        assert!((r - 1.0 / 7.0).abs() <= 1e-15);
        let norms = DesignNorms::of(&plant, &[-1.0]).unwrap();
        let (_, b2) = sampling_bounds(&norms, 0.25, 1.0, 1.0);
        assert_eq!(b2, 0.5);
        let (b1, b2) = sampling_bounds(&norms, 0.5, 1.0, 1.0);
        assert_eq!((b1, b2), (0.25, 0.25));
    }

    #[test]
    fn decay_beyond_pole_is_rejected() {
        assert!(matches!(solve_design(&scalar(), &[-1.0], 10.0, 1.0), Err(DesignError::DecayTooFast { .. })));
    }

    #[test]
    fn unstable_open_loop_fails_verification() {
        let plant = LinearPlant::new(Mat::from_rows(&[vec![1.0]]).unwrap(), Mat::column(&[1.0])).unwrap();
        let design = SampledDesign { p: Mat::identity(1), k: vec![0.0], q1: 1.0, q2: 1.0, mu: 0.25, reserve: 1.0, m: 1.0, r: None };
        let cert = verify_design(&plant, &design, &default_probes(1)).unwrap();
        assert!(!cert.passed());
        let pw = cert.component("pointwise").unwrap();
        assert_eq!(pw.witness["x_1"].abs(), 1.0);
        assert_eq!(pw.witness["u"], pw.witness["x_1"]);
        let single = verify_design(&plant, &design, &[(vec![1.0], 0.0)]).unwrap();
        assert!((single.component("pointwise").unwrap().worst_residual - 3.0).abs() < 1e-9);
    }

    #[test]
    fn gramian_route_handles_failing_lyapunov_start() {
        let plant = double_integrator();
        let k = place_poles(&plant, 1.0).unwrap();
        let design = solve_design(&plant, &k, 0.1, 1.0).unwrap();
        assert!(verify_design(&plant, &design, &default_probes(2)).unwrap().passed());
        // a large reserve defeats P0 but the inverse route still succeeds
        let p0 = shifted_lyapunov(&plant, &k, 0.1).unwrap();
        assert!(design_residual(&plant, &k, &p0, 0.1, 2.0).unwrap() > 0.0);
        let design = solve_design(&plant, &k, 0.1, 2.0).unwrap();
        assert!(design_residual(&plant, &k, &design.p, 0.1, 2.0).unwrap() <= 1e-9);
    }

    #[test]
    fn k_zero_with_hurwitz_a() {
        let plant = LinearPlant::new(Mat::from_rows(&[vec![-2.0]]).unwrap(), Mat::column(&[1.0])).unwrap();
        let norms = DesignNorms::of(&plant, &[0.0]).unwrap();
        let (b1, _) = sampling_bounds(&norms, 0.25, 1.0, 1.0);
        assert!((b1 - 0.5 / (0.5 * 2.0 + 0.5 * 2.0)).abs() < 1e-15);
    }
}
