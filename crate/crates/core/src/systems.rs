//! Ready-made systems with closed-form transition maps and condition
//! checkers.
//!
//! ```
//! use smallgain::sim::{simulate, Inputs, SimOptions};
//! use smallgain::systems::make_scalar_sampled_2_1;
//!
//! let (sys, oracle) = make_scalar_sampled_2_1();
//! let traj = simulate(&sys, 0.0, &[2.0], &Inputs::none(), 3.0, &SimOptions::default()).unwrap();
//! let x = traj.state_at(0.5).unwrap()[0];
//! assert!((x - 1.0).abs() < 1e-12);
//! assert_eq!(oracle.eval(0.5, 0.0, &[2.0]), vec![1.0]);
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gain::{describe_axis, Certificate, Tracker};
use crate::linalg::{is_hurwitz, sym_eigen, Mat};
use crate::sim::{interconnect, Block, SimError, SystemDef};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemsError {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Closed-form transition map `φ(t, t0, x0)`.
#[derive(Clone, Copy)]
pub struct AnalyticOracle {
    pub name: &'static str,
    map: fn(f64, f64, &[f64]) -> Vec<f64>,
}

impl AnalyticOracle {
    pub fn eval(&self, t: f64, t0: f64, x0: &[f64]) -> Vec<f64> {
        (self.map)(t, t0, x0)
    }
}

impl std::fmt::Debug for AnalyticOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "AnalyticOracle({})", self.name)
    }
}

fn scalar_sampled_map(t: f64, t0: f64, x0: &[f64]) -> Vec<f64> {
    if t < t0 + 1.0 {
        vec![(1.0 - t + t0) * x0[0]]
    } else {
        vec![0.0]
    }
}

/// `x' = -x(τ_i)` with `τ_{i+1} = τ_i + 1`: the partition starts at `t0`.
pub fn make_scalar_sampled_2_1() -> (SystemDef, AnalyticOracle) {
    let block = Block::sampled("example-2.1", 1, 0, 1.0, |_| 1.0, |c, dx| {
        dx[0] = -c.sample.expect("sampled block").x[0];
    });
    let sys = SystemDef::leaf(block).expect("valid block");
    (sys, AnalyticOracle { name: "example-2.1", map: scalar_sampled_map })
}

fn on_integer(t: f64) -> bool {
    (t - t.round()).abs() <= 1e-12 * t.abs().max(1.0)
}

fn fixed_impulse_map(t: f64, t0: f64, x0: &[f64]) -> Vec<f64> {
    let (x1, x2) = (x0[0], x0[1]);
    if on_integer(t0) {
        let t0 = t0.round();
        if t < t0 + 1.0 {
            vec![(1.0 - t + t0) * x1, x1]
        } else {
            vec![0.0, 0.0]
        }
    } else {
        let k = t0.floor();
        let at_next = x1 - (k + 1.0 - t0) * x2;
        if t < k + 1.0 {
            vec![x1 - (t - t0) * x2, x2]
        } else if t < k + 2.0 {
            vec![(2.0 - t + k) * at_next, at_next]
        } else {
            vec![0.0, 0.0]
        }
    }
}

/// `x' = -x([t])` with impulses fixed at the integers. The state is
/// `(x(t), x([t]))`; the output is `x(t)`.
pub fn make_impulsive_fixed_2_2() -> (SystemDef, AnalyticOracle) {
    let block = Block::impulsive(
        "example-2.2",
        2,
        0,
        1.0,
        true,
        |c, dx| {
            dx[0] = -c.x[1];
            dx[1] = 0.0;
        },
        |c, out| {
            out[0] = c.x[0];
            out[1] = c.x[0];
        },
    )
    .with_output(1, |_, x, _, y| y[0] = x[0]);
    let sys = SystemDef::leaf(block).expect("valid block");
    (sys, AnalyticOracle { name: "example-2.2", map: fixed_impulse_map })
}

/// Data for the cascade `z' = Az + g(x)` driven by an impulsive
/// `x' = Fx`, `x(τ) = J x(τ⁻)` at `τ = k * period`, plus the quadratic
/// Lyapunov function `V(x) = x'Sx` and the constants of its decay
/// conditions.
///
/// The coupling is `g_i(x) = Σ_j g_lin[i][j] x_j + g_quad[i][j] x_j²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImpulsiveCascadeSpec {
    pub a: Mat,
    pub g_lin: Mat,
    pub g_quad: Mat,
    pub flow: Mat,
    pub jump: Mat,
    pub period: f64,
    pub v: Mat,
    pub c1: f64,
    pub c2: f64,
    pub mu: f64,
    pub lambda: f64,
}

impl Default for ImpulsiveCascadeSpec {
    /// `k = n = 1`, `A = -1`, `g(x) = x²`, `f(x) = 0.5x`, jump `0.5x`,
    /// period 1, `V = x²`, `c1 = -1`, `c2 = 2 ln 2`, `λ = 0.3`, `μ = c2`.
    fn default() -> Self {
        let c2 = 2.0 * std::f64::consts::LN_2;
        let m = |v: f64| Mat::from_rows(&[vec![v]]).expect("1x1");
        Self {
            a: m(-1.0),
            g_lin: m(0.0),
            g_quad: m(1.0),
            flow: m(0.5),
            jump: m(0.5),
            period: 1.0,
            v: m(1.0),
            c1: -1.0,
            c2,
            mu: c2,
            lambda: 0.3,
        }
    }
}

impl ImpulsiveCascadeSpec {
    pub fn z_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn x_dim(&self) -> usize {
        self.flow.rows()
    }

    pub fn validate(&self) -> Result<(), SystemsError> {
        let bad = |m: &str| Err(SystemsError::InvalidSpec(m.to_string()));
        let (k, n) = (self.z_dim(), self.x_dim());
        if !self.a.is_square() || !self.flow.is_square() || !self.jump.is_square() || !self.v.is_square() {
            return bad("A, flow, jump and V matrices must be square");
        }
        if self.jump.rows() != n || self.v.rows() != n {
            return bad("jump and V matrices must match the x dimension");
        }
        if self.g_lin.rows() != k || self.g_lin.cols() != n || self.g_quad.rows() != k || self.g_quad.cols() != n {
            return bad("coupling matrices must be k x n");
        }
        if !(self.period.is_finite() && self.period > 0.0) {
            return bad("partition period must be positive");
        }
        if self.c2 == 0.0 || !self.c2.is_finite() {
            return bad("c2 must be non-zero");
        }
        if !(self.lambda > 0.0) {
            return bad("lambda must be positive");
        }
        if !is_hurwitz(&self.a) {
            return bad("A is not Hurwitz");
        }
        let sym = self.v.symmetrize();
        if sym.sub(&self.v).map_or(true, |d| d.frobenius() > 1e-12 * self.v.frobenius().max(1.0)) {
            return bad("V matrix must be symmetric");
        }
        match sym_eigen(&sym) {
            Ok(e) if e.min() > 0.0 => Ok(()),
            _ => bad("V is not positive definite"),
        }
    }

    pub fn coupling(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..x.len()).map(|j| self.g_lin[(i, j)] * x[j] + self.g_quad[(i, j)] * x[j] * x[j]).sum();
        }
    }

    pub fn lyapunov(&self, x: &[f64]) -> f64 {
        self.v.quad(x)
    }

    fn lyapunov_gradient(&self, x: &[f64]) -> Vec<f64> {
        let s = self.v.symmetrize();
        s.mul_vec(x).into_iter().map(|v| 2.0 * v).collect()
    }
}

/// The cascade as an interconnection: the `z` ODE first, the impulsive `x`
/// block second. The state is `(z, x)`.
pub fn make_cascade_3_49(spec: &ImpulsiveCascadeSpec) -> Result<SystemDef, SystemsError> {
    spec.validate()?;
    let (k, n) = (spec.z_dim(), spec.x_dim());
    let zs = spec.clone();
    let z_block = Block::ode("cascade-z", k, n, move |c, dz| {
        zs.coupling(&c.u[..n], dz);
        for i in 0..k {
            dz[i] += (0..k).map(|j| zs.a[(i, j)] * c.x[j]).sum::<f64>();
        }
    });
    let (flow, jump) = (spec.flow.clone(), spec.jump.clone());
    let x_block = Block::impulsive(
        "cascade-x",
        n,
        k,
        spec.period,
        false,
        move |c, dx| dx.copy_from_slice(&flow.mul_vec(c.x)),
        move |c, out| out.copy_from_slice(&jump.mul_vec(c.x)),
    );
    let z = SystemDef::leaf(z_block)?;
    let x = SystemDef::leaf(x_block)?;
    Ok(interconnect(&z, &x, 0)?.with_name("cascade-3.49"))
}

/// Number of partition points `k * period` inside `[s, s + t]`.
pub fn partition_count(period: f64, s: f64, t: f64) -> f64 {
    let eps = 1e-12;
    let hi = ((s + t) / period + eps).floor();
    let lo = (s / period - eps).ceil().max(0.0);
    (hi - lo + 1.0).max(0.0)
}

/// Probe states: magnitudes `1e-3..1e3` along every coordinate axis and the
/// diagonal, both signs.
pub fn default_x_grid(n: usize) -> Vec<Vec<f64>> {
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
    let mut grid = vec![vec![0.0; n]];
    for e in 0..=6 {
        let m = 10f64.powi(e - 3);
        for dir in &dirs {
            for sign in [1.0, -1.0] {
                grid.push(dir.iter().map(|v| sign * m * v).collect());
            }
        }
    }
    grid
}

/// Windows `(s, t)` with `s` in `{0, 0.25, 0.5, 0.75}` periods and `t` in
/// `[0, 50]` periods, step 0.1.
pub fn default_window_grid(period: f64) -> Vec<(f64, f64)> {
    let mut w = Vec::new();
    for si in 0..4 {
        for ti in 0..=500 {
            w.push((si as f64 * 0.25 * period, ti as f64 * 0.1 * period));
        }
    }
    w
}

/// Functions entering the decay conditions of an impulsive block.
pub struct DecayConditions<'a> {
    pub v: &'a dyn Fn(&[f64]) -> f64,
    /// Analytic gradient; central differences with step `1e-6` otherwise.
    pub grad_v: Option<&'a dyn Fn(&[f64]) -> Vec<f64>>,
    pub flow: &'a dyn Fn(&[f64]) -> Vec<f64>,
    pub jump: &'a dyn Fn(&[f64]) -> Vec<f64>,
    pub period: f64,
    pub c1: f64,
    pub c2: f64,
    pub mu: f64,
    pub lambda: f64,
}

const REL_TOL: f64 = 1e-12;

fn central_gradient(v: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let h = 1e-6;
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = xp[i];
            xp[i] = orig + h;
            let fp = v(&xp);
            xp[i] = orig - h;
            let fm = v(&xp);
            xp[i] = orig;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Certificate for the three decay conditions
///
/// * `flow`: `∇V(x) f(x) <= -c1 V(x)`
/// * `jump`: `V(h(x)) <= exp(-c2) V(x)`
/// * `count`: `-c2 card(π ∩ [s, s+t]) <= μ + (c1 - λ) t`
///
/// Each residual is `lhs - rhs - 1e-12 (|lhs| + |rhs|)`; the relative slack
/// absorbs rounding in cases where the inequality is an identity.
pub fn check_decay_conditions(
    cond: &DecayConditions<'_>,
    x_grid: &[Vec<f64>],
    windows: &[(f64, f64)],
) -> Result<Certificate, SystemsError> {
    if cond.c2 == 0.0 {
        return Err(SystemsError::InvalidSpec("c2 must be non-zero".into()));
    }
    if x_grid.is_empty() || windows.is_empty() {
        return Err(SystemsError::InvalidSpec("empty probe grid".into()));
    }
    let slack = |lhs: f64, rhs: f64| lhs - rhs - REL_TOL * (lhs.abs() + rhs.abs());
    let mut flow = Tracker::new("flow");
    let mut jump = Tracker::new("jump");
    for x in x_grid {
        let v = (cond.v)(x);
        let grad = match cond.grad_v {
            Some(g) => g(x),
            None => central_gradient(cond.v, x),
        };
        let f = (cond.flow)(x);
        let lhs: f64 = grad.iter().zip(&f).map(|(a, b)| a * b).sum();
        let witness: Vec<(&str, f64)> = x.iter().enumerate().map(|(i, v)| (X_NAMES[i.min(X_NAMES.len() - 1)], *v)).collect();
        flow.observe(slack(lhs, -cond.c1 * v), &witness);
        let vh = (cond.v)(&(cond.jump)(x));
        jump.observe(slack(vh, (-cond.c2).exp() * v), &witness);
    }
    let mut count = Tracker::new("count");
    for &(s, t) in windows {
        let card = partition_count(cond.period, s, t);
        count.observe(slack(-cond.c2 * card, cond.mu + (cond.c1 - cond.lambda) * t), &[("s", s), ("t", t), ("card", card)]);
    }
    let grid = format!(
        "x: {} probes; windows: {} (s, t) pairs, {}",
        x_grid.len(),
        windows.len(),
        describe_axis("t", &windows.iter().map(|w| w.1).fold(Vec::new(), |mut acc, t| {
            if acc.last().is_none_or(|&l| t > l) {
                acc.push(t);
            }
            acc
        }))
    );
    Ok(Certificate::from_components("decay_conditions", grid, vec![flow.finish(), jump.finish(), count.finish()]))
}

const X_NAMES: [&str; 9] = ["x_1", "x_2", "x_3", "x_4", "x_5", "x_6", "x_7", "x_8", "x_n"];

/// Decay conditions of the cascade's impulsive block with the analytic
/// gradient `2 S x`.
pub fn check_conditions_3_50(
    spec: &ImpulsiveCascadeSpec,
    x_grid: &[Vec<f64>],
    windows: &[(f64, f64)],
) -> Result<Certificate, SystemsError> {
    spec.validate()?;
    let v = |x: &[f64]| spec.lyapunov(x);
    let grad = |x: &[f64]| spec.lyapunov_gradient(x);
    let flow = |x: &[f64]| spec.flow.mul_vec(x);
    let jump = |x: &[f64]| spec.jump.mul_vec(x);
    let cond = DecayConditions {
        v: &v,
        grad_v: Some(&grad),
        flow: &flow,
        jump: &jump,
        period: spec.period,
        c1: spec.c1,
        c2: spec.c2,
        mu: spec.mu,
        lambda: spec.lambda,
    };
    check_decay_conditions(&cond, x_grid, windows)
}

/// Parameters of the planar plant `z' = -z³ + zx`, `x' = d z² + u + v`
/// under `v = -x(τ_i)` and `τ_{i+1} = τ_i + exp(-w(τ_i)) r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanarPlantSpec {
    /// Bound on `|d|`.
    pub delta: f64,
    pub r: f64,
    /// Gain parameter of the `z` subsystem, `γ1(s) = sqrt(s / (1 - ε))`.
    pub epsilon: f64,
    /// Slope of the reserve `ρ(s) = L s`.
    #[serde(rename = "L")]
    pub l: f64,
}

impl Default for PlanarPlantSpec {
    fn default() -> Self {
        Self { delta: 0.2, r: 1.0 / 7.0, epsilon: 0.1, l: 0.1 }
    }
}

impl PlanarPlantSpec {
    pub fn validate(&self) -> Result<(), SystemsError> {
        let bad = |m: String| Err(SystemsError::InvalidSpec(m));
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta = {} must lie in (0, 1)", self.delta));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon = {} must lie in (0, 1)", self.epsilon));
        }
        if !(self.l > 0.0 && self.l.is_finite()) {
            return bad(format!("L = {} must be positive", self.l));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return bad(format!("r = {} must be positive", self.r));
        }
        Ok(())
    }

    /// `(1 + L) sqrt((1 + L) δ / (1 - ε))`; the loop is certified when this
    /// is at most one.
    pub fn small_gain_lhs(&self) -> f64 {
        (1.0 + self.l) * ((1.0 + self.l) * self.delta / (1.0 - self.epsilon)).sqrt()
    }

    pub fn feasible(&self) -> bool {
        self.small_gain_lhs() <= 1.0
    }
}

fn planar_period(r: f64) -> impl Fn(&crate::sim::Sample) -> f64 + Send + Sync {
    move |s| (-s.w[0]).exp() * r
}

/// Closed loop as one sampled block with state `(z, x)`, inputs `u`, `d`,
/// `w` (one component each) and output `(z, x)`.
pub fn make_planar_4_13(spec: &PlanarPlantSpec) -> Result<SystemDef, SystemsError> {
    spec.validate()?;
    let block = Block::sampled("planar-4.13", 2, 1, spec.r, planar_period(spec.r), |c, dx| {
        let (z, x) = (c.x[0], c.x[1]);
        let held = c.sample.expect("sampled block").x[1];
        dx[0] = -z * z * z + z * x;
        dx[1] = c.d[0] * z * z + c.u[0] - held;
    })
    .with_exogenous(1, 1);
    Ok(SystemDef::leaf(block)?)
}

/// The same closed loop built as the interconnection of the `z` ODE and the
/// sampled `x` subsystem.
pub fn make_planar_4_13_interconnected(spec: &PlanarPlantSpec) -> Result<SystemDef, SystemsError> {
    spec.validate()?;
    // input [x, u]
    let z_block = Block::ode("planar-z", 1, 2, |c, dz| {
        let (z, x) = (c.x[0], c.u[0]);
        dz[0] = -z * z * z + z * x;
    });
    // input [z, u]
    let x_block = Block::sampled("planar-x", 1, 2, spec.r, planar_period(spec.r), |c, dx| {
        let (z, u) = (c.u[0], c.u[1]);
        let held = c.sample.expect("sampled block").x[0];
        dx[0] = c.d[0] * z * z + u - held;
    })
    .with_exogenous(1, 1);
    let sys = interconnect(&SystemDef::leaf(z_block)?, &SystemDef::leaf(x_block)?, 1)?;
    Ok(sys.with_name("planar-4.13-interconnected"))
}
