//! Trajectory ensembles, exponential KL envelope fitting and empirical
//! stability-estimate probes.
//!
//! ```
//! use smallgain::iss::{fit_kl_envelope, iss_probe, run_ensemble, EnsembleSpec, IssEstimate, NormSelector};
//! use smallgain::systems::make_scalar_sampled_2_1;
//!
//! let (sys, _) = make_scalar_sampled_2_1();
//! let spec = EnsembleSpec { count: 8, horizon: 3.0, ..EnsembleSpec::default() };
//! let runs = run_ensemble(&sys, &spec, &[]).unwrap();
//! let sigma = fit_kl_envelope(&runs, NormSelector::State).unwrap();
//! let cert = iss_probe(&runs, &IssEstimate::uniform(sigma), NormSelector::State, 1e-9).unwrap();
//! assert!(cert.passed());
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gain::{Certificate, GainError, GainFn, KlEnvelope, TimeWeight, Tracker};
use crate::linalg::Mat;
use crate::parallel::par_map;
use crate::report::csv_table;
use crate::sim::rng::{derive_seed, mix, SplitMix64};
use crate::sim::{norm, simulate, Inputs, SimError, SimOptions, SystemDef, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IssError {
    #[error("envelope is not decaying (log-slope {slope:.6e} >= 0)")]
    NotDecaying { slope: f64 },
    #[error("ensemble is empty or has no non-zero initial state")]
    EmptyEnsemble,
    #[error("trajectory {index} has a non-zero external input; envelope fits need zero input")]
    NonZeroInput { index: usize },
    #[error("trajectory {index} has no record at t = {t}")]
    MissingRecord { index: usize, t: f64 },
    #[error("invalid estimate: {0}")]
    InvalidEstimate(String),
    #[error("cannot fit a gain: output {output:.6e} exceeds the envelope at t = {t} while the input is zero")]
    GainUnfittable { t: f64, output: f64 },
    #[error(transparent)]
    Gain(#[from] GainError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Reproducible family of runs: initial states drawn from the ball (or
/// sphere) of radius `radius`, initial times uniform in `[t0, t0_max]`, and
/// input generators remixed with a per-run seed derived from `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleSpec {
    pub count: usize,
    pub radius: f64,
    /// Draw initial states on the sphere instead of the ball.
    pub on_sphere: bool,
    pub t0: f64,
    pub t0_max: Option<f64>,
    pub horizon: f64,
    pub inputs: Inputs,
    pub options: SimOptions,
    pub seed: u64,
    /// Used instead of sampling when present.
    pub initial_states: Option<Vec<Vec<f64>>>,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self {
            count: 20,
            radius: 1.0,
            on_sphere: false,
            t0: 0.0,
            t0_max: None,
            horizon: 10.0,
            inputs: Inputs::none(),
            options: SimOptions::default(),
            seed: 0,
            initial_states: None,
        }
    }
}

/// One member of an ensemble before it is run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunPlan {
    pub t0: f64,
    pub x0: Vec<f64>,
    pub inputs: Inputs,
}

impl EnsembleSpec {
    pub fn plans(&self, n: usize) -> Vec<RunPlan> {
        let count = self.initial_states.as_ref().map_or(self.count, Vec::len);
        (0..count)
            .map(|i| {
                let run_seed = derive_seed(self.seed, i as u64);
                let mut rng = SplitMix64::new(mix(run_seed, 0, 2));
                let x0 = match &self.initial_states {
                    Some(states) => states[i].clone(),
                    None => self.draw_state(n, &mut rng),
                };
                let t0 = match self.t0_max {
                    Some(hi) if hi > self.t0 => rng.uniform(self.t0, hi),
                    _ => self.t0,
                };
                RunPlan { t0, x0, inputs: self.inputs.with_seed(run_seed) }
            })
            .collect()
    }

    fn draw_state(&self, n: usize, rng: &mut SplitMix64) -> Vec<f64> {
        // a uniform point of the cube, pushed radially onto the sphere or
        // rescaled to a uniform radius in the ball
        let mut v: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let len = norm(&v);
        if len == 0.0 {
            v[0] = 1.0;
        }
        let len = norm(&v);
        let radius = if self.on_sphere { self.radius } else { self.radius * rng.next_f64().powf(1.0 / n as f64) };
        v.iter_mut().for_each(|c| *c *= radius / len);
        v
    }
}

/// Run every member, in parallel when allowed. `relative_records` adds
/// records at `t0 + h` for each listed `h`.
pub fn run_ensemble(sys: &SystemDef, spec: &EnsembleSpec, relative_records: &[f64]) -> Result<Vec<Trajectory>, IssError> {
    let plans = spec.plans(sys.state_dim());
    let results = par_map(&plans, |_, plan| {
        let mut opts = spec.options.clone();
        opts.extra_records.extend(relative_records.iter().map(|h| plan.t0 + h));
        simulate(sys, plan.t0, &plan.x0, &plan.inputs, spec.horizon, &opts)
    });
    Ok(results.into_iter().collect::<Result<Vec<_>, _>>()?)
}

/// Which norm the probes measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormSelector {
    State,
    Output,
    /// `sqrt(x'Px)`.
    Quadratic { p: Mat },
}

impl NormSelector {
    pub fn eval(&self, traj: &Trajectory, i: usize) -> f64 {
        match self {
            NormSelector::State => traj.state_norm(i),
            NormSelector::Output => traj.output_norm(i),
            NormSelector::Quadratic { p } => p.quad(traj.state(i)).max(0.0).sqrt(),
        }
    }
}

/// Sup-over-ensemble of `‖y(t0 + τ)‖ / ‖x0‖` on the record grid, keyed by
/// the elapsed time rounded to `1e-9`.
pub fn normalized_envelope(runs: &[Trajectory], selector: &NormSelector) -> Vec<(f64, f64)> {
    let mut bins: BTreeMap<i64, f64> = BTreeMap::new();
    for traj in runs {
        let x0 = traj.state_norm(0);
        if x0 == 0.0 {
            continue;
        }
        for i in 0..traj.len() {
            let tau = traj.times[i] - traj.t0();
            let key = (tau * 1e9).round() as i64;
            let v = selector.eval(traj, i) / x0;
            let e = bins.entry(key).or_insert(0.0);
            *e = e.max(v);
        }
    }
    bins.into_iter().map(|(k, v)| (k as f64 * 1e-9, v)).collect()
}

/// Envelope values below this fraction of `E(0)` count as zero in the fit.
pub const ZERO_FLOOR: f64 = 1e-12;

/// Fit `σ(s, τ) = c s exp(-λτ)`.
///
/// `λ` is minus the least-squares slope of `ln E(τ)` over the tail half of
/// the horizon, where `E` is the normalized envelope. If fewer than two tail
/// points exceed `ZERO_FLOOR · E(0)` (trajectories reach zero), `λ` is the smallest
/// `-ln(E(τ)/E(0))/τ` over positive `E(τ)`. `c` is the smallest constant for
/// which the envelope dominates every record.
pub fn fit_kl_envelope(runs: &[Trajectory], selector: NormSelector) -> Result<KlEnvelope, IssError> {
    for (index, traj) in runs.iter().enumerate() {
        if traj.u.iter().any(|v| *v != 0.0) {
            return Err(IssError::NonZeroInput { index });
        }
    }
    let env = normalized_envelope(runs, &selector);
    if env.is_empty() {
        return Err(IssError::EmptyEnsemble);
    }
    let horizon = env.last().map_or(0.0, |e| e.0);
    // rounding residue of trajectories that reach zero is not decay
    let floor = ZERO_FLOOR * env[0].1;
    let tail: Vec<(f64, f64)> = env.iter().filter(|(t, v)| *t >= 0.5 * horizon && *v > floor).map(|(t, v)| (*t, v.ln())).collect();
    let rate = if tail.len() >= 2 {
        let slope = ls_slope(&tail);
        if !(slope < 0.0) {
            return Err(IssError::NotDecaying { slope });
        }
        -slope
    } else {
        let e0 = env[0].1;
        let rate = env
            .iter()
            .filter(|(t, v)| *t > 0.0 && *v > floor)
            .map(|(t, v)| -(v / e0).ln() / t)
            .fold(f64::INFINITY, f64::min);
        if !rate.is_finite() {
            // every trajectory is zero right after the start
            1.0
        } else if rate <= 0.0 {
            return Err(IssError::NotDecaying { slope: -rate });
        } else {
            rate
        }
    };
    let mut c: f64 = 0.0;
    for traj in runs {
        let x0 = traj.state_norm(0);
        if x0 == 0.0 {
            continue;
        }
        for i in 0..traj.len() {
            let tau = traj.times[i] - traj.t0();
            c = c.max(selector.eval(traj, i) / (x0 * (-rate * tau).exp()));
        }
    }
    if c == 0.0 {
        return Err(IssError::EmptyEnsemble);
    }
    Ok(KlEnvelope::linear(c, rate)?)
}

fn ls_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(t, y)| (t - mt) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(t, _)| (t - mt) * (t - mt)).sum();
    sxy / sxx
}

/// Which form of the stability estimate is claimed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimateMode {
    #[serde(rename = "WIOS")]
    Wios,
    #[serde(rename = "UWIOS")]
    Uwios,
    #[serde(rename = "IOS")]
    Ios,
    #[serde(rename = "UIOS")]
    Uios,
    #[serde(rename = "WISS")]
    Wiss,
    #[serde(rename = "UWISS")]
    Uwiss,
    #[serde(rename = "ISS")]
    Iss,
    #[serde(rename = "UISS")]
    Uiss,
}

impl EstimateMode {
    pub fn uniform(self) -> bool {
        matches!(self, Self::Uwios | Self::Uios | Self::Uwiss | Self::Uiss)
    }

    pub fn weighted(self) -> bool {
        matches!(self, Self::Wios | Self::Uwios | Self::Wiss | Self::Uwiss)
    }
}

/// How the transient and input terms are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateForm {
    #[default]
    Max,
    Sum,
}

/// `‖y(t)‖ <= max{σ(β(t0)‖x0‖, t - t0), sup γ(δ(τ)‖u(τ)‖)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EstimateData")]
pub struct IssEstimate {
    pub sigma: KlEnvelope,
    pub beta: TimeWeight,
    pub gamma: GainFn,
    pub delta: TimeWeight,
    pub mode: EstimateMode,
    pub form: EstimateForm,
}

#[derive(Deserialize)]
struct EstimateData {
    sigma: KlEnvelope,
    #[serde(default = "TimeWeight::one")]
    beta: TimeWeight,
    #[serde(default = "GainFn::zero")]
    gamma: GainFn,
    #[serde(default = "TimeWeight::one")]
    delta: TimeWeight,
    #[serde(default = "default_mode")]
    mode: EstimateMode,
    #[serde(default)]
    form: EstimateForm,
}

fn default_mode() -> EstimateMode {
    EstimateMode::Wios
}

impl TryFrom<EstimateData> for IssEstimate {
    type Error = IssError;
    fn try_from(d: EstimateData) -> Result<Self, IssError> {
        IssEstimate::new(d.sigma, d.beta, d.gamma, d.delta, d.mode).map(|e| e.with_form(d.form))
    }
}

impl IssEstimate {
    /// Uniform modes need `β ≡ 1`; unweighted modes need `δ ≡ 1`.
    pub fn new(sigma: KlEnvelope, beta: TimeWeight, gamma: GainFn, delta: TimeWeight, mode: EstimateMode) -> Result<Self, IssError> {
        beta.validate()?;
        delta.validate()?;
        gamma.validate()?;
        if mode.uniform() && !beta.is_unit() {
            return Err(IssError::InvalidEstimate(format!("{mode:?} needs beta = 1")));
        }
        if !mode.weighted() && !delta.is_unit() {
            return Err(IssError::InvalidEstimate(format!("{mode:?} needs delta = 1")));
        }
        Ok(Self { sigma, beta, gamma, delta, mode, form: EstimateForm::Max })
    }

    /// Uniform estimate with zero gain.
    pub fn uniform(sigma: KlEnvelope) -> Self {
        Self::new(sigma, TimeWeight::one(), GainFn::zero(), TimeWeight::one(), EstimateMode::Uios).expect("unit weights")
    }

    pub fn with_gain(mut self, gamma: GainFn) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_form(mut self, form: EstimateForm) -> Self {
        self.form = form;
        self
    }

    fn bound(&self, transient: f64, input: f64) -> f64 {
        match self.form {
            EstimateForm::Max => transient.max(input),
            EstimateForm::Sum => transient + input,
        }
    }
}

/// Running sup of `γ(δ(τ)‖u(τ)‖)` over the records of one trajectory.
fn input_terms(traj: &Trajectory, gamma: &GainFn, delta: &TimeWeight) -> Result<Vec<f64>, GainError> {
    let mut sup: f64 = 0.0;
    (0..traj.len())
        .map(|i| {
            let v = gamma.eval(delta.eval(traj.times[i]) * norm(traj.input_u(i)))?;
            sup = sup.max(v);
            Ok(sup)
        })
        .collect()
}

/// Worst residual `‖y(t)‖ - bound(t) - tolerance` over every record of every
/// run. Witness: run index, `t`, `t0`.
pub fn iss_probe(runs: &[Trajectory], estimate: &IssEstimate, selector: NormSelector, tolerance: f64) -> Result<Certificate, IssError> {
    let mut tracker = Tracker::new("estimate");
    let mut records = 0;
    for (k, traj) in runs.iter().enumerate() {
        let t0 = traj.t0();
        let x0 = traj.state_norm(0);
        let s = estimate.beta.eval(t0) * x0;
        let inputs = input_terms(traj, &estimate.gamma, &estimate.delta)?;
        for i in 0..traj.len() {
            let t = traj.times[i];
            let bound = estimate.bound(estimate.sigma.eval(s, t - t0)?, inputs[i]);
            tracker.observe(selector.eval(traj, i) - bound - tolerance, &[("run", k as f64), ("t", t), ("t0", t0)]);
            records += 1;
        }
    }
    let grid = format!("{} runs, {records} records, tolerance {tolerance:e}", runs.len());
    Ok(Certificate::from_components("iss_estimate", grid, vec![tracker.finish()]))
}

/// Smallest `K` for which `γ(s) = K s` makes the estimate hold on every
/// record, given the transient envelope. Records already dominated by the
/// envelope do not constrain `K`.
pub fn fit_linear_gain(runs: &[Trajectory], estimate: &IssEstimate, selector: &NormSelector) -> Result<f64, IssError> {
    let mut k: f64 = 0.0;
    for traj in runs {
        let t0 = traj.t0();
        let s = estimate.beta.eval(t0) * traj.state_norm(0);
        let mut sup_u: f64 = 0.0;
        for i in 0..traj.len() {
            let t = traj.times[i];
            sup_u = sup_u.max(estimate.delta.eval(t) * norm(traj.input_u(i)));
            let y = selector.eval(traj, i);
            if y <= estimate.sigma.eval(s, t - t0)? {
                continue;
            }
            if sup_u == 0.0 {
                return Err(IssError::GainUnfittable { t, output: y });
            }
            k = k.max(y / sup_u);
        }
    }
    Ok(k)
}

/// `a(h)` values, one per requested `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub h: Vec<f64>,
    pub a: Vec<f64>,
}

impl ConvergenceTable {
    /// `a(h_last) / a(h_first)` (`0` when both vanish).
    pub fn ratio(&self) -> f64 {
        match (self.a.first(), self.a.last()) {
            (Some(&a0), Some(&a1)) if a0 > 0.0 => a1 / a0,
            (Some(_), Some(&a1)) if a1 == 0.0 => 0.0,
            _ => f64::INFINITY,
        }
    }

    /// Whether `a(h_last) <= fraction * a(h_first)`.
    pub fn converged(&self, fraction: f64) -> bool {
        match (self.a.first(), self.a.last()) {
            (Some(&a0), Some(&a1)) => a1 <= fraction * a0,
            _ => false,
        }
    }

    pub fn to_csv(&self) -> String {
        csv_table(&["h", "a"], self.h.iter().zip(&self.a).map(|(h, a)| vec![*h, *a]))
    }
}

/// `a(h) = max over runs of [V(t0 + h) - sup_{[t0, t0+h]} γ(δ(τ)‖u(τ)‖)]`,
/// clamped below at zero. Runs must have records at `t0 + h`
/// (see [`run_ensemble`]).
pub fn p3_convergence_probe(
    runs: &[Trajectory],
    gamma: &GainFn,
    delta: &TimeWeight,
    h_grid: &[f64],
    selector: &NormSelector,
) -> Result<ConvergenceTable, IssError> {
    let mut a = vec![0.0_f64; h_grid.len()];
    for (index, traj) in runs.iter().enumerate() {
        let inputs = input_terms(traj, gamma, delta)?;
        for (slot, &h) in a.iter_mut().zip(h_grid) {
            let t = traj.t0() + h;
            let i = traj.index_of(t).ok_or(IssError::MissingRecord { index, t })?;
            *slot = slot.max(selector.eval(traj, i) - inputs[i]);
        }
    }
    Ok(ConvergenceTable { h: h_grid.to_vec(), a })
}

/// Candidate functions for the forward-completeness bound
/// `β(t)‖x(t)‖ <= max{μ(t - t0), c(t0), a(‖x0‖), sup p(‖u(τ)‖)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfcCandidate {
    pub mu: TimeWeight,
    pub c: TimeWeight,
    pub a: GainFn,
    pub p: GainFn,
}

pub fn rfc_bound_probe(runs: &[Trajectory], beta: &TimeWeight, cand: &RfcCandidate) -> Result<Certificate, IssError> {
    let mut tracker = Tracker::new("rfc");
    for (k, traj) in runs.iter().enumerate() {
        let t0 = traj.t0();
        let a = cand.a.eval(traj.state_norm(0))?;
        let c = cand.c.eval(t0);
        let mut sup_p: f64 = 0.0;
        for i in 0..traj.len() {
            let t = traj.times[i];
            sup_p = sup_p.max(cand.p.eval(norm(traj.input_u(i)))?);
            let rhs = cand.mu.eval(t - t0).max(c).max(a).max(sup_p);
            tracker.observe(beta.eval(t) * traj.state_norm(i) - rhs, &[("run", k as f64), ("t", t), ("t0", t0)]);
        }
    }
    Ok(Certificate::from_components("rfc_bound", format!("{} runs", runs.len()), vec![tracker.finish()]))
}

/// Two-column CSV `tau,envelope` of the normalized envelope.
pub fn envelope_csv(runs: &[Trajectory], selector: &NormSelector) -> String {
    csv_table(&["tau", "envelope"], normalized_envelope(runs, selector).into_iter().map(|(t, v)| vec![t, v]))
}
