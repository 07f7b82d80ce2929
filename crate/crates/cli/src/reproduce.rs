//! Canned end-to-end runs of the bundled examples. Each writes its
//! artifacts plus `summary.json` and passes only if every check passes.

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};
use smallgain::design::{design_pipeline, LinearPlant, PipelineGains, PipelineRequest, StabilityClass};
use smallgain::gain::{GainFn, TimeWeight};
use smallgain::iss::{
    envelope_csv, fit_kl_envelope, fit_linear_gain, iss_probe, p3_convergence_probe, run_ensemble, EnsembleSpec,
    IssEstimate, NormSelector,
};
use smallgain::linalg::Mat;
use smallgain::report::csv_table;
use smallgain::sim::rng::{derive_seed, SplitMix64};
use smallgain::sim::{
    restart_mismatch, simulate, weak_semigroup_check, Inputs, Scenario, SamplingSet, Signal, SimOptions, SystemDef,
    Trajectory,
};
use smallgain::systems::*;

use crate::{OutputDir, Outcome, RunConfig};

pub const NAMES: [&str; 4] = ["example-2.1", "example-2.2", "example-3.7", "example-4.1"];

pub const DEFAULT_SEED: u64 = 1;

/// One asserted threshold: passes iff `value <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, passed: value <= threshold }
    }

    /// Pass/fail fact carried as `0` or `1` against threshold `0`.
    pub fn holds(name: &str, ok: bool) -> Self {
        Self { name: name.into(), value: if ok { 0.0 } else { 1.0 }, threshold: 0.0, passed: ok }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub example: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl Summary {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub fn reproduce(name: &str, rc: &RunConfig, out: &mut OutputDir) -> Result<Outcome> {
    let seed = rc.seed.unwrap_or(DEFAULT_SEED);
    let checks = run_example(name, seed, out)?;
    let passed = checks.iter().all(|c| c.passed);
    for c in &checks {
        eprintln!("{} {}: {:e} (threshold {:e})", if c.passed { "ok  " } else { "FAIL" }, c.name, c.value, c.threshold);
    }
    out.write_json("summary.json", &Summary { example: name.into(), seed, checks, passed })?;
    Ok(if passed { Outcome::Ok } else { Outcome::CheckFailed })
}

/// Run the named example, writing artifacts into `out`.
pub fn run_example(name: &str, seed: u64, out: &mut OutputDir) -> Result<Vec<Check>> {
    match name {
        "example-2.1" => scalar_sampled(seed, out),
        "example-2.2" => impulsive_fixed(seed, out),
        "example-3.7" => impulsive_cascade(seed, out),
        "example-4.1" => planar_plant(seed, out),
        other => bail!("unknown example {other:?}; expected one of {}", NAMES.join(", ")),
    }
}

/// Worst deviation from the oracle over `count` seeded `(t0, x0)` with
/// `t0` in `[0, 10]` and `x0` in `[-5, 5]^n`. Rows: `t0, x0..., error`.
fn oracle_sweep(sys: &SystemDef, oracle: &AnalyticOracle, n: usize, count: usize, seed: u64) -> Result<(f64, Vec<Vec<f64>>)> {
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    for i in 0..count {
        let mut rng = SplitMix64::new(derive_seed(seed, i as u64));
        let t0 = rng.uniform(0.0, 10.0);
        let x0: Vec<f64> = (0..n).map(|_| rng.uniform(-5.0, 5.0)).collect();
        let traj = simulate(sys, t0, &x0, &Inputs::none(), 5.0, &SimOptions::default())?;
        let mut err: f64 = if traj.completed() { 0.0 } else { f64::INFINITY };
        for k in 0..traj.len() {
            let exact = oracle.eval(traj.times[k], t0, &x0);
            for (a, b) in traj.state(k).iter().zip(&exact) {
                err = err.max((a - b).abs());
            }
        }
        worst = worst.max(err);
        let mut row = vec![t0];
        row.extend(&x0);
        row.push(err);
        rows.push(row);
    }
    Ok((worst, rows))
}

fn oracle_header(n: usize) -> Vec<String> {
    let mut h = vec!["t0".to_string()];
    h.extend((0..n).map(|i| format!("x0_{i}")));
    h.push("max_error".into());
    h
}

/// Largest restart deviation over the realized sampling times of `traj`,
/// or over `fallback` times when every time is a sampling time.
fn semigroup_sweep(sc: &Scenario, traj: &Trajectory, fallback: &[f64]) -> Result<f64> {
    let times: Vec<f64> = match &traj.sampling {
        SamplingSet::Times { times } => times.clone(),
        SamplingSet::Continuum => fallback.to_vec(),
    };
    let mut worst: f64 = 0.0;
    for tau in times {
        worst = worst.max(weak_semigroup_check(sc, traj, tau)?);
    }
    Ok(worst)
}

fn scalar_sampled(seed: u64, out: &mut OutputDir) -> Result<Vec<Check>> {
    let (sys, oracle) = make_scalar_sampled_2_1();
    let mut checks = Vec::new();
    let sc = Scenario::new(sys.clone(), 0.0, vec![2.0], Inputs::none(), 3.0);
    let traj = sc.run()?;
    out.write_text("trajectory.csv", &traj.to_csv())?;
    let half = traj.state_at(0.5).map_or(f64::INFINITY, |x| (x[0] - 1.0).abs());
    checks.push(Check::at_most("value_at_half", half, 1e-12));

    let (worst, rows) = oracle_sweep(&sys, &oracle, 1, 100, seed)?;
    out.write_text("oracle.csv", &csv_table(&oracle_header(1), rows))?;
    checks.push(Check::at_most("oracle_error", worst, 1e-9));

    checks.push(Check::at_most("restart_at_sampling_times", semigroup_sweep(&sc, &traj, &[])?, 1e-9));
    let mismatch = restart_mismatch(&sc, 0.5, 1.0)?;
    checks.push(Check::at_most("restart_between_samples", (mismatch - 0.5).abs(), 1e-9));
    Ok(checks)
}

fn impulsive_fixed(seed: u64, out: &mut OutputDir) -> Result<Vec<Check>> {
    let (sys, oracle) = make_impulsive_fixed_2_2();
    let mut checks = Vec::new();
    let sc = Scenario::new(sys.clone(), 0.5, vec![1.0, 2.0], Inputs::none(), 4.5);
    let traj = sc.run()?;
    out.write_text("trajectory.csv", &traj.to_csv())?;

    let (worst, mut rows) = oracle_sweep(&sys, &oracle, 2, 100, seed)?;
    // both branches: on and off the impulse times
    for (t0, x0) in [(0.0, [2.0, 2.0]), (0.5, [1.0, 2.0])] {
        let (w, r) = oracle_sweep_at(&sys, &oracle, t0, &x0)?;
        rows.push(r);
        checks.push(Check::at_most(&format!("oracle_error_t0_{t0}"), w, 1e-9));
    }
    out.write_text("oracle.csv", &csv_table(&oracle_header(2), rows))?;
    checks.push(Check::at_most("oracle_error", worst, 1e-9));

    let restarts = [0.5, 0.75, 1.0, 1.5, 2.0, 2.25, 3.0, 4.0];
    checks.push(Check::at_most("restart_at_sampling_times", semigroup_sweep(&sc, &traj, &restarts)?, 1e-9));
    Ok(checks)
}

fn oracle_sweep_at(sys: &SystemDef, oracle: &AnalyticOracle, t0: f64, x0: &[f64]) -> Result<(f64, Vec<f64>)> {
    let traj = simulate(sys, t0, x0, &Inputs::none(), 5.0, &SimOptions::default())?;
    let mut err: f64 = 0.0;
    for k in 0..traj.len() {
        for (a, b) in traj.state(k).iter().zip(&oracle.eval(traj.times[k], t0, x0)) {
            err = err.max((a - b).abs());
        }
    }
    let mut row = vec![t0];
    row.extend(x0);
    row.push(err);
    Ok((err, row))
}

pub fn cascade_ensemble(seed: u64) -> EnsembleSpec {
    EnsembleSpec { count: 20, radius: 1.0, horizon: 30.0, seed, ..EnsembleSpec::default() }
}

fn impulsive_cascade(seed: u64, out: &mut OutputDir) -> Result<Vec<Check>> {
    let spec = ImpulsiveCascadeSpec::default();
    let mut checks = Vec::new();
    let x_grid = default_x_grid(spec.x_dim());
    let windows = default_window_grid(spec.period);
    let cert = check_conditions_3_50(&spec, &x_grid, &windows)?;
    out.write_json("conditions.json", &cert)?;
    checks.push(Check::at_most("conditions_pass", cert.worst_residual, 0.0));
    let faster = ImpulsiveCascadeSpec { lambda: 0.5, ..spec.clone() };
    let cert_fast = check_conditions_3_50(&faster, &x_grid, &windows)?;
    out.write_json("conditions_fast_decay.json", &cert_fast)?;
    checks.push(Check::holds("conditions_fail_at_faster_decay", !cert_fast.passed()));

    let sys = make_cascade_3_49(&spec)?;
    let ens = cascade_ensemble(seed);
    let runs = run_ensemble(&sys, &ens, &[ens.horizon])?;
    out.write_text("envelope.csv", &envelope_csv(&runs, &NormSelector::State))?;
    let finals: Vec<Vec<f64>> = runs.iter().map(|r| vec![r.t0(), r.state_norm(0), r.state_norm(r.len() - 1)]).collect();
    let sup_final = finals.iter().map(|r| r[2]).fold(0.0, f64::max);
    out.write_text("final_norms.csv", &csv_table(&["t0", "norm_x0", "norm_final"], finals))?;
    checks.push(Check::holds("ensemble_completed", runs.iter().all(Trajectory::completed)));
    checks.push(Check::at_most("sup_norm_at_30", sup_final, 1e-2));

    let sc = Scenario::new(sys, 0.0, vec![0.6, -0.8], Inputs::none(), 6.0);
    let traj = sc.run()?;
    out.write_text("trajectory.csv", &traj.to_csv())?;
    let restarts = [0.0, 0.5, 1.0, 1.25, 2.0, 3.0, 4.5, 5.0];
    checks.push(Check::at_most("restart_at_sampling_times", semigroup_sweep(&sc, &traj, &restarts)?, 1e-9));
    Ok(checks)
}

/// Pipeline inputs for the planar plant: `A = 0`, `B = 1`, `k = -1`,
/// `P = 1`, `μ = 1/4`, `R = 1` and gains `γ1(s) = sqrt(s / (1 - ε))`,
/// `γ2(s) = δ s²`, `ρ(s) = L s`.
pub fn planar_request(spec: &PlanarPlantSpec) -> PipelineRequest {
    PipelineRequest {
        plant: LinearPlant::new(Mat::from_rows(&[vec![0.0]]).expect("1x1"), Mat::column(&[1.0])).expect("scalar plant"),
        gains: PipelineGains {
            gamma1: GainFn::sqrt_scale(1.0 - spec.epsilon),
            gamma1_u: GainFn::zero(),
            beta: TimeWeight::one(),
            delta1_u: TimeWeight::one(),
            gamma2: GainFn::power(spec.delta, 2.0),
            gamma2_u: GainFn::identity(),
            delta2_u: TimeWeight::one(),
        },
        rho: GainFn::scale(spec.l),
        reserve: 1.0,
        mu: 0.25,
        margin: 1.0,
        k: Some(vec![-1.0]),
        p: Some(Mat::identity(1)),
    }
}

/// Ensemble for the closed loop: `count` states in the unit ball, `d`
/// piecewise constant and uniform in `[-δ, δ]` on a 0.1 mesh, `w = 0`.
pub fn planar_ensemble(spec: &PlanarPlantSpec, count: usize, horizon: f64, u: Signal, seed: u64) -> EnsembleSpec {
    EnsembleSpec {
        count,
        radius: 1.0,
        horizon,
        inputs: Inputs::new(u, Signal::random(1, -spec.delta, spec.delta, 0.1, 0), Signal::zeros(1)),
        seed,
        ..EnsembleSpec::default()
    }
}

pub const PLANAR_HORIZON: f64 = 30.0;

/// Step input `u ≡ 0.1` from `t = 10` on.
pub fn planar_step() -> Signal {
    Signal::zeros(1).altered_after(10.0, vec![0.1])
}

fn planar_plant(seed: u64, out: &mut OutputDir) -> Result<Vec<Check>> {
    let spec = PlanarPlantSpec::default();
    let mut checks = Vec::new();
    let outcome = design_pipeline(&planar_request(&spec))?;
    out.write_json("certificate.json", &outcome.certificate)?;
    out.write_json("design.json", &outcome)?;
    checks.push(Check::at_most("pipeline_certificate", outcome.certificate.worst_residual, 0.0));
    let r = outcome.design.as_ref().and_then(|d| d.r).unwrap_or(f64::INFINITY);
    checks.push(Check::at_most("sampling_period_error", (r - 1.0 / 7.0).abs(), 1e-12));
    let matrix = outcome.certificate.components.iter().find(|c| c.name.ends_with("/matrix"));
    let lambda_max = matrix.and_then(|c| c.witness.get("lambda_max").copied()).unwrap_or(f64::INFINITY);
    checks.push(Check::at_most("design_matrix_residual", lambda_max, 1e-12));
    checks.push(Check::holds("uniform_iss_class", outcome.stability == Some(StabilityClass::Uiss)));

    let sys = make_planar_4_13(&PlanarPlantSpec { r, ..spec.clone() })?;
    let h: Vec<f64> = (0..=30).map(f64::from).collect();
    let free = run_ensemble(&sys, &planar_ensemble(&spec, 100, PLANAR_HORIZON, Signal::zeros(1), seed), &h)?;
    let table = p3_convergence_probe(&free, &GainFn::zero(), &TimeWeight::one(), &h, &NormSelector::State)?;
    out.write_text("convergence.csv", &table.to_csv())?;
    out.write_text("envelope.csv", &envelope_csv(&free, &NormSelector::State))?;
    checks.push(Check::at_most("convergence_ratio_at_30", table.ratio(), 0.05));

    let sigma = fit_kl_envelope(&free, NormSelector::State)?;
    let forced = run_ensemble(&sys, &planar_ensemble(&spec, 100, PLANAR_HORIZON, planar_step(), seed), &[])?;
    let estimate = IssEstimate::uniform(sigma);
    let k = fit_linear_gain(&forced, &estimate, &NormSelector::State)?;
    let estimate = estimate.with_gain(GainFn::scale(k));
    let cert = iss_probe(&forced, &estimate, NormSelector::State, 1e-9)?;
    checks.push(Check::at_most("fitted_rate_positive", -estimate.sigma.rate, 0.0));
    checks.push(Check::at_most("estimate_dominance", cert.worst_residual, 0.0));
    out.write_json("probe.json", &ProbeSummary { estimate, gain_slope: k, certificate: cert })?;

    let sc = Scenario::new(sys, 0.0, vec![0.8, -0.6], planar_ensemble(&spec, 1, 6.0, Signal::zeros(1), seed).plans(2)[0].inputs.clone(), 6.0);
    let traj = sc.run()?;
    out.write_text("trajectory.csv", &traj.to_csv())?;
    checks.push(Check::at_most("restart_at_sampling_times", semigroup_sweep(&sc, &traj, &[])?, 1e-9));
    Ok(checks)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub estimate: IssEstimate,
    pub gain_slope: f64,
    pub certificate: smallgain::gain::Certificate,
}
