use anyhow::Result;
use serde::{Deserialize, Serialize};
use smallgain::catalog::SystemSpec;
use smallgain::design::{design_pipeline, PipelineRequest};
use smallgain::gain::grid::GridSpec;
use smallgain::gain::{
    a3_check, check_class, linear_small_gain_check, small_gain_h3_check, Certificate, GainClass, GainFn, TimeWeight,
};
use smallgain::iss::{
    envelope_csv, fit_kl_envelope, fit_linear_gain, iss_probe, p3_convergence_probe, run_ensemble, ConvergenceTable,
    EnsembleSpec, IssEstimate, NormSelector,
};
use smallgain::sim::{self, Inputs, SimOptions, Status};

use crate::{OutputDir, Outcome, RunConfig};

fn verdict(cert: &Certificate) -> Outcome {
    if cert.passed() {
        Outcome::Ok
    } else {
        Outcome::CheckFailed
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub system: SystemSpec,
    #[serde(default)]
    pub t0: f64,
    pub x0: Vec<f64>,
    pub horizon: f64,
    #[serde(default = "Inputs::none")]
    pub inputs: Inputs,
    #[serde(default)]
    pub options: SimOptions,
}

/// Writes `trajectory.csv` and `trajectory.json`; exit 2 on blowup.
pub fn simulate(rc: &RunConfig, out: &mut OutputDir) -> Result<Outcome> {
    let cfg: SimulateConfig = rc.parse()?;
    let sys = cfg.system.build()?;
    let inputs = match rc.seed {
        Some(seed) => cfg.inputs.with_seed(seed),
        None => cfg.inputs,
    };
    let traj = sim::simulate(&sys, cfg.t0, &cfg.x0, &inputs, cfg.horizon, &cfg.options)?;
    out.write_text("trajectory.csv", &traj.to_csv())?;
    out.write_json("trajectory.json", &traj)?;
    Ok(match traj.status {
        Status::Completed => Outcome::Ok,
        Status::Blowup { t, norm } => {
            eprintln!("blowup at t = {t} (norm {norm:e})");
            Outcome::Blowup
        }
        Status::Fault { t, ref message } => {
            eprintln!("fault at t = {t}: {message}");
            Outcome::Malformed
        }
    })
}

/// Writes `design.json` and `certificate.json`. Exit 3 when the small-gain
/// inequality fails, 5 when a gain is not of class N, 4 when no design
/// exists.
pub fn design(rc: &RunConfig, out: &mut OutputDir) -> Result<Outcome> {
    let req: PipelineRequest = rc.parse()?;
    let outcome = design_pipeline(&req)?;
    out.write_json("certificate.json", &outcome.certificate)?;
    let a3_failed = outcome.certificate.components.iter().any(|c| c.name.starts_with("a3/") && c.worst_residual > 0.0);
    if a3_failed {
        report_witness(&outcome.certificate);
        return Ok(Outcome::SmallGainFailed);
    }
    if !outcome.certificate.passed() {
        report_witness(&outcome.certificate);
        return Ok(if outcome.design.is_some() { Outcome::Infeasible } else { Outcome::CheckFailed });
    }
    out.write_json("design.json", &outcome)?;
    Ok(Outcome::Ok)
}

fn report_witness(cert: &Certificate) {
    if let Some(c) = cert.components.iter().max_by(|a, b| a.worst_residual.total_cmp(&b.worst_residual)) {
        eprintln!("{} fails: residual {:e} at {:?}", c.name, c.worst_residual, c.witness);
    }
}

/// The certificate checks reachable from `check`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckConfig {
    H3 {
        gamma1: GainFn,
        gamma2: GainFn,
        #[serde(default = "TimeWeight::one")]
        delta1: TimeWeight,
        #[serde(default = "TimeWeight::one")]
        delta2: TimeWeight,
        rho: GainFn,
        /// Defaults to the largest `δ1` on the `t` grid.
        #[serde(default)]
        m_bound: Option<f64>,
        #[serde(default)]
        grid: Option<GridSpec>,
    },
    Linear {
        k1: f64,
        k2: f64,
        #[serde(default = "TimeWeight::one")]
        delta1: TimeWeight,
        #[serde(default = "TimeWeight::one")]
        delta2: TimeWeight,
        #[serde(default)]
        grid: Option<GridSpec>,
    },
    A3 {
        gamma1: GainFn,
        gamma2: GainFn,
        rho: GainFn,
        #[serde(rename = "R", default = "one")]
        reserve: f64,
        #[serde(default)]
        grid: Option<GridSpec>,
    },
    Class {
        gain: GainFn,
        class: GainClass,
        #[serde(default)]
        grid: Option<GridSpec>,
    },
}

fn one() -> f64 {
    1.0
}

/// Writes `certificate.json`; exit 0 on pass, 5 on fail.
pub fn check(rc: &RunConfig, out: &mut OutputDir) -> Result<Outcome> {
    let cfg: CheckConfig = rc.parse()?;
    // --grid wins over the grid in the file
    let pick = |g: &Option<GridSpec>| rc.grid.clone().or_else(|| g.clone()).unwrap_or_default();
    let cert = match &cfg {
        CheckConfig::H3 { gamma1, gamma2, delta1, delta2, rho, m_bound, grid } => {
            let grid = pick(grid);
            let t = grid.t.points();
            let m = m_bound.unwrap_or_else(|| t.iter().map(|&t| delta1.eval(t)).fold(0.0, f64::max));
            small_gain_h3_check(gamma1, gamma2, delta1, delta2, rho, m, &grid.s.points(), &t)?
        }
        CheckConfig::Linear { k1, k2, delta1, delta2, grid } => {
            linear_small_gain_check(*k1, *k2, delta1, delta2, &pick(grid).t.points())?
        }
        CheckConfig::A3 { gamma1, gamma2, rho, reserve, grid } => a3_check(gamma1, gamma2, rho, *reserve, &pick(grid).s.points())?,
        CheckConfig::Class { gain, class, grid } => check_class(gain, *class, &pick(grid).s.points())?,
    };
    out.write_json("certificate.json", &cert)?;
    if !cert.passed() {
        report_witness(&cert);
    }
    Ok(verdict(&cert))
}

/// Relative times at which `a(h)` is tabulated.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub h: Vec<f64>,
    #[serde(default = "GainFn::zero")]
    pub gamma: GainFn,
    #[serde(default = "TimeWeight::one")]
    pub delta: TimeWeight,
    /// Required `a(h_last) / a(h_first)`; informational when absent.
    #[serde(default)]
    pub fraction: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub system: SystemSpec,
    #[serde(default)]
    pub ensemble: EnsembleSpec,
    #[serde(default = "state_norm")]
    pub selector: NormSelector,
    /// Fitted from the ensemble when absent (inputs must then be zero).
    #[serde(default)]
    pub estimate: Option<IssEstimate>,
    /// Fit `γ(s) = K s` against the ensemble.
    #[serde(default)]
    pub fit_gain: bool,
    #[serde(default)]
    pub convergence: Option<ConvergenceConfig>,
}

fn state_norm() -> NormSelector {
    NormSelector::State
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeReport {
    pub estimate: IssEstimate,
    pub fitted: bool,
    pub gain_slope: Option<f64>,
    pub certificate: Certificate,
    pub convergence: Option<ConvergenceTable>,
}

pub const DEFAULT_PROBE_TOLERANCE: f64 = 1e-9;

/// Writes `report.json`, `envelope.csv` and, when requested,
/// `convergence.csv`. Exit 0 on pass, 5 on fail, 6 when the fit finds no
/// decay.
pub fn probe(rc: &RunConfig, out: &mut OutputDir) -> Result<Outcome> {
    let mut cfg: ProbeConfig = rc.parse()?;
    if let Some(seed) = rc.seed {
        cfg.ensemble.seed = seed;
    }
    let sys = cfg.system.build()?;
    let h = cfg.convergence.as_ref().map(|c| c.h.clone()).unwrap_or_default();
    let runs = run_ensemble(&sys, &cfg.ensemble, &h)?;
    if let Some(i) = runs.iter().position(|r| !r.completed()) {
        eprintln!("run {i} stopped early: {:?}", runs[i].status);
        return Ok(Outcome::Blowup);
    }
    out.write_text("envelope.csv", &envelope_csv(&runs, &cfg.selector))?;
    let (mut estimate, fitted) = match cfg.estimate.clone() {
        Some(e) => (e, false),
        None => (IssEstimate::uniform(fit_kl_envelope(&runs, cfg.selector.clone())?), true),
    };
    let mut gain_slope = None;
    if cfg.fit_gain {
        let k = fit_linear_gain(&runs, &estimate, &cfg.selector)?;
        gain_slope = Some(k);
        estimate = estimate.with_gain(GainFn::scale(k));
    }
    let tolerance = rc.tolerance.unwrap_or(DEFAULT_PROBE_TOLERANCE);
    let certificate = iss_probe(&runs, &estimate, cfg.selector.clone(), tolerance)?;
    let mut converged = true;
    let convergence = match &cfg.convergence {
        Some(c) => {
            let table = p3_convergence_probe(&runs, &c.gamma, &c.delta, &c.h, &cfg.selector)?;
            out.write_text("convergence.csv", &table.to_csv())?;
            if let Some(f) = c.fraction {
                converged = table.converged(f);
            }
            Some(table)
        }
        None => None,
    };
    let passed = certificate.passed() && converged;
    if !certificate.passed() {
        report_witness(&certificate);
    }
    out.write_json("report.json", &ProbeReport { estimate, fitted, gain_slope, certificate, convergence })?;
    Ok(if passed { Outcome::Ok } else { Outcome::CheckFailed })
}
