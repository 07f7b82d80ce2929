use super::engine::{simulate, SimOptions};
use super::signal::Inputs;
use super::system::SystemDef;
use super::trajectory::{norm, Trajectory};
use super::SimError;

/// Everything needed to replay a run.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub system: SystemDef,
    pub t0: f64,
    pub x0: Vec<f64>,
    pub inputs: Inputs,
    pub horizon: f64,
    pub options: SimOptions,
}

impl Scenario {
    pub fn new(system: SystemDef, t0: f64, x0: Vec<f64>, inputs: Inputs, horizon: f64) -> Self {
        Self { system, t0, x0, inputs, horizon, options: SimOptions::default() }
    }

    pub fn with_options(mut self, options: SimOptions) -> Self {
        self.options = options;
        self
    }

    pub fn end(&self) -> f64 {
        self.t0 + self.horizon
    }

    pub fn run(&self) -> Result<Trajectory, SimError> {
        simulate(&self.system, self.t0, &self.x0, &self.inputs, self.horizon, &self.options)
    }

    /// Same run restarted at `(tau, x_tau)` with the same inputs and end
    /// time.
    pub fn restarted(&self, tau: f64, x_tau: &[f64]) -> Scenario {
        Scenario {
            system: self.system.clone(),
            t0: tau,
            x0: x_tau.to_vec(),
            inputs: self.inputs.clone(),
            horizon: self.end() - tau,
            options: self.options.clone(),
        }
    }
}

/// Largest state deviation over record times shared by both trajectories
/// (at or after `from`, and at or before `until`).
pub fn shared_record_deviation(a: &Trajectory, b: &Trajectory, from: f64, until: f64) -> (f64, usize) {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let tol = |t: f64| 1e-12 * t.abs().max(1.0);
    for (i, &t) in a.times.iter().enumerate() {
        if t < from - tol(from) || t > until + tol(until) {
            continue;
        }
        if let Some(j) = b.index_of(t) {
            let dev: Vec<f64> = a.state(i).iter().zip(b.state(j)).map(|(p, q)| p - q).collect();
            worst = worst.max(norm(&dev));
            count += 1;
        }
    }
    (worst, count)
}

/// Restart the run at a realized sampling time `tau` of `traj` and return
/// the largest deviation from the original over shared record times.
pub fn weak_semigroup_check(scenario: &Scenario, traj: &Trajectory, tau: f64) -> Result<f64, SimError> {
    if !traj.sampling.contains(tau, traj.t0(), traj.end_time()) {
        return Err(SimError::NotASamplingTime(tau));
    }
    let i = traj.index_of(tau).ok_or(SimError::NoRecordAt(tau))?;
    if tau >= scenario.end() - 1e-12 * scenario.end().max(1.0) {
        return Ok(0.0);
    }
    let restarted = scenario.restarted(traj.times[i], traj.state(i)).run()?;
    Ok(shared_record_deviation(traj, &restarted, traj.times[i], f64::INFINITY).0)
}

/// Deviation at `query` between the original run and a fresh run started
/// from `(tau, x(tau))`, for any `tau` (sampling time or not).
pub fn restart_mismatch(scenario: &Scenario, tau: f64, query: f64) -> Result<f64, SimError> {
    if !(tau >= scenario.t0 && query >= tau && query <= scenario.end()) {
        return Err(SimError::InvalidOption(format!(
            "need t0 <= tau <= query <= end, got tau = {tau}, query = {query}"
        )));
    }
    let mut original = scenario.clone();
    original.options.extra_records.extend([tau, query]);
    let traj = original.run()?;
    let x_tau = traj.state_at(tau).ok_or(SimError::NoRecordAt(tau))?.to_vec();
    let x_query = traj.state_at(query).ok_or(SimError::NoRecordAt(query))?.to_vec();
    if query == tau {
        return Ok(0.0);
    }
    let restarted = original.restarted(tau, &x_tau).run()?;
    let y = restarted.state_at(query).ok_or(SimError::NoRecordAt(query))?;
    let dev: Vec<f64> = x_query.iter().zip(y).map(|(a, b)| a - b).collect();
    Ok(norm(&dev))
}

/// Largest state deviation on `[t0, t]` between the original run and a run
/// whose inputs are replaced by `altered` (which must agree up to `t`).
pub fn causality_check(scenario: &Scenario, altered: &Inputs, t: f64) -> Result<f64, SimError> {
    if t <= scenario.t0 {
        return Err(SimError::InvalidOption(format!("truncation time {t} must exceed t0 = {}", scenario.t0)));
    }
    let mut a = scenario.clone();
    a.options.extra_records.push(t);
    let mut b = a.clone();
    b.inputs = altered.clone();
    let (ta, tb) = (a.run()?, b.run()?);
    let (dev, count) = shared_record_deviation(&ta, &tb, scenario.t0, t);
    if count == 0 {
        return Err(SimError::NoRecordAt(t));
    }
    Ok(dev)
}
