use serde::{Deserialize, Serialize};

use super::signal::{Inputs, Signal};
use super::system::{Ctx, Partition, Sample, Source, SystemDef};
use super::trajectory::{norm, Event, SamplingSet, Status, Trajectory, TrajectoryMeta};
use super::SimError;

/// Integration and recording options.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimOptions {
    /// Fixed RK4 step; the last step before any stop is shortened.
    pub h_int: f64,
    /// Spacing of the absolute record grid `k * record_dt`; `None` records
    /// after every integration step.
    pub record_dt: Option<f64>,
    /// State norm beyond which the run stops with [`Status::Blowup`].
    pub blowup: f64,
    /// Additional record times.
    pub extra_records: Vec<f64>,
    /// Cap on integration steps.
    pub max_steps: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { h_int: 1e-3, record_dt: Some(0.01), blowup: 1e9, extra_records: Vec::new(), max_steps: 200_000_000 }
    }
}

fn tol_at(t: f64) -> f64 {
    1e-12 * t.abs().max(1.0)
}

/// Buffers for evaluating outputs, block inputs and vector fields.
pub(crate) struct Evaluator<'a> {
    sys: &'a SystemDef,
    offsets: Vec<usize>,
    y: Vec<Vec<f64>>,
    inputs: Vec<Vec<f64>>,
}

impl<'a> Evaluator<'a> {
    pub(crate) fn new(sys: &'a SystemDef) -> Self {
        Self {
            sys,
            offsets: sys.offsets(),
            y: sys.blocks.iter().map(|b| vec![0.0; b.p]).collect(),
            inputs: sys.blocks.iter().map(|b| vec![0.0; b.m]).collect(),
        }
    }

    fn block_state<'x>(&self, x: &'x [f64], b: usize) -> &'x [f64] {
        &x[self.offsets[b]..self.offsets[b + 1]]
    }

    /// Evaluate block outputs in order (inputs from later blocks read zero),
    /// then resolve every block input from the complete outputs.
    fn resolve(&mut self, t: f64, x: &[f64], u: &[f64]) {
        for b in 0..self.sys.blocks.len() {
            for (k, src) in self.sys.wiring[b].iter().enumerate() {
                self.inputs[b][k] = match *src {
                    Source::External(j) => u[j],
                    Source::Output { block, comp } if block < b => self.y[block][comp],
                    Source::Output { .. } => 0.0,
                };
            }
            let xb = &x[self.offsets[b]..self.offsets[b + 1]];
            (self.sys.blocks[b].output)(t, xb, &self.inputs[b], &mut self.y[b]);
        }
        for b in 0..self.sys.blocks.len() {
            for (k, src) in self.sys.wiring[b].iter().enumerate() {
                self.inputs[b][k] = match *src {
                    Source::External(j) => u[j],
                    Source::Output { block, comp } => self.y[block][comp],
                };
            }
        }
    }

    fn system_output(&self, out: &mut Vec<f64>) {
        out.clear();
        for src in &self.sys.outputs {
            if let Source::Output { block, comp } = *src {
                out.push(self.y[block][comp]);
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn rhs(&mut self, t: f64, x: &[f64], u: &[f64], d: &[f64], w: &[f64], samples: &[Option<Sample>], dx: &mut [f64]) {
        self.resolve(t, x, u);
        for (b, block) in self.sys.blocks.iter().enumerate() {
            let ctx = Ctx {
                t,
                x: self.block_state(x, b),
                u: &self.inputs[b],
                d: &d[..block.dim_d],
                w: &w[..block.dim_w],
                sample: samples[b].as_ref(),
            };
            (block.flow)(&ctx, &mut dx[self.offsets[b]..self.offsets[b + 1]]);
        }
    }

    /// Vector field and jump-map values at the zero state and zero input.
    pub(crate) fn zero_probe(&mut self, t: f64, x: &[f64], d: &[f64], w: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let u = vec![0.0; self.sys.dim_u];
        self.resolve(t, x, &u);
        let samples: Vec<Option<Sample>> = self
            .sys
            .blocks
            .iter()
            .enumerate()
            .map(|(b, block)| {
                matches!(block.partition, Partition::Generated { .. }).then(|| Sample {
                    tau: t,
                    x: self.block_state(x, b).to_vec(),
                    u: self.inputs[b].clone(),
                    d: d[..block.dim_d].to_vec(),
                    w: w[..block.dim_w].to_vec(),
                })
            })
            .collect();
        let mut dx = vec![0.0; x.len()];
        self.rhs(t, x, &u, d, w, &samples, &mut dx);
        let mut jumps = Vec::new();
        for (b, block) in self.sys.blocks.iter().enumerate() {
            if let Some(jump) = &block.jump {
                let ctx = Ctx {
                    t,
                    x: self.block_state(x, b),
                    u: &self.inputs[b],
                    d: &d[..block.dim_d],
                    w: &w[..block.dim_w],
                    sample: samples[b].as_ref(),
                };
                let mut out = vec![0.0; block.n];
                jump(&ctx, &mut out);
                jumps.extend(out);
            }
        }
        (dx, jumps)
    }
}

struct Exogenous<'a> {
    inputs: &'a Inputs,
    u: Vec<f64>,
    d: Vec<f64>,
    w: Vec<f64>,
}

fn fill(sig: &Signal, t: f64, cell: f64, out: &mut [f64]) {
    if sig.dim() == 0 {
        out.iter_mut().for_each(|v| *v = 0.0);
    } else {
        sig.eval_into(t, cell, out);
    }
}

impl<'a> Exogenous<'a> {
    fn at(&mut self, t: f64, cell: f64) {
        fill(&self.inputs.u, t, cell, &mut self.u);
        fill(&self.inputs.d, t, cell, &mut self.d);
        fill(&self.inputs.w, t, cell, &mut self.w);
    }
}

fn check_signal(name: &str, sig: &Signal, dim: usize) -> Result<(), SimError> {
    sig.validate().map_err(|m| SimError::InvalidInput(format!("{name}: {m}")))?;
    if sig.dim() != 0 && sig.dim() != dim {
        return Err(SimError::Dimension(format!("{name} has {} components, system expects {dim}", sig.dim())));
    }
    Ok(())
}

/// Simulate `sys` from `(t0, x0)` over `[t0, t0 + horizon]`.
///
/// Between stops (events, record times, input discontinuities) the state is
/// advanced by classical RK4 with step `h_int`, the last step shortened to
/// land exactly on the stop. At a sampling time of a generated partition the
/// jump map is applied, the sample is refreshed and the next sampling time
/// is `τ + h(sample)`. Fixed-time blocks jump at `k * period`. Records after
/// events hold the post-jump state.
pub fn simulate(
    sys: &SystemDef,
    t0: f64,
    x0: &[f64],
    inputs: &Inputs,
    horizon: f64,
    opts: &SimOptions,
) -> Result<Trajectory, SimError> {
    if !(opts.h_int.is_finite() && opts.h_int > 0.0) {
        return Err(SimError::InvalidOption(format!("integration step {} must be positive", opts.h_int)));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(SimError::InvalidOption(format!("horizon {horizon} must be positive")));
    }
    if !(t0.is_finite() && t0 >= 0.0) {
        return Err(SimError::InvalidOption(format!("initial time {t0} must be non-negative")));
    }
    if let Some(dt) = opts.record_dt {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(SimError::InvalidOption(format!("record spacing {dt} must be positive")));
        }
    }
    let n = sys.state_dim();
    if x0.len() != n {
        return Err(SimError::Dimension(format!("initial state has {} components, system has {n}", x0.len())));
    }
    check_signal("u", &inputs.u, sys.dim_u)?;
    check_signal("d", &inputs.d, sys.dim_d)?;
    check_signal("w", &inputs.w, sys.dim_w)?;

    let end = t0 + horizon;
    let nb = sys.blocks.len();
    let offsets = sys.offsets();
    let gen_block = sys.generating_block();
    let mut eval = Evaluator::new(sys);
    let mut exo = Exogenous { inputs, u: vec![0.0; sys.dim_u], d: vec![0.0; sys.dim_d], w: vec![0.0; sys.dim_w] };

    let mut traj = Trajectory {
        meta: TrajectoryMeta {
            system: sys.name.clone(),
            t0,
            horizon,
            h_int: opts.h_int,
            record_dt: opts.record_dt,
            blowup: opts.blowup,
            seeds: inputs.seeds(),
        },
        n,
        p: sys.output_dim(),
        dim_u: sys.dim_u,
        dim_d: sys.dim_d,
        dim_w: sys.dim_w,
        times: Vec::new(),
        states: Vec::new(),
        outputs: Vec::new(),
        u: Vec::new(),
        d: Vec::new(),
        w: Vec::new(),
        events: Vec::new(),
        sampling: SamplingSet::Continuum,
        status: Status::Completed,
    };
    let mut y_buf = Vec::with_capacity(traj.p);
    let mut sampling_times = Vec::new();

    let mut x = x0.to_vec();
    let mut samples: Vec<Option<Sample>> = vec![None; nb];
    let mut next_event = vec![f64::INFINITY; nb];
    let mut next_index = vec![0.0_f64; nb];

    // the initial record is the given state, bit for bit
    exo.at(t0, t0);
    eval.resolve(t0, &x, &exo.u);
    record(&mut traj, &mut eval, &mut y_buf, t0, &x, &exo, Event::Sample);

    for (b, block) in sys.blocks.iter().enumerate() {
        match &block.partition {
            Partition::Continuous => {}
            Partition::Generated { .. } => {}
            Partition::Fixed { period, held_in_state } => {
                let k = (t0 / period + 1e-9).floor();
                if *held_in_state && (t0 - k * period).abs() <= tol_at(t0) {
                    let half = block.n / 2;
                    let base = offsets[b];
                    for i in 0..half {
                        x[base + half + i] = x[base + i];
                    }
                }
                next_index[b] = k + 1.0;
                next_event[b] = (k + 1.0) * period;
            }
        }
    }
    eval.resolve(t0, &x, &exo.u);
    if let Err(status) = refresh_samples(sys, &eval, &offsets, &x, &exo, t0, &mut samples, &mut next_event, |b| {
        matches!(sys.blocks[b].partition, Partition::Generated { .. })
    }) {
        traj.status = status;
        return Ok(finish(traj, gen_block, sampling_times));
    }
    if gen_block.is_some() {
        sampling_times.push(t0);
    }

    let mut extra: Vec<f64> = opts.extra_records.iter().copied().filter(|&s| s > t0 + tol_at(t0) && s <= end).collect();
    extra.sort_by(f64::total_cmp);
    let mut extra_pos = 0;
    let mut rec_index = opts.record_dt.map(|dt| (t0 / dt + 1e-9).floor() + 1.0);

    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut steps: u64 = 0;
    let mut t = t0;

    while t < end - tol_at(end) {
        let ev = next_event.iter().copied().fold(f64::INFINITY, f64::min);
        let rec = match (opts.record_dt, rec_index) {
            (Some(dt), Some(k)) => k * dt,
            _ => f64::INFINITY,
        };
        let ext = extra.get(extra_pos).copied().unwrap_or(f64::INFINITY);
        let bp = inputs.next_breakpoint(t);
        let mut stop = ev.min(rec).min(ext).min(bp).min(end);
        let tol = tol_at(stop);
        if ev <= stop + tol && ev <= end + tol_at(end) {
            stop = ev;
        } else if end <= stop + tol {
            stop = end;
        }

        // integrate [t, stop]
        let sliver = tol_at(stop);
        while stop - t > sliver {
            let last = t + opts.h_int >= stop - sliver;
            let h = if last { stop - t } else { opts.h_int };
            let mid = t + 0.5 * h;
            exo.at(t, mid);
            eval.rhs(t, &x, &exo.u, &exo.d, &exo.w, &samples, &mut k1);
            for i in 0..n {
                tmp[i] = x[i] + 0.5 * h * k1[i];
            }
            exo.at(mid, mid);
            eval.rhs(mid, &tmp, &exo.u, &exo.d, &exo.w, &samples, &mut k2);
            for i in 0..n {
                tmp[i] = x[i] + 0.5 * h * k2[i];
            }
            eval.rhs(mid, &tmp, &exo.u, &exo.d, &exo.w, &samples, &mut k3);
            for i in 0..n {
                tmp[i] = x[i] + h * k3[i];
            }
            exo.at(t + h, mid);
            eval.rhs(t + h, &tmp, &exo.u, &exo.d, &exo.w, &samples, &mut k4);
            for i in 0..n {
                tmp[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            let t_next = if last { stop } else { t + h };
            steps += 1;
            if tmp.iter().any(|v| !v.is_finite()) {
                traj.status = Status::Fault { t: t_next, message: "vector field produced a non-finite state".into() };
                return Ok(finish(traj, gen_block, sampling_times));
            }
            x.copy_from_slice(&tmp);
            t = t_next;
            let nx = norm(&x);
            if nx > opts.blowup {
                exo.at(t, t);
                eval.resolve(t, &x, &exo.u);
                record(&mut traj, &mut eval, &mut y_buf, t, &x, &exo, Event::Flow);
                traj.status = Status::Blowup { t, norm: nx };
                return Ok(finish(traj, gen_block, sampling_times));
            }
            if opts.record_dt.is_none() && t < stop {
                exo.at(t, t);
                eval.resolve(t, &x, &exo.u);
                record(&mut traj, &mut eval, &mut y_buf, t, &x, &exo, Event::Flow);
            }
            if steps >= opts.max_steps {
                traj.status = Status::Fault { t, message: format!("step cap {} reached", opts.max_steps) };
                return Ok(finish(traj, gen_block, sampling_times));
            }
        }
        t = stop;

        // events at `stop`
        let firing: Vec<usize> = (0..nb).filter(|&b| (next_event[b] - stop).abs() <= tol_at(stop)).collect();
        let mut flag = Event::Flow;
        if !firing.is_empty() {
            exo.at(t, t);
            eval.resolve(t, &x, &exo.u);
            let mut jumped: Vec<(usize, Vec<f64>)> = Vec::new();
            for &b in &firing {
                let block = &sys.blocks[b];
                if let Some(jump) = &block.jump {
                    let ctx = Ctx {
                        t,
                        x: &x[offsets[b]..offsets[b + 1]],
                        u: &eval.inputs[b],
                        d: &exo.d[..block.dim_d],
                        w: &exo.w[..block.dim_w],
                        sample: samples[b].as_ref(),
                    };
                    let mut out = vec![0.0; block.n];
                    jump(&ctx, &mut out);
                    jumped.push((b, out));
                }
            }
            for (b, out) in jumped {
                x[offsets[b]..offsets[b + 1]].copy_from_slice(&out);
            }
            if x.iter().any(|v| !v.is_finite()) {
                traj.status = Status::Fault { t, message: "jump map produced a non-finite state".into() };
                return Ok(finish(traj, gen_block, sampling_times));
            }
            eval.resolve(t, &x, &exo.u);
            for &b in &firing {
                if let Partition::Fixed { period, .. } = sys.blocks[b].partition {
                    next_index[b] += 1.0;
                    next_event[b] = next_index[b] * period;
                    flag = if flag == Event::Sample { Event::Sample } else { Event::Impulse };
                }
            }
            if let Err(status) =
                refresh_samples(sys, &eval, &offsets, &x, &exo, t, &mut samples, &mut next_event, |b| firing.contains(&b) && matches!(sys.blocks[b].partition, Partition::Generated { .. }))
            {
                traj.status = status;
                return Ok(finish(traj, gen_block, sampling_times));
            }
            if let Some(g) = gen_block {
                if firing.contains(&g) {
                    sampling_times.push(t);
                    flag = Event::Sample;
                }
            }
        }

        let mut is_record = flag != Event::Flow || (stop - end).abs() <= tol_at(end);
        if let (Some(dt), Some(k)) = (opts.record_dt, rec_index.as_mut()) {
            while *k * dt <= stop + tol_at(stop) {
                is_record = true;
                *k += 1.0;
            }
        }
        while extra_pos < extra.len() && extra[extra_pos] <= stop + tol_at(stop) {
            is_record = true;
            extra_pos += 1;
        }
        if opts.record_dt.is_none() {
            is_record = true;
        }
        if is_record {
            exo.at(t, t);
            eval.resolve(t, &x, &exo.u);
            record(&mut traj, &mut eval, &mut y_buf, t, &x, &exo, flag);
        }
    }

    Ok(finish(traj, gen_block, sampling_times))
}

#[allow(clippy::too_many_arguments)]
fn refresh_samples(
    sys: &SystemDef,
    eval: &Evaluator<'_>,
    offsets: &[usize],
    x: &[f64],
    exo: &Exogenous<'_>,
    t: f64,
    samples: &mut [Option<Sample>],
    next_event: &mut [f64],
    which: impl Fn(usize) -> bool,
) -> Result<(), Status> {
    for (b, block) in sys.blocks.iter().enumerate() {
        if !which(b) {
            continue;
        }
        if let Partition::Generated { r, period } = &block.partition {
            let sample = Sample {
                tau: t,
                x: x[offsets[b]..offsets[b + 1]].to_vec(),
                u: eval.inputs[b].clone(),
                d: exo.d[..block.dim_d].to_vec(),
                w: exo.w[..block.dim_w].to_vec(),
            };
            let h = period(&sample);
            if !(h.is_finite() && h > 0.0 && h <= r * (1.0 + 1e-12)) {
                return Err(Status::Fault {
                    t,
                    message: format!("sampling period {h} of block {} outside (0, {r}]", block.name),
                });
            }
            next_event[b] = t + h;
            samples[b] = Some(sample);
        }
    }
    Ok(())
}

fn record(
    traj: &mut Trajectory,
    eval: &mut Evaluator<'_>,
    y_buf: &mut Vec<f64>,
    t: f64,
    x: &[f64],
    exo: &Exogenous<'_>,
    event: Event,
) {
    eval.system_output(y_buf);
    traj.times.push(t);
    traj.states.extend_from_slice(x);
    traj.outputs.extend_from_slice(y_buf);
    traj.u.extend_from_slice(&exo.u);
    traj.d.extend_from_slice(&exo.d);
    traj.w.extend_from_slice(&exo.w);
    traj.events.push(event);
}

fn finish(mut traj: Trajectory, gen_block: Option<usize>, sampling_times: Vec<f64>) -> Trajectory {
    if gen_block.is_some() {
        traj.sampling = SamplingSet::Times { times: sampling_times };
    }
    traj
}
