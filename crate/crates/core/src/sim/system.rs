use std::fmt;
use std::sync::Arc;

use super::SimError;

/// Values frozen at the most recent sampling time of a block.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub tau: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub d: Vec<f64>,
    pub w: Vec<f64>,
}

/// Arguments seen by a block's vector field, jump map and sampling period.
pub struct Ctx<'a> {
    pub t: f64,
    pub x: &'a [f64],
    pub u: &'a [f64],
    pub d: &'a [f64],
    pub w: &'a [f64],
    /// Present for blocks with a generated partition.
    pub sample: Option<&'a Sample>,
}

pub type FlowFn = Arc<dyn Fn(&Ctx<'_>, &mut [f64]) + Send + Sync>;
pub type JumpFn = Arc<dyn Fn(&Ctx<'_>, &mut [f64]) + Send + Sync>;
pub type OutputFn = Arc<dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync>;
pub type PeriodFn = Arc<dyn Fn(&Sample) -> f64 + Send + Sync>;

/// How a block's sampling times arise.
#[derive(Clone)]
pub enum Partition {
    /// Pure flow; every time is a sampling time.
    Continuous,
    /// `τ_{i+1} = τ_i + h(τ_i, x(τ_i), u(τ_i), d(τ_i), w(τ_i))` with
    /// `0 < h <= r`.
    Generated { r: f64, period: PeriodFn },
    /// Impulses at `k * period`. With `held_in_state` the block state is
    /// `[x, x_held]`, and `x_held` is reset to `x` when the run starts on a
    /// partition point.
    Fixed { period: f64, held_in_state: bool },
}

impl fmt::Debug for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Partition::Continuous => write!(f, "Continuous"),
            Partition::Generated { r, .. } => write!(f, "Generated {{ r: {r} }}"),
            Partition::Fixed { period, held_in_state } => {
                write!(f, "Fixed {{ period: {period}, held_in_state: {held_in_state} }}")
            }
        }
    }
}

/// One dynamical component with its own state slice and partition.
#[derive(Clone)]
pub struct Block {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub dim_d: usize,
    pub dim_w: usize,
    pub flow: FlowFn,
    pub jump: Option<JumpFn>,
    pub output: OutputFn,
    pub partition: Partition,
}

impl fmt::Debug for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Block")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("m", &self.m)
            .field("p", &self.p)
            .field("partition", &self.partition)
            .finish()
    }
}

impl Block {
    fn new(name: &str, n: usize, m: usize, partition: Partition, flow: FlowFn) -> Self {
        Self {
            name: name.to_string(),
            n,
            m,
            p: n,
            dim_d: 0,
            dim_w: 0,
            flow,
            jump: None,
            output: Arc::new(|_, x, _, y| y.copy_from_slice(x)),
            partition,
        }
    }

    /// ODE block; output defaults to the state.
    pub fn ode(name: &str, n: usize, m: usize, flow: impl Fn(&Ctx<'_>, &mut [f64]) + Send + Sync + 'static) -> Self {
        Self::new(name, n, m, Partition::Continuous, Arc::new(flow))
    }

    /// Block whose partition is generated by `period`, bounded by `r`.
    pub fn sampled(
        name: &str,
        n: usize,
        m: usize,
        r: f64,
        period: impl Fn(&Sample) -> f64 + Send + Sync + 'static,
        flow: impl Fn(&Ctx<'_>, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self::new(name, n, m, Partition::Generated { r, period: Arc::new(period) }, Arc::new(flow))
    }

    /// Block with impulses at `k * period`.
    pub fn impulsive(
        name: &str,
        n: usize,
        m: usize,
        period: f64,
        held_in_state: bool,
        flow: impl Fn(&Ctx<'_>, &mut [f64]) + Send + Sync + 'static,
        jump: impl Fn(&Ctx<'_>, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        let mut b = Self::new(name, n, m, Partition::Fixed { period, held_in_state }, Arc::new(flow));
        b.jump = Some(Arc::new(jump));
        b
    }

    pub fn with_jump(mut self, jump: impl Fn(&Ctx<'_>, &mut [f64]) + Send + Sync + 'static) -> Self {
        self.jump = Some(Arc::new(jump));
        self
    }

    pub fn with_output(mut self, p: usize, output: impl Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.p = p;
        self.output = Arc::new(output);
        self
    }

    /// Declare how many disturbance and sampling-perturbation components the
    /// block reads. The block sees the leading components of the system-wide
    /// vectors.
    pub fn with_exogenous(mut self, dim_d: usize, dim_w: usize) -> Self {
        self.dim_d = dim_d;
        self.dim_w = dim_w;
        self
    }

    fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidSystem(format!("block {}: {m}", self.name)));
        match &self.partition {
            Partition::Continuous => {}
            Partition::Generated { r, .. } => {
                if !(r.is_finite() && *r > 0.0) {
                    return bad(format!("sampling bound r = {r} must be positive"));
                }
            }
            Partition::Fixed { period, held_in_state } => {
                if !(period.is_finite() && *period > 0.0) {
                    return bad(format!("impulse period {period} must be positive"));
                }
                if *held_in_state && !self.n.is_multiple_of(2) {
                    return bad("held-in-state blocks need an even state dimension".into());
                }
            }
        }
        Ok(())
    }
}

/// Where one component of a block input comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    /// Component of the external input `u`.
    External(usize),
    /// Component of a block output.
    Output { block: usize, comp: usize },
}

/// A hybrid system: blocks, their input wiring and the exported output.
#[derive(Clone, Debug)]
pub struct SystemDef {
    pub name: String,
    pub blocks: Vec<Block>,
    /// Per block, one source per input component.
    pub wiring: Vec<Vec<Source>>,
    /// Sources of the system output (block outputs only).
    pub outputs: Vec<Source>,
    pub dim_u: usize,
    pub dim_d: usize,
    pub dim_w: usize,
}

impl SystemDef {
    /// System made of a single block; the block input is the external input.
    pub fn leaf(block: Block) -> Result<Self, SimError> {
        block.validate()?;
        let wiring = vec![(0..block.m).map(Source::External).collect()];
        let outputs = (0..block.p).map(|comp| Source::Output { block: 0, comp }).collect();
        Ok(Self {
            name: block.name.clone(),
            dim_u: block.m,
            dim_d: block.dim_d,
            dim_w: block.dim_w,
            blocks: vec![block],
            wiring,
            outputs,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.n).sum()
    }

    pub fn output_dim(&self) -> usize {
        self.outputs.len()
    }

    pub fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.blocks.len() + 1);
        let mut acc = 0;
        off.push(0);
        for b in &self.blocks {
            acc += b.n;
            off.push(acc);
        }
        off
    }

    /// Index of the block that generates the sampling set, if any.
    pub fn generating_block(&self) -> Option<usize> {
        self.blocks.iter().position(|b| matches!(b.partition, Partition::Generated { .. }))
    }

    /// Largest gap between consecutive sampling times, if bounded.
    pub fn sampling_bound(&self) -> Option<f64> {
        self.generating_block().map(|i| match self.blocks[i].partition {
            Partition::Generated { r, .. } => r,
            _ => unreachable!(),
        })
    }

    pub fn with_name(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    /// Check on probe points that zero state and zero input stay at rest:
    /// the vector field vanishes and jump maps return zero, for each
    /// disturbance vector in `d_probes`.
    pub fn check_zero_equilibrium(&self, d_probes: &[Vec<f64>]) -> Result<(), SimError> {
        let n = self.state_dim();
        let x = vec![0.0; n];
        let zero_d = vec![0.0; self.dim_d];
        let probes: Vec<&[f64]> = if d_probes.is_empty() {
            vec![&zero_d]
        } else {
            d_probes.iter().map(Vec::as_slice).collect()
        };
        let w = vec![0.0; self.dim_w];
        let mut eval = super::engine::Evaluator::new(self);
        for &t in &[0.0, 0.37, 1.0, 2.5] {
            for d in &probes {
                if d.len() != self.dim_d {
                    return Err(SimError::Dimension(format!("probe disturbance has {} components", d.len())));
                }
                let (dx, jumps) = eval.zero_probe(t, &x, d, &w);
                if dx.iter().chain(jumps.iter()).any(|v| *v != 0.0) {
                    return Err(SimError::InvalidSystem(format!(
                        "{}: zero state is not at rest (t = {t}, d = {d:?})",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Feedback interconnection: the first system's input is `[y2, u]`, the
/// second's is `[y1, u]`, and the composite output is `[y1, y2]`.
///
/// `dim_u` is the dimension of the shared external input `u`. Output maps of
/// the first system must not feed through the coupling input (it reads zero
/// there when outputs are evaluated); the second may depend on `y1`.
///
/// Blocks keep their own partitions. The composite sampling set is that of
/// the one block with a generated partition; ODE and fixed-time blocks
/// satisfy the classical semigroup property and contribute the whole time
/// axis. Two generated partitions are rejected because their intersection is
/// not guaranteed to meet every window of length `r`.
pub fn interconnect(first: &SystemDef, second: &SystemDef, dim_u: usize) -> Result<SystemDef, SimError> {
    let (p1, p2) = (first.output_dim(), second.output_dim());
    if first.dim_u != p2 + dim_u {
        return Err(SimError::Dimension(format!(
            "first subsystem takes {} inputs, but the second has {p2} outputs plus {dim_u} external inputs",
            first.dim_u
        )));
    }
    if second.dim_u != p1 + dim_u {
        return Err(SimError::Dimension(format!(
            "second subsystem takes {} inputs, but the first has {p1} outputs plus {dim_u} external inputs",
            second.dim_u
        )));
    }
    let generated = first.blocks.iter().chain(&second.blocks).filter(|b| matches!(b.partition, Partition::Generated { .. })).count();
    if generated > 1 {
        return Err(SimError::IncompatiblePartitions(format!(
            "{} and {} both generate their own sampling times; the common sampling set may be empty",
            first.name, second.name
        )));
    }

    let shift = first.blocks.len();
    let shifted = |s: Source| match s {
        Source::Output { block, comp } => Source::Output { block: block + shift, comp },
        ext => ext,
    };
    let second_outputs: Vec<Source> = second.outputs.iter().copied().map(shifted).collect();

    // a subsystem's external input k maps to the other's output k, then u
    let remap = |s: Source, other_outputs: &[Source], own_shift: usize| match s {
        Source::External(k) if k < other_outputs.len() => other_outputs[k],
        Source::External(k) => Source::External(k - other_outputs.len()),
        Source::Output { block, comp } => Source::Output { block: block + own_shift, comp },
    };

    let mut wiring = Vec::with_capacity(first.blocks.len() + second.blocks.len());
    for w in &first.wiring {
        wiring.push(w.iter().map(|&s| remap(s, &second_outputs, 0)).collect());
    }
    for w in &second.wiring {
        wiring.push(w.iter().map(|&s| remap(s, &first.outputs, shift)).collect());
    }
    let mut outputs = first.outputs.clone();
    outputs.extend(second_outputs);

    Ok(SystemDef {
        name: format!("{}+{}", first.name, second.name),
        blocks: first.blocks.iter().chain(&second.blocks).cloned().collect(),
        wiring,
        outputs,
        dim_u,
        dim_d: first.dim_d.max(second.dim_d),
        dim_w: first.dim_w.max(second.dim_w),
    })
}
