use serde::{Deserialize, Serialize};

use super::rng::{mix, unit};

/// Deterministic input sample path `t -> R^dim`.
///
/// Random paths are piecewise constant on cells `[k*mesh, (k+1)*mesh)` of
/// absolute time, with the value of each cell a hash of the seed and the cell
/// index. Restarting a simulation later therefore replays the same path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Signal {
    Empty,
    Constant { value: Vec<f64> },
    RandomPiecewise { dim: usize, lo: f64, hi: f64, mesh: f64, seed: u64 },
    /// `amplitude * sin(omega * t + phase)` per component.
    Sinusoid {
        amplitude: Vec<f64>,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `before` for `t < at`, `after` for `t >= at`.
    Step { before: Vec<f64>, after: Vec<f64>, at: f64 },
    /// `base` up to and including `after`, `value` strictly later.
    Override { base: Box<Signal>, after: f64, value: Vec<f64> },
}

impl Signal {
    pub fn zeros(dim: usize) -> Self {
        if dim == 0 {
            Signal::Empty
        } else {
            Signal::Constant { value: vec![0.0; dim] }
        }
    }

    pub fn constant(value: Vec<f64>) -> Self {
        Signal::Constant { value }
    }

    pub fn random(dim: usize, lo: f64, hi: f64, mesh: f64, seed: u64) -> Self {
        Signal::RandomPiecewise { dim, lo, hi, mesh, seed }
    }

    /// Same path up to `t`, replaced by `value` afterwards.
    pub fn altered_after(self, t: f64, value: Vec<f64>) -> Self {
        Signal::Override { base: Box::new(self), after: t, value }
    }

    pub fn dim(&self) -> usize {
        match self {
            Signal::Empty => 0,
            Signal::Constant { value } => value.len(),
            Signal::RandomPiecewise { dim, .. } => *dim,
            Signal::Sinusoid { amplitude, .. } => amplitude.len(),
            Signal::Step { before, .. } => before.len(),
            Signal::Override { base, .. } => base.dim(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            Signal::Empty | Signal::Constant { .. } => Ok(()),
            Signal::RandomPiecewise { lo, hi, mesh, .. } => {
                if !(mesh.is_finite() && *mesh > 0.0) {
                    Err(format!("mesh {mesh} must be positive"))
                } else if !(lo <= hi) {
                    Err(format!("bounds [{lo}, {hi}] are empty"))
                } else {
                    Ok(())
                }
            }
            Signal::Sinusoid { omega, .. } => {
                if omega.is_finite() {
                    Ok(())
                } else {
                    Err("sinusoid frequency must be finite".into())
                }
            }
            Signal::Step { before, after, .. } => {
                if before.len() == after.len() {
                    Ok(())
                } else {
                    Err("step levels have different dimensions".into())
                }
            }
            Signal::Override { base, value, .. } => {
                base.validate()?;
                if value.len() == base.dim() {
                    Ok(())
                } else {
                    Err("override value has the wrong dimension".into())
                }
            }
        }
    }

    /// Value at `t`. Piecewise-constant parts are looked up at `cell_t`,
    /// which lets the integrator pin a whole step to one cell by passing the
    /// step midpoint.
    pub fn eval_into(&self, t: f64, cell_t: f64, out: &mut [f64]) {
        match self {
            Signal::Empty => {}
            Signal::Constant { value } => out.copy_from_slice(value),
            Signal::RandomPiecewise { lo, hi, mesh, seed, .. } => {
                let cell = (cell_t / mesh + 1e-9).floor() as i64 as u64;
                for (j, o) in out.iter_mut().enumerate() {
                    *o = lo + (hi - lo) * unit(mix(*seed, cell, j as u64));
                }
            }
            Signal::Sinusoid { amplitude, omega, phase } => {
                let s = (omega * t + phase).sin();
                for (o, a) in out.iter_mut().zip(amplitude) {
                    *o = a * s;
                }
            }
            Signal::Step { before, after, at } => {
                out.copy_from_slice(if cell_t >= *at { after } else { before });
            }
            Signal::Override { base, after, value } => {
                if cell_t > *after {
                    out.copy_from_slice(value);
                } else {
                    base.eval_into(t, cell_t, out);
                }
            }
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(t, t, &mut out);
        out
    }

    /// Smallest discontinuity strictly after `t` (`+inf` if none).
    pub fn next_breakpoint(&self, t: f64) -> f64 {
        let tol = 1e-12 * t.abs().max(1.0);
        match self {
            Signal::Empty | Signal::Constant { .. } | Signal::Sinusoid { .. } => f64::INFINITY,
            Signal::RandomPiecewise { mesh, .. } => {
                let mut k = (t / mesh).floor() + 1.0;
                while k * mesh <= t + tol {
                    k += 1.0;
                }
                k * mesh
            }
            Signal::Step { at, .. } => {
                if *at > t + tol {
                    *at
                } else {
                    f64::INFINITY
                }
            }
            Signal::Override { base, after, .. } => {
                let own = if *after > t + tol { *after } else { f64::INFINITY };
                own.min(base.next_breakpoint(t))
            }
        }
    }

    /// Copy with every random seed remixed with `seed`.
    pub fn with_seed(&self, seed: u64) -> Self {
        match self {
            Signal::RandomPiecewise { dim, lo, hi, mesh, seed: own } => {
                Signal::RandomPiecewise { dim: *dim, lo: *lo, hi: *hi, mesh: *mesh, seed: mix(seed, *own, 1) }
            }
            Signal::Override { base, after, value } => {
                Signal::Override { base: Box::new(base.with_seed(seed)), after: *after, value: value.clone() }
            }
            other => other.clone(),
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        match self {
            Signal::RandomPiecewise { seed, .. } => vec![*seed],
            Signal::Override { base, .. } => base.seeds(),
            _ => Vec::new(),
        }
    }

    /// Upper bound of the Euclidean norm of the path over all time.
    pub fn norm_bound(&self) -> f64 {
        match self {
            Signal::Empty => 0.0,
            Signal::Constant { value } => norm(value),
            Signal::RandomPiecewise { dim, lo, hi, .. } => lo.abs().max(hi.abs()) * (*dim as f64).sqrt(),
            Signal::Sinusoid { amplitude, .. } => norm(amplitude),
            Signal::Step { before, after, .. } => norm(before).max(norm(after)),
            Signal::Override { base, value, .. } => base.norm_bound().max(norm(value)),
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// The three external signals of a run: control `u`, disturbance `d` and
/// sampling perturbation `w`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    #[serde(default = "empty")]
    pub u: Signal,
    #[serde(default = "empty")]
    pub d: Signal,
    #[serde(default = "empty")]
    pub w: Signal,
}

fn empty() -> Signal {
    Signal::Empty
}

impl Inputs {
    pub fn new(u: Signal, d: Signal, w: Signal) -> Self {
        Self { u, d, w }
    }

    pub fn none() -> Self {
        Self { u: Signal::Empty, d: Signal::Empty, w: Signal::Empty }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { u: self.u.with_seed(seed), d: self.d.with_seed(seed), w: self.w.with_seed(seed) }
    }

    pub fn next_breakpoint(&self, t: f64) -> f64 {
        self.u.next_breakpoint(t).min(self.d.next_breakpoint(t)).min(self.w.next_breakpoint(t))
    }

    pub fn seeds(&self) -> Vec<u64> {
        let mut s = self.u.seeds();
        s.extend(self.d.seeds());
        s.extend(self.w.seeds());
        s
    }
}
