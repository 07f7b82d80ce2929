use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::GainError;

/// A sampled axis: log-spaced, linearly spaced, or explicit points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Axis {
    Log { lo: f64, hi: f64, n: usize },
    Lin { lo: f64, hi: f64, n: usize },
    Points { values: Vec<f64> },
}

impl Axis {
    pub fn points(&self) -> Vec<f64> {
        match *self {
            Axis::Log { lo, hi, n } => {
                if n == 1 {
                    return vec![lo];
                }
                let (a, b) = (lo.ln(), hi.ln());
                (0..n)
                    .map(|i| match i {
                        0 => lo,
                        i if i == n - 1 => hi,
                        i => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
                    })
                    .collect()
            }
            Axis::Lin { lo, hi, n } => {
                if n == 1 {
                    return vec![lo];
                }
                (0..n)
                    .map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
                    .collect()
            }
            Axis::Points { ref values } => values.clone(),
        }
    }

    fn validate(&self) -> Result<(), GainError> {
        let ok = match *self {
            Axis::Log { lo, hi, n } => lo > 0.0 && hi >= lo && n > 0 && hi.is_finite(),
            Axis::Lin { lo, hi, n } => lo.is_finite() && hi.is_finite() && hi >= lo && n > 0,
            Axis::Points { ref values } => {
                !values.is_empty() && values.iter().all(|v| v.is_finite()) && values.windows(2).all(|w| w[0] <= w[1])
            }
        };
        if ok {
            Ok(())
        } else {
            Err(GainError::InvalidGrid(self.to_string()))
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::Log { lo, hi, n } => write!(f, "log:{lo:e}:{hi:e}:{n}"),
            Axis::Lin { lo, hi, n } => write!(f, "lin:{lo}:{hi}:{n}"),
            Axis::Points { values } => {
                let v: Vec<String> = values.iter().map(|v| v.to_string()).collect();
                write!(f, "pts:{}", v.join(","))
            }
        }
    }
}

impl FromStr for Axis {
    type Err = GainError;

    /// Parses `log:LO:HI:N`, `lin:LO:HI:N` or `pts:V1,V2,...`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GainError::InvalidGrid(s.to_string());
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let axis = match kind {
            "log" | "lin" => {
                let parts: Vec<&str> = rest.split(':').collect();
                if parts.len() != 3 {
                    return Err(bad());
                }
                let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
                let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
                let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
                if kind == "log" {
                    Axis::Log { lo, hi, n }
                } else {
                    Axis::Lin { lo, hi, n }
                }
            }
            "pts" => Axis::Points {
                values: rest.split(',').map(|v| v.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?,
            },
            _ => return Err(bad()),
        };
        axis.validate()?;
        Ok(axis)
    }
}

/// The `s` (magnitude) and `t` (time) axes used by the certificate checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub s: Axis,
    pub t: Axis,
}

impl GridSpec {
    /// Log-spaced `s` in `[1e-6, 1e6]` with 61 points and linear `t` in
    /// `[0, t_max]` with 51 points.
    pub fn with_horizon(t_max: f64) -> Self {
        Self { s: default_s_axis(), t: Axis::Lin { lo: 0.0, hi: t_max, n: 51 } }
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::with_horizon(10.0)
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s={};t={}", self.s, self.t)
    }
}

impl FromStr for GridSpec {
    type Err = GainError;

    /// Parses `s=AXIS;t=AXIS`; either half may be omitted and keeps its
    /// default.
    fn from_str(spec: &str) -> Result<Self, Self::Err> {
        let mut grid = GridSpec::default();
        for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, axis) = part.split_once('=').ok_or_else(|| GainError::InvalidGrid(part.to_string()))?;
            match name.trim() {
                "s" => grid.s = axis.parse()?,
                "t" => grid.t = axis.parse()?,
                other => return Err(GainError::InvalidGrid(format!("unknown axis {other}"))),
            }
        }
        Ok(grid)
    }
}

pub fn default_s_axis() -> Axis {
    Axis::Log { lo: 1e-6, hi: 1e6, n: 61 }
}

/// Log-spaced magnitudes in `[1e-6, 1e6]`, 61 points.
pub fn default_s_grid() -> Vec<f64> {
    default_s_axis().points()
}

/// Linear times in `[0, t_max]`, 51 points.
pub fn default_t_grid(t_max: f64) -> Vec<f64> {
    Axis::Lin { lo: 0.0, hi: t_max, n: 51 }.points()
}
