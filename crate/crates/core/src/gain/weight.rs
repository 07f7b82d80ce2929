use serde::{Deserialize, Serialize};

use super::GainError;

/// Strictly positive continuous function of time `t >= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeWeight {
    /// `c`
    ConstWeight { c: f64 },
    /// `coeff * exp(rate * t)`
    ExpWeight { coeff: f64, rate: f64 },
    /// `(a + b t) / (1 + c t)`
    RationalWeight { a: f64, b: f64, c: f64 },
    /// Piecewise linear through `[t, w(t)]` knots starting at `t = 0`,
    /// held constant after the last knot.
    TableWeight { knots: Vec<[f64; 2]> },
    /// Pointwise maximum.
    MaxWeight { terms: Vec<TimeWeight> },
}

impl TimeWeight {
    pub fn constant(c: f64) -> Self {
        TimeWeight::ConstWeight { c }
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    pub fn exp(coeff: f64, rate: f64) -> Self {
        TimeWeight::ExpWeight { coeff, rate }
    }

    pub fn rational(a: f64, b: f64, c: f64) -> Self {
        TimeWeight::RationalWeight { a, b, c }
    }

    pub fn validate(&self) -> Result<(), GainError> {
        let bad = |m: String| Err(GainError::InvalidParameter(m));
        match self {
            TimeWeight::ConstWeight { c } => {
                if c.is_finite() && *c > 0.0 {
                    Ok(())
                } else {
                    bad(format!("constant weight {c} must be positive"))
                }
            }
            TimeWeight::ExpWeight { coeff, rate } => {
                if coeff.is_finite() && *coeff > 0.0 && rate.is_finite() {
                    Ok(())
                } else {
                    bad(format!("exponential weight needs coeff > 0 and finite rate, got {coeff}, {rate}"))
                }
            }
            TimeWeight::RationalWeight { a, b, c } => {
                if [a, b, c].iter().all(|v| v.is_finite()) && *a > 0.0 && *b >= 0.0 && *c >= 0.0 {
                    Ok(())
                } else {
                    bad(format!("rational weight needs a > 0, b >= 0, c >= 0, got {a}, {b}, {c}"))
                }
            }
            TimeWeight::TableWeight { knots } => {
                if knots.is_empty() || knots[0][0] != 0.0 {
                    return bad("weight table must start at t = 0".into());
                }
                if knots.iter().any(|k| !k[0].is_finite() || !k[1].is_finite() || k[1] <= 0.0) {
                    return bad("weight table values must be finite and positive".into());
                }
                if knots.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return bad("weight table times must be strictly increasing".into());
                }
                Ok(())
            }
            TimeWeight::MaxWeight { terms } => {
                if terms.is_empty() {
                    return bad("max weight needs at least one term".into());
                }
                terms.iter().try_for_each(TimeWeight::validate)
            }
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeWeight::ConstWeight { c } => *c,
            TimeWeight::ExpWeight { coeff, rate } => coeff * (rate * t).exp(),
            TimeWeight::RationalWeight { a, b, c } => (a + b * t) / (1.0 + c * t),
            TimeWeight::TableWeight { knots } => {
                if t <= knots[0][0] {
                    return knots[0][1];
                }
                match knots.iter().position(|k| k[0] > t) {
                    None => knots[knots.len() - 1][1],
                    Some(i) => {
                        let [t0, v0] = knots[i - 1];
                        let [t1, v1] = knots[i];
                        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
                    }
                }
            }
            TimeWeight::MaxWeight { terms } => terms.iter().map(|w| w.eval(t)).fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// `max_{0 <= τ <= t} eval(τ)`, computed in closed form for every
    /// constructor.
    pub fn prefix_max(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match self {
            TimeWeight::ConstWeight { c } => *c,
            TimeWeight::ExpWeight { rate, .. } => {
                if *rate >= 0.0 {
                    self.eval(t)
                } else {
                    self.eval(0.0)
                }
            }
            // (a + bt)/(1 + ct) is monotone on t >= 0, so the maximum sits at an end
            TimeWeight::RationalWeight { .. } => self.eval(0.0).max(self.eval(t)),
            TimeWeight::TableWeight { knots } => knots
                .iter()
                .take_while(|k| k[0] <= t)
                .map(|k| k[1])
                .fold(self.eval(t), f64::max),
            TimeWeight::MaxWeight { terms } => terms.iter().map(|w| w.prefix_max(t)).fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn is_bounded(&self) -> bool {
        match self {
            TimeWeight::ConstWeight { .. } | TimeWeight::TableWeight { .. } => true,
            TimeWeight::ExpWeight { rate, .. } => *rate <= 0.0,
            TimeWeight::RationalWeight { b, c, .. } => *c > 0.0 || *b == 0.0,
            TimeWeight::MaxWeight { terms } => terms.iter().all(TimeWeight::is_bounded),
        }
    }

    /// `sup_{t >= 0} eval(t)`; infinite for unbounded weights.
    pub fn sup(&self) -> f64 {
        match self {
            TimeWeight::ConstWeight { c } => *c,
            TimeWeight::ExpWeight { coeff, rate } => {
                if *rate <= 0.0 {
                    *coeff
                } else {
                    f64::INFINITY
                }
            }
            TimeWeight::RationalWeight { a, b, c } => {
                if *c > 0.0 {
                    a.max(b / c)
                } else if *b == 0.0 {
                    *a
                } else {
                    f64::INFINITY
                }
            }
            TimeWeight::TableWeight { knots } => knots.iter().map(|k| k[1]).fold(f64::NEG_INFINITY, f64::max),
            TimeWeight::MaxWeight { terms } => terms.iter().map(TimeWeight::sup).fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// True when the weight is identically one.
    pub fn is_unit(&self) -> bool {
        match self {
            TimeWeight::ConstWeight { c } => *c == 1.0,
            TimeWeight::ExpWeight { coeff, rate } => *coeff == 1.0 && *rate == 0.0,
            TimeWeight::RationalWeight { a, b, c } => *a == 1.0 && *b == *c,
            TimeWeight::TableWeight { knots } => knots.iter().all(|k| k[1] == 1.0),
            TimeWeight::MaxWeight { terms } => terms.iter().all(TimeWeight::is_unit),
        }
    }
}
