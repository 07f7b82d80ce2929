//! Comparison functions and grid certificates for small-gain conditions.
//!
//! A [`GainFn`] is a scalar, non-decreasing function with `g(0) = 0`, built
//! as an expression tree. A [`TimeWeight`] is a strictly positive function of
//! time. Both parse from JSON objects tagged by `"kind"`.
//!
//! ```
//! use smallgain::gain::GainFn;
//!
//! let gamma1 = GainFn::sqrt_scale(0.9);
//! let gamma2 = GainFn::power(0.2, 2.0);
//! let loop_gain = GainFn::compose(gamma1, gamma2);
//! assert!((loop_gain.eval(3.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
//! ```

mod certificate;
pub mod grid;
mod kl;
mod smallgain;
mod weight;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use certificate::{describe_axis, strict_residual, verdict_of, Certificate, Component, Tracker, Verdict, Witness};
pub use kl::KlEnvelope;
pub use smallgain::{
    a3_check, build_contraction_maps, combine_weight, linear_small_gain_check, small_gain_h3_check, ContractionMaps,
};
pub use weight::TimeWeight;

/// Largest bracket end tried when inverting a gain.
pub const BRACKET_CAP: f64 = 1e300;
/// Growth required at the grid maximum for a K∞ declaration to pass.
pub const DEFAULT_GROWTH_FLOOR: f64 = 1e3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GainError {
    #[error("gain evaluated at negative argument {0}")]
    NegativeInput(f64),
    #[error("gain evaluated at non-finite argument {0}")]
    NonFiniteInput(f64),
    #[error("value {y} is not reached below the bracket cap {cap:e}")]
    Range { y: f64, cap: f64 },
    #[error("inversion for y = {y} stalled with residual {residual:e}")]
    InvertStalled { y: f64, residual: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("grid is empty")]
    EmptyGrid,
    #[error("grid is not sorted and non-negative")]
    UnsortedGrid,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("gain is not of class K-infinity: {0}")]
    NotKInfinity(String),
}

/// Declared comparison class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GainClass {
    /// Continuous, non-decreasing, zero at zero.
    #[serde(rename = "N")]
    N,
    /// Additionally strictly increasing.
    #[serde(rename = "K")]
    K,
    /// Additionally unbounded.
    #[serde(rename = "K_inf")]
    KInf,
}

/// Expression tree for a comparison function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GainFn {
    Zero,
    Identity,
    /// `c * s`
    Scale { c: f64 },
    /// `coeff * s^exponent`
    Power {
        #[serde(default = "one")]
        coeff: f64,
        exponent: f64,
    },
    /// `sqrt(s / c)`
    SqrtScale { c: f64 },
    Sum { terms: Vec<GainFn> },
    Max { terms: Vec<GainFn> },
    /// `outer(inner(s))`
    Compose { outer: Box<GainFn>, inner: Box<GainFn> },
    /// Piecewise linear through `[s, g(s)]` knots, first knot `[0, 0]`,
    /// extended linearly past the last knot.
    Table { knots: Vec<[f64; 2]> },
    /// Numeric inverse of a class-K gain.
    Inverse { of: Box<GainFn> },
}

fn one() -> f64 {
    1.0
}

impl GainFn {
    pub fn zero() -> Self {
        GainFn::Zero
    }

    pub fn identity() -> Self {
        GainFn::Identity
    }

    pub fn scale(c: f64) -> Self {
        GainFn::Scale { c }
    }

    pub fn power(coeff: f64, exponent: f64) -> Self {
        GainFn::Power { coeff, exponent }
    }

    pub fn sqrt_scale(c: f64) -> Self {
        GainFn::SqrtScale { c }
    }

    pub fn sum(a: GainFn, b: GainFn) -> Self {
        GainFn::Sum { terms: vec![a, b] }
    }

    pub fn max(a: GainFn, b: GainFn) -> Self {
        GainFn::Max { terms: vec![a, b] }
    }

    pub fn compose(outer: GainFn, inner: GainFn) -> Self {
        GainFn::Compose { outer: Box::new(outer), inner: Box::new(inner) }
    }

    pub fn inverse(of: GainFn) -> Self {
        GainFn::Inverse { of: Box::new(of) }
    }

    /// Table gain from knots; rejects unsorted knots, a first knot other
    /// than `[0, 0]`, or decreasing values.
    pub fn table(knots: Vec<[f64; 2]>) -> Result<Self, GainError> {
        let g = GainFn::Table { knots };
        g.validate()?;
        Ok(g)
    }

    /// Check constructor parameters recursively.
    pub fn validate(&self) -> Result<(), GainError> {
        let bad = |m: String| Err(GainError::InvalidParameter(m));
        match self {
            GainFn::Zero | GainFn::Identity => Ok(()),
            GainFn::Scale { c } => {
                if c.is_finite() && *c >= 0.0 {
                    Ok(())
                } else {
                    bad(format!("scale factor {c} must be finite and non-negative"))
                }
            }
            GainFn::Power { coeff, exponent } => {
                if !(coeff.is_finite() && *coeff >= 0.0) {
                    bad(format!("power coefficient {coeff} must be finite and non-negative"))
                } else if !(exponent.is_finite() && *exponent > 0.0) {
                    bad(format!("power exponent {exponent} must be positive"))
                } else {
                    Ok(())
                }
            }
            GainFn::SqrtScale { c } => {
                if c.is_finite() && *c > 0.0 {
                    Ok(())
                } else {
                    bad(format!("sqrt divisor {c} must be positive"))
                }
            }
            GainFn::Sum { terms } | GainFn::Max { terms } => {
                if terms.is_empty() {
                    return bad("sum/max needs at least one term".into());
                }
                terms.iter().try_for_each(GainFn::validate)
            }
            GainFn::Compose { outer, inner } => {
                outer.validate()?;
                inner.validate()
            }
            GainFn::Table { knots } => {
                if knots.len() < 2 {
                    return bad("table needs at least two knots".into());
                }
                if knots[0] != [0.0, 0.0] {
                    return bad("table must start at [0, 0]".into());
                }
                if knots.iter().any(|k| !k[0].is_finite() || !k[1].is_finite()) {
                    return bad("table knots must be finite".into());
                }
                for w in knots.windows(2) {
                    if w[1][0] <= w[0][0] {
                        return bad("table abscissae must be strictly increasing".into());
                    }
                    if w[1][1] < w[0][1] {
                        return bad("table values must be non-decreasing".into());
                    }
                }
                Ok(())
            }
            GainFn::Inverse { of } => of.validate(),
        }
    }

    /// Evaluate at `s >= 0`.
    pub fn eval(&self, s: f64) -> Result<f64, GainError> {
        if s.is_nan() || s == f64::INFINITY {
            return Err(GainError::NonFiniteInput(s));
        }
        if s < 0.0 {
            return Err(GainError::NegativeInput(s));
        }
        self.eval_at(s)
    }

    fn eval_at(&self, s: f64) -> Result<f64, GainError> {
        Ok(match self {
            GainFn::Zero => 0.0,
            GainFn::Identity => s,
            GainFn::Scale { c } => c * s,
            GainFn::Power { coeff, exponent } => {
                if s == 0.0 {
                    0.0
                } else {
                    coeff * s.powf(*exponent)
                }
            }
            GainFn::SqrtScale { c } => (s / c).sqrt(),
            GainFn::Sum { terms } => {
                let mut acc = 0.0;
                for t in terms {
                    acc += t.eval_at(s)?;
                }
                acc
            }
            GainFn::Max { terms } => {
                let mut acc = f64::NEG_INFINITY;
                for t in terms {
                    acc = acc.max(t.eval_at(s)?);
                }
                acc
            }
            GainFn::Compose { outer, inner } => {
                let v = inner.eval_at(s)?;
                if v.is_nan() || v < 0.0 {
                    return Err(GainError::NegativeInput(v));
                }
                outer.eval_at(v)?
            }
            GainFn::Table { knots } => table_eval(knots, s),
            GainFn::Inverse { of } => invert(of, s, s)?,
        })
    }

    /// Exact slope if this gain is linear (`c * s`), used to fold linear
    /// inverses into closed form.
    pub fn linear_slope(&self) -> Option<f64> {
        match self {
            GainFn::Zero => Some(0.0),
            GainFn::Identity => Some(1.0),
            GainFn::Scale { c } => Some(*c),
            GainFn::Power { coeff, exponent } if *exponent == 1.0 => Some(*coeff),
            _ => None,
        }
    }
}

fn table_eval(knots: &[[f64; 2]], s: f64) -> f64 {
    let n = knots.len();
    if n == 1 {
        return knots[0][1];
    }
    let seg = match knots.iter().position(|k| k[0] > s) {
        Some(0) => 0,
        Some(i) => i - 1,
        None => n - 2,
    };
    let [s0, v0] = knots[seg];
    let [s1, v1] = knots[seg + 1];
    v0 + (v1 - v0) * (s - s0) / (s1 - s0)
}

/// Solve `g(s) = y` for a class-K gain.
///
/// The bracket `[0, hi]` starts at `max(s_hint, 1)` and doubles until
/// `g(hi) >= y` or `hi` would exceed [`BRACKET_CAP`]; bisection then runs
/// until `|g(s) - y| <= 1e-12 * max(1, y)` or the bracket collapses to
/// adjacent floats.
pub fn invert(g: &GainFn, y: f64, s_hint: f64) -> Result<f64, GainError> {
    if !y.is_finite() {
        return Err(GainError::NonFiniteInput(y));
    }
    if y < 0.0 {
        return Err(GainError::NegativeInput(y));
    }
    let tol = 1e-12 * y.max(1.0);
    let g0 = g.eval(0.0)?;
    if (g0 - y).abs() <= tol && y == 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = if s_hint.is_finite() && s_hint > 1.0 { s_hint } else { 1.0 };
    loop {
        let v = g.eval(hi)?;
        if (v - y).abs() <= tol {
            return Ok(hi);
        }
        if v > y {
            break;
        }
        lo = hi;
        if hi * 2.0 > BRACKET_CAP {
            return Err(GainError::Range { y, cap: BRACKET_CAP });
        }
        hi *= 2.0;
    }
    let mut best = (f64::INFINITY, hi);
    for _ in 0..4096 {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = g.eval(mid)?;
        let err = (v - y).abs();
        if err < best.0 {
            best = (err, mid);
        }
        if err <= tol {
            return Ok(mid);
        }
        if v < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    for cand in [lo, hi] {
        let err = (g.eval(cand)? - y).abs();
        if err < best.0 {
            best = (err, cand);
        }
    }
    if best.0 <= tol {
        Ok(best.1)
    } else {
        Err(GainError::InvertStalled { y, residual: best.0 })
    }
}

fn validate_grid(grid: &[f64]) -> Result<(), GainError> {
    if grid.is_empty() {
        return Err(GainError::EmptyGrid);
    }
    if grid.iter().any(|s| !s.is_finite() || *s < 0.0) || grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(GainError::UnsortedGrid);
    }
    Ok(())
}

/// Check the declared class on a sorted grid, with the default K∞ growth
/// floor [`DEFAULT_GROWTH_FLOOR`].
pub fn check_class(g: &GainFn, declared: GainClass, grid: &[f64]) -> Result<Certificate, GainError> {
    check_class_with(g, declared, grid, DEFAULT_GROWTH_FLOOR)
}

/// Class check with an explicit K∞ growth floor.
///
/// Components: `zero_at_zero` (|g(0)|), `nonnegative` (−g(s), strict for K
/// at s > 0), `monotone` (g(s_i) − g(s_{i+1}), strict for K), and for K∞
/// `growth` (floor − g(s_max)). Evaluation errors count as `+inf`.
pub fn check_class_with(
    g: &GainFn,
    declared: GainClass,
    grid: &[f64],
    growth_floor: f64,
) -> Result<Certificate, GainError> {
    validate_grid(grid)?;
    let strict = declared != GainClass::N;
    let value = |s: f64| g.eval(s).unwrap_or(f64::INFINITY);

    let mut zero = Tracker::new("zero_at_zero");
    let g0 = g.eval(0.0).map(f64::abs).unwrap_or(f64::INFINITY);
    zero.observe(g0, &[("s", 0.0)]);

    let values: Vec<f64> = grid.iter().map(|&s| value(s)).collect();
    let mut nonneg = Tracker::new("nonnegative");
    for (&s, &v) in grid.iter().zip(&values) {
        let r = if strict && s > 0.0 { strict_residual(0.0, v) } else { -v };
        nonneg.observe(r, &[("s", s)]);
    }

    let mut mono = Tracker::new("monotone");
    for (w, v) in grid.windows(2).zip(values.windows(2)) {
        if w[0] == w[1] {
            continue;
        }
        let r = if strict { strict_residual(v[0], v[1]) } else { v[0] - v[1] };
        mono.observe(r, &[("s", w[0]), ("s_next", w[1])]);
    }

    let mut components = vec![zero.finish(), nonneg.finish(), mono.finish()];
    if declared == GainClass::KInf {
        let s_max = *grid.last().expect("non-empty");
        let mut growth = Tracker::new("growth");
        growth.observe(growth_floor - value(s_max), &[("s", s_max)]);
        components.push(growth.finish());
    }
    let name = match declared {
        GainClass::N => "class_n",
        GainClass::K => "class_k",
        GainClass::KInf => "class_k_inf",
    };
    Ok(Certificate::from_components(name, describe_axis("s", grid), components))
}
