use serde::{Deserialize, Serialize};

use super::{GainError, GainFn};

/// Exponential KL envelope `σ(s, t) = amplitude(s) * exp(-rate * t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlEnvelope {
    pub amplitude: GainFn,
    pub rate: f64,
}

impl KlEnvelope {
    pub fn new(amplitude: GainFn, rate: f64) -> Result<Self, GainError> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(GainError::InvalidParameter(format!("decay rate {rate} must be positive")));
        }
        amplitude.validate()?;
        Ok(Self { amplitude, rate })
    }

    /// `c * s * exp(-rate * t)`.
    pub fn linear(c: f64, rate: f64) -> Result<Self, GainError> {
        Self::new(GainFn::scale(c), rate)
    }

    pub fn eval(&self, s: f64, t: f64) -> Result<f64, GainError> {
        Ok(self.amplitude.eval(s)? * (-self.rate * t.max(0.0)).exp())
    }
}
