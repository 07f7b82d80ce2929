use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Named coordinates of the grid point that produced a residual.
pub type Witness = BTreeMap<String, f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// One inequality family inside a certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    #[serde(with = "crate::report::float")]
    pub worst_residual: f64,
    pub witness: Witness,
}

/// Outcome of checking a quantified inequality on a finite grid.
///
/// Residuals are `lhs - rhs`, so the verdict is [`Verdict::Pass`] exactly
/// when `worst_residual <= 0`. A NaN residual anywhere fails the certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub check: String,
    pub verdict: Verdict,
    #[serde(with = "crate::report::float")]
    pub worst_residual: f64,
    pub witness: Witness,
    pub grid: String,
    pub components: Vec<Component>,
}

impl Certificate {
    pub fn from_components(check: impl Into<String>, grid: impl Into<String>, components: Vec<Component>) -> Self {
        let mut worst = f64::NEG_INFINITY;
        let mut witness = Witness::new();
        for c in &components {
            if c.worst_residual.is_nan() {
                if !worst.is_nan() {
                    worst = f64::NAN;
                    witness = c.witness.clone();
                }
            } else if !worst.is_nan() && c.worst_residual > worst {
                worst = c.worst_residual;
                witness = c.witness.clone();
            }
        }
        Self {
            check: check.into(),
            verdict: verdict_of(worst),
            worst_residual: worst,
            witness,
            grid: grid.into(),
            components,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn component(&self, name: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.name == name)
    }

    /// Merge several certificates into one whose components are the union.
    pub fn combine(check: impl Into<String>, parts: &[Certificate]) -> Self {
        let grid = parts.iter().map(|c| c.grid.as_str()).filter(|g| !g.is_empty()).collect::<Vec<_>>().join(" | ");
        let components = parts
            .iter()
            .flat_map(|c| {
                c.components.iter().map(move |comp| Component {
                    name: format!("{}/{}", c.check, comp.name),
                    ..comp.clone()
                })
            })
            .collect();
        Self::from_components(check, grid, components)
    }
}

pub fn verdict_of(worst_residual: f64) -> Verdict {
    if worst_residual <= 0.0 {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

/// Running maximum of residuals for one component.
#[derive(Debug)]
pub struct Tracker {
    name: String,
    worst: f64,
    witness: Witness,
}

impl Tracker {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), worst: f64::NEG_INFINITY, witness: Witness::new() }
    }

    /// Record a residual. The first point attaining a new maximum is kept
    /// as witness; NaN is sticky.
    pub fn observe(&mut self, residual: f64, witness: &[(&str, f64)]) {
        if self.worst.is_nan() {
            return;
        }
        if residual.is_nan() || residual > self.worst {
            self.worst = residual;
            self.witness = witness.iter().map(|(k, v)| ((*k).to_string(), *v)).collect();
        }
    }

    pub fn worst(&self) -> f64 {
        self.worst
    }

    pub fn finish(self) -> Component {
        Component { name: self.name, worst_residual: self.worst, witness: self.witness }
    }
}

/// Residual for a strict inequality `lhs < rhs`: a zero gap must fail, so
/// non-negative gaps are pushed to at least the smallest positive float.
pub fn strict_residual(lhs: f64, rhs: f64) -> f64 {
    let diff = lhs - rhs;
    if diff >= 0.0 {
        diff.max(f64::MIN_POSITIVE)
    } else {
        diff
    }
}

/// Short description of a sampled axis for certificate metadata.
pub fn describe_axis(name: &str, points: &[f64]) -> String {
    match (points.first(), points.last()) {
        (Some(lo), Some(hi)) => format!("{name}: {} pts in [{lo:e}, {hi:e}]", points.len()),
        _ => format!("{name}: empty"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_follows_worst_residual() {
        let mut a = Tracker::new("a");
        a.observe(-1.0, &[("s", 1.0)]);
        a.observe(-0.5, &[("s", 2.0)]);
        let mut b = Tracker::new("b");
        b.observe(0.0, &[("t", 3.0)]);
        let cert = Certificate::from_components("demo", "", vec![a.finish(), b.finish()]);
        assert!(cert.passed());
        assert_eq!(cert.worst_residual, 0.0);
        assert_eq!(cert.witness["t"], 3.0);
    }

    #[test]
    fn nan_fails() {
        let mut a = Tracker::new("a");
        a.observe(-1.0, &[]);
        a.observe(f64::NAN, &[("s", 7.0)]);
        a.observe(5.0, &[("s", 8.0)]);
        let cert = Certificate::from_components("demo", "", vec![a.finish()]);
        assert!(!cert.passed());
        assert_eq!(cert.witness["s"], 7.0);
    }

    #[test]
    fn strict_boundary_fails() {
        assert!(strict_residual(1.0, 1.0) > 0.0);
        assert!(strict_residual(0.5, 1.0) < 0.0);
    }

    #[test]
    fn json_round_trip_with_infinite_residual() {
        let cert = Certificate::from_components("empty", "", vec![Tracker::new("none").finish()]);
        assert!(cert.passed());
        let s = serde_json::to_string(&cert).unwrap();
        let back: Certificate = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cert);
    }
}
