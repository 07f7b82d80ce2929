//! JSON descriptions of systems.
//!
//! ```
//! use smallgain::catalog::SystemSpec;
//!
//! let spec: SystemSpec = serde_json::from_str(r#"{"kind": "linear_ode", "a": [[-1.0]]}"#).unwrap();
//! let sys = spec.build().unwrap();
//! assert_eq!(sys.state_dim(), 1);
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::{closed_loop_system, DesignError, LinearPlant};
use crate::linalg::Mat;
use crate::sim::{interconnect, Block, SimError, SystemDef};
use crate::systems::*;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatalogError {
    #[error("invalid system description: {0}")]
    Invalid(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Systems(#[from] SystemsError),
    #[error(transparent)]
    Design(#[from] DesignError),
}

/// `coeff * Π x_j^{powers_j}`, optionally multiplied by the input
/// component `input`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    #[serde(default)]
    pub powers: Vec<i32>,
    #[serde(default)]
    pub input: Option<usize>,
}

impl Monomial {
    fn eval(&self, x: &[f64], u: &[f64]) -> f64 {
        let mut v = self.coeff;
        for (xj, &p) in x.iter().zip(&self.powers) {
            if p != 0 {
                v *= xj.powi(p);
            }
        }
        if let Some(k) = self.input {
            v *= u[k];
        }
        v
    }
}

/// A system built from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemSpec {
    /// `x' = -x(τ_i)`, `τ_{i+1} = τ_i + 1`.
    #[serde(alias = "example-2.1")]
    ScalarSampled,
    /// `x' = -x([t])` with impulses at the integers, state `(x, x([t]))`.
    #[serde(alias = "example-2.2")]
    ImpulsiveFixed,
    /// Linear `z` driven by an impulsive `x`.
    #[serde(alias = "example-3.7")]
    ImpulsiveCascade(ImpulsiveCascadeSpec),
    /// Planar closed loop with state-dependent sampling.
    #[serde(alias = "example-4.1")]
    PlanarPlant(PlanarPlantSpec),
    /// The planar closed loop assembled from its two subsystems.
    PlanarPlantInterconnected(PlanarPlantSpec),
    /// `x' = Ax + Bu`.
    LinearOde {
        a: Mat,
        #[serde(default)]
        b: Option<Mat>,
    },
    /// `x_i' = Σ monomials`; `m` input components.
    PolyOde {
        equations: Vec<Vec<Monomial>>,
        #[serde(default)]
        m: usize,
    },
    /// `x' = Ax + Bk'x(τ_i) + Bu`, `τ_{i+1} = τ_i + exp(-w(τ_i)) r`.
    SampledLinear { a: Mat, b: Mat, k: Vec<f64>, r: f64 },
    /// Feedback interconnection: inputs `[y2, u]` and `[y1, u]`.
    Interconnection {
        first: Box<SystemSpec>,
        second: Box<SystemSpec>,
        #[serde(default)]
        dim_u: usize,
    },
}

impl SystemSpec {
    pub fn build(&self) -> Result<SystemDef, CatalogError> {
        Ok(match self {
            SystemSpec::ScalarSampled => make_scalar_sampled_2_1().0,
            SystemSpec::ImpulsiveFixed => make_impulsive_fixed_2_2().0,
            SystemSpec::ImpulsiveCascade(spec) => make_cascade_3_49(spec)?,
            SystemSpec::PlanarPlant(spec) => make_planar_4_13(spec)?,
            SystemSpec::PlanarPlantInterconnected(spec) => make_planar_4_13_interconnected(spec)?,
            SystemSpec::LinearOde { a, b } => {
                if !a.is_square() {
                    return Err(CatalogError::Invalid(format!("A is {}x{}", a.rows(), a.cols())));
                }
                let n = a.rows();
                let b = b.clone().unwrap_or_else(|| Mat::zeros(n, 0));
                if b.rows() != n {
                    return Err(CatalogError::Invalid(format!("B has {} rows, expected {n}", b.rows())));
                }
                let a = a.clone();
                let m = b.cols();
                SystemDef::leaf(Block::ode("linear_ode", n, m, move |c, dx| {
                    let ax = a.mul_vec(c.x);
                    for i in 0..n {
                        dx[i] = ax[i] + (0..m).map(|j| b[(i, j)] * c.u[j]).sum::<f64>();
                    }
                }))?
            }
            SystemSpec::PolyOde { equations, m } => {
                let n = equations.len();
                if n == 0 {
                    return Err(CatalogError::Invalid("polynomial system needs at least one equation".into()));
                }
                for term in equations.iter().flatten() {
                    if term.powers.len() > n {
                        return Err(CatalogError::Invalid(format!("monomial has {} powers for {n} states", term.powers.len())));
                    }
                    if term.input.is_some_and(|k| k >= *m) {
                        return Err(CatalogError::Invalid(format!("monomial reads input {:?} of {m}", term.input)));
                    }
                }
                let eqs = equations.clone();
                SystemDef::leaf(Block::ode("poly_ode", n, *m, move |c, dx| {
                    for (d, eq) in dx.iter_mut().zip(&eqs) {
                        *d = eq.iter().map(|t| t.eval(c.x, c.u)).sum();
                    }
                }))?
            }
            SystemSpec::SampledLinear { a, b, k, r } => {
                closed_loop_system(&LinearPlant::new(a.clone(), b.clone())?, k, *r)?
            }
            SystemSpec::Interconnection { first, second, dim_u } => interconnect(&first.build()?, &second.build()?, *dim_u)?,
        })
    }

    /// The closed-form transition map, for the systems that have one.
    pub fn oracle(&self) -> Option<AnalyticOracle> {
        match self {
            SystemSpec::ScalarSampled => Some(make_scalar_sampled_2_1().1),
            SystemSpec::ImpulsiveFixed => Some(make_impulsive_fixed_2_2().1),
            _ => None,
        }
    }
}
