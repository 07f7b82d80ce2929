//! Transition maps of hybrid and sampled-data systems.
//!
//! A [`SystemDef`] is a list of [`Block`]s, each with its own state slice,
//! vector field, optional jump map, output map and [`Partition`]. A single
//! block is built with [`SystemDef::leaf`]; feedback loops with
//! [`interconnect`]. [`simulate`] produces a [`Trajectory`] whose realized
//! sampling set is the generated partition (or the whole interval when no
//! block generates one).
//!
//! ```
//! use smallgain::sim::{simulate, Block, Inputs, SimOptions, SystemDef};
//!
//! // x' = -x
//! let sys = SystemDef::leaf(Block::ode("decay", 1, 0, |c, dx| dx[0] = -c.x[0])).unwrap();
//! let traj = simulate(&sys, 0.0, &[1.0], &Inputs::none(), 1.0, &SimOptions::default()).unwrap();
//! assert!((traj.final_state()[0] - (-1.0f64).exp()).abs() < 1e-12);
//! ```

mod checks;
mod engine;
pub mod rng;
mod signal;
mod system;
mod trajectory;

use thiserror::Error;

pub use checks::{causality_check, restart_mismatch, shared_record_deviation, weak_semigroup_check, Scenario};
pub use engine::{simulate, SimOptions};
pub use signal::{Inputs, Signal};
pub use system::{
    interconnect, Block, Ctx, FlowFn, JumpFn, OutputFn, Partition, PeriodFn, Sample, Source, SystemDef,
};
pub use trajectory::{norm, Event, SamplingSet, Status, Trajectory, TrajectoryMeta};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error("invalid input signal: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("incompatible sampling partitions: {0}")]
    IncompatiblePartitions(String),
    #[error("{0} is not a realized sampling time; use restart_mismatch")]
    NotASamplingTime(f64),
    #[error("no record at t = {0}")]
    NoRecordAt(f64),
}
