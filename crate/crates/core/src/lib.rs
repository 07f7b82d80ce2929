// NaN must fail parameter checks, so `!(x > 0.0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod gain;
pub mod iss;
pub mod linalg;
pub mod catalog;
pub mod design;
pub mod parallel;
pub mod report;
pub mod sim;
pub mod systems;

// The guide under book/ is compiled as doctests, one module per chapter.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/gains.md")]
    pub mod gains {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    pub mod simulation {}
    #[doc = include_str!("../../../book/src/systems.md")]
    pub mod systems {}
    #[doc = include_str!("../../../book/src/design.md")]
    pub mod design {}
    #[doc = include_str!("../../../book/src/probes.md")]
    pub mod probes {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
