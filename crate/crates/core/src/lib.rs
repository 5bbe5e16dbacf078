//! Two-relaxation-times lattice Boltzmann schemes for scalar conservation laws,
//! with the monotonicity analysis of the relaxation and reference oracles.

// `!(x >= 0.0)` is used deliberately so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod kernel;
pub mod monotonicity;
pub mod reference;
pub mod scheme;

pub use diagnostics::{Observer, RunReport, StepContext};
pub use error::{Error, Result};
pub use kernel::{GridSpec, InitialDatum, LatticeState, RunOptions, Simulation};
pub use monotonicity::{MagicBound, MonotonicityProblem, RegionRaster, StructuralReport, Verdict};
pub use reference::{GodunovOptions, MagicFdState, OracleSolution};
pub use scheme::{FluxModel, RelaxPair, SchemeSpec};
