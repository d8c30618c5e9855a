//! Least-squares polynomial chaos expansions with optimal and
//! coherence-optimal sampling designs.
//!
//! The numerical core is generic over [`Real`]; the aliases below fix the
//! scalar to `f64` (or `f32` with the `32` suffix).

pub mod design;
pub mod error;
pub mod models;
pub mod orthopoly;
pub mod sampling;
pub mod scalar;
pub mod seed;
pub mod solver;

pub use design::{Criterion, UpdateSign};
pub use error::{Error, Result};
pub use orthopoly::{cardinality, eval_univariate, gauss_rule, multi_index_set, PolyFamily, QuadratureRule};
pub use sampling::{CandidatePool, McmcConfig, Proposal, Strategy};
pub use scalar::Real;

pub type BasisSpec = orthopoly::BasisSpec<f64>;
pub type BasisSpec32 = orthopoly::BasisSpec<f32>;
pub type SampleSet = sampling::SampleSet<f64>;
pub type SampleSet32 = sampling::SampleSet<f32>;
pub type DesignState = design::DesignState<f64>;
pub type FitResult = solver::FitResult<f64>;
pub type StabilityReport = solver::StabilityReport<f64>;
