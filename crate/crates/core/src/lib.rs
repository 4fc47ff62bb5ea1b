//! Post-double-selection inference for heterogeneous treatment effects in
//! wage equations, with a lasso solver, multiplier bootstrap, Oaxaca-Blinder
//! decompositions and a synthetic data generator.

pub mod bootstrap;
pub mod dataprep;
pub mod decompose;
pub mod dsinfer;
pub mod error;
pub mod lasso;
pub mod linalg;
pub mod par;
pub mod report;
pub mod rng;
pub mod stats;
pub mod synth;

pub use error::{Category, Error, Result};
pub use par::Execution;
