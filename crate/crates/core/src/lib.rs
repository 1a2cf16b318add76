//! Smooth feedforward networks viewed as maps between manifolds: exact
//! Jacobians, rank certificates for the empirical loss, slope-regularization
//! experiments and a command-line front end.

pub mod calculus;
pub mod cli;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod network;
pub mod training;

pub use data::Dataset;
pub use error::{Error, Result};
pub use network::{Activation, Architecture, WeightSet};
