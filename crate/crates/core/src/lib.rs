//! Covariate-dependent Gaussian graphical models by weighted
//! pseudo-likelihood with spike-and-slab variational inference.

pub mod dataset;
pub mod error;
pub mod graph;
pub mod hyperparam;
pub mod kernel_weights;
pub mod simulation;
pub mod vi;

pub use error::{Result, WplError};
