//! File-based front end: CSV data in, per-individual probability and
//! adjacency matrices plus a JSON manifest out.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use error::{CliError, Result};
