//! Statevector simulation of fermionic QAOA with a self-consistent local-field
//! mixer, applied to selecting demand-response participants.
//!
//! The pipeline: estimate per-hour demand statistics, build the cost diagonal
//! of a period over the fixed-`M` subspace, solve the mean-field problem for
//! the initial state and local fields, optimise the ansatz angles and report
//! negawatt statistics and excess cost.

pub mod ansatz;
pub mod basis;
pub mod cli;
pub mod config;
pub mod dense;
pub mod error;
pub mod hf;
pub mod linalg;
pub mod metrics;
pub mod optimizer;
pub mod pipeline;
pub mod portfolio;

pub use error::{Error, Result};
