//! Experiment runner for the `mcmclab-core` kernels: configuration files,
//! parallel Monte Carlo experiments, CSV/JSON outputs and the `mcmclab`
//! command line.

// `!(x < y)` is used on purpose to reject NaN along with out-of-order values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod expr;
pub mod io;
pub mod lab;

pub use error::{Error, Result};
