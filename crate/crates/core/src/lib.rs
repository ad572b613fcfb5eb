//! Allocation-only core for measuring how Metropolis chains approach
//! stationarity on product targets.
//!
//! The crate is `no_std` (it needs `alloc`) and carries everything that is
//! pure computation:
//!
//! * [`target`]: one-dimensional component densities `h` and the product
//!   target `π_d(x) = ∏ h(x_i)`, with quadrature-checked normalisation and a
//!   tabulated inverse-CDF sampler for densities without a closed-form one.
//! * [`kr`]: the Kantorovich–Rubinstein distance between equal-size empirical
//!   measures on the line, i.e. Wasserstein-1 under the truncated metric
//!   `min(2, |x - y|)`, solved exactly as an assignment problem with a dual
//!   certificate, plus a fast exact monotone-matching route, cheap bounds and
//!   a brute-force oracle.
//! * [`kernels`]: random-walk Metropolis and Metropolis-adjusted Langevin
//!   transitions, sped-up time indexing and replica ensembles.
//! * [`diffusion`]: Euler–Maruyama simulation of the limiting Langevin
//!   diffusion and the random-walk speed/acceptance functions.
//!
//! Every random quantity is drawn from a [`rng::StreamRng`] derived from a
//! master seed and a tuple of indices, so results never depend on execution
//! order.

#![no_std]
// `!(x < y)` is used on purpose to reject NaN along with out-of-order values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod diffusion;
pub mod error;
pub mod kernels;
pub mod kr;
pub mod math;
pub mod quadrature;
pub mod rng;
pub mod stats;
pub mod target;

pub use error::Error;

pub type Result<T> = core::result::Result<T, Error>;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
