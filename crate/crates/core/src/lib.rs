//! Simulation laboratory for rates of convergence in the weak invariance
//! principle.
//!
//! The crate is organised bottom-up:
//!
//! - [`dynsys`]: the doubling map, the LSV intermittent map and its
//!   first-return map on `(1/2, 1]`, plus reproducible orbit samplers.
//! - [`suspension`]: suspension semiflows under a roof function, lap numbers
//!   and lap-split quadrature of observables along the flow.
//! - [`decomp`]: transfer operators, martingale–coboundary decompositions and
//!   the limiting covariance `Σ`.
//! - [`pathspace`]: piecewise-linear sample paths (`B_n`, `W_n`, Brownian
//!   motion), the reversal operator `h` and exact uniform distances.
//! - [`otmetrics`]: exact 1-Wasserstein and Prokhorov distances between
//!   uniform empirical measures on path space.
//! - [`ratelab`]: experiment configuration, Monte Carlo rate runs, log-log
//!   fits and the theoretical exponents they are compared against.

pub mod decomp;
pub mod dynsys;
pub mod observable;
pub mod otmetrics;
pub mod pathspace;
pub mod ratelab;
pub mod rng;
pub mod suspension;

pub use observable::{FnObservable, Observable};
