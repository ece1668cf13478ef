//! Numerical stability analysis for rough differential equations
//!
//! ```text
//! dy = f(y) dt + g(y) dx
//! ```
//!
//! driven by sampled fractional Brownian motion. The crate builds level-2 lifts on uniform
//! grids, computes exact p-variation norms and greedy stopping times, runs the pure rough flow
//! and a Milstein-type scheme, and evaluates Monte Carlo stability criteria.

pub mod error;
pub mod experiments;
pub mod fields;
pub mod flow;
pub mod linalg;
pub mod mc;
pub mod noise;
pub mod rough;
pub mod schemes;
pub mod stability;
pub mod stopping;

pub use error::{Error, Result};
