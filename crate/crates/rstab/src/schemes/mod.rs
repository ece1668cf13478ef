//! The discrete Milstein-type scheme, its discrete norms and window audits for the difference of
//! two runs.

pub mod audit;
pub mod euler;
pub mod norms;

pub use audit::{
    audit_hnew, audit_hnew_run, constant_k, scheme_controls, DecayCheck, HnewWindow, SchemeConstants,
};
pub use euler::{burn_in, simulate, step, BurnIn, SchemeRun};
pub use norms::{discrete_norms, DiscreteNorms};
