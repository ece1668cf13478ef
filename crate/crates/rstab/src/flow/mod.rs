//! The pure rough flow, its Jacobian, the Doss–Sussmann factorization and a-priori estimate audits.

pub mod audit;
pub mod doss;
pub mod pure;

pub use audit::{audit_solest, audit_solestdiff, small_lambda_windows, AuditReport, InequalityCheck};
pub use doss::{doss_sussmann, DossSussmann, LAMBDA_MAX};
pub use pure::{solve_pure, window_lambda, DiffusionStepper, FlowParams, FlowSolution};
