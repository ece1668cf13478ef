//! Reproducible studies on models with known answers.

pub mod counterexample;
pub mod fhn;
pub mod pitchfork;

pub use counterexample::{
    counterexample_model, logistic, run_counterexample, CounterexampleConfig, CounterexamplePath,
    CounterexampleReport, SweepPoint,
};
pub use fhn::{
    fhn_fixed_point, fhn_model, run_fhn, transform_ensemble, FhnConfig, FhnLevel, FhnParams, FhnReport, FixedPoint,
};
pub use pitchfork::{
    pitchfork_burn_in_ensemble, pitchfork_ensemble, pitchfork_exact, pitchfork_exact_path, pitchfork_model, pitchfork_pm_ensemble, pitchfork_stationary,
    run_pitchfork, scheme_convergence, ConvergenceStudy, PerturbedRun, PitchforkConfig, PitchforkReport,
    StationaryPoint,
};
