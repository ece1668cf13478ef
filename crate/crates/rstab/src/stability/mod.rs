//! Stability criteria assembled from Monte Carlo expectations, with verdicts, decay-rate fits and
//! the random radii.

pub mod continuous;
pub mod decay;
pub mod discrete;
pub mod ensemble;
pub mod radius;
pub mod report;

pub use continuous::{criterion_continuous, criterion_trivial, lambda_grid, CriterionParams};
pub use decay::fit_decay;
pub use discrete::{criterion_discrete, criterion_discrete_dissipative};
pub use ensemble::{EnsembleMember, Provenance, StationaryEnsemble};
pub use radius::{attractor_radius, radius_r, AttractorRadius, RadiusReport};
pub use report::{
    verdict, DecayFit, Frame, MeshGuard, ReportInputs, StabilityReport, SubCheck, TimeAverages, Verdict,
};
