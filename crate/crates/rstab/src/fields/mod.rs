//! System model, its sup-norm bounds and the scalar functionals built from them.

pub mod coords;
pub mod functionals;
pub mod model;

pub use coords::{lyapunov_solve, optimal_coordinate_change, CoordinateChange};
pub use functionals::{
    audit_fdiff, ball_points, certify_bounds, cg_constant, cg_star_local, default_samples, df_sup, ell,
    ell_of_matrix, kappa, lg_constant, lg_reduced, m_bound, osc_df, probe_bounds, sewing_constant,
    sewing_constant_or, BoundsCertificate, SampledSup,
};
pub use model::{
    Ball, BoundsProvenance, Diffusion, DiffusionSpec, Dissipativity, Drift, DriftSpec, GBounds, Growth,
    ModelConfig, PolyTerm, SystemModel,
};
