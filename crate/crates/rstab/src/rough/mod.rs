//! Grid-sampled rough paths: storage, Chen reconstruction, variation norms, lifts and integrals.

pub mod integral;
pub mod io;
pub mod lift;
pub mod path;
pub mod pvar;

pub use integral::{local_error, rough_integral, sewing_bound, IntegralResult};
pub use lift::{lift_ito, lift_piecewise_linear};
pub use path::{ControlledPath, GridPath, RoughPathGrid, Window};
pub use pvar::{
    norm_of_kind, pvar_norm, pvar_power, qvar_area_norm, qvar_area_power, rough_norm, rough_power,
    variation_dp, IncrementalVariation, NormKind, RoughNormTracker,
};
