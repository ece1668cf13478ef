//! Greedy stopping times for rough norms and for finite families of controls.

pub mod controls;
pub mod estimate;
pub mod greedy;

pub use controls::{
    audit_control, AreaVariationControl, Control, ControlAudit, ControlCursor, ControlSet, LinearControl,
    PathVariationControl, SupTimesLengthControl,
};
pub use estimate::{
    estimate_en, estimate_en_with_check, long_path_check, stopping_sequence, unit_counts, ControlBuilder,
    CountMode, EnReport, LongPathCheck,
};
pub use greedy::{
    audit_crossings, audit_interleaving, bound_nhat, bound_nstar, bound_nstar_controls, bound_nstar_kind,
    check_nsum, check_nsum_kind, count_nstar, greedy_times, greedy_times_controls, greedy_times_discrete,
    greedy_times_kind, InterleavingAudit, NsumAudit, StoppingSequence,
};
