//! Monte Carlo estimates of the expected stopping count over unit windows, with a long-path
//! check that `τ_n / n` is not much below `1 / E N*`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::controls::ControlSet;
use super::greedy::{greedy_times_controls, greedy_times_discrete, greedy_times_kind, StoppingSequence};
use crate::error::{Error, Result};
use crate::mc::{estimate, Estimate};
use crate::noise::{sample_lift, NoiseSpec};
use crate::rough::path::RoughPathGrid;
use crate::rough::{NormKind, Window};

/// Builds a control set for one sampled lift.
pub type ControlBuilder = Arc<dyn for<'r> Fn(&'r RoughPathGrid) -> Result<ControlSet<'r>> + Send + Sync>;

/// What the stopping rule tracks.
#[derive(Clone)]
pub enum CountMode {
    Norm(NormKind),
    /// Control set; `discrete` selects the two-branch discrete rule.
    Controls { build: ControlBuilder, discrete: bool },
}

impl std::fmt::Debug for CountMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CountMode::Norm(k) => write!(f, "Norm({k:?})"),
            CountMode::Controls { discrete, .. } => write!(f, "Controls {{ discrete: {discrete} }}"),
        }
    }
}

/// Stopping sequence of the given mode over a window.
pub fn stopping_sequence(
    rp: &RoughPathGrid,
    p: f64,
    gamma: f64,
    window: Window,
    mode: &CountMode,
) -> Result<StoppingSequence> {
    match mode {
        CountMode::Norm(kind) => greedy_times_kind(rp, p, gamma, window, *kind),
        CountMode::Controls { build, discrete } => {
            let s = build(rp)?;
            if *discrete {
                greedy_times_discrete(&s, gamma, window)
            } else {
                greedy_times_controls(&s, gamma, window)
            }
        }
    }
}

pub(crate) fn unit_spec(spec: &NoiseSpec) -> Result<NoiseSpec> {
    spec.validate()?;
    let per_unit = spec.fine_steps as f64 / spec.horizon;
    let n = per_unit.round() as usize;
    if n < 2 || (per_unit - n as f64).abs() > 1e-9 * per_unit {
        return Err(Error::config(
            "noise.fine_steps",
            "must give a whole number (≥ 2) of steps per unit time",
        ));
    }
    Ok(spec.with_horizon(1.0, n))
}

/// Counts `N*` on `[0, 1]` for `n_paths` independent replicates of `spec`.
pub fn unit_counts(spec: &NoiseSpec, p: f64, gamma: f64, mode: &CountMode, n_paths: usize) -> Result<Vec<f64>> {
    let unit = unit_spec(spec)?;
    (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let rp = sample_lift(&unit.replicate(i))?;
            let seq = stopping_sequence(&rp, p, gamma, rp.path().full_window(), mode)?;
            Ok(seq.count() as f64)
        })
        .collect()
}

/// `Ê N*(γ, ·, [0, 1])` with its standard error.
pub fn estimate_en(spec: &NoiseSpec, p: f64, gamma: f64, mode: &CountMode, n_paths: usize) -> Result<Estimate> {
    if n_paths < 2 {
        return Err(Error::domain("need at least two paths for a standard error"));
    }
    Ok(estimate(&unit_counts(spec, p, gamma, mode, n_paths)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LongPathCheck {
    /// Index `n` of the stopping time examined.
    pub n: usize,
    pub tau_n: f64,
    pub ratio: f64,
    /// `(1 − tolerance) / Ê N*`.
    pub threshold: f64,
    pub horizon: f64,
    pub holds: bool,
}

/// Follows one long path until `n_stops` stopping times exist, then compares `τ_n / n` with
/// `(1 − tolerance) / en`.
pub fn long_path_check(
    spec: &NoiseSpec,
    p: f64,
    gamma: f64,
    mode: &CountMode,
    en: f64,
    n_stops: usize,
    tolerance: f64,
) -> Result<LongPathCheck> {
    let unit = unit_spec(spec)?;
    if !(en >= 1.0) || n_stops == 0 {
        return Err(Error::domain("long-path check needs E N* ≥ 1 and n ≥ 1"));
    }
    let per_unit = unit.fine_steps;
    let mut horizon = ((1.5 * n_stops as f64 / en).ceil() + 1.0).max(2.0);
    let long_seed = crate::mc::derive_seed(spec.seed, u64::MAX);
    for _ in 0..6 {
        let steps = (horizon as usize) * per_unit;
        let rp = sample_lift(&unit.with_horizon(horizon, steps).with_seed(long_seed))?;
        let seq = stopping_sequence(&rp, p, gamma, rp.path().full_window(), mode)?;
        let genuine = if seq.exhausted { seq.count() - 1 } else { seq.count() };
        if genuine >= n_stops {
            let tau_n = rp.path().time(seq.times[n_stops]);
            let ratio = tau_n / n_stops as f64;
            let threshold = (1.0 - tolerance) / en;
            return Ok(LongPathCheck {
                n: n_stops,
                tau_n,
                ratio,
                threshold,
                horizon,
                holds: ratio >= threshold,
            });
        }
        horizon *= 2.0;
    }
    Err(Error::numeric(format!(
        "fewer than {n_stops} stopping times on a path of length {horizon}"
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnReport {
    pub estimate: Estimate,
    pub long_path: Option<LongPathCheck>,
}

/// `estimate_en` followed by the long-path check at `n = 200` with a 10% tolerance.
pub fn estimate_en_with_check(
    spec: &NoiseSpec,
    p: f64,
    gamma: f64,
    mode: &CountMode,
    n_paths: usize,
) -> Result<EnReport> {
    let est = estimate_en(spec, p, gamma, mode, n_paths)?;
    let long_path = Some(long_path_check(spec, p, gamma, mode, est.mean, 200, 0.1)?);
    Ok(EnReport {
        estimate: est,
        long_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rough::rough_norm;

    #[test]
    fn huge_gamma_is_exactly_one() {
        let spec = NoiseSpec::fbm(0.45, 2, 1.0, 64, 2);
        let e = estimate_en(&spec, 2.5, 1e9, &CountMode::Norm(NormKind::Rough), 8).unwrap();
        assert_eq!((e.mean, e.stderr, e.n), (1.0, 0.0, 8));
    }

    #[test]
    fn mean_dominates_expected_norm_over_gamma() {
        let spec = NoiseSpec::fbm(0.45, 2, 1.0, 128, 4);
        let gamma = 0.5;
        let e = estimate_en(&spec, 2.5, gamma, &CountMode::Norm(NormKind::Rough), 32).unwrap();
        let norms: Vec<f64> = (0..32)
            .map(|i| {
                let rp = sample_lift(&spec.replicate(i)).unwrap();
                rough_norm(&rp, 2.5, rp.path().full_window()).unwrap()
            })
            .collect();
        assert!(e.mean >= estimate(&norms).mean / gamma);
    }

    #[test]
    fn deterministic_across_runs() {
        let spec = NoiseSpec::fbm(0.4, 1, 1.0, 64, 77);
        let m = CountMode::Norm(NormKind::PathOnly);
        assert_eq!(
            unit_counts(&spec, 2.6, 0.3, &m, 10).unwrap(),
            unit_counts(&spec, 2.6, 0.3, &m, 10).unwrap()
        );
    }

    #[test]
    fn too_few_paths_rejected() {
        let spec = NoiseSpec::fbm(0.45, 1, 1.0, 64, 1);
        assert!(estimate_en(&spec, 2.5, 1.0, &CountMode::Norm(NormKind::Rough), 1).is_err());
    }
}
