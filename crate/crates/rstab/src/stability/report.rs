use serde::{Deserialize, Serialize};

use crate::mc::Estimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    /// Process exit code: 0 pass, 1 fail, 2 inconclusive.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::Inconclusive => 2,
        }
    }
}

/// Pass when `lhs − rhs` exceeds twice the combined standard error, fail when `rhs − lhs` does.
pub fn verdict(lhs: &Estimate, rhs: &Estimate) -> Verdict {
    let gap = lhs.mean - rhs.mean;
    let se = (lhs.stderr.powi(2) + rhs.stderr.powi(2)).sqrt();
    if !gap.is_finite() || !se.is_finite() {
        return Verdict::Inconclusive;
    }
    if gap > 2.0 * se {
        Verdict::Pass
    } else if -gap > 2.0 * se {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    }
}

/// Coordinates in which the model was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    #[default]
    Raw,
    LyapunovTransformed,
}

/// A secondary inequality reported next to the main one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubCheck {
    pub name: String,
    pub lhs: Estimate,
    pub rhs: Estimate,
    pub verdict: Verdict,
}

impl SubCheck {
    pub fn new(name: impl Into<String>, lhs: Estimate, rhs: Estimate) -> Self {
        SubCheck {
            name: name.into(),
            verdict: verdict(&lhs, &rhs),
            lhs,
            rhs,
        }
    }
}

/// Constants the verdict was computed with.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReportInputs {
    pub p: f64,
    pub c_p: f64,
    pub lambda: Option<f64>,
    pub gamma_star: Option<f64>,
    pub c_g: Option<f64>,
    pub l_g: Option<f64>,
    pub delta: Option<f64>,
    pub n_paths: usize,
    pub ensemble_size: usize,
}

/// Fitted exponential decay rate `μ̂` with a 95% band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub mu: f64,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    /// Fewer than ten usable points before the separation underflowed.
    pub inconclusive: bool,
}

/// Ensemble expectations next to the same expectations as time averages along one path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeAverages {
    pub lhs: Estimate,
    pub rhs: Estimate,
    /// Some side differs from its ensemble counterpart by more than 3 combined standard errors.
    pub non_ergodic: bool,
}

/// Comparison of the right-hand side at the base mesh and at twice the resolution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshGuard {
    pub rhs_fine: Estimate,
    pub relative_change: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub criterion: String,
    pub lhs: Estimate,
    pub rhs: Estimate,
    pub verdict: Verdict,
    pub inputs: ReportInputs,
    pub frame: Frame,
    pub checks: Vec<SubCheck>,
    /// Largest ball radius `r` for which the `r`-dependent inequality still passes.
    pub r0: Option<f64>,
    /// Parameter value at which the inequality turns, when it can be solved for.
    pub critical: Option<(String, f64)>,
    pub time_averages: Option<TimeAverages>,
    pub mesh: Option<MeshGuard>,
    pub decay: Option<DecayFit>,
    pub notes: Vec<String>,
}

impl StabilityReport {
    pub(crate) fn new(criterion: &str, lhs: Estimate, rhs: Estimate, inputs: ReportInputs, frame: Frame) -> Self {
        StabilityReport {
            criterion: criterion.to_string(),
            verdict: verdict(&lhs, &rhs),
            lhs,
            rhs,
            inputs,
            frame,
            checks: Vec::new(),
            r0: None,
            critical: None,
            time_averages: None,
            mesh: None,
            decay: None,
            notes: Vec::new(),
        }
    }

    pub fn check(&self, name: &str) -> Option<&SubCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}
