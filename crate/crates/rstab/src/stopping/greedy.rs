//! Greedy stopping times on a grid: cut at the first instant where the tracked quantity since
//! the previous cut reaches `γ`, capping at the window end.

use serde::Serialize;

use super::controls::ControlSet;
use crate::error::{Error, Result};
use crate::rough::path::RoughPathGrid;
use crate::rough::pvar::check_rough_exponent;
use crate::rough::{norm_of_kind, pvar_power, rough_power, NormKind, RoughNormTracker, Window};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoppingSequence {
    /// Grid indices, starting at the window's left end.
    pub times: Vec<usize>,
    pub gamma: f64,
    /// The last time is the window end reached without a crossing.
    pub exhausted: bool,
}

impl StoppingSequence {
    /// Number of intervals, i.e. the count of times strictly before the window end plus one.
    pub fn count(&self) -> usize {
        self.times.len() - 1
    }

    pub fn intervals(&self) -> impl Iterator<Item = Window> + '_ {
        self.times.windows(2).map(|w| Window {
            start: w[0],
            end: w[1],
        })
    }

    pub fn instants(&self, grid: &[f64]) -> Vec<f64> {
        self.times.iter().map(|&k| grid[k]).collect()
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::domain(format!("gamma must be positive and finite, got {gamma}")));
    }
    Ok(())
}

/// Greedy cuts driven by any monotone quantity `advance()` produced from a fresh start.
fn greedy_with<C>(
    w: Window,
    gamma: f64,
    mut start: impl FnMut(usize) -> C,
    mut advance: impl FnMut(&mut C) -> f64,
) -> StoppingSequence {
    let mut times = vec![w.start];
    let mut exhausted = false;
    let mut s = w.start;
    while s < w.end {
        let mut cur = start(s);
        let mut k = s;
        loop {
            k += 1;
            let v = advance(&mut cur);
            if v >= gamma {
                break;
            }
            if k == w.end {
                exhausted = true;
                break;
            }
        }
        times.push(k);
        s = k;
    }
    StoppingSequence {
        times,
        gamma,
        exhausted,
    }
}

/// Greedy stopping times for the rough norm over `window`.
pub fn greedy_times(rp: &RoughPathGrid, p: f64, gamma: f64, window: Window) -> Result<StoppingSequence> {
    greedy_times_kind(rp, p, gamma, window, NormKind::Rough)
}

/// Greedy stopping times for the chosen norm kind.
pub fn greedy_times_kind(
    rp: &RoughPathGrid,
    p: f64,
    gamma: f64,
    window: Window,
    kind: NormKind,
) -> Result<StoppingSequence> {
    check_gamma(gamma)?;
    check_rough_exponent(p)?;
    rp.path().check_window(window)?;
    Ok(greedy_with(
        window,
        gamma,
        |s| RoughNormTracker::new(rp, p, kind, s),
        |t| t.extend(),
    ))
}

/// `N*`: the number of intervals of a sequence built on a closed window.
pub fn count_nstar(seq: &StoppingSequence) -> usize {
    seq.count()
}

/// `1 + |||x|||^p / γ^p` over the window.
pub fn bound_nstar(rp: &RoughPathGrid, p: f64, gamma: f64, window: Window) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(1.0 + rough_power(rp, p, window)? / gamma.powf(p))
}

/// Same bound for a norm kind.
pub fn bound_nstar_kind(rp: &RoughPathGrid, p: f64, gamma: f64, window: Window, kind: NormKind) -> Result<f64> {
    check_gamma(gamma)?;
    let power = match kind {
        NormKind::Rough => rough_power(rp, p, window)?,
        NormKind::PathOnly => pvar_power(rp.path(), p, window)?,
    };
    Ok(1.0 + power / gamma.powf(p))
}

fn check_set_window(s: &ControlSet, w: Window) -> Result<()> {
    if w.start >= w.end || w.end >= s.grid_len() {
        return Err(Error::domain(format!(
            "window [{}, {}] outside a control grid of {} instants",
            w.start,
            w.end,
            s.grid_len()
        )));
    }
    Ok(())
}

/// Greedy times with trigger `Σ_w (w_{τ_i,t})^{β_w}` first reaching `γ`.
pub fn greedy_times_controls(s: &ControlSet, gamma: f64, window: Window) -> Result<StoppingSequence> {
    check_gamma(gamma)?;
    check_set_window(s, window)?;
    Ok(greedy_with(window, gamma, |k| s.cursors(k), |c| c.advance()))
}

/// Discrete rule: a single step if it already exceeds `γ`, otherwise the last instant where the
/// trigger stays `≤ γ`.
pub fn greedy_times_discrete(s: &ControlSet, gamma: f64, window: Window) -> Result<StoppingSequence> {
    check_gamma(gamma)?;
    check_set_window(s, window)?;
    let mut times = vec![window.start];
    let mut exhausted = false;
    let mut k = window.start;
    while k < window.end {
        let mut cur = s.cursors(k);
        let next = if cur.advance() > gamma {
            k + 1
        } else {
            let mut l = k + 1;
            while l < window.end && cur.advance() <= gamma {
                l += 1;
            }
            exhausted = l == window.end;
            l
        };
        times.push(next);
        k = next;
    }
    Ok(StoppingSequence {
        times,
        gamma,
        exhausted,
    })
}

/// `N*(γ, S, I) < 1 + γ^{-1/β} |S|^{1/β−1} Σ_w (w_I)^{β_w/β}`.
pub fn bound_nstar_controls(s: &ControlSet, gamma: f64, window: Window) -> Result<f64> {
    check_gamma(gamma)?;
    check_set_window(s, window)?;
    let beta = s.beta_min();
    let n = s.len() as f64;
    Ok(1.0 + gamma.powf(-1.0 / beta) * n.powf(1.0 / beta - 1.0) * s.weighted_total(window))
}

/// `N̂ < 2 + 2 γ^{-1/β} |S|^{1/β−1} Σ_w (w_I)^{β_w/β}`.
pub fn bound_nhat(s: &ControlSet, gamma: f64, window: Window) -> Result<f64> {
    Ok(2.0 * bound_nstar_controls(s, gamma, window)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NsumAudit {
    pub lhs: usize,
    pub rhs: usize,
    pub holds: bool,
}

/// `Σ_j N*(γ, x, [t_j, t_{j+1}]) ≤ N*(γ, x, [t_0, t_n]) + n`.
pub fn check_nsum(rp: &RoughPathGrid, p: f64, gamma: f64, cuts: &[usize]) -> Result<NsumAudit> {
    check_nsum_kind(rp, p, gamma, cuts, NormKind::Rough)
}

pub fn check_nsum_kind(
    rp: &RoughPathGrid,
    p: f64,
    gamma: f64,
    cuts: &[usize],
    kind: NormKind,
) -> Result<NsumAudit> {
    if cuts.len() < 2 {
        return Err(Error::domain("need at least two cut points"));
    }
    let mut lhs = 0;
    for c in cuts.windows(2) {
        lhs += greedy_times_kind(rp, p, gamma, Window::new(c[0], c[1])?, kind)?.count();
    }
    let whole = Window::new(cuts[0], *cuts.last().unwrap())?;
    let rhs = greedy_times_kind(rp, p, gamma, whole, kind)?.count() + cuts.len() - 1;
    Ok(NsumAudit {
        lhs,
        rhs,
        holds: lhs <= rhs,
    })
}

/// Worst violation of "below `γ` before each cut, at least `γ` at it" for a norm-driven sequence.
/// Returns `None` when the defining property holds on every interval.
pub fn audit_crossings(
    rp: &RoughPathGrid,
    p: f64,
    kind: NormKind,
    seq: &StoppingSequence,
) -> Result<Option<String>> {
    let last = *seq.times.last().unwrap();
    for w in seq.intervals() {
        if w.end - w.start > 1 {
            let before = norm_of_kind(rp, p, kind, Window::new(w.start, w.end - 1)?)?;
            if before >= seq.gamma {
                return Ok(Some(format!("norm {before} ≥ γ before the cut at {}", w.end)));
            }
        }
        let at = norm_of_kind(rp, p, kind, w)?;
        if at < seq.gamma && !(w.end == last && seq.exhausted) {
            return Ok(Some(format!("norm {at} < γ at the cut {}", w.end)));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterleavingAudit {
    /// Largest number of discrete times inside one continuous interval `[τ*_i, τ*_{i+1})`.
    pub max_between: usize,
    pub holds: bool,
}

/// Counts discrete stopping times falling in each half-open continuous interval.
pub fn audit_interleaving(continuous: &StoppingSequence, discrete: &StoppingSequence) -> InterleavingAudit {
    let mut max_between = 0;
    for w in continuous.intervals() {
        let c = discrete
            .times
            .iter()
            .filter(|&&t| t >= w.start && t < w.end)
            .count();
        max_between = max_between.max(c);
    }
    InterleavingAudit {
        max_between,
        holds: max_between <= 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{sample_lift, NoiseSpec};
    use crate::rough::lift_piecewise_linear;
    use crate::rough::path::{uniform_times, GridPath};
    use crate::stopping::controls::{Control, LinearControl, PathVariationControl};

    fn line(n: usize, horizon: f64) -> RoughPathGrid {
        let step = horizon / n as f64;
        let times = uniform_times(0.0, step, n + 1);
        let vals = times.clone();
        lift_piecewise_linear(&GridPath::new(times, vals, 1).unwrap())
    }

    #[test]
    fn huge_gamma_gives_one_interval() {
        let rp = sample_lift(&NoiseSpec::fbm(0.45, 2, 1.0, 64, 3)).unwrap();
        let w = rp.path().full_window();
        let seq = greedy_times(&rp, 2.5, 1e6, w).unwrap();
        assert_eq!(seq.times, vec![0, 64]);
        assert!(seq.exhausted);
        assert_eq!(count_nstar(&seq), 1);
    }

    #[test]
    fn monotone_line_cuts_at_unit_spacing() {
        let rp = line(32, 2.0);
        let seq = greedy_times_kind(&rp, 2.5, 1.0, rp.path().full_window(), NormKind::PathOnly).unwrap();
        assert_eq!(seq.times, vec![0, 16, 32]);
        assert!(!seq.exhausted);
        assert_eq!(count_nstar(&seq), 2);
    }

    #[test]
    fn nonpositive_gamma_is_rejected() {
        let rp = line(8, 1.0);
        assert!(greedy_times(&rp, 2.5, 0.0, rp.path().full_window()).is_err());
        assert!(greedy_times(&rp, 2.5, -1.0, rp.path().full_window()).is_err());
    }

    #[test]
    fn crossings_respect_the_grid_definition() {
        for seed in 0..5 {
            let rp = sample_lift(&NoiseSpec::fbm(0.4, 2, 1.0, 256, seed)).unwrap();
            let w = rp.path().full_window();
            for kind in [NormKind::Rough, NormKind::PathOnly] {
                let seq = greedy_times_kind(&rp, 2.6, 0.4, w, kind).unwrap();
                assert_eq!(audit_crossings(&rp, 2.6, kind, &seq).unwrap(), None);
                assert!(seq.count() as f64 <= bound_nstar_kind(&rp, 2.6, 0.4, w, kind).unwrap());
            }
        }
    }

    #[test]
    fn path_only_overshoot_is_at_most_one_step() {
        let rp = sample_lift(&NoiseSpec::fbm(0.4, 1, 1.0, 256, 9)).unwrap();
        let seq = greedy_times_kind(&rp, 2.5, 0.3, rp.path().full_window(), NormKind::PathOnly).unwrap();
        for w in seq.intervals() {
            let n = norm_of_kind(&rp, 2.5, NormKind::PathOnly, w).unwrap();
            let last_step = rp.path().increment_norm(w.end - 1, w.end);
            assert!(n <= 0.3 + last_step + 1e-12);
        }
    }

    #[test]
    fn linear_control_cuts_at_fixed_spacing() {
        let times = uniform_times(0.0, 1.0 / 64.0, 65);
        let lin = LinearControl::new(4.0, &times, "drift").unwrap();
        let s = ControlSet::new(vec![Box::new(lin)]).unwrap();
        let seq = greedy_times_controls(&s, 0.25, Window::new(0, 64).unwrap()).unwrap();
        assert_eq!(seq.times, (0..=64).step_by(4).collect::<Vec<_>>());
    }

    #[test]
    fn discrete_rule_branches() {
        let times = uniform_times(0.0, 0.1, 21);
        let big = ControlSet::new(vec![Box::new(LinearControl::new(10.0, &times, "big").unwrap())]).unwrap();
        let seq = greedy_times_discrete(&big, 0.5, Window::new(0, 20).unwrap()).unwrap();
        assert_eq!(seq.times, (0..=20).collect::<Vec<_>>());

        let zero = ControlSet::new(vec![Box::new(LinearControl::new(0.0, &times, "zero").unwrap())]).unwrap();
        let seq = greedy_times_discrete(&zero, 0.5, Window::new(0, 20).unwrap()).unwrap();
        assert_eq!(seq.times, vec![0, 20]);
        assert!(seq.exhausted);

        // rate 1, γ = 0.35: the last instant with trigger ≤ γ is three steps away
        let one = ControlSet::new(vec![Box::new(LinearControl::new(1.0, &times, "one").unwrap())]).unwrap();
        let seq = greedy_times_discrete(&one, 0.35, Window::new(0, 20).unwrap()).unwrap();
        assert_eq!(&seq.times[..3], &[0, 3, 6]);
    }

    #[test]
    fn control_counts_respect_their_bounds() {
        for seed in 0..4 {
            let rp = sample_lift(&NoiseSpec::fbm(0.45, 2, 1.0, 256, seed)).unwrap();
            let times = rp.path().times().to_vec();
            let w = rp.path().full_window();
            let cs: Vec<Box<dyn Control>> = vec![
                Box::new(LinearControl::new(0.7, &times, "lin").unwrap()),
                Box::new(PathVariationControl::new(2.0, 2.5, &rp, "path").unwrap()),
            ];
            let s = ControlSet::new(cs).unwrap();
            for gamma in [0.2, 0.5, 1.0] {
                let c = greedy_times_controls(&s, gamma, w).unwrap();
                let d = greedy_times_discrete(&s, gamma, w).unwrap();
                assert!((c.count() as f64) < bound_nstar_controls(&s, gamma, w).unwrap());
                assert!((d.count() as f64) < bound_nhat(&s, gamma, w).unwrap());
                assert!(audit_interleaving(&c, &d).holds);
            }
        }
    }

    #[test]
    fn nsum_single_cut_is_equality() {
        let rp = sample_lift(&NoiseSpec::fbm(0.45, 2, 1.0, 128, 1)).unwrap();
        let a = check_nsum(&rp, 2.5, 0.3, &[0, 128]).unwrap();
        assert!(a.holds);
        assert_eq!(a.lhs + 1, a.rhs);
        let z = line(16, 1.0);
        let zero = lift_piecewise_linear(&GridPath::new(z.path().times().to_vec(), vec![0.0; 17], 1).unwrap());
        let a = check_nsum(&zero, 2.5, 0.3, &[0, 4, 9, 16]).unwrap();
        assert_eq!((a.lhs, a.rhs), (3, 4));
    }
}
