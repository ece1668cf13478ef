//! Controls: two-parameter functions that vanish on the diagonal, grow under interval
//! inclusion and are superadditive. Stopping rules sum `w^β` over a finite family.

use rand::Rng as _;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mc::rng;
use crate::rough::path::RoughPathGrid;
use crate::rough::pvar::{area_cost, check_exponent, path_cost, IncrementalVariation};
use crate::rough::{pvar_power, qvar_area_power, Window};

/// A control evaluated between grid instants `s ≤ t`.
pub trait Control: Send + Sync {
    fn eval(&self, s: usize, t: usize) -> f64;
    fn beta(&self) -> f64;
    fn label(&self) -> &str;
    /// Number of grid instants the control is defined on.
    fn grid_len(&self) -> usize;

    /// Cursor returning `w_{s,t}` for `t = s+1, s+2, …`.
    fn cursor(&self, s: usize) -> Box<dyn ControlCursor + '_> {
        Box::new(EvalCursor {
            control: self,
            s,
            t: s,
        })
    }
}

pub trait ControlCursor {
    /// Moves the right end one instant forward and returns the control over `[s, t]`.
    fn advance(&mut self) -> f64;
}

struct EvalCursor<'a, C: Control + ?Sized> {
    control: &'a C,
    s: usize,
    t: usize,
}

impl<C: Control + ?Sized> ControlCursor for EvalCursor<'_, C> {
    fn advance(&mut self) -> f64 {
        self.t += 1;
        self.control.eval(self.s, self.t)
    }
}

/// `rate · (t − s)` in time units.
#[derive(Debug, Clone)]
pub struct LinearControl {
    rate: f64,
    times: Vec<f64>,
    label: String,
}

impl LinearControl {
    pub fn new(rate: f64, times: &[f64], label: impl Into<String>) -> Result<Self> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::domain(format!("control rate must be finite and ≥ 0, got {rate}")));
        }
        Ok(LinearControl {
            rate,
            times: times.to_vec(),
            label: label.into(),
        })
    }
}

impl Control for LinearControl {
    fn eval(&self, s: usize, t: usize) -> f64 {
        self.rate * (self.times[t] - self.times[s])
    }
    fn beta(&self) -> f64 {
        1.0
    }
    fn label(&self) -> &str {
        &self.label
    }
    fn grid_len(&self) -> usize {
        self.times.len()
    }
}

/// `coef · |||x|||^p_{p-var,[s,t]}` with exponent `1/p`.
pub struct PathVariationControl<'a> {
    coef: f64,
    p: f64,
    rp: &'a RoughPathGrid,
    label: String,
}

impl<'a> PathVariationControl<'a> {
    pub fn new(coef: f64, p: f64, rp: &'a RoughPathGrid, label: impl Into<String>) -> Result<Self> {
        check_exponent(p, "p")?;
        if !(coef >= 0.0) || !coef.is_finite() {
            return Err(Error::domain(format!("control coefficient must be finite and ≥ 0, got {coef}")));
        }
        Ok(PathVariationControl {
            coef,
            p,
            rp,
            label: label.into(),
        })
    }
}

struct DpCursor<F: FnMut(usize, usize) -> f64> {
    coef: f64,
    dp: IncrementalVariation,
    cost: F,
}

impl<F: FnMut(usize, usize) -> f64> ControlCursor for DpCursor<F> {
    fn advance(&mut self) -> f64 {
        self.coef * self.dp.extend(&mut self.cost)
    }
}

impl Control for PathVariationControl<'_> {
    fn eval(&self, s: usize, t: usize) -> f64 {
        if s == t {
            return 0.0;
        }
        self.coef * pvar_power(self.rp.path(), self.p, Window { start: s, end: t }).unwrap_or(f64::NAN)
    }
    fn beta(&self) -> f64 {
        1.0 / self.p
    }
    fn label(&self) -> &str {
        &self.label
    }
    fn grid_len(&self) -> usize {
        self.rp.len()
    }
    fn cursor(&self, s: usize) -> Box<dyn ControlCursor + '_> {
        Box::new(DpCursor {
            coef: self.coef,
            dp: IncrementalVariation::new(s),
            cost: path_cost(self.rp.path(), self.p),
        })
    }
}

/// `coef · |||X|||^q_{q-var,[s,t]}` with exponent `1/q`.
pub struct AreaVariationControl<'a> {
    coef: f64,
    q: f64,
    rp: &'a RoughPathGrid,
    label: String,
}

impl<'a> AreaVariationControl<'a> {
    pub fn new(coef: f64, q: f64, rp: &'a RoughPathGrid, label: impl Into<String>) -> Result<Self> {
        check_exponent(q, "q")?;
        if !(coef >= 0.0) || !coef.is_finite() {
            return Err(Error::domain(format!("control coefficient must be finite and ≥ 0, got {coef}")));
        }
        Ok(AreaVariationControl {
            coef,
            q,
            rp,
            label: label.into(),
        })
    }
}

impl Control for AreaVariationControl<'_> {
    fn eval(&self, s: usize, t: usize) -> f64 {
        if s == t {
            return 0.0;
        }
        self.coef * qvar_area_power(self.rp, self.q, Window { start: s, end: t }).unwrap_or(f64::NAN)
    }
    fn beta(&self) -> f64 {
        1.0 / self.q
    }
    fn label(&self) -> &str {
        &self.label
    }
    fn grid_len(&self) -> usize {
        self.rp.len()
    }
    fn cursor(&self, s: usize) -> Box<dyn ControlCursor + '_> {
        Box::new(DpCursor {
            coef: self.coef,
            dp: IncrementalVariation::new(s),
            cost: area_cost(self.rp, self.q),
        })
    }
}

/// `coef · max_{s ≤ k ≤ t} v_k · (t − s)`, e.g. a running sup of `‖f‖` along a reference path.
#[derive(Debug, Clone)]
pub struct SupTimesLengthControl {
    coef: f64,
    values: Vec<f64>,
    times: Vec<f64>,
    label: String,
}

impl SupTimesLengthControl {
    pub fn new(coef: f64, values: Vec<f64>, times: &[f64], label: impl Into<String>) -> Result<Self> {
        if values.len() != times.len() {
            return Err(Error::domain(format!(
                "{} values for {} grid instants",
                values.len(),
                times.len()
            )));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) || !(coef >= 0.0) {
            return Err(Error::domain("sup control needs finite non-negative values"));
        }
        Ok(SupTimesLengthControl {
            coef,
            values,
            times: times.to_vec(),
            label: label.into(),
        })
    }
}

struct SupCursor<'a> {
    c: &'a SupTimesLengthControl,
    s: usize,
    t: usize,
    max: f64,
}

impl ControlCursor for SupCursor<'_> {
    fn advance(&mut self) -> f64 {
        self.t += 1;
        self.max = self.max.max(self.c.values[self.t]);
        self.c.coef * self.max * (self.c.times[self.t] - self.c.times[self.s])
    }
}

impl Control for SupTimesLengthControl {
    fn eval(&self, s: usize, t: usize) -> f64 {
        let max = self.values[s..=t].iter().cloned().fold(0.0, f64::max);
        self.coef * max * (self.times[t] - self.times[s])
    }
    fn beta(&self) -> f64 {
        1.0
    }
    fn label(&self) -> &str {
        &self.label
    }
    fn grid_len(&self) -> usize {
        self.times.len()
    }
    fn cursor(&self, s: usize) -> Box<dyn ControlCursor + '_> {
        Box::new(SupCursor {
            c: self,
            s,
            t: s,
            max: self.values[s],
        })
    }
}

/// Outcome of a randomized control audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControlAudit {
    pub trials: usize,
    pub violations: usize,
    /// Largest relative violation seen (0 when none).
    pub worst: f64,
}

/// Checks diagonal vanishing, monotonicity and superadditivity on random triples `s ≤ u ≤ t`
/// with `t − s ≤ max_span`.
pub fn audit_control(c: &dyn Control, trials: usize, max_span: usize, seed: u64) -> ControlAudit {
    let n = c.grid_len();
    let mut out = ControlAudit {
        trials,
        violations: 0,
        worst: 0.0,
    };
    if n < 2 {
        return out;
    }
    let mut r = rng(seed);
    let span = max_span.clamp(1, n - 1);
    for _ in 0..trials {
        let s = r.gen_range(0..n - 1);
        let t = (s + r.gen_range(1..=span)).min(n - 1);
        let u = r.gen_range(s..=t);
        let (ws, wl, wr) = (c.eval(s, t), c.eval(s, u), c.eval(u, t));
        let scale = ws.abs().max(1e-300);
        let defects = [
            c.eval(s, s).abs() / scale,
            (wl - ws) / scale,
            (wr - ws) / scale,
            (wl + wr - ws) / scale,
        ];
        let worst = defects.iter().cloned().fold(0.0, f64::max);
        if worst > 1e-9 || ws.is_nan() {
            out.violations += 1;
            out.worst = out.worst.max(worst);
        }
    }
    out
}

/// A non-empty finite family of controls on a common grid.
pub struct ControlSet<'a> {
    controls: Vec<Box<dyn Control + 'a>>,
}

impl<'a> ControlSet<'a> {
    pub fn new(controls: Vec<Box<dyn Control + 'a>>) -> Result<Self> {
        if controls.is_empty() {
            return Err(Error::domain("control set is empty"));
        }
        let n = controls[0].grid_len();
        for c in &controls {
            let b = c.beta();
            if !(b > 0.0 && b <= 1.0) {
                return Err(Error::domain(format!(
                    "control {} has exponent {b} outside (0, 1]",
                    c.label()
                )));
            }
            if c.grid_len() != n {
                return Err(Error::domain(format!(
                    "control {} lives on {} instants, expected {n}",
                    c.label(),
                    c.grid_len()
                )));
            }
        }
        if cfg!(debug_assertions) {
            for (i, c) in controls.iter().enumerate() {
                let a = audit_control(c.as_ref(), 16, 32, 0xC0_u64 + i as u64);
                if a.violations > 0 {
                    return Err(Error::domain(format!(
                        "{} is not a control: {} of {} audit triples fail (worst {:.3e})",
                        c.label(),
                        a.violations,
                        a.trials,
                        a.worst
                    )));
                }
            }
        }
        Ok(ControlSet { controls })
    }

    pub fn len(&self) -> usize {
        self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }

    pub fn grid_len(&self) -> usize {
        self.controls[0].grid_len()
    }

    pub fn controls(&self) -> &[Box<dyn Control + 'a>] {
        &self.controls
    }

    /// Smallest exponent in the family.
    pub fn beta_min(&self) -> f64 {
        self.controls.iter().map(|c| c.beta()).fold(f64::INFINITY, f64::min)
    }

    /// `Σ_w (w_{s,t})^{β_w}`.
    pub fn trigger(&self, s: usize, t: usize) -> f64 {
        self.controls.iter().map(|c| c.eval(s, t).powf(c.beta())).sum()
    }

    /// `Σ_w (w_I)^{β_w/β}` with `β` the smallest exponent.
    pub fn weighted_total(&self, w: Window) -> f64 {
        let beta = self.beta_min();
        self.controls
            .iter()
            .map(|c| c.eval(w.start, w.end).powf(c.beta() / beta))
            .sum()
    }

    pub(crate) fn cursors(&self, s: usize) -> TriggerCursor<'_> {
        TriggerCursor {
            parts: self.controls.iter().map(|c| (c.cursor(s), c.beta())).collect(),
        }
    }
}

pub(crate) struct TriggerCursor<'c> {
    parts: Vec<(Box<dyn ControlCursor + 'c>, f64)>,
}

impl TriggerCursor<'_> {
    pub(crate) fn advance(&mut self) -> f64 {
        self.parts.iter_mut().map(|(c, b)| c.advance().powf(*b)).sum()
    }
}
