//! Exact p-variation by dynamic programming over grid subsequences.
//!
//! ```text
//! V[s] = 0,   V[k] = max_{s ≤ j < k} ( V[j] + c(j, k) ),   |||·|||^p = V[t]
//! ```
//!
//! where `c(j, k)` is the powered increment norm between grid instants `j` and `k`.

use super::path::{GridPath, RoughPathGrid, Window};
use crate::error::{Error, Result};
use crate::linalg::norm_sq;

/// Supremum over increasing subsequences `start = u_0 < … < u_r = end` of `Σ cost(u_i, u_{i+1})`.
pub fn variation_dp(start: usize, end: usize, mut cost: impl FnMut(usize, usize) -> f64) -> f64 {
    let mut inc = IncrementalVariation::new(start);
    for _ in start..end {
        inc.extend(&mut cost);
    }
    inc.value()
}

/// The DP table grown one grid instant at a time.
#[derive(Debug, Clone)]
pub struct IncrementalVariation {
    start: usize,
    v: Vec<f64>,
}

impl IncrementalVariation {
    pub fn new(start: usize) -> Self {
        IncrementalVariation {
            start,
            v: vec![0.0],
        }
    }

    /// Grid index of the current right end.
    pub fn end(&self) -> usize {
        self.start + self.v.len() - 1
    }

    /// Powered variation over `[start, end]`.
    pub fn value(&self) -> f64 {
        *self.v.last().expect("table is never empty")
    }

    /// Appends the next instant and returns the powered variation up to it.
    pub fn extend(&mut self, cost: &mut impl FnMut(usize, usize) -> f64) -> f64 {
        let k = self.end() + 1;
        let mut best = 0.0f64;
        for (i, vj) in self.v.iter().enumerate() {
            let c = vj + cost(self.start + i, k);
            if c > best {
                best = c;
            }
        }
        self.v.push(best);
        best
    }
}

pub(crate) fn check_exponent(p: f64, name: &str) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::domain(format!("{name} must be a finite real ≥ 1, got {p}")));
    }
    Ok(())
}

pub(crate) fn check_rough_exponent(p: f64) -> Result<()> {
    if !(p > 2.0 && p < 3.0) {
        return Err(Error::domain(format!("rough exponent p must lie in (2, 3), got {p}")));
    }
    Ok(())
}

#[inline]
pub(crate) fn path_cost(path: &GridPath, p: f64) -> impl FnMut(usize, usize) -> f64 + '_ {
    let half = 0.5 * p;
    let d = path.dim();
    let vals = path.values();
    move |j, k| {
        let a = &vals[j * d..(j + 1) * d];
        let b = &vals[k * d..(k + 1) * d];
        let mut s = 0.0;
        for i in 0..d {
            let t = b[i] - a[i];
            s += t * t;
        }
        if s == 0.0 {
            0.0
        } else {
            s.powf(half)
        }
    }
}

#[inline]
pub(crate) fn area_cost(rp: &RoughPathGrid, q: f64) -> impl FnMut(usize, usize) -> f64 + '_ {
    let half = 0.5 * q;
    let m = rp.dim();
    let mut buf = vec![0.0; m * m];
    move |j, k| {
        rp.area_into(j, k, &mut buf);
        let s = norm_sq(&buf);
        if s == 0.0 {
            0.0
        } else {
            s.powf(half)
        }
    }
}

/// `|||x|||^p_{p-var}` over the window (p-th power, no root).
pub fn pvar_power(path: &GridPath, p: f64, w: Window) -> Result<f64> {
    check_exponent(p, "p")?;
    path.check_window(w)?;
    Ok(variation_dp(w.start, w.end, path_cost(path, p)))
}

/// p-variation semi-norm of a grid path over a window.
pub fn pvar_norm(path: &GridPath, p: f64, w: Window) -> Result<f64> {
    Ok(pvar_power(path, p, w)?.powf(1.0 / p))
}

/// `|||X|||^q_{q-var}` of the reconstructed area over the window (q-th power).
pub fn qvar_area_power(rp: &RoughPathGrid, q: f64, w: Window) -> Result<f64> {
    check_exponent(q, "q")?;
    rp.path().check_window(w)?;
    Ok(variation_dp(w.start, w.end, area_cost(rp, q)))
}

/// q-variation semi-norm of the area (Frobenius increments).
pub fn qvar_area_norm(rp: &RoughPathGrid, q: f64, w: Window) -> Result<f64> {
    Ok(qvar_area_power(rp, q, w)?.powf(1.0 / q))
}

/// `|||x|||^p_{p-var} + |||X|||^{p/2}_{p/2-var}`, the p-th power of the rough norm.
pub fn rough_power(rp: &RoughPathGrid, p: f64, w: Window) -> Result<f64> {
    check_rough_exponent(p)?;
    Ok(pvar_power(rp.path(), p, w)? + qvar_area_power(rp, p / 2.0, w)?)
}

/// Rough-path p-variation norm `( |||x|||^p + |||X|||^q )^{1/p}` with `q = p/2`.
pub fn rough_norm(rp: &RoughPathGrid, p: f64, w: Window) -> Result<f64> {
    Ok(rough_power(rp, p, w)?.powf(1.0 / p))
}

/// Which quantity a stopping construction tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// Path and area, combined as the rough norm.
    Rough,
    /// Path p-variation only; the area is ignored.
    PathOnly,
}

/// Incremental rough norm over `[start, ·]`, grown one grid instant at a time.
#[derive(Debug, Clone)]
pub struct RoughNormTracker<'a> {
    rp: &'a RoughPathGrid,
    p: f64,
    kind: NormKind,
    path_dp: IncrementalVariation,
    area_dp: IncrementalVariation,
    buf: Vec<f64>,
}

impl<'a> RoughNormTracker<'a> {
    pub fn new(rp: &'a RoughPathGrid, p: f64, kind: NormKind, start: usize) -> Self {
        let m = rp.dim();
        RoughNormTracker {
            rp,
            p,
            kind,
            path_dp: IncrementalVariation::new(start),
            area_dp: IncrementalVariation::new(start),
            buf: vec![0.0; m * m],
        }
    }

    pub fn end(&self) -> usize {
        self.path_dp.end()
    }

    /// Extends by one instant and returns the norm over `[start, end]`.
    pub fn extend(&mut self) -> f64 {
        let mut pc = path_cost(self.rp.path(), self.p);
        self.path_dp.extend(&mut pc);
        if self.kind == NormKind::Rough {
            let rp = self.rp;
            let half = 0.25 * self.p;
            let buf = &mut self.buf;
            let mut ac = |j: usize, k: usize| {
                rp.area_into(j, k, buf);
                let s = norm_sq(buf);
                if s == 0.0 {
                    0.0
                } else {
                    s.powf(half)
                }
            };
            self.area_dp.extend(&mut ac);
        }
        self.norm()
    }

    pub fn norm(&self) -> f64 {
        let area = if self.kind == NormKind::Rough {
            self.area_dp.value()
        } else {
            0.0
        };
        (self.path_dp.value() + area).powf(1.0 / self.p)
    }
}

/// Norm of the chosen kind over a window.
pub fn norm_of_kind(rp: &RoughPathGrid, p: f64, kind: NormKind, w: Window) -> Result<f64> {
    match kind {
        NormKind::Rough => rough_norm(rp, p, w),
        NormKind::PathOnly => pvar_norm(rp.path(), p, w),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rough::lift::lift_piecewise_linear;

    fn scalar(vals: &[f64]) -> GridPath {
        GridPath::uniform(0.0, 1.0, vals.to_vec(), 1).unwrap()
    }

    #[test]
    fn two_point_path() {
        let p = scalar(&[0.0, 1.0]);
        assert_eq!(pvar_norm(&p, 2.0, p.full_window()).unwrap(), 1.0);
    }

    #[test]
    fn constant_path_has_zero_variation() {
        let p = scalar(&[3.0; 6]);
        assert_eq!(pvar_norm(&p, 2.5, p.full_window()).unwrap(), 0.0);
    }

    #[test]
    fn up_down_path() {
        let p = scalar(&[0.0, 1.0, 0.0]);
        let v = pvar_norm(&p, 2.0, p.full_window()).unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn exponent_checks() {
        let p = scalar(&[0.0, 1.0]);
        assert!(pvar_norm(&p, 0.5, p.full_window()).is_err());
        let rp = lift_piecewise_linear(&p);
        assert!(rough_norm(&rp, 2.0, p.full_window()).is_err());
        assert!(rough_norm(&rp, 3.0, p.full_window()).is_err());
        assert!(pvar_norm(&p, 2.0, Window { start: 0, end: 5 }).is_err());
    }

    #[test]
    fn single_segment_area_norm() {
        let p = GridPath::uniform(0.0, 1.0, vec![0.0, 0.0, 1.0, 2.0], 2).unwrap();
        let rp = lift_piecewise_linear(&p);
        // ½ v⊗v with v = (1,2): Frobenius norm ½·|v|² = 2.5
        let v = qvar_area_norm(&rp, 1.25, p.full_window()).unwrap();
        assert!((v - 2.5).abs() < 1e-14);
    }

    #[test]
    fn tracker_matches_batch() {
        let vals: Vec<f64> = (0..40).map(|k| ((k * 7919) % 13) as f64 / 13.0 - 0.4).collect();
        let p = GridPath::uniform(0.0, 0.1, vals, 2).unwrap();
        let rp = lift_piecewise_linear(&p);
        let mut tr = RoughNormTracker::new(&rp, 2.5, NormKind::Rough, 3);
        for end in 4..20 {
            let a = tr.extend();
            let b = rough_norm(&rp, 2.5, Window::new(3, end).unwrap()).unwrap();
            assert!((a - b).abs() <= 1e-13 * (1.0 + b));
        }
        let mut tr = RoughNormTracker::new(&rp, 2.5, NormKind::PathOnly, 0);
        let a = (0..10).map(|_| tr.extend()).last().unwrap();
        let b = pvar_norm(rp.path(), 2.5, Window::new(0, 10).unwrap()).unwrap();
        assert!((a - b).abs() <= 1e-13 * (1.0 + b));
    }
}
