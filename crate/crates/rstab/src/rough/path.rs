use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{dist, outer_add};

/// Closed window `[start, end]` of grid indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Window {
    pub start: usize,
    pub end: usize,
}

impl Window {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start >= end {
            return Err(Error::domain(format!(
                "window start {start} must precede end {end}"
            )));
        }
        Ok(Window { start, end })
    }

    /// Number of grid steps covered.
    pub fn steps(&self) -> usize {
        self.end - self.start
    }
}

/// A vector-valued path sampled on a uniform time grid.
///
/// Values are stored row-major: instant `k` occupies `values[k*dim..(k+1)*dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    times: Vec<f64>,
    values: Vec<f64>,
    dim: usize,
}

const STEP_RTOL: f64 = 1e-12;

impl GridPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("path dimension must be positive"));
        }
        if times.len() < 2 {
            return Err(Error::domain("a grid path needs at least two instants"));
        }
        if values.len() != times.len() * dim {
            return Err(Error::domain(format!(
                "expected {} values for {} instants of dimension {dim}, got {}",
                times.len() * dim,
                times.len(),
                values.len()
            )));
        }
        let step = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::domain("grid times must be strictly increasing"));
        }
        for (k, w) in times.windows(2).enumerate() {
            let d = w[1] - w[0];
            let scale = 1.0 + w[0].abs().max(w[1].abs());
            if !(d > 0.0) || (d - step).abs() > STEP_RTOL * scale.max(step) {
                return Err(Error::domain(format!(
                    "grid is not uniform between instants {k} and {}",
                    k + 1
                )));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("path values must be finite"));
        }
        Ok(GridPath { times, values, dim })
    }

    /// Uniform grid `t0 + k·step` for `k = 0..values.len()/dim`.
    pub fn uniform(t0: f64, step: f64, values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || values.len() % dim != 0 {
            return Err(Error::domain("values length is not a multiple of the dimension"));
        }
        let n = values.len() / dim;
        let times = uniform_times(t0, step, n);
        Self::new(times, values, dim)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn time(&self, k: usize) -> f64 {
        self.times[k]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn step(&self) -> f64 {
        (self.times[self.len() - 1] - self.times[0]) / (self.len() - 1) as f64
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        self.times[self.len() - 1]
    }

    /// Index of the grid instant equal to `t`.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let step = self.step();
        let pos = (t - self.times[0]) / step;
        let k = pos.round();
        if !k.is_finite() || k < 0.0 || k as usize >= self.len() {
            return Err(Error::domain(format!("instant {t} lies outside the grid")));
        }
        let k = k as usize;
        let tol = 1e-9 * step.max(1e-300) + 1e-12 * t.abs();
        if (self.times[k] - t).abs() > tol {
            return Err(Error::domain(format!("instant {t} is not a grid point")));
        }
        Ok(k)
    }

    /// Window between two grid instants given as times.
    pub fn window(&self, s: f64, t: f64) -> Result<Window> {
        Window::new(self.index_of(s)?, self.index_of(t)?)
    }

    pub fn full_window(&self) -> Window {
        Window {
            start: 0,
            end: self.len() - 1,
        }
    }

    pub(crate) fn check_window(&self, w: Window) -> Result<()> {
        if w.start >= w.end || w.end >= self.len() {
            return Err(Error::domain(format!(
                "window [{}, {}] is not inside a grid of {} instants",
                w.start,
                w.end,
                self.len()
            )));
        }
        Ok(())
    }

    /// Euclidean norm of the increment `x_k - x_j`.
    #[inline]
    pub fn increment_norm(&self, j: usize, k: usize) -> f64 {
        dist(self.value(k), self.value(j))
    }

    /// Increment `x_k - x_j` written into `out`.
    #[inline]
    pub fn increment_into(&self, j: usize, k: usize, out: &mut [f64]) {
        let (a, b) = (self.value(j), self.value(k));
        for i in 0..self.dim {
            out[i] = b[i] - a[i];
        }
    }

    /// Sub-path on the window, keeping original times.
    pub fn slice(&self, w: Window) -> Result<GridPath> {
        self.check_window(w)?;
        Ok(GridPath {
            times: self.times[w.start..=w.end].to_vec(),
            values: self.values[w.start * self.dim..(w.end + 1) * self.dim].to_vec(),
            dim: self.dim,
        })
    }

    /// Every `stride`-th instant; `stride` must divide the number of steps.
    pub fn subsample(&self, stride: usize) -> Result<GridPath> {
        let steps = self.len() - 1;
        if stride == 0 || steps % stride != 0 {
            return Err(Error::domain(format!(
                "stride {stride} does not divide {steps} steps"
            )));
        }
        let mut times = Vec::with_capacity(steps / stride + 1);
        let mut values = Vec::with_capacity((steps / stride + 1) * self.dim);
        for k in (0..self.len()).step_by(stride) {
            times.push(self.times[k]);
            values.extend_from_slice(self.value(k));
        }
        Ok(GridPath {
            times,
            values,
            dim: self.dim,
        })
    }

    /// Largest Euclidean norm over the window.
    pub fn sup_norm(&self, w: Window) -> f64 {
        (w.start..=w.end)
            .map(|k| crate::linalg::norm(self.value(k)))
            .fold(0.0, f64::max)
    }
}

pub(crate) fn uniform_times(t0: f64, step: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| t0 + k as f64 * step).collect()
}

/// A grid path with its level-2 process, stored as areas anchored at the first instant.
///
/// `A_k = X_{t_0, t_k}` is row-major `m × m`; any `X_{s,t}` is reconstructed by
///
/// ```text
/// X_{s,t} = A_t - A_s - x_{0,s} ⊗ x_{s,t}
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct RoughPathGrid {
    base: GridPath,
    area0: Vec<f64>,
}

impl RoughPathGrid {
    pub fn new(base: GridPath, area0: Vec<f64>) -> Result<Self> {
        let m = base.dim();
        if area0.len() != base.len() * m * m {
            return Err(Error::domain(format!(
                "expected {} anchored area entries, got {}",
                base.len() * m * m,
                area0.len()
            )));
        }
        if area0[..m * m].iter().any(|&a| a != 0.0) {
            return Err(Error::domain("anchored area at the first instant must vanish"));
        }
        if area0.iter().any(|a| !a.is_finite()) {
            return Err(Error::numeric("area entries must be finite"));
        }
        Ok(RoughPathGrid { base, area0 })
    }

    /// Aggregates per-step area increments `a_k` (for step `k → k+1`) via Chen's relation.
    pub fn from_step_areas(base: GridPath, step_areas: &[f64]) -> Result<Self> {
        let m = base.dim();
        let n = base.len();
        if step_areas.len() != (n - 1) * m * m {
            return Err(Error::domain("one area increment per step is required"));
        }
        let mm = m * m;
        let mut area0 = vec![0.0; n * mm];
        let mut x0k = vec![0.0; m];
        let mut dx = vec![0.0; m];
        for k in 0..n - 1 {
            base.increment_into(0, k, &mut x0k);
            base.increment_into(k, k + 1, &mut dx);
            let (prev, next) = area0.split_at_mut((k + 1) * mm);
            let next = &mut next[..mm];
            next.copy_from_slice(&prev[k * mm..]);
            for (o, a) in next.iter_mut().zip(&step_areas[k * mm..(k + 1) * mm]) {
                *o += a;
            }
            outer_add(next, &x0k, &dx, 1.0);
        }
        Self::new(base, area0)
    }

    pub fn path(&self) -> &GridPath {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn anchored_areas(&self) -> &[f64] {
        &self.area0
    }

    pub fn anchored_area(&self, k: usize) -> &[f64] {
        let mm = self.dim() * self.dim();
        &self.area0[k * mm..(k + 1) * mm]
    }

    /// Writes `X_{j,k}` (row-major) into `out`; requires `j ≤ k`.
    #[inline]
    pub fn area_into(&self, j: usize, k: usize, out: &mut [f64]) {
        let m = self.dim();
        let (aj, ak) = (self.anchored_area(j), self.anchored_area(k));
        for i in 0..m * m {
            out[i] = ak[i] - aj[i];
        }
        let x0 = self.base.value(0);
        let xj = self.base.value(j);
        let xk = self.base.value(k);
        for a in 0..m {
            let l = xj[a] - x0[a];
            if l == 0.0 {
                continue;
            }
            for b in 0..m {
                out[a * m + b] -= l * (xk[b] - xj[b]);
            }
        }
    }

    /// Frobenius norm of `X_{j,k}` without allocation (dimension ≤ 8 is stack-only).
    #[inline]
    pub fn area_norm(&self, j: usize, k: usize) -> f64 {
        let m = self.dim();
        if m * m <= 64 {
            let mut buf = [0.0; 64];
            self.area_into(j, k, &mut buf[..m * m]);
            crate::linalg::norm(&buf[..m * m])
        } else {
            let mut buf = vec![0.0; m * m];
            self.area_into(j, k, &mut buf);
            crate::linalg::norm(&buf)
        }
    }

    /// `X_{s,t}` for grid indices `s ≤ t`.
    pub fn chen_reconstruct(&self, s: usize, t: usize) -> Result<DMatrix<f64>> {
        if s > t || t >= self.len() {
            return Err(Error::domain(format!(
                "cannot reconstruct the area over [{s}, {t}] on {} instants",
                self.len()
            )));
        }
        let m = self.dim();
        let mut out = vec![0.0; m * m];
        self.area_into(s, t, &mut out);
        Ok(DMatrix::from_row_slice(m, m, &out))
    }

    /// Chen defect `‖X_{s,t} − X_{s,u} − X_{u,t} − x_{s,u}⊗x_{u,t}‖` for `s ≤ u ≤ t`.
    pub fn chen_defect(&self, s: usize, u: usize, t: usize) -> f64 {
        let m = self.dim();
        let mut xst = vec![0.0; m * m];
        let mut xsu = vec![0.0; m * m];
        let mut xut = vec![0.0; m * m];
        self.area_into(s, t, &mut xst);
        self.area_into(s, u, &mut xsu);
        self.area_into(u, t, &mut xut);
        let mut a = vec![0.0; m];
        let mut b = vec![0.0; m];
        self.base.increment_into(s, u, &mut a);
        self.base.increment_into(u, t, &mut b);
        let mut d = vec![0.0; m * m];
        for i in 0..m * m {
            d[i] = xst[i] - xsu[i] - xut[i];
        }
        outer_add(&mut d, &a, &b, -1.0);
        crate::linalg::norm(&d)
    }

    /// Largest Chen defect over `triples` random `s ≤ u ≤ t`, relative to
    /// `1 + ‖X_{s,t}‖ + ‖x_{s,u}‖ ‖x_{u,t}‖`.
    pub fn chen_audit(&self, triples: usize, seed: u64) -> f64 {
        use rand::Rng;
        let mut rng = crate::mc::rng(seed);
        let n = self.len();
        let m = self.dim();
        let mut area = vec![0.0; m * m];
        let mut worst = 0.0f64;
        for _ in 0..triples {
            let mut idx = [rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n)];
            idx.sort_unstable();
            let [s, u, t] = idx;
            self.area_into(s, t, &mut area);
            let scale = 1.0 + crate::linalg::norm(&area) + self.base.increment_norm(s, u) * self.base.increment_norm(u, t);
            worst = worst.max(self.chen_defect(s, u, t) / scale);
        }
        worst
    }

    /// Every `stride`-th instant with anchored areas subsampled directly.
    pub fn coarsen(&self, stride: usize) -> Result<RoughPathGrid> {
        let base = self.base.subsample(stride)?;
        let mm = self.dim() * self.dim();
        let mut area0 = Vec::with_capacity(base.len() * mm);
        for k in (0..self.len()).step_by(stride) {
            area0.extend_from_slice(self.anchored_area(k));
        }
        Ok(RoughPathGrid { base, area0 })
    }

    /// Rough path restricted to a window and re-anchored at its left end.
    pub fn restrict(&self, w: Window) -> Result<RoughPathGrid> {
        self.base.check_window(w)?;
        let m = self.dim();
        let mm = m * m;
        let base = self.base.slice(w)?;
        let mut area0 = vec![0.0; base.len() * mm];
        for k in w.start..=w.end {
            let i = k - w.start;
            self.area_into(w.start, k, &mut area0[i * mm..(i + 1) * mm]);
        }
        Ok(RoughPathGrid { base, area0 })
    }
}

/// A path `y` controlled by a driver `x`, together with its Gubinelli derivative `y'`.
///
/// `y'_k` is row-major `d × m`; the remainder `R^y_{s,t} = y_{s,t} − y'_s x_{s,t}` is derived.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlledPath {
    path: GridPath,
    gubinelli: Vec<f64>,
    noise_dim: usize,
}

impl ControlledPath {
    pub fn new(path: GridPath, gubinelli: Vec<f64>, noise_dim: usize) -> Result<Self> {
        if gubinelli.len() != path.len() * path.dim() * noise_dim {
            return Err(Error::domain(
                "Gubinelli derivative needs one d×m matrix per instant",
            ));
        }
        Ok(ControlledPath {
            path,
            gubinelli,
            noise_dim,
        })
    }

    pub fn path(&self) -> &GridPath {
        &self.path
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn derivative(&self, k: usize) -> &[f64] {
        let dm = self.path.dim() * self.noise_dim;
        &self.gubinelli[k * dm..(k + 1) * dm]
    }

    /// Writes `R^y_{j,k}` into `out` given the driver increment `x_{j,k}`.
    pub fn remainder_into(&self, j: usize, k: usize, x_inc: &[f64], out: &mut [f64]) {
        let d = self.path.dim();
        let m = self.noise_dim;
        self.path.increment_into(j, k, out);
        let yp = self.derivative(j);
        for i in 0..d {
            let mut s = 0.0;
            for l in 0..m {
                s += yp[i * m + l] * x_inc[l];
            }
            out[i] -= s;
        }
    }
}
