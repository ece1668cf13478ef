//! Driving noises: fractional Brownian motion, Brownian motion with Itô or Stratonovich
//! enhancement, and the Wiener shift on sampled grids.
//!
//! fBm components have covariance
//!
//! ```text
//! E B_s B_t = ½ ( s^{2H} + t^{2H} − |t − s|^{2H} )
//! ```
//!
//! and are generated from fractional Gaussian noise by circulant embedding, falling back to a
//! Cholesky factorisation when the embedding has negative eigenvalues.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::{derive_seed, rng, Rng};
use crate::rough::path::uniform_times;
use crate::rough::{lift_ito, lift_piecewise_linear, GridPath, RoughPathGrid, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Fbm,
    BmIto,
    BmStrat,
}

/// Everything needed to reproduce one sampled driver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub hurst: f64,
    pub dim: usize,
    pub horizon: f64,
    pub fine_steps: usize,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn fbm(hurst: f64, dim: usize, horizon: f64, fine_steps: usize, seed: u64) -> Self {
        NoiseSpec {
            kind: NoiseKind::Fbm,
            hurst,
            dim,
            horizon,
            fine_steps,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == NoiseKind::Fbm && !(self.hurst > 1.0 / 3.0 && self.hurst <= 1.0) {
            return Err(Error::config("noise.hurst", "must lie in (1/3, 1]"));
        }
        if self.dim == 0 {
            return Err(Error::config("noise.dim", "must be positive"));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::config("noise.horizon", "must be positive and finite"));
        }
        if self.fine_steps < 2 {
            return Err(Error::config("noise.fine_steps", "must be at least 2"));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.fine_steps as f64
    }

    /// Effective Hurst index (1/2 for Brownian kinds).
    pub fn effective_hurst(&self) -> f64 {
        match self.kind {
            NoiseKind::Fbm => self.hurst,
            _ => 0.5,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        NoiseSpec { seed, ..self.clone() }
    }

    /// Spec for replicate `i`, seeded independently from this spec's seed.
    pub fn replicate(&self, i: usize) -> Self {
        self.with_seed(derive_seed(self.seed, i as u64))
    }

    pub fn with_horizon(&self, horizon: f64, fine_steps: usize) -> Self {
        NoiseSpec {
            horizon,
            fine_steps,
            ..self.clone()
        }
    }
}

/// Generator choice for fBm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FbmMethod {
    /// Circulant embedding, falling back to Cholesky on failure.
    Auto,
    DaviesHarte,
    Cholesky,
}

/// Autocovariance of unit-step fractional Gaussian noise at lag `k`.
fn fgn_autocov(h: f64, k: usize) -> f64 {
    let e = 2.0 * h;
    let k = k as f64;
    0.5 * ((k + 1.0).powf(e) - 2.0 * k.powf(e) + (k - 1.0).abs().powf(e))
}

/// Eigenvalues of the minimal circulant embedding of `n` fGn samples.
fn circulant_eigenvalues(n: usize, h: f64) -> Result<Vec<f64>> {
    let m = 2 * n;
    let mut c: Vec<Complex<f64>> = (0..m)
        .map(|j| {
            let lag = if j <= n { j } else { m - j };
            Complex::new(fgn_autocov(h, lag), 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut c);
    let max = c.iter().map(|z| z.re).fold(0.0, f64::max);
    let mut out = Vec::with_capacity(m);
    for (j, z) in c.iter().enumerate() {
        if z.re < -1e-10 * max {
            return Err(Error::numeric(format!(
                "circulant embedding eigenvalue {j} is {:.3e} < 0 (n = {n}, H = {h})",
                z.re
            )));
        }
        out.push(z.re.max(0.0));
    }
    Ok(out)
}

fn davies_harte(n: usize, eig: &[f64], rng: &mut Rng) -> Vec<f64> {
    let m = eig.len();
    let mut w: Vec<Complex<f64>> = eig
        .iter()
        .map(|&l| {
            let s = (l / m as f64).sqrt();
            let a: f64 = StandardNormal.sample(rng);
            let b: f64 = StandardNormal.sample(rng);
            Complex::new(s * a, s * b)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut w);
    w[..n].iter().map(|z| z.re).collect()
}

fn fgn_cholesky(n: usize, h: f64) -> Result<DMatrix<f64>> {
    let cov = DMatrix::from_fn(n, n, |i, j| fgn_autocov(h, i.abs_diff(j)));
    nalgebra::Cholesky::new(cov)
        .map(|c| c.unpack())
        .ok_or_else(|| Error::numeric(format!("fGn covariance (n = {n}, H = {h}) is not positive definite")))
}

fn cumulate(increments_by_component: &[Vec<f64>], step: f64, scale: f64, n: usize) -> Result<GridPath> {
    let m = increments_by_component.len();
    let mut values = vec![0.0; (n + 1) * m];
    for (c, inc) in increments_by_component.iter().enumerate() {
        let mut acc = 0.0;
        for k in 0..n {
            acc += scale * inc[k];
            values[(k + 1) * m + c] = acc;
        }
    }
    GridPath::new(uniform_times(0.0, step, n + 1), values, m)
}

/// fBm sample with an explicit generator choice.
pub fn sample_fbm_with(spec: &NoiseSpec, method: FbmMethod) -> Result<GridPath> {
    spec.validate()?;
    if spec.kind != NoiseKind::Fbm {
        return Err(Error::domain("sample_fbm needs kind = fbm"));
    }
    let n = spec.fine_steps;
    let h = spec.hurst;
    let scale = spec.step().powf(h);
    let mut r = rng(spec.seed);
    let use_dh = match method {
        FbmMethod::Cholesky => None,
        FbmMethod::DaviesHarte => Some(circulant_eigenvalues(n, h)?),
        FbmMethod::Auto => circulant_eigenvalues(n, h).ok(),
    };
    let incs: Vec<Vec<f64>> = match use_dh {
        Some(eig) => (0..spec.dim).map(|_| davies_harte(n, &eig, &mut r)).collect(),
        None => {
            let l = fgn_cholesky(n, h)?;
            (0..spec.dim)
                .map(|_| {
                    let z = nalgebra::DVector::from_fn(n, |_, _| StandardNormal.sample(&mut r));
                    (&l * z).iter().copied().collect()
                })
                .collect()
        }
    };
    cumulate(&incs, spec.step(), scale, n)
}

/// fBm sample by circulant embedding with Cholesky fallback.
pub fn sample_fbm(spec: &NoiseSpec) -> Result<GridPath> {
    sample_fbm_with(spec, FbmMethod::Auto)
}

/// Brownian sample with independent `N(0, Δ)` increments.
pub fn sample_bm(spec: &NoiseSpec) -> Result<GridPath> {
    spec.validate()?;
    let n = spec.fine_steps;
    let mut r = rng(spec.seed);
    let incs: Vec<Vec<f64>> = (0..spec.dim)
        .map(|_| (0..n).map(|_| StandardNormal.sample(&mut r)).collect())
        .collect();
    cumulate(&incs, spec.step(), spec.step().sqrt(), n)
}

/// Driver path for any kind.
pub fn sample_path(spec: &NoiseSpec) -> Result<GridPath> {
    match spec.kind {
        NoiseKind::Fbm => sample_fbm(spec),
        NoiseKind::BmIto | NoiseKind::BmStrat => sample_bm(spec),
    }
}

/// Enhancement convention for Brownian paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    Ito,
    Strat,
}

pub fn enhance_bm(path: &GridPath, convention: Convention) -> RoughPathGrid {
    match convention {
        Convention::Ito => lift_ito(path),
        Convention::Strat => lift_piecewise_linear(path),
    }
}

/// Sampled driver together with its lift (geometric for fBm and Stratonovich BM, Itô otherwise).
pub fn sample_lift(spec: &NoiseSpec) -> Result<RoughPathGrid> {
    let path = sample_path(spec)?;
    Ok(match spec.kind {
        NoiseKind::BmIto => enhance_bm(&path, Convention::Ito),
        _ => lift_piecewise_linear(&path),
    })
}

/// Lift of `t ↦ x_{h+t} − x_h` on `[0, T − h]`, with `h` a grid index.
pub fn wiener_shift_index(rp: &RoughPathGrid, h: usize) -> Result<RoughPathGrid> {
    if h + 1 >= rp.len() {
        return Err(Error::domain(format!(
            "shift index {h} leaves fewer than two instants"
        )));
    }
    if h == 0 {
        return Ok(rp.clone());
    }
    let restricted = rp.restrict(Window::new(h, rp.len() - 1)?)?;
    let p = restricted.path();
    let d = p.dim();
    let x0 = p.value(0).to_vec();
    let times: Vec<f64> = uniform_times(0.0, rp.path().step(), p.len());
    let values: Vec<f64> = (0..p.len())
        .flat_map(|k| (0..d).map(|i| p.value(k)[i] - x0[i]).collect::<Vec<_>>())
        .collect();
    RoughPathGrid::new(GridPath::new(times, values, d)?, restricted.anchored_areas().to_vec())
}

/// Wiener shift by a grid instant `h` given as a time.
pub fn wiener_shift(rp: &RoughPathGrid, h: f64) -> Result<RoughPathGrid> {
    let idx = rp.path().index_of(h)?;
    wiener_shift_index(rp, idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rough::rough_norm;

    #[test]
    fn starts_at_zero_and_is_deterministic() {
        let spec = NoiseSpec::fbm(0.45, 2, 1.0, 64, 11);
        let a = sample_fbm(&spec).unwrap();
        let b = sample_fbm(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.value(0), &[0.0, 0.0]);
        assert_ne!(a, sample_fbm(&spec.with_seed(12)).unwrap());
    }

    #[test]
    fn embedding_is_valid_across_hurst_range() {
        for h in [0.34, 0.4, 0.45, 0.5, 0.7, 0.95] {
            assert!(circulant_eigenvalues(256, h).is_ok(), "H = {h}");
        }
    }

    #[test]
    fn cholesky_and_circulant_agree_in_variance() {
        let n_paths = 3000;
        for method in [FbmMethod::DaviesHarte, FbmMethod::Cholesky] {
            let mut s = 0.0;
            for i in 0..n_paths {
                let spec = NoiseSpec::fbm(0.4, 1, 1.0, 16, i as u64);
                let p = sample_fbm_with(&spec, method).unwrap();
                s += p.value(16)[0].powi(2);
            }
            let v = s / n_paths as f64;
            // E B_1² = 1; stderr of the mean of χ²₁ is √(2/N) ≈ 0.026
            assert!((v - 1.0).abs() < 0.1, "{method:?}: {v}");
        }
    }

    #[test]
    fn validation() {
        assert!(NoiseSpec::fbm(0.3, 1, 1.0, 8, 0).validate().is_err());
        assert!(NoiseSpec::fbm(0.5, 0, 1.0, 8, 0).validate().is_err());
        assert!(NoiseSpec::fbm(0.5, 1, 0.0, 8, 0).validate().is_err());
        assert!(NoiseSpec::fbm(0.5, 1, 1.0, 1, 0).validate().is_err());
    }

    #[test]
    fn shift_identity_and_rebase() {
        let rp = sample_lift(&NoiseSpec::fbm(0.45, 2, 1.0, 32, 5)).unwrap();
        assert_eq!(wiener_shift(&rp, 0.0).unwrap(), rp);
        let s = wiener_shift(&rp, 0.25).unwrap();
        assert_eq!(s.path().value(0), &[0.0, 0.0]);
        assert_eq!(s.len(), 25);
        let a = rough_norm(&s, 2.5, Window::new(3, 17).unwrap()).unwrap();
        let b = rough_norm(&rp, 2.5, Window::new(11, 25).unwrap()).unwrap();
        assert!((a - b).abs() <= 1e-12 * (1.0 + b));
        assert!(wiener_shift(&rp, 0.26).is_err());
        assert!(wiener_shift(&rp, 1.0).is_err());
    }

    #[test]
    fn brownian_kinds() {
        let mut spec = NoiseSpec::fbm(0.5, 1, 2.0, 10, 1);
        spec.kind = NoiseKind::BmIto;
        let ito = sample_lift(&spec).unwrap();
        spec.kind = NoiseKind::BmStrat;
        let strat = sample_lift(&spec).unwrap();
        assert_eq!(ito.path(), strat.path());
        let d = strat.anchored_area(10)[0] - ito.anchored_area(10)[0];
        assert!((d - 1.0).abs() < 1e-13);
    }
}
