//! Scalar functionals of the drift and diffusion used by the stability criteria.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::model::{Ball, Diffusion, GBounds, SystemModel};
use crate::error::{Error, Result};
use crate::linalg::{dist, norm};

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % b) as f64;
        i /= b;
        f *= inv;
    }
    r
}

/// Default number of ball samples for dimension `d`.
pub fn default_samples(d: usize) -> usize {
    4096 * d
}

/// Deterministic low-discrepancy points in the closed ball: half on the sphere, half inside.
///
/// The center is always included, and in one dimension so are both endpoints.
pub fn ball_points(center: &[f64], r: f64, count: usize) -> Vec<Vec<f64>> {
    let d = center.len();
    let mut pts = vec![center.to_vec()];
    if r == 0.0 || count == 0 {
        return pts;
    }
    if d == 1 {
        pts.push(vec![center[0] - r]);
        pts.push(vec![center[0] + r]);
        for i in 1..count.max(2) - 1 {
            let u = radical_inverse(i as u64, 2);
            pts.push(vec![center[0] - r + 2.0 * r * u]);
        }
        return pts;
    }
    assert!(2 * d < PRIMES.len(), "ball sampling supports d ≤ 7");
    for i in 1..=count {
        let mut dir = vec![0.0; d];
        for (k, v) in dir.iter_mut().enumerate() {
            // Box–Muller on a pair of Halton coordinates gives a Gaussian direction component.
            let u1 = radical_inverse(i as u64, PRIMES[2 * k]).max(1e-300);
            let u2 = radical_inverse(i as u64, PRIMES[2 * k + 1]);
            *v = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        }
        let n = norm(&dir);
        if n == 0.0 {
            continue;
        }
        let scale = if i % 2 == 0 {
            1.0
        } else {
            radical_inverse(i as u64, PRIMES[2 * d]).powf(1.0 / d as f64)
        };
        pts.push(
            center
                .iter()
                .zip(&dir)
                .map(|(c, u)| c + r * scale * u / n)
                .collect(),
        );
    }
    pts
}

/// Largest eigenvalue of the symmetric part of `a`.
pub fn ell_of_matrix(a: &DMatrix<f64>) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    sym.symmetric_eigenvalues().max()
}

/// `ℓ(f, ŷ) = sup_{‖h‖=1} ⟨h, Df(ŷ) h⟩`.
pub fn ell(model: &SystemModel, y: &[f64]) -> Result<f64> {
    let v = ell_of_matrix(&model.df(y));
    if !v.is_finite() {
        return Err(Error::numeric(format!("non-finite symmetric eigenvalue at {y:?}")));
    }
    Ok(v)
}

/// A supremum estimated from finitely many samples; never exceeds the true value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampledSup {
    pub value: f64,
    pub samples: usize,
}

/// `osc(Df(ŷ))_r = sup_{‖h‖≤r} ‖Df(ŷ+h) − Df(ŷ)‖`, sampled.
pub fn osc_df(model: &SystemModel, y: &[f64], r: f64, samples: usize) -> SampledSup {
    let base = model.df(y);
    let pts = ball_points(y, r, samples);
    let value = pts
        .iter()
        .map(|p| (model.df(p) - &base).norm())
        .fold(0.0, f64::max);
    SampledSup {
        value,
        samples: pts.len(),
    }
}

/// `‖Df‖_{∞,B(y,r)}`, sampled; exact at `r = 0`.
pub fn df_sup(model: &SystemModel, y: &[f64], r: f64, samples: usize) -> SampledSup {
    let pts = ball_points(y, r, samples);
    let value = pts.iter().map(|p| model.df(p).norm()).fold(0.0, f64::max);
    SampledSup {
        value,
        samples: pts.len(),
    }
}

/// `M(Df, ŷ, r) = ℓ(f, ŷ) + osc(Df(ŷ))_r`.
pub fn m_bound(model: &SystemModel, y: &[f64], r: f64, samples: usize) -> Result<f64> {
    Ok(ell(model, y)? + osc_df(model, y, r, samples).value)
}

/// `κ(λ, y, r) = M(Df, y, r) + 256 λ ‖f(y)‖ + 64 λ ‖Df‖_{∞,B(y,r)}`.
pub fn kappa(model: &SystemModel, lambda: f64, y: &[f64], r: f64, samples: usize) -> Result<f64> {
    let m = m_bound(model, y, r, samples)?;
    let fy = norm(&model.f(y));
    let dfs = df_sup(model, y, r, samples).value;
    Ok(m + 256.0 * lambda * fy + 64.0 * lambda * dfs)
}

fn check_bounds(b: &GBounds) -> Result<()> {
    for (name, v) in [("g", b.g), ("dg", b.dg), ("d2g", b.d2g), ("d3g", b.d3g)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::config(
                format!("bounds.{name}"),
                "must be a finite non-negative number",
            ));
        }
    }
    Ok(())
}

fn six_term_max(g: f64, dg: f64, d2g: f64, d3g: f64) -> f64 {
    [
        dg,
        (dg * g).sqrt(),
        (d2g * g).sqrt(),
        (d3g * g).sqrt(),
        (d2g * g * g).cbrt(),
        (d3g * g * g).cbrt(),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// `C_g`, the six-term maximum over the global sup-norms.
pub fn cg_constant(b: &GBounds) -> Result<f64> {
    check_bounds(b)?;
    Ok(six_term_max(b.g, b.dg, b.d2g, b.d3g))
}

/// `L_g` for the discrete scheme.
pub fn lg_constant(b: &GBounds) -> Result<f64> {
    check_bounds(b)?;
    let top = b.dg.max(b.d2g).max(b.d3g);
    Ok([b.dg, b.d2g, (b.g * top).sqrt(), (b.g * b.g * b.d3g).cbrt()]
        .into_iter()
        .fold(0.0, f64::max))
}

/// Reduced `L_g = max{‖Dg‖, (‖g‖‖D²g‖)^{1/2}}`, valid when the reference is a deterministic fixed point.
pub fn lg_reduced(b: &GBounds) -> Result<f64> {
    check_bounds(b)?;
    Ok(b.dg.max((b.g * b.d2g).sqrt()))
}

/// `C*_g(ε₀)`: the six-term maximum with sup-norms restricted to `B(0, ε₀)`.
pub fn cg_star_local(model: &SystemModel, eps0: f64) -> Result<f64> {
    if !(eps0 > 0.0) {
        return Err(Error::config("eps0", "must be positive"));
    }
    let ball = Ball::origin(model.dim(), eps0);
    let b = match &model.bounds.ball {
        Some(declared) if declared == &ball => model.bounds.clone(),
        _ => {
            let arr = model.diffusion.bounds_on(Some(&ball)).ok_or_else(|| {
                Error::config("bounds", format!("no bounds available over B(0, {eps0})"))
            })?;
            GBounds::from_array(arr, super::model::BoundsProvenance::ClosedForm, Some(ball))
        }
    };
    cg_constant(&b)
}

/// Default sewing constant `(1 − 2^{1−3/p})^{−1}`.
pub fn sewing_constant(p: f64) -> Result<f64> {
    crate::rough::pvar::check_rough_exponent(p)?;
    Ok(1.0 / (1.0 - 2f64.powf(1.0 - 3.0 / p)))
}

/// `C_p` honoring an explicit override.
pub fn sewing_constant_or(p: f64, override_value: Option<f64>) -> Result<f64> {
    match override_value {
        Some(c) if c > 0.0 && c.is_finite() => Ok(c),
        Some(_) => Err(Error::config("c_p", "must be positive and finite")),
        None => sewing_constant(p),
    }
}

/// Declared bounds compared with a sampled probe of the same sup-norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsCertificate {
    pub declared: [f64; 4],
    pub probed: [f64; 4],
    /// Smallest `declared − probed` across the four norms; negative means a declared bound is violated.
    pub margin: f64,
    pub samples: usize,
}

/// Probes `‖g‖, ‖Dg‖, ‖D²g‖, ‖D³g‖` over a ball (third derivative by central differences).
pub fn probe_bounds(diff: &dyn Diffusion, ball: &Ball, samples: usize) -> ([f64; 4], usize) {
    let d = diff.dim();
    let m = diff.noise_dim();
    let mut g = vec![0.0; d * m];
    let mut dg = vec![0.0; d * m * d];
    let mut h = vec![0.0; d * m * d * d];
    let mut hp = h.clone();
    let mut hm = h.clone();
    let step = 1e-4;
    let mut out = [0.0f64; 4];
    let pts = ball_points(&ball.center, ball.radius, samples);
    for p in &pts {
        diff.eval(p, &mut g);
        diff.jacobian(p, &mut dg);
        diff.hessian(p, &mut h);
        out[0] = out[0].max(norm(&g));
        out[1] = out[1].max(norm(&dg));
        out[2] = out[2].max(norm(&h));
        let mut d3 = 0.0;
        let mut q = p.clone();
        for k in 0..d {
            let orig = q[k];
            q[k] = orig + step;
            diff.hessian(&q, &mut hp);
            q[k] = orig - step;
            diff.hessian(&q, &mut hm);
            q[k] = orig;
            d3 += hp
                .iter()
                .zip(&hm)
                .map(|(a, b)| ((a - b) / (2.0 * step)).powi(2))
                .sum::<f64>();
        }
        out[3] = out[3].max(d3.sqrt());
    }
    (out, pts.len())
}

/// Certifies the model's bounds by probing them over the model's ball (or `fallback` if global).
pub fn certify_bounds(model: &SystemModel, fallback: &Ball, samples: usize) -> BoundsCertificate {
    let ball = model.bounds.ball.clone().unwrap_or_else(|| fallback.clone());
    let (probed, n) = probe_bounds(model.diffusion.as_ref(), &ball, samples);
    let declared = [model.bounds.g, model.bounds.dg, model.bounds.d2g, model.bounds.d3g];
    let margin = declared
        .iter()
        .zip(&probed)
        .map(|(a, b)| a - b)
        .fold(f64::INFINITY, f64::min);
    BoundsCertificate {
        declared,
        probed,
        margin,
        samples: n,
    }
}

/// Pointwise audit `⟨y−ŷ, f(y)−f(ŷ)⟩ ≤ M ‖y−ŷ‖²` on ball samples; returns the worst slack.
pub fn audit_fdiff(model: &SystemModel, y_hat: &[f64], r: f64, m: f64, samples: usize) -> f64 {
    let fh = model.f(y_hat);
    let mut worst = f64::INFINITY;
    for y in ball_points(y_hat, r, samples) {
        let h: Vec<f64> = y.iter().zip(y_hat).map(|(a, b)| a - b).collect();
        let fy = model.f(&y);
        let lhs: f64 = h.iter().zip(fy.iter().zip(&fh)).map(|(h, (a, b))| h * (a - b)).sum();
        let rhs = m * dist(&y, y_hat).powi(2);
        worst = worst.min(rhs - lhs);
    }
    worst
}
