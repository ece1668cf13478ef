//! Drift and diffusion fields with derivatives and sup-norm bounds.
//!
//! Shapes, all row-major: `f(y) ∈ R^d`, `Df(y) ∈ R^{d×d}`, `g(y) ∈ R^{d×m}` with entry `(i, j)` at
//! `i*m + j`, `Dg(y)` at `(i*m + j)*d + k` for `∂g_ij/∂y_k`, `D²g(y)` at `((i*m + j)*d + k)*d + l`.

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Drift field `f` with its Jacobian.
pub trait Drift: Send + Sync + Debug {
    fn dim(&self) -> usize;
    fn eval(&self, y: &[f64], out: &mut [f64]);
    fn jacobian(&self, y: &[f64], out: &mut [f64]);
    /// Closed-form `sup ‖Df‖` (Frobenius) over a ball, when available.
    fn jacobian_bound(&self, _ball: &Ball) -> Option<f64> {
        None
    }
}

/// Diffusion field `g` with first and second derivatives.
pub trait Diffusion: Send + Sync + Debug {
    fn dim(&self) -> usize;
    fn noise_dim(&self) -> usize;
    fn eval(&self, y: &[f64], out: &mut [f64]);
    fn jacobian(&self, y: &[f64], out: &mut [f64]);
    fn hessian(&self, y: &[f64], out: &mut [f64]);
    /// Closed-form sup-norm bounds, over the ball if given, else global.
    fn bounds_on(&self, _ball: Option<&Ball>) -> Option<[f64; 4]> {
        None
    }
    fn is_zero(&self) -> bool {
        false
    }
}

/// Closed Euclidean ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn origin(dim: usize, radius: f64) -> Self {
        Ball {
            center: vec![0.0; dim],
            radius,
        }
    }
}

/// Where a set of bounds came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundsProvenance {
    Declared,
    ClosedForm,
    Probed,
}

/// Sup-norms `‖g‖∞, ‖Dg‖∞, ‖D²g‖∞, ‖D³g‖∞` (Frobenius norms of the tensors).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GBounds {
    pub g: f64,
    pub dg: f64,
    pub d2g: f64,
    pub d3g: f64,
    pub provenance: BoundsProvenance,
    /// Domain of validity; `None` means global.
    pub ball: Option<Ball>,
}

impl GBounds {
    pub fn from_array(b: [f64; 4], provenance: BoundsProvenance, ball: Option<Ball>) -> Self {
        GBounds {
            g: b[0],
            dg: b[1],
            d2g: b[2],
            d3g: b[3],
            provenance,
            ball,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        GBounds {
            g: c.abs() * self.g,
            dg: c.abs() * self.dg,
            d2g: c.abs() * self.d2g,
            d3g: c.abs() * self.d3g,
            ..self.clone()
        }
    }
}

/// `‖f(y)‖ ≤ C_f (1 + ‖y‖^ρ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Growth {
    pub c_f: f64,
    pub rho: f64,
}

/// `⟨y, f(y)⟩ ≤ D_1 − D_2 ‖y‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dissipativity {
    pub d1: f64,
    pub d2: f64,
}

/// Drift, diffusion and the constants the criteria need.
#[derive(Debug, Clone)]
pub struct SystemModel {
    pub drift: Arc<dyn Drift>,
    pub diffusion: Arc<dyn Diffusion>,
    pub bounds: GBounds,
    /// `L_f = ‖Df‖∞` when finite (over `domain` if set).
    pub lipschitz: Option<f64>,
    pub growth: Option<Growth>,
    pub dissipativity: Option<Dissipativity>,
    pub domain: Option<Ball>,
}

impl SystemModel {
    /// Builds a model, taking closed-form bounds and `L_f` where available.
    pub fn new(drift: Arc<dyn Drift>, diffusion: Arc<dyn Diffusion>, domain: Option<Ball>) -> Result<Self> {
        if drift.dim() != diffusion.dim() {
            return Err(Error::config(
                "model",
                format!(
                    "drift dimension {} differs from diffusion dimension {}",
                    drift.dim(),
                    diffusion.dim()
                ),
            ));
        }
        let bounds = diffusion
            .bounds_on(domain.as_ref())
            .map(|b| GBounds::from_array(b, BoundsProvenance::ClosedForm, domain.clone()))
            .ok_or_else(|| {
                Error::config(
                    "bounds",
                    "diffusion has no closed-form bounds here; declare them",
                )
            })?;
        let lipschitz = domain.as_ref().and_then(|b| drift.jacobian_bound(b));
        Ok(SystemModel {
            drift,
            diffusion,
            bounds,
            lipschitz,
            growth: None,
            dissipativity: None,
            domain,
        })
    }

    /// Builds a model with explicitly declared diffusion bounds.
    pub fn with_bounds(
        drift: Arc<dyn Drift>,
        diffusion: Arc<dyn Diffusion>,
        bounds: GBounds,
        domain: Option<Ball>,
    ) -> Result<Self> {
        if drift.dim() != diffusion.dim() {
            return Err(Error::config("model", "drift and diffusion dimensions differ"));
        }
        let lipschitz = domain.as_ref().and_then(|b| drift.jacobian_bound(b));
        Ok(SystemModel {
            drift,
            diffusion,
            bounds,
            lipschitz,
            growth: None,
            dissipativity: None,
            domain,
        })
    }

    pub fn dim(&self) -> usize {
        self.drift.dim()
    }

    pub fn noise_dim(&self) -> usize {
        self.diffusion.noise_dim()
    }

    pub fn f(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.drift.eval(y, &mut out);
        out
    }

    pub fn df(&self, y: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d * d];
        self.drift.jacobian(y, &mut out);
        DMatrix::from_row_slice(d, d, &out)
    }

    pub fn g(&self, y: &[f64]) -> DMatrix<f64> {
        let (d, m) = (self.dim(), self.noise_dim());
        let mut out = vec![0.0; d * m];
        self.diffusion.eval(y, &mut out);
        DMatrix::from_row_slice(d, m, &out)
    }

    /// Same model with the diffusion multiplied by `c` (bounds scale accordingly).
    pub fn scale_diffusion(&self, c: f64) -> SystemModel {
        SystemModel {
            diffusion: Arc::new(ScaledDiffusion {
                inner: self.diffusion.clone(),
                c,
            }),
            bounds: self.bounds.scaled(c),
            ..self.clone()
        }
    }

    /// Same model with the diffusion removed.
    pub fn without_noise(&self) -> SystemModel {
        SystemModel {
            diffusion: Arc::new(DiffusionSpec::Zero {
                dim: self.dim(),
                noise_dim: self.noise_dim(),
            }),
            bounds: GBounds::from_array([0.0; 4], BoundsProvenance::ClosedForm, None),
            ..self.clone()
        }
    }

    pub fn require_lipschitz(&self) -> Result<f64> {
        self.lipschitz
            .ok_or_else(|| Error::config("lipschitz", "L_f is required; declare it or a domain ball"))
    }
}

#[derive(Debug)]
struct ScaledDiffusion {
    inner: Arc<dyn Diffusion>,
    c: f64,
}

impl Diffusion for ScaledDiffusion {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn noise_dim(&self) -> usize {
        self.inner.noise_dim()
    }
    fn eval(&self, y: &[f64], out: &mut [f64]) {
        self.inner.eval(y, out);
        out.iter_mut().for_each(|v| *v *= self.c);
    }
    fn jacobian(&self, y: &[f64], out: &mut [f64]) {
        self.inner.jacobian(y, out);
        out.iter_mut().for_each(|v| *v *= self.c);
    }
    fn hessian(&self, y: &[f64], out: &mut [f64]) {
        self.inner.hessian(y, out);
        out.iter_mut().for_each(|v| *v *= self.c);
    }
    fn bounds_on(&self, ball: Option<&Ball>) -> Option<[f64; 4]> {
        self.inner
            .bounds_on(ball)
            .map(|b| b.map(|v| v * self.c.abs()))
    }
    fn is_zero(&self) -> bool {
        self.c == 0.0 || self.inner.is_zero()
    }
}

/// One monomial `coef · Π_k y_k^{powers_k}` contributing to output component `component`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub component: usize,
    pub coef: f64,
    pub powers: Vec<u32>,
}

fn default_fhn_i() -> f64 {
    0.265
}
fn default_fhn_mu() -> f64 {
    0.75
}
fn default_fhn_j() -> f64 {
    0.7
}
fn default_fhn_eps() -> f64 {
    0.08
}

/// Built-in drift families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DriftSpec {
    /// `f(y) = αy − y³` (scalar).
    Pitchfork { alpha: f64 },
    /// `f(v, w) = (v − v³/3 − w + I, ε(v − μw + J))`.
    Fhn {
        #[serde(default = "default_fhn_i")]
        i_ext: f64,
        #[serde(default = "default_fhn_mu")]
        mu: f64,
        #[serde(default = "default_fhn_j")]
        j: f64,
        #[serde(default = "default_fhn_eps")]
        eps: f64,
    },
    /// `f(y) = A y + b`.
    Linear {
        a: Vec<Vec<f64>>,
        #[serde(default)]
        b: Option<Vec<f64>>,
    },
    /// `f(y) = y (μ − ‖y‖²)`.
    CubicRadial { mu: f64, dim: usize },
    /// Sum of monomials per component.
    Polynomial { dim: usize, terms: Vec<PolyTerm> },
    Zero { dim: usize },
}

impl DriftSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DriftSpec::Linear { a, b } => {
                let d = a.len();
                if d == 0 || a.iter().any(|r| r.len() != d) {
                    return Err(Error::config("drift.a", "must be a non-empty square matrix"));
                }
                if let Some(b) = b {
                    if b.len() != d {
                        return Err(Error::config("drift.b", "length must match drift.a"));
                    }
                }
            }
            DriftSpec::Polynomial { dim, terms } => {
                if *dim == 0 {
                    return Err(Error::config("drift.dim", "must be positive"));
                }
                for (i, t) in terms.iter().enumerate() {
                    if t.component >= *dim || t.powers.len() != *dim {
                        return Err(Error::config(
                            format!("drift.terms[{i}]"),
                            "component out of range or powers length differs from dim",
                        ));
                    }
                }
            }
            DriftSpec::CubicRadial { dim, .. } | DriftSpec::Zero { dim } if *dim == 0 => {
                return Err(Error::config("drift.dim", "must be positive"));
            }
            _ => {}
        }
        Ok(())
    }
}

fn ipow(x: f64, e: u32) -> f64 {
    x.powi(e as i32)
}

impl Drift for DriftSpec {
    fn dim(&self) -> usize {
        match self {
            DriftSpec::Pitchfork { .. } => 1,
            DriftSpec::Fhn { .. } => 2,
            DriftSpec::Linear { a, .. } => a.len(),
            DriftSpec::CubicRadial { dim, .. } | DriftSpec::Polynomial { dim, .. } | DriftSpec::Zero { dim } => *dim,
        }
    }

    fn eval(&self, y: &[f64], out: &mut [f64]) {
        match self {
            DriftSpec::Pitchfork { alpha } => out[0] = alpha * y[0] - y[0] * y[0] * y[0],
            DriftSpec::Fhn { i_ext, mu, j, eps } => {
                let (v, w) = (y[0], y[1]);
                out[0] = v - v * v * v / 3.0 - w + i_ext;
                out[1] = eps * (v - mu * w + j);
            }
            DriftSpec::Linear { a, b } => {
                for (i, row) in a.iter().enumerate() {
                    out[i] = row.iter().zip(y).map(|(a, y)| a * y).sum::<f64>()
                        + b.as_ref().map_or(0.0, |b| b[i]);
                }
            }
            DriftSpec::CubicRadial { mu, .. } => {
                let r2: f64 = y.iter().map(|v| v * v).sum();
                for (o, v) in out.iter_mut().zip(y) {
                    *o = v * (mu - r2);
                }
            }
            DriftSpec::Polynomial { terms, .. } => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for t in terms {
                    let mono: f64 = t.powers.iter().zip(y).map(|(&e, &v)| ipow(v, e)).product();
                    out[t.component] += t.coef * mono;
                }
            }
            DriftSpec::Zero { .. } => out.iter_mut().for_each(|o| *o = 0.0),
        }
    }

    fn jacobian(&self, y: &[f64], out: &mut [f64]) {
        let d = self.dim();
        match self {
            DriftSpec::Pitchfork { alpha } => out[0] = alpha - 3.0 * y[0] * y[0],
            DriftSpec::Fhn { mu, eps, .. } => {
                out[0] = 1.0 - y[0] * y[0];
                out[1] = -1.0;
                out[2] = *eps;
                out[3] = -eps * mu;
            }
            DriftSpec::Linear { a, .. } => {
                for i in 0..d {
                    for k in 0..d {
                        out[i * d + k] = a[i][k];
                    }
                }
            }
            DriftSpec::CubicRadial { mu, .. } => {
                let r2: f64 = y.iter().map(|v| v * v).sum();
                for i in 0..d {
                    for k in 0..d {
                        out[i * d + k] = -2.0 * y[i] * y[k] + if i == k { mu - r2 } else { 0.0 };
                    }
                }
            }
            DriftSpec::Polynomial { terms, .. } => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for t in terms {
                    for k in 0..d {
                        let e = t.powers[k];
                        if e == 0 {
                            continue;
                        }
                        let mut v = t.coef * e as f64 * ipow(y[k], e - 1);
                        for (l, &el) in t.powers.iter().enumerate() {
                            if l != k {
                                v *= ipow(y[l], el);
                            }
                        }
                        out[t.component * d + k] += v;
                    }
                }
            }
            DriftSpec::Zero { .. } => out.iter_mut().for_each(|o| *o = 0.0),
        }
    }

    fn jacobian_bound(&self, ball: &Ball) -> Option<f64> {
        match self {
            DriftSpec::Pitchfork { alpha } => {
                let c = ball.center[0];
                let (lo, hi) = (c - ball.radius, c + ball.radius);
                let max_sq = lo.abs().max(hi.abs()).powi(2);
                let min_sq = if lo <= 0.0 && hi >= 0.0 {
                    0.0
                } else {
                    lo.abs().min(hi.abs()).powi(2)
                };
                Some((alpha - 3.0 * max_sq).abs().max((alpha - 3.0 * min_sq).abs()))
            }
            DriftSpec::Fhn { mu, eps, .. } => {
                let c = ball.center[0];
                let (lo, hi) = (c - ball.radius, c + ball.radius);
                let max_sq = lo.abs().max(hi.abs()).powi(2);
                let min_sq = if lo <= 0.0 && hi >= 0.0 {
                    0.0
                } else {
                    lo.abs().min(hi.abs()).powi(2)
                };
                let a = (1.0 - max_sq).abs().max((1.0 - min_sq).abs());
                Some((a * a + 1.0 + eps * eps * (1.0 + mu * mu)).sqrt())
            }
            DriftSpec::Linear { a, .. } => {
                Some(a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt())
            }
            DriftSpec::Zero { .. } => Some(0.0),
            _ => None,
        }
    }
}

/// Built-in diffusion families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DiffusionSpec {
    Zero { dim: usize, noise_dim: usize },
    /// `g(y) = G` (d × m).
    Constant { g: Vec<Vec<f64>> },
    /// Column `j` of `g(y)` is `G_j y`; `mats[j]` is `G_j` (d × d).
    Linear { mats: Vec<Vec<Vec<f64>>> },
    /// `g_ij(y) = scale · ( weights_ij · tanh(y_i − center_i) + offset_ij )`.
    Tanh {
        scale: f64,
        weights: Vec<Vec<f64>>,
        #[serde(default)]
        offset: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
}

const TANH2_MAX: f64 = 0.769_800_358_919_501_2; // 4/(3√3)
const TANH3_MAX: f64 = 2.0;

fn frob(rows: &[Vec<f64>]) -> f64 {
    rows.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

impl DiffusionSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DiffusionSpec::Zero { dim, noise_dim } if *dim == 0 || *noise_dim == 0 => {
                Err(Error::config("diffusion", "dimensions must be positive"))
            }
            DiffusionSpec::Constant { g } => {
                if g.is_empty() || g[0].is_empty() || g.iter().any(|r| r.len() != g[0].len()) {
                    Err(Error::config("diffusion.g", "must be a non-empty rectangular matrix"))
                } else {
                    Ok(())
                }
            }
            DiffusionSpec::Linear { mats } => {
                if mats.is_empty() {
                    return Err(Error::config("diffusion.mats", "needs at least one matrix"));
                }
                let d = mats[0].len();
                for (j, m) in mats.iter().enumerate() {
                    if m.len() != d || m.iter().any(|r| r.len() != d) || d == 0 {
                        return Err(Error::config(
                            format!("diffusion.mats[{j}]"),
                            "all matrices must be square of the same size",
                        ));
                    }
                }
                Ok(())
            }
            DiffusionSpec::Tanh {
                weights,
                offset,
                center,
                ..
            } => {
                let d = weights.len();
                if d == 0 || weights[0].is_empty() || weights.iter().any(|r| r.len() != weights[0].len()) {
                    return Err(Error::config("diffusion.weights", "must be a non-empty rectangular matrix"));
                }
                if let Some(o) = offset {
                    if o.len() != d || o.iter().any(|r| r.len() != weights[0].len()) {
                        return Err(Error::config("diffusion.offset", "shape must match weights"));
                    }
                }
                if let Some(c) = center {
                    if c.len() != d {
                        return Err(Error::config("diffusion.center", "length must match weights rows"));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

impl Diffusion for DiffusionSpec {
    fn dim(&self) -> usize {
        match self {
            DiffusionSpec::Zero { dim, .. } => *dim,
            DiffusionSpec::Constant { g } => g.len(),
            DiffusionSpec::Linear { mats } => mats[0].len(),
            DiffusionSpec::Tanh { weights, .. } => weights.len(),
        }
    }

    fn noise_dim(&self) -> usize {
        match self {
            DiffusionSpec::Zero { noise_dim, .. } => *noise_dim,
            DiffusionSpec::Constant { g } => g[0].len(),
            DiffusionSpec::Linear { mats } => mats.len(),
            DiffusionSpec::Tanh { weights, .. } => weights[0].len(),
        }
    }

    fn eval(&self, y: &[f64], out: &mut [f64]) {
        let m = self.noise_dim();
        match self {
            DiffusionSpec::Zero { .. } => out.iter_mut().for_each(|o| *o = 0.0),
            DiffusionSpec::Constant { g } => {
                for (i, row) in g.iter().enumerate() {
                    out[i * m..(i + 1) * m].copy_from_slice(row);
                }
            }
            DiffusionSpec::Linear { mats } => {
                for (j, gj) in mats.iter().enumerate() {
                    for (i, row) in gj.iter().enumerate() {
                        out[i * m + j] = row.iter().zip(y).map(|(a, v)| a * v).sum();
                    }
                }
            }
            DiffusionSpec::Tanh {
                scale,
                weights,
                offset,
                center,
            } => {
                for (i, row) in weights.iter().enumerate() {
                    let t = (y[i] - center.as_ref().map_or(0.0, |c| c[i])).tanh();
                    for (j, w) in row.iter().enumerate() {
                        let b = offset.as_ref().map_or(0.0, |o| o[i][j]);
                        out[i * m + j] = scale * (w * t + b);
                    }
                }
            }
        }
    }

    fn jacobian(&self, y: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let m = self.noise_dim();
        out.iter_mut().for_each(|o| *o = 0.0);
        match self {
            DiffusionSpec::Zero { .. } | DiffusionSpec::Constant { .. } => {}
            DiffusionSpec::Linear { mats } => {
                for (j, gj) in mats.iter().enumerate() {
                    for (i, row) in gj.iter().enumerate() {
                        for (k, a) in row.iter().enumerate() {
                            out[(i * m + j) * d + k] = *a;
                        }
                    }
                }
            }
            DiffusionSpec::Tanh {
                scale,
                weights,
                center,
                ..
            } => {
                for (i, row) in weights.iter().enumerate() {
                    let t = (y[i] - center.as_ref().map_or(0.0, |c| c[i])).tanh();
                    let s1 = 1.0 - t * t;
                    for (j, w) in row.iter().enumerate() {
                        out[(i * m + j) * d + i] = scale * w * s1;
                    }
                }
            }
        }
    }

    fn hessian(&self, y: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let m = self.noise_dim();
        out.iter_mut().for_each(|o| *o = 0.0);
        if let DiffusionSpec::Tanh {
            scale,
            weights,
            center,
            ..
        } = self
        {
            for (i, row) in weights.iter().enumerate() {
                let t = (y[i] - center.as_ref().map_or(0.0, |c| c[i])).tanh();
                let s2 = -2.0 * t * (1.0 - t * t);
                for (j, w) in row.iter().enumerate() {
                    out[((i * m + j) * d + i) * d + i] = scale * w * s2;
                }
            }
        }
    }

    fn bounds_on(&self, ball: Option<&Ball>) -> Option<[f64; 4]> {
        match self {
            DiffusionSpec::Zero { .. } => Some([0.0; 4]),
            DiffusionSpec::Constant { g } => Some([frob(g), 0.0, 0.0, 0.0]),
            DiffusionSpec::Linear { mats } => {
                let dg = mats.iter().map(|m| frob(m).powi(2)).sum::<f64>().sqrt();
                let ball = ball?;
                let r = ball.center.iter().map(|v| v * v).sum::<f64>().sqrt() + ball.radius;
                Some([dg * r, dg, 0.0, 0.0])
            }
            DiffusionSpec::Tanh {
                scale,
                weights,
                offset,
                center,
            } => {
                let s = scale.abs();
                let mut g2 = 0.0;
                for (i, row) in weights.iter().enumerate() {
                    let t = match ball {
                        Some(b) => {
                            let c = center.as_ref().map_or(0.0, |c| c[i]);
                            ((b.center[i] - c).abs() + b.radius).tanh()
                        }
                        None => 1.0,
                    };
                    for (j, w) in row.iter().enumerate() {
                        let b = offset.as_ref().map_or(0.0, |o| o[i][j]);
                        g2 += (w.abs() * t + b.abs()).powi(2);
                    }
                }
                let a = frob(weights);
                Some([s * g2.sqrt(), s * a, s * a * TANH2_MAX, s * a * TANH3_MAX])
            }
        }
    }

    fn is_zero(&self) -> bool {
        match self {
            DiffusionSpec::Zero { .. } => true,
            DiffusionSpec::Tanh { scale, .. } => *scale == 0.0,
            _ => false,
        }
    }
}

/// Declarative model description, as read from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub drift: DriftSpec,
    pub diffusion: DiffusionSpec,
    /// Declared `[‖g‖, ‖Dg‖, ‖D²g‖, ‖D³g‖]`; overrides closed forms.
    #[serde(default)]
    pub bounds: Option<[f64; 4]>,
    #[serde(default)]
    pub domain: Option<Ball>,
    #[serde(default)]
    pub lipschitz: Option<f64>,
    #[serde(default)]
    pub growth: Option<Growth>,
    #[serde(default)]
    pub dissipativity: Option<Dissipativity>,
}

impl ModelConfig {
    pub fn build(&self) -> Result<SystemModel> {
        self.drift.validate()?;
        self.diffusion.validate()?;
        let d = self.drift.dim();
        if self.diffusion.dim() != d {
            return Err(Error::config(
                "diffusion",
                format!("dimension {} differs from drift dimension {d}", self.diffusion.dim()),
            ));
        }
        if let Some(b) = &self.domain {
            if b.center.len() != d || !(b.radius >= 0.0) {
                return Err(Error::config("domain", "center length must match dimension, radius ≥ 0"));
            }
        }
        let drift: Arc<dyn Drift> = Arc::new(self.drift.clone());
        let diffusion: Arc<dyn Diffusion> = Arc::new(self.diffusion.clone());
        let mut model = match self.bounds {
            Some(b) => {
                if b.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(Error::config("bounds", "bounds must be finite and non-negative"));
                }
                SystemModel::with_bounds(
                    drift,
                    diffusion,
                    GBounds::from_array(b, BoundsProvenance::Declared, self.domain.clone()),
                    self.domain.clone(),
                )?
            }
            None => SystemModel::new(drift, diffusion, self.domain.clone())?,
        };
        if let Some(l) = self.lipschitz {
            if !(l >= 0.0) {
                return Err(Error::config("lipschitz", "must be non-negative"));
            }
            model.lipschitz = Some(l);
        }
        model.growth = self.growth;
        if let Some(ds) = self.dissipativity {
            if !(ds.d2 > 0.0) {
                return Err(Error::config("dissipativity.d2", "must be positive"));
            }
        }
        model.dissipativity = self.dissipativity;
        Ok(model)
    }
}

/// Finite-difference Jacobian of the drift (central differences).
pub fn fd_jacobian(drift: &dyn Drift, y: &[f64], h: f64) -> Vec<f64> {
    let d = drift.dim();
    let mut out = vec![0.0; d * d];
    let mut yp = y.to_vec();
    let mut fp = vec![0.0; d];
    let mut fm = vec![0.0; d];
    for k in 0..d {
        let orig = yp[k];
        yp[k] = orig + h;
        drift.eval(&yp, &mut fp);
        yp[k] = orig - h;
        drift.eval(&yp, &mut fm);
        yp[k] = orig;
        for i in 0..d {
            out[i * d + k] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    out
}

/// Finite-difference derivative of the diffusion, laid out like [`Diffusion::jacobian`].
pub fn fd_diffusion_jacobian(diff: &dyn Diffusion, y: &[f64], h: f64) -> Vec<f64> {
    let d = diff.dim();
    let m = diff.noise_dim();
    let mut out = vec![0.0; d * m * d];
    let mut yp = y.to_vec();
    let mut gp = vec![0.0; d * m];
    let mut gm = vec![0.0; d * m];
    for k in 0..d {
        let orig = yp[k];
        yp[k] = orig + h;
        diff.eval(&yp, &mut gp);
        yp[k] = orig - h;
        diff.eval(&yp, &mut gm);
        yp[k] = orig;
        for e in 0..d * m {
            out[e * d + k] = (gp[e] - gm[e]) / (2.0 * h);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pitchfork_values() {
        let f = DriftSpec::Pitchfork { alpha: 1.0 };
        let mut out = [0.0];
        f.eval(&[2.0], &mut out);
        assert_eq!(out[0], -6.0);
        f.jacobian(&[2.0], &mut out);
        assert_eq!(out[0], -11.0);
        let b = f.jacobian_bound(&Ball::origin(1, 1.0)).unwrap();
        assert_eq!(b, 2.0);
        let b = f.jacobian_bound(&Ball { center: vec![1.0], radius: 0.5 }).unwrap();
        assert!((b - (3.0 * 2.25 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn polynomial_jacobian_matches_fd() {
        let f = DriftSpec::Polynomial {
            dim: 2,
            terms: vec![
                PolyTerm { component: 0, coef: 1.5, powers: vec![2, 1] },
                PolyTerm { component: 1, coef: -0.5, powers: vec![0, 3] },
                PolyTerm { component: 1, coef: 2.0, powers: vec![1, 0] },
            ],
        };
        let y = [0.7, -1.3];
        let mut j = vec![0.0; 4];
        f.jacobian(&y, &mut j);
        let fd = fd_jacobian(&f, &y, 1e-6);
        for (a, b) in j.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-6 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn tanh_derivatives_match_fd() {
        let g = DiffusionSpec::Tanh {
            scale: 0.3,
            weights: vec![vec![1.0, 0.5], vec![-0.2, 2.0]],
            offset: Some(vec![vec![0.1, 0.0], vec![0.0, 0.2]]),
            center: Some(vec![0.2, -0.1]),
        };
        let y = [0.4, -0.9];
        let mut j = vec![0.0; 8];
        g.jacobian(&y, &mut j);
        let fd = fd_diffusion_jacobian(&g, &y, 1e-6);
        for (a, b) in j.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-7);
        }
        // second derivative against differences of the first
        let mut hs = vec![0.0; 16];
        g.hessian(&y, &mut hs);
        let h = 1e-6;
        for k in 0..2 {
            let mut yp = y;
            let mut ym = y;
            yp[k] += h;
            ym[k] -= h;
            let mut jp = vec![0.0; 8];
            let mut jm = vec![0.0; 8];
            g.jacobian(&yp, &mut jp);
            g.jacobian(&ym, &mut jm);
            for e in 0..8 {
                let fd = (jp[e] - jm[e]) / (2.0 * h);
                assert!((hs[e * 2 + k] - fd).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn linear_diffusion_layout() {
        let g = DiffusionSpec::Linear {
            mats: vec![vec![vec![0.0, 2.0], vec![-2.0, 0.0]]],
        };
        let mut out = vec![0.0; 2];
        g.eval(&[1.0, 3.0], &mut out);
        assert_eq!(out, vec![6.0, -2.0]);
        assert!(g.bounds_on(None).is_none());
        let b = g.bounds_on(Some(&Ball::origin(2, 1.0))).unwrap();
        assert!((b[1] - 8f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn config_errors_name_fields() {
        let cfg = ModelConfig {
            drift: DriftSpec::Pitchfork { alpha: 1.0 },
            diffusion: DiffusionSpec::Linear { mats: vec![vec![vec![0.1]]] },
            bounds: None,
            domain: None,
            lipschitz: None,
            growth: None,
            dissipativity: None,
        };
        match cfg.build() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "bounds"),
            other => panic!("unexpected {other:?}"),
        }
        let cfg = ModelConfig {
            domain: Some(Ball::origin(1, 2.0)),
            ..cfg
        };
        let m = cfg.build().unwrap();
        assert!((m.bounds.g - 0.2).abs() < 1e-15);
        assert_eq!(m.bounds.provenance, BoundsProvenance::ClosedForm);
        assert_eq!(m.lipschitz, Some(11.0));
    }

    #[test]
    fn config_from_json() {
        let text = r#"{
            "drift": {"family": "fhn"},
            "diffusion": {"family": "tanh", "scale": 0.01, "weights": [[1, 0], [0, 1]]}
        }"#;
        let cfg: ModelConfig = serde_json::from_str(text).unwrap();
        let m = cfg.build().unwrap();
        assert_eq!(m.dim(), 2);
        assert_eq!(m.noise_dim(), 2);
        assert!((m.bounds.dg - 0.01 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn scaling_diffusion() {
        let cfg = ModelConfig {
            drift: DriftSpec::Zero { dim: 1 },
            diffusion: DiffusionSpec::Tanh { scale: 1.0, weights: vec![vec![1.0]], offset: None, center: None },
            bounds: None,
            domain: None,
            lipschitz: None,
            growth: None,
            dissipativity: None,
        };
        let m = cfg.build().unwrap().scale_diffusion(0.5);
        assert_eq!(m.g(&[100.0])[(0, 0)], 0.5);
        assert_eq!(m.bounds.d3g, 1.0);
    }
}
