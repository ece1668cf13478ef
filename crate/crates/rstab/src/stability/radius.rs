//! Random radii: the attraction radius `R(ω)` around a stationary trajectory and the absorbing
//! radius of the pullback attractor.

use serde::Serialize;

use super::continuous::CriterionParams;
use crate::error::{Error, Result};
use crate::fields::{cg_constant, kappa, SystemModel};
use crate::rough::{rough_norm, GridPath, RoughPathGrid, Window};
use crate::schemes::norms::check_same_grid;
use crate::stopping::greedy_times;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadiusReport {
    pub radius: f64,
    /// Stopping interval and instant at which the infimum is attained.
    pub argmin_n: usize,
    pub argmin_t: f64,
    pub stops: usize,
}

/// `R = r · inf_n inf_{t ∈ [τ_n, τ_{n+1}]} exp{−4λ(n+1) − ∫_0^t κ(λ, a_s, r) ds}`, truncated at
/// `horizon`, with stopping times at `γ = λ / (C_p C_g)` and the integral by the trapezoid rule.
pub fn radius_r(
    model: &SystemModel,
    params: &CriterionParams,
    rp: &RoughPathGrid,
    trajectory: &GridPath,
    horizon: f64,
) -> Result<RadiusReport> {
    check_same_grid(trajectory, rp)?;
    let lambda = params
        .lambda
        .ok_or_else(|| Error::config("lambda", "the radius needs a fixed λ"))?;
    if !(lambda >= 0.0) {
        return Err(Error::config("lambda", "must be non-negative"));
    }
    let end = rp.path().index_of(rp.path().start_time() + horizon)?;
    let w = Window::new(0, end)?;
    let c_g = cg_constant(&model.bounds)?;
    let c_p = params.c_p()?;
    let cuts = if lambda > 0.0 && c_g > 0.0 {
        greedy_times(rp, params.p, lambda / (c_p * c_g), w)?.times
    } else {
        vec![0, end]
    };
    // exp{−E} is smallest where E = 4λ(n+1) + ∫κ is largest; a cut shared by two intervals
    // counts in the later one, which carries the larger penalty
    let mut integral = 0.0;
    let mut prev = kappa(model, lambda, trajectory.value(0), params.r, params.samples)?;
    let mut worst = (f64::NEG_INFINITY, 0, 0.0);
    let mut n = 0;
    for k in 0..=end {
        if k > 0 {
            let cur = kappa(model, lambda, trajectory.value(k), params.r, params.samples)?;
            integral += 0.5 * (prev + cur) * (rp.path().time(k) - rp.path().time(k - 1));
            prev = cur;
        }
        if n + 2 < cuts.len() && k == cuts[n + 1] {
            n += 1;
        }
        let e = 4.0 * lambda * (n + 1) as f64 + integral;
        if e > worst.0 {
            worst = (e, n, rp.path().time(k));
        }
    }
    Ok(RadiusReport {
        radius: params.r * (-worst.0).exp(),
        argmin_n: worst.1,
        argmin_t: worst.2,
        stops: cuts.len() - 1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttractorRadius {
    pub value: f64,
    /// Bound on the omitted terms `k > k_max`, assuming they stay below the largest kept norm.
    pub tail_bound: f64,
    /// `e^{−D_2 k/8}(1 + |||θ_{−k}x|||^{p(p+2)})` for `k = 0..=k_max`.
    pub terms: Vec<f64>,
}

/// `Γ + Γ Σ_{k≤k_max} e^{−D_2 k/8}(1 + |||θ_{−k}x|||^{p(p+2)}_{p-var,[−1,2]})`.
///
/// Time `0` of the formula is the grid instant `origin`; `rp` must cover
/// `[origin − k_max − 1, origin + 2]`.
pub fn attractor_radius(
    model: &SystemModel,
    rp: &RoughPathGrid,
    p: f64,
    gamma_const: f64,
    origin: f64,
    k_max: usize,
) -> Result<AttractorRadius> {
    let d2 = match model.dissipativity {
        Some(d) if d.d2 > 0.0 => d.d2,
        _ => return Err(Error::config("dissipativity.d2", "must be declared and positive")),
    };
    if !(gamma_const > 0.0) || !gamma_const.is_finite() {
        return Err(Error::config("gamma", "must be positive and finite"));
    }
    let exponent = p * (p + 2.0);
    let mut terms = Vec::with_capacity(k_max + 1);
    let mut top = 0.0f64;
    for k in 0..=k_max {
        let s = origin - k as f64;
        let w = rp.path().window(s - 1.0, s + 2.0)?;
        let v = rough_norm(rp, p, w)?.powf(exponent);
        top = top.max(v);
        terms.push((-d2 * k as f64 / 8.0).exp() * (1.0 + v));
    }
    let q = (-d2 / 8.0).exp();
    Ok(AttractorRadius {
        value: gamma_const * (1.0 + terms.iter().sum::<f64>()),
        tail_bound: gamma_const * q.powi(k_max as i32 + 1) / (1.0 - q) * (1.0 + top),
        terms,
    })
}
