//! Discrete norms of a path controlled by the grid driver, with remainder
//! `R^y_{s,t} = y_{s,t} − G_s x_{s,t}` for a per-instant `d × m` matrix `G`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::SystemModel;
use crate::linalg::norm;
use crate::rough::path::{GridPath, RoughPathGrid};
use crate::rough::pvar::check_rough_exponent;
use crate::rough::{pvar_norm, variation_dp, Window};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscreteNorms {
    pub sup: f64,
    pub pvar: f64,
    pub remainder_qvar: f64,
    /// `|||y|||_{p-var} ∨ |||R^y|||_{q-var}`.
    pub joint: f64,
    /// `‖y_a‖ + joint`.
    pub anchored: f64,
}

pub(crate) fn check_same_grid(y: &GridPath, driver: &RoughPathGrid) -> Result<()> {
    let same = y.len() == driver.len()
        && y.times()
            .iter()
            .zip(driver.path().times())
            .all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + a.abs()));
    if !same {
        return Err(Error::domain("path and driver live on different grids"));
    }
    Ok(())
}

/// `|||R|||_{q-var}` over the window, `gs` holding `G_k` row-major for every grid instant.
pub(crate) fn remainder_qvar(y: &GridPath, gs: &[f64], driver: &RoughPathGrid, w: Window, q: f64) -> f64 {
    let (d, m) = (y.dim(), driver.dim());
    let mut dx = vec![0.0; m];
    let mut r = vec![0.0; d];
    variation_dp(w.start, w.end, |j, k| {
        driver.path().increment_into(j, k, &mut dx);
        let (a, b) = (y.value(j), y.value(k));
        let g = &gs[j * d * m..(j + 1) * d * m];
        for i in 0..d {
            let mut s = b[i] - a[i];
            for l in 0..m {
                s -= g[i * m + l] * dx[l];
            }
            r[i] = s;
        }
        let n = norm(&r);
        if n == 0.0 {
            0.0
        } else {
            n.powf(q)
        }
    })
    .powf(1.0 / q)
}

pub(crate) fn norms_with(
    y: &GridPath,
    gs: &[f64],
    driver: &RoughPathGrid,
    w: Window,
    p: f64,
) -> Result<DiscreteNorms> {
    check_rough_exponent(p)?;
    check_same_grid(y, driver)?;
    y.check_window(w)?;
    let sup = y.sup_norm(w);
    let pvar = pvar_norm(y, p, w)?;
    let remainder_qvar = remainder_qvar(y, gs, driver, w, p / 2.0);
    let joint = pvar.max(remainder_qvar);
    Ok(DiscreteNorms {
        sup,
        pvar,
        remainder_qvar,
        joint,
        anchored: norm(y.value(w.start)) + joint,
    })
}

/// `g(y_k)` for every instant, row-major and concatenated.
pub(crate) fn diffusion_along(model: &SystemModel, y: &GridPath) -> Vec<f64> {
    let (d, m) = (model.dim(), model.noise_dim());
    let mut gs = vec![0.0; y.len() * d * m];
    for k in 0..y.len() {
        model.diffusion.eval(y.value(k), &mut gs[k * d * m..(k + 1) * d * m]);
    }
    gs
}

/// Sup norm, p-variation, remainder q-variation and the joint norms of a scheme path.
pub fn discrete_norms(
    y: &GridPath,
    driver: &RoughPathGrid,
    model: &SystemModel,
    window: Window,
    p: f64,
) -> Result<DiscreteNorms> {
    norms_with(y, &diffusion_along(model, y), driver, window, p)
}
