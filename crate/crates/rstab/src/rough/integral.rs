//! Compensated Riemann sums for controlled integrands.
//!
//! ```text
//! ∫_s^t y ⊗ dx ≈ Σ_{[u,v] ⊂ [s,t]} ( y_u ⊗ x_{u,v} + y'_u X_{u,v} )
//! ```
//!
//! The result is a `d × m` matrix; for a scalar driver it is a `d`-vector.

use nalgebra::DMatrix;

use super::path::{ControlledPath, GridPath, RoughPathGrid, Window};
use super::pvar::{pvar_norm, qvar_area_norm, variation_dp};
use crate::error::{Error, Result};
use crate::linalg::{norm, norm_sq, outer_add};

/// Value of the compensated sum and its per-step terms (row-major `d × m` each).
#[derive(Debug, Clone)]
pub struct IntegralResult {
    pub value: DMatrix<f64>,
    pub steps: Vec<f64>,
}

fn check_shared_grid(ctrl: &ControlledPath, rp: &RoughPathGrid) -> Result<()> {
    if ctrl.path().len() != rp.len()
        || ctrl.noise_dim() != rp.dim()
        || ctrl
            .path()
            .times()
            .iter()
            .zip(rp.path().times())
            .any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + a.abs()))
    {
        return Err(Error::domain(
            "integrand and driver must share the same grid and noise dimension",
        ));
    }
    Ok(())
}

/// Germ `y_u ⊗ x_{u,v} + y'_u X_{u,v}` written into `out`.
fn germ_into(ctrl: &ControlledPath, rp: &RoughPathGrid, u: usize, v: usize, out: &mut [f64]) {
    let d = ctrl.path().dim();
    let m = rp.dim();
    let mut dx = vec![0.0; m];
    let mut xx = vec![0.0; m * m];
    rp.path().increment_into(u, v, &mut dx);
    rp.area_into(u, v, &mut xx);
    out.iter_mut().for_each(|o| *o = 0.0);
    outer_add(out, ctrl.path().value(u), &dx, 1.0);
    let yp = ctrl.derivative(u);
    for i in 0..d {
        for j in 0..m {
            let mut s = 0.0;
            for l in 0..m {
                s += yp[i * m + l] * xx[l * m + j];
            }
            out[i * m + j] += s;
        }
    }
}

/// Compensated Darboux sum over the fine grid inside the window.
pub fn rough_integral(ctrl: &ControlledPath, rp: &RoughPathGrid, w: Window) -> Result<IntegralResult> {
    check_shared_grid(ctrl, rp)?;
    rp.path().check_window(w)?;
    let d = ctrl.path().dim();
    let m = rp.dim();
    let mut total = vec![0.0; d * m];
    let mut steps = vec![0.0; w.steps() * d * m];
    for k in w.start..w.end {
        let s = &mut steps[(k - w.start) * d * m..(k - w.start + 1) * d * m];
        germ_into(ctrl, rp, k, k + 1, s);
        for (t, v) in total.iter_mut().zip(s.iter()) {
            *t += v;
        }
    }
    Ok(IntegralResult {
        value: DMatrix::from_row_slice(d, m, &total),
        steps,
    })
}

/// Local error `‖∫_s^t − y_s⊗x_{s,t} − y'_s X_{s,t}‖` for the window.
pub fn local_error(ctrl: &ControlledPath, rp: &RoughPathGrid, w: Window) -> Result<f64> {
    let int = rough_integral(ctrl, rp, w)?;
    let d = ctrl.path().dim();
    let m = rp.dim();
    let mut g = vec![0.0; d * m];
    germ_into(ctrl, rp, w.start, w.end, &mut g);
    let mut diff = 0.0;
    for i in 0..d {
        for j in 0..m {
            let e = int.value[(i, j)] - g[i * m + j];
            diff += e * e;
        }
    }
    Ok(diff.sqrt())
}

/// Sewing bound `C_p ( |||x|||_p |||R^y|||_q + |||y'|||_p |||X|||_q )` with `q = p/2`.
pub fn sewing_bound(
    ctrl: &ControlledPath,
    rp: &RoughPathGrid,
    p: f64,
    c_p: f64,
    w: Window,
) -> Result<f64> {
    check_shared_grid(ctrl, rp)?;
    let q = p / 2.0;
    let x_p = pvar_norm(rp.path(), p, w)?;
    let xx_q = qvar_area_norm(rp, q, w)?;
    let d = ctrl.path().dim();
    let m = rp.dim();
    let yp_path = GridPath::new(
        ctrl.path().times().to_vec(),
        (0..ctrl.path().len())
            .flat_map(|k| ctrl.derivative(k).to_vec())
            .collect(),
        d * m,
    )?;
    let yp_p = pvar_norm(&yp_path, p, w)?;
    let mut dx = vec![0.0; m];
    let mut r = vec![0.0; d];
    let r_q = variation_dp(w.start, w.end, |j, k| {
        rp.path().increment_into(j, k, &mut dx);
        ctrl.remainder_into(j, k, &dx, &mut r);
        let s = norm_sq(&r);
        if s == 0.0 {
            0.0
        } else {
            s.powf(q / 2.0)
        }
    })
    .powf(1.0 / q);
    Ok(c_p * (x_p * r_q + yp_p * xx_q))
}

/// Norm of the integral value, for quick reporting.
pub fn integral_norm(res: &IntegralResult) -> f64 {
    norm(res.value.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rough::lift::lift_piecewise_linear;

    fn wiggle(n: usize, m: usize) -> GridPath {
        let vals: Vec<f64> = (0..n * m)
            .map(|i| ((i as f64 * 1.7).sin() + (i as f64 * 0.3).cos()) * 0.5)
            .collect();
        GridPath::uniform(0.0, 0.1, vals, m).unwrap()
    }

    #[test]
    fn constant_integrand() {
        let x = wiggle(9, 2);
        let rp = lift_piecewise_linear(&x);
        let y = GridPath::uniform(0.0, 0.1, [2.0, -1.0, 0.5].repeat(9), 3).unwrap();
        let ctrl = ControlledPath::new(y, vec![0.0; 9 * 6], 2).unwrap();
        let w = Window::new(1, 7).unwrap();
        let res = rough_integral(&ctrl, &rp, w).unwrap();
        let inc: Vec<f64> = (0..2).map(|j| x.value(7)[j] - x.value(1)[j]).collect();
        for (i, c) in [2.0, -1.0, 0.5].iter().enumerate() {
            for j in 0..2 {
                assert!((res.value[(i, j)] - c * inc[j]).abs() < 1e-14);
            }
        }
        assert!(local_error(&ctrl, &rp, w).unwrap() < 1e-14);
    }

    #[test]
    fn self_integral_reproduces_area() {
        let x = wiggle(12, 2);
        let rp = lift_piecewise_linear(&x);
        let id: Vec<f64> = (0..12).flat_map(|_| [1.0, 0.0, 0.0, 1.0]).collect();
        let ctrl = ControlledPath::new(x.clone(), id, 2).unwrap();
        let w = Window::new(2, 11).unwrap();
        let res = rough_integral(&ctrl, &rp, w).unwrap();
        let area = rp.chen_reconstruct(2, 11).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want = area[(i, j)] + x.value(2)[i] * (x.value(11)[j] - x.value(2)[j]);
                assert!((res.value[(i, j)] - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let x = wiggle(5, 1);
        let rp = lift_piecewise_linear(&x);
        let y = GridPath::uniform(0.0, 0.2, vec![0.0; 5], 1).unwrap();
        let ctrl = ControlledPath::new(y, vec![0.0; 5], 1).unwrap();
        assert!(rough_integral(&ctrl, &rp, rp.path().full_window()).is_err());
    }
}
