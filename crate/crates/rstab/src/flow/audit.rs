//! Numerical checks of the a-priori estimates for the pure flow on short windows:
//!
//! ```text
//! |||φ|||_{p-var}   ≤ 2 (‖g‖∞ |||x|||_{p-var} + λ²)      |||R^φ|||_{p-var} ≤ 2 λ²
//! |||φ|||_{p-var}   ≤ 2 λ ‖φ_a‖                           |||R^φ|||_{p-var} ≤ 2 λ² ‖φ_a‖   (g(0) = 0)
//! ‖∂φ/∂φ_a − I‖     ≤ 4 λ                                 ‖[∂φ/∂φ_a]^{-1} − I‖ ≤ 4 λ
//! ‖η̄_t − η_t‖       ≤ 4 λ ‖z̄ − z‖                         ‖ψ̄_t − ψ_t‖ ≤ 256 λ ‖z̄ − z‖
//! ```
//!
//! with `R^φ_{s,t} = φ_{s,t} − g(φ_s) x_{s,t}`, `η_t = φ_t(z) − z` and `ψ_t = [∂φ_t/∂z]^{-1} − I`.

use nalgebra::DMatrix;
use serde::Serialize;

use super::doss::LAMBDA_MAX;
use super::pure::{solve_pure, FlowParams, FlowSolution};
use crate::error::{Error, Result};
use crate::fields::SystemModel;
use crate::linalg::{dist, norm};
use crate::rough::path::RoughPathGrid;
use crate::rough::{pvar_norm, variation_dp, Window};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl InequalityCheck {
    fn new(name: &str, lhs: f64, rhs: f64) -> Self {
        InequalityCheck {
            name: name.to_string(),
            lhs,
            rhs,
            holds: lhs <= rhs,
        }
    }

    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub window: [f64; 2],
    pub lambda: f64,
    /// `λ ≤ 1/8`; when false no inequality is evaluated.
    pub precondition: bool,
    pub checks: Vec<InequalityCheck>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }
}

fn p_var_of_remainder(model: &SystemModel, rp: &RoughPathGrid, sol: &FlowSolution, p: f64) -> f64 {
    let (d, m) = (model.dim(), rp.dim());
    let n = sol.phi.len();
    let off = sol.window.start;
    let mut gs = vec![0.0; n * d * m];
    for j in 0..n {
        model.diffusion.eval(sol.phi.value(j), &mut gs[j * d * m..(j + 1) * d * m]);
    }
    let mut dx = vec![0.0; m];
    let mut r = vec![0.0; d];
    variation_dp(0, n - 1, |j, k| {
        rp.path().increment_into(off + j, off + k, &mut dx);
        let (a, b) = (sol.phi.value(j), sol.phi.value(k));
        let g = &gs[j * d * m..(j + 1) * d * m];
        for i in 0..d {
            let mut s = b[i] - a[i];
            for l in 0..m {
                s -= g[i * m + l] * dx[l];
            }
            r[i] = s;
        }
        norm(&r).powf(p)
    })
    .powf(1.0 / p)
}

fn window_times(rp: &RoughPathGrid, w: Window) -> [f64; 2] {
    [rp.path().time(w.start), rp.path().time(w.end)]
}

fn gated(rp: &RoughPathGrid, w: Window, lambda: f64) -> Option<AuditReport> {
    (lambda > LAMBDA_MAX).then(|| AuditReport {
        window: window_times(rp, w),
        lambda,
        precondition: false,
        checks: Vec::new(),
    })
}

/// Sup over the window of `‖ξ_t − I‖` and `‖ξ_t^{-1} − I‖`.
fn jacobian_deviation(jac: &[DMatrix<f64>]) -> Result<(f64, f64)> {
    let d = jac[0].nrows();
    let id = DMatrix::<f64>::identity(d, d);
    let mut a = 0.0f64;
    let mut b = 0.0f64;
    for (k, j) in jac.iter().enumerate() {
        a = a.max((j - &id).norm());
        let inv = j
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::numeric(format!("flow Jacobian singular at offset {k}")))?;
        b = b.max((inv - &id).norm());
    }
    Ok((a, b))
}

/// Evaluates the path, remainder and Jacobian estimates on one window.
pub fn audit_solest(
    model: &SystemModel,
    rp: &RoughPathGrid,
    window: Window,
    phi_a: &[f64],
    params: &FlowParams,
) -> Result<AuditReport> {
    let sol = solve_pure(model, rp, window, phi_a, params)?;
    let lambda = sol.lambda;
    if let Some(r) = gated(rp, window, lambda) {
        return Ok(r);
    }
    let p = params.p;
    let phi_var = pvar_norm(&sol.phi, p, sol.phi.full_window())?;
    let rem_var = p_var_of_remainder(model, rp, &sol, p);
    let x_var = pvar_norm(rp.path(), p, window)?;
    let mut checks = vec![
        InequalityCheck::new("path", phi_var, 2.0 * (model.bounds.g * x_var + lambda * lambda)),
        InequalityCheck::new("remainder", rem_var, 2.0 * lambda * lambda),
    ];
    let zero = vec![0.0; model.dim()];
    if norm(model.g(&zero).as_slice()) == 0.0 {
        let a = norm(phi_a);
        checks.push(InequalityCheck::new("path_linear", phi_var, 2.0 * lambda * a));
        checks.push(InequalityCheck::new("remainder_linear", rem_var, 2.0 * lambda * lambda * a));
    }
    let (dev, inv_dev) = jacobian_deviation(&sol.jac)?;
    checks.push(InequalityCheck::new("jacobian", dev, 4.0 * lambda));
    checks.push(InequalityCheck::new("jacobian_inverse", inv_dev, 4.0 * lambda));
    Ok(AuditReport {
        window: window_times(rp, window),
        lambda,
        precondition: true,
        checks,
    })
}

/// Compares the flows started at `z` and `z̄` pointwise on the window grid.
pub fn audit_solestdiff(
    model: &SystemModel,
    rp: &RoughPathGrid,
    window: Window,
    z: &[f64],
    z_bar: &[f64],
    params: &FlowParams,
) -> Result<AuditReport> {
    let a = solve_pure(model, rp, window, z, params)?;
    let lambda = a.lambda;
    if let Some(r) = gated(rp, window, lambda) {
        return Ok(r);
    }
    let b = solve_pure(model, rp, window, z_bar, params)?;
    let d = model.dim();
    let id = DMatrix::<f64>::identity(d, d);
    let mut eta = 0.0f64;
    let mut psi = 0.0f64;
    for k in 0..a.phi.len() {
        let ea: Vec<f64> = a.phi.value(k).iter().zip(z).map(|(p, q)| p - q).collect();
        let eb: Vec<f64> = b.phi.value(k).iter().zip(z_bar).map(|(p, q)| p - q).collect();
        eta = eta.max(dist(&ea, &eb));
        let ia = a.jac[k].clone().try_inverse().ok_or_else(|| Error::numeric("singular flow Jacobian"))?;
        let ib = b.jac[k].clone().try_inverse().ok_or_else(|| Error::numeric("singular flow Jacobian"))?;
        psi = psi.max(((ib - &id) - (ia - &id)).norm());
    }
    let gap = dist(z, z_bar);
    Ok(AuditReport {
        window: window_times(rp, window),
        lambda,
        precondition: true,
        checks: vec![
            InequalityCheck::new("eta", eta, 4.0 * lambda * gap),
            InequalityCheck::new("psi", psi, 256.0 * lambda * gap),
        ],
    })
}

/// Windows on which `λ` stays below `lambda_max`: greedy cuts for the rough norm at
/// `γ = lambda_max / (C_p C_g)`, each shortened to its last instant below the threshold.
pub fn small_lambda_windows(
    model: &SystemModel,
    rp: &RoughPathGrid,
    params: &FlowParams,
    lambda_max: f64,
) -> Result<Vec<Window>> {
    let cg = crate::fields::cg_constant(&model.bounds)?;
    if cg == 0.0 {
        return Ok(vec![rp.path().full_window()]);
    }
    let gamma = lambda_max / (params.c_p * cg);
    let seq = crate::stopping::greedy_times(rp, params.p, gamma, rp.path().full_window())?;
    let last = *seq.times.last().unwrap();
    Ok(seq
        .intervals()
        .filter_map(|w| {
            let end = if w.end == last && seq.exhausted { w.end } else { w.end - 1 };
            (end > w.start).then_some(Window { start: w.start, end })
        })
        .collect())
}
