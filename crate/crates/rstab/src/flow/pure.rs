//! The pure rough flow `dφ = g(φ) dx` and its Jacobian flow, stepped with the second-order
//! (Milstein) correction on the fine grid.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fields::{cg_constant, sewing_constant_or, Diffusion, SystemModel};
use crate::rough::path::{GridPath, RoughPathGrid};
use crate::rough::{rough_norm, Window};

/// Scratch space for one diffusion step `g(y) x + Dg(y) g(y) X`.
#[derive(Debug, Clone)]
pub struct DiffusionStepper {
    d: usize,
    m: usize,
    g: Vec<f64>,
    dg: Vec<f64>,
    hess: Vec<f64>,
    /// `C[i][j][l] = Σ_k ∂_k g_ij g_kl`.
    dgg: Vec<f64>,
}

impl DiffusionStepper {
    pub fn new(d: usize, m: usize) -> Self {
        DiffusionStepper {
            d,
            m,
            g: vec![0.0; d * m],
            dg: vec![0.0; d * m * d],
            hess: vec![0.0; d * m * d * d],
            dgg: vec![0.0; d * m * m],
        }
    }

    fn prepare(&mut self, diff: &dyn Diffusion, y: &[f64], with_hessian: bool) {
        let (d, m) = (self.d, self.m);
        diff.eval(y, &mut self.g);
        diff.jacobian(y, &mut self.dg);
        if with_hessian {
            diff.hessian(y, &mut self.hess);
        }
        for i in 0..d {
            for j in 0..m {
                for l in 0..m {
                    let mut s = 0.0;
                    for k in 0..d {
                        s += self.dg[(i * m + j) * d + k] * self.g[k * m + l];
                    }
                    self.dgg[(i * m + j) * m + l] = s;
                }
            }
        }
    }

    /// Writes `g(y) x + Dg(y) g(y) X` into `out`; `x` is an increment, `xx` its row-major area.
    pub fn increment(&mut self, diff: &dyn Diffusion, y: &[f64], x: &[f64], xx: &[f64], out: &mut [f64]) {
        self.prepare(diff, y, false);
        self.write_increment(x, xx, out);
    }

    fn write_increment(&self, x: &[f64], xx: &[f64], out: &mut [f64]) {
        let (d, m) = (self.d, self.m);
        for i in 0..d {
            let mut s = 0.0;
            for j in 0..m {
                s += self.g[i * m + j] * x[j];
                for l in 0..m {
                    s += self.dgg[(i * m + j) * m + l] * xx[l * m + j];
                }
            }
            out[i] = s;
        }
    }

    /// As [`increment`](Self::increment), also writing the `d × d` derivative of the increment
    /// with respect to `y` into `jac`.
    pub fn increment_with_jacobian(
        &mut self,
        diff: &dyn Diffusion,
        y: &[f64],
        x: &[f64],
        xx: &[f64],
        out: &mut [f64],
        jac: &mut [f64],
    ) {
        self.prepare(diff, y, true);
        self.write_increment(x, xx, out);
        let (d, m) = (self.d, self.m);
        for i in 0..d {
            for n in 0..d {
                let mut s = 0.0;
                for j in 0..m {
                    let ij = i * m + j;
                    s += self.dg[ij * d + n] * x[j];
                    for l in 0..m {
                        let a = xx[l * m + j];
                        if a == 0.0 {
                            continue;
                        }
                        let mut c = 0.0;
                        for k in 0..d {
                            c += self.hess[(ij * d + k) * d + n] * self.g[k * m + l]
                                + self.dg[ij * d + k] * self.dg[(k * m + l) * d + n];
                        }
                        s += c * a;
                    }
                }
                jac[i * d + n] = s;
            }
        }
    }
}

/// Exponent and sewing constant used to turn a window norm into `λ = C_p C_g |||x|||`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowParams {
    pub p: f64,
    pub c_p: f64,
}

impl FlowParams {
    /// Default sewing constant for `p`.
    pub fn new(p: f64) -> Result<Self> {
        Ok(FlowParams {
            p,
            c_p: sewing_constant_or(p, None)?,
        })
    }
}

/// `λ = C_p C_g |||x|||_{p-var,[a,b]}` with the rough norm of the window.
pub fn window_lambda(model: &SystemModel, rp: &RoughPathGrid, w: Window, params: &FlowParams) -> Result<f64> {
    Ok(params.c_p * cg_constant(&model.bounds)? * rough_norm(rp, params.p, w)?)
}

#[derive(Debug, Clone)]
pub struct FlowSolution {
    /// `φ` on the window's grid instants (times are absolute).
    pub phi: GridPath,
    /// `∂φ_t/∂φ_a` for each instant of the window.
    pub jac: Vec<DMatrix<f64>>,
    pub window: Window,
    pub lambda: f64,
}

fn check_model_driver(model: &SystemModel, rp: &RoughPathGrid, y: &[f64]) -> Result<()> {
    if model.noise_dim() != rp.dim() {
        return Err(Error::domain(format!(
            "diffusion expects {} noise components, driver has {}",
            model.noise_dim(),
            rp.dim()
        )));
    }
    if y.len() != model.dim() {
        return Err(Error::domain(format!(
            "initial state has {} components, model has {}",
            y.len(),
            model.dim()
        )));
    }
    Ok(())
}

/// Endpoint `φ_b` and Jacobian `∂φ_b/∂φ_a` only, without storing the path.
pub(crate) fn flow_end(
    model: &SystemModel,
    rp: &RoughPathGrid,
    start: usize,
    end: usize,
    phi_a: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let (d, m) = (model.dim(), rp.dim());
    let mut st = DiffusionStepper::new(d, m);
    let mut y = phi_a.to_vec();
    let mut xi = identity(d);
    let (mut dx, mut xx, mut inc, mut jinc, mut tmp) =
        (vec![0.0; m], vec![0.0; m * m], vec![0.0; d], vec![0.0; d * d], vec![0.0; d * d]);
    for k in start..end {
        rp.path().increment_into(k, k + 1, &mut dx);
        rp.area_into(k, k + 1, &mut xx);
        st.increment_with_jacobian(model.diffusion.as_ref(), &y, &dx, &xx, &mut inc, &mut jinc);
        advance_jacobian(d, &jinc, &mut xi, &mut tmp);
        for (a, b) in y.iter_mut().zip(&inc) {
            *a += b;
        }
    }
    (y, xi)
}

fn identity(d: usize) -> Vec<f64> {
    let mut xi = vec![0.0; d * d];
    for i in 0..d {
        xi[i * d + i] = 1.0;
    }
    xi
}

/// `ξ ← (I + J) ξ`.
fn advance_jacobian(d: usize, jinc: &[f64], xi: &mut [f64], tmp: &mut [f64]) {
    for i in 0..d {
        for n in 0..d {
            let mut s = xi[i * d + n];
            for k in 0..d {
                s += jinc[i * d + k] * xi[k * d + n];
            }
            tmp[i * d + n] = s;
        }
    }
    xi.copy_from_slice(tmp);
}

/// Solves `dφ = g(φ) dx` on the window from `φ_a`, with the Jacobian flow attached.
pub fn solve_pure(
    model: &SystemModel,
    rp: &RoughPathGrid,
    window: Window,
    phi_a: &[f64],
    params: &FlowParams,
) -> Result<FlowSolution> {
    check_model_driver(model, rp, phi_a)?;
    rp.path().check_window(window)?;
    let (d, m) = (model.dim(), rp.dim());
    let mut st = DiffusionStepper::new(d, m);
    let n = window.steps() + 1;
    let mut values = Vec::with_capacity(n * d);
    let mut jac = Vec::with_capacity(n);
    let mut y = phi_a.to_vec();
    let mut xi = identity(d);
    let (mut dx, mut xx, mut inc, mut jinc, mut tmp) =
        (vec![0.0; m], vec![0.0; m * m], vec![0.0; d], vec![0.0; d * d], vec![0.0; d * d]);
    values.extend_from_slice(&y);
    jac.push(DMatrix::from_row_slice(d, d, &xi));
    for k in window.start..window.end {
        rp.path().increment_into(k, k + 1, &mut dx);
        rp.area_into(k, k + 1, &mut xx);
        st.increment_with_jacobian(model.diffusion.as_ref(), &y, &dx, &xx, &mut inc, &mut jinc);
        advance_jacobian(d, &jinc, &mut xi, &mut tmp);
        for (a, b) in y.iter_mut().zip(&inc) {
            *a += b;
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric(format!("pure flow left the finite range at step {k}")));
        }
        values.extend_from_slice(&y);
        jac.push(DMatrix::from_row_slice(d, d, &xi));
    }
    let times = rp.path().times()[window.start..=window.end].to_vec();
    Ok(FlowSolution {
        phi: GridPath::new(times, values, d)?,
        jac,
        window,
        lambda: window_lambda(model, rp, window, params)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Ball, DiffusionSpec, DriftSpec, ModelConfig};
    use crate::noise::{sample_lift, NoiseSpec};

    fn linear_model(sigma: f64) -> SystemModel {
        ModelConfig {
            drift: DriftSpec::Zero { dim: 1 },
            diffusion: DiffusionSpec::Linear {
                mats: vec![vec![vec![sigma]]],
            },
            bounds: None,
            domain: Some(Ball::origin(1, 4.0)),
            lipschitz: None,
            growth: None,
            dissipativity: None,
        }
        .build()
        .unwrap()
    }

    fn tanh_model() -> SystemModel {
        ModelConfig {
            drift: DriftSpec::Zero { dim: 2 },
            diffusion: DiffusionSpec::Tanh {
                scale: 0.3,
                weights: vec![vec![1.0, -0.5], vec![0.7, 0.2]],
                offset: Some(vec![vec![0.1, 0.0], vec![0.0, -0.2]]),
                center: None,
            },
            bounds: None,
            domain: None,
            lipschitz: None,
            growth: None,
            dissipativity: None,
        }
        .build()
        .unwrap()
    }

    #[test]
    fn zero_diffusion_is_constant() {
        let model = linear_model(0.0);
        let rp = sample_lift(&NoiseSpec::fbm(0.45, 1, 1.0, 64, 1)).unwrap();
        let sol = solve_pure(&model, &rp, rp.path().full_window(), &[0.7], &FlowParams::new(2.5).unwrap()).unwrap();
        assert!(sol.phi.values().iter().all(|&v| v == 0.7));
        assert!(sol.jac.iter().all(|j| j[(0, 0)] == 1.0));
    }

    #[test]
    fn linear_diffusion_tracks_exponential() {
        let sigma = 0.8;
        let model = linear_model(sigma);
        let rp = sample_lift(&NoiseSpec::fbm(0.45, 1, 1.0, 4096, 3)).unwrap();
        let sol = solve_pure(&model, &rp, rp.path().full_window(), &[0.5], &FlowParams::new(2.5).unwrap()).unwrap();
        for k in (0..=4096).step_by(512) {
            let exact = 0.5 * (sigma * rp.path().value(k)[0]).exp();
            assert!((sol.phi.value(k)[0] - exact).abs() < 1e-2 * exact, "k = {k}");
        }
    }

    #[test]
    fn mesh_refinement_error_decreases() {
        let sigma = 0.8;
        let model = linear_model(sigma);
        let fine = sample_lift(&NoiseSpec::fbm(0.45, 1, 1.0, 1 << 14, 8)).unwrap();
        let exact = 0.5 * (sigma * fine.path().value(1 << 14)[0]).exp();
        let params = FlowParams::new(2.5).unwrap();
        let errs: Vec<f64> = [256usize, 64, 16, 4]
            .iter()
            .map(|&stride| {
                let rp = fine.coarsen(stride).unwrap();
                let sol = solve_pure(&model, &rp, rp.path().full_window(), &[0.5], &params).unwrap();
                (sol.phi.value(sol.phi.len() - 1)[0] - exact).abs()
            })
            .collect();
        for w in errs.windows(2) {
            assert!(w[1] < w[0], "{errs:?}");
        }
    }

    #[test]
    fn jacobian_flow_matches_finite_differences() {
        let model = tanh_model();
        let rp = sample_lift(&NoiseSpec::fbm(0.45, 2, 1.0, 512, 4)).unwrap();
        let w = rp.path().full_window();
        let params = FlowParams::new(2.5).unwrap();
        let y0 = [0.3, -0.4];
        let sol = solve_pure(&model, &rp, w, &y0, &params).unwrap();
        let jend = sol.jac.last().unwrap();
        let h = 1e-6;
        for c in 0..2 {
            let mut yp = y0;
            let mut ym = y0;
            yp[c] += h;
            ym[c] -= h;
            let a = solve_pure(&model, &rp, w, &yp, &params).unwrap();
            let b = solve_pure(&model, &rp, w, &ym, &params).unwrap();
            for r in 0..2 {
                let fd = (a.phi.value(512)[r] - b.phi.value(512)[r]) / (2.0 * h);
                assert!((fd - jend[(r, c)]).abs() <= 1e-3 * jend.norm(), "({r},{c})");
            }
        }
        let (end, xi) = flow_end(&model, &rp, 0, 512, &y0);
        assert_eq!(end, sol.phi.value(512));
        assert_eq!(DMatrix::from_row_slice(2, 2, &xi), *jend);
    }
}
