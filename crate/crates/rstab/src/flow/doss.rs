//! Doss–Sussmann factorization `y_t = φ_t(x, z_t)` on a window, where `z` solves
//!
//! ```text
//! ż = [∂φ_t/∂z]^{-1} f(φ_t(x, z)),   z_a = y_a
//! ```
//!
//! integrated by classical RK4 with step `2Δ`, so every stage lands on a grid instant.

use nalgebra::DMatrix;

use super::pure::{flow_end, window_lambda, FlowParams};
use crate::error::{Error, Result};
use crate::fields::SystemModel;
use crate::rough::path::{GridPath, RoughPathGrid};
use crate::rough::Window;

/// Largest `λ` the factorization accepts.
pub const LAMBDA_MAX: f64 = 0.125;

#[derive(Debug, Clone)]
pub struct DossSussmann {
    pub z: GridPath,
    /// Reconstructed solution `φ_t(x, z_t)`.
    pub y: GridPath,
    pub lambda: f64,
}

struct Field<'a> {
    model: &'a SystemModel,
    rp: &'a RoughPathGrid,
    a: usize,
}

impl Field<'_> {
    fn phi(&self, t: usize, z: &[f64]) -> (Vec<f64>, Vec<f64>) {
        flow_end(self.model, self.rp, self.a, t, z)
    }

    fn eval(&self, t: usize, z: &[f64]) -> Result<Vec<f64>> {
        let d = z.len();
        let (y, xi) = self.phi(t, z);
        let inv = DMatrix::from_row_slice(d, d, &xi).try_inverse().ok_or_else(|| {
            Error::numeric(format!("flow Jacobian is singular at grid index {t}"))
        })?;
        let f = nalgebra::DVector::from_vec(self.model.f(&y));
        Ok((inv * f).iter().copied().collect())
    }
}

fn axpy(z: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    z.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

/// Integrates the auxiliary ODE over the window and reconstructs `y`.
pub fn doss_sussmann(
    model: &SystemModel,
    rp: &RoughPathGrid,
    window: Window,
    y_a: &[f64],
    params: &FlowParams,
) -> Result<DossSussmann> {
    rp.path().check_window(window)?;
    if y_a.len() != model.dim() || rp.dim() != model.noise_dim() {
        return Err(Error::domain("state or driver dimension does not match the model"));
    }
    let lambda = window_lambda(model, rp, window, params)?;
    if lambda > LAMBDA_MAX {
        return Err(Error::Precondition(format!(
            "λ = {lambda:.4} exceeds {LAMBDA_MAX} on window [{}, {}]",
            rp.path().time(window.start),
            rp.path().time(window.end)
        )));
    }
    let d = model.dim();
    let dt = rp.path().step();
    let field = Field {
        model,
        rp,
        a: window.start,
    };
    let n = window.steps();
    let mut z = vec![0.0; (n + 1) * d];
    z[..d].copy_from_slice(y_a);
    let mut k = 0;
    let mut fk = field.eval(window.start, y_a)?;
    while k + 2 <= n {
        let t = window.start + k;
        let zk = z[k * d..(k + 1) * d].to_vec();
        let h = 2.0 * dt;
        let k2 = field.eval(t + 1, &axpy(&zk, 0.5 * h, &fk))?;
        let k3 = field.eval(t + 1, &axpy(&zk, 0.5 * h, &k2))?;
        let k4 = field.eval(t + 2, &axpy(&zk, h, &k3))?;
        let next: Vec<f64> = (0..d)
            .map(|i| zk[i] + h / 6.0 * (fk[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        let fnext = field.eval(t + 2, &next)?;
        // cubic Hermite midpoint
        for i in 0..d {
            z[(k + 1) * d + i] = 0.5 * (zk[i] + next[i]) + h / 8.0 * (fk[i] - fnext[i]);
        }
        z[(k + 2) * d..(k + 3) * d].copy_from_slice(&next);
        fk = fnext;
        k += 2;
    }
    if k < n {
        let t = window.start + k;
        let zk = z[k * d..(k + 1) * d].to_vec();
        let k2 = field.eval(t + 1, &axpy(&zk, dt, &fk))?;
        for i in 0..d {
            z[(k + 1) * d + i] = zk[i] + 0.5 * dt * (fk[i] + k2[i]);
        }
    }
    let mut y = Vec::with_capacity(z.len());
    for j in 0..=n {
        let (yj, _) = field.phi(window.start + j, &z[j * d..(j + 1) * d]);
        y.extend_from_slice(&yj);
    }
    let times = rp.path().times()[window.start..=window.end].to_vec();
    Ok(DossSussmann {
        z: GridPath::new(times.clone(), z, d)?,
        y: GridPath::new(times, y, d)?,
        lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::pure::solve_pure;
    use crate::fields::{Ball, DiffusionSpec, DriftSpec, ModelConfig};
    use crate::noise::{sample_lift, NoiseSpec};

    fn model(alpha: f64, sigma: f64) -> SystemModel {
        ModelConfig {
            drift: DriftSpec::Pitchfork { alpha },
            diffusion: DiffusionSpec::Linear {
                mats: vec![vec![vec![sigma]]],
            },
            bounds: None,
            domain: Some(Ball::origin(1, 2.0)),
            lipschitz: None,
            growth: None,
            dissipativity: None,
        }
        .build()
        .unwrap()
    }

    #[test]
    fn no_drift_keeps_z_constant() {
        let m = model(0.0, 0.002);
        let rp = sample_lift(&NoiseSpec::fbm(0.45, 1, 1.0, 128, 2)).unwrap();
        let w = rp.path().full_window();
        let params = FlowParams::new(2.5).unwrap();
        // pitchfork with α = 0 still has −y³; use y_a = 0 where f vanishes
        let ds = doss_sussmann(&m, &rp, w, &[0.0], &params).unwrap();
        assert!(ds.z.values().iter().all(|&v| v == 0.0));
        let pure = solve_pure(&m, &rp, w, &[0.0], &params).unwrap();
        assert_eq!(ds.y.values(), pure.phi.values());
    }

    #[test]
    fn no_diffusion_solves_the_ode() {
        let m = model(1.0, 0.0);
        let rp = sample_lift(&NoiseSpec::fbm(0.45, 1, 1.0, 64, 2)).unwrap();
        let ds = doss_sussmann(&m, &rp, rp.path().full_window(), &[0.5], &FlowParams::new(2.5).unwrap()).unwrap();
        // ẏ = y − y³ from 0.5: y(t)² = 1 / (1 + 3 e^{−2t})
        for k in [0usize, 17, 33, 64] {
            let t = rp.path().time(k);
            let exact = (1.0 / (1.0 + 3.0 * (-2.0 * t).exp())).sqrt();
            assert!((ds.y.value(k)[0] - exact).abs() < 1e-7, "k = {k}");
            assert_eq!(ds.y.value(k), ds.z.value(k));
        }
    }

    #[test]
    fn large_lambda_is_a_precondition_error() {
        let m = model(1.0, 1.0);
        let rp = sample_lift(&NoiseSpec::fbm(0.45, 1, 1.0, 64, 2)).unwrap();
        let e = doss_sussmann(&m, &rp, rp.path().full_window(), &[0.5], &FlowParams::new(2.5).unwrap());
        assert!(matches!(e, Err(Error::Precondition(_))));
    }
}
