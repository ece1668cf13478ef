//! Linear coordinate change `z = P y` that makes a stable Jacobian dissipative in the quadratic form.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::model::{Ball, Diffusion, Drift, SystemModel};
use crate::error::{Error, Result};

/// Solves `Aᵀ Q + Q A = −I` for symmetric positive definite `Q`.
pub fn lyapunov_solve(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = a.nrows();
    if a.ncols() != d {
        return Err(Error::domain("Lyapunov equation needs a square matrix"));
    }
    let eig = a.complex_eigenvalues();
    if let Some(bad) = eig.iter().find(|z| !(z.re < 0.0)) {
        return Err(Error::domain(format!(
            "spectrum is not in the open left half-plane (eigenvalue {bad})"
        )));
    }
    let id = DMatrix::<f64>::identity(d, d);
    let at = a.transpose();
    // Column-major vec: vec(AᵀQ) = (I ⊗ Aᵀ) vec Q, vec(QA) = (Aᵀ ⊗ I) vec Q.
    let k = id.kronecker(&at) + at.kronecker(&id);
    let rhs = DMatrix::from_fn(d * d, 1, |i, _| if i % (d + 1) == 0 { -1.0 } else { 0.0 });
    let sol = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::numeric("Lyapunov system is singular"))?;
    let q = DMatrix::from_column_slice(d, d, sol.as_slice());
    Ok((&q + q.transpose()) * 0.5)
}

fn sym_sqrt(q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let e = q.clone().symmetric_eigen();
    if e.eigenvalues.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::numeric("Lyapunov solution is not positive definite"));
    }
    let s = DMatrix::from_diagonal(&e.eigenvalues.map(f64::sqrt));
    Ok(&e.eigenvectors * s * e.eigenvectors.transpose())
}

/// `P`, its inverse and the model written in `z = P y`.
#[derive(Debug, Clone)]
pub struct CoordinateChange {
    pub p: DMatrix<f64>,
    pub p_inv: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub model: SystemModel,
}

impl CoordinateChange {
    pub fn to_z(&self, y: &[f64]) -> Vec<f64> {
        mat_vec(&self.p, y)
    }

    pub fn to_y(&self, z: &[f64]) -> Vec<f64> {
        mat_vec(&self.p_inv, z)
    }

    /// Residual `‖Df(ŷ)ᵀ Q + Q Df(ŷ) + I‖` with `Q = PᵀP`.
    pub fn residual(&self, df: &DMatrix<f64>) -> f64 {
        let q = self.p.transpose() * &self.p;
        let d = df.nrows();
        (df.transpose() * &q + &q * df + DMatrix::<f64>::identity(d, d)).norm()
    }
}

fn mat_vec(a: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let d = a.nrows();
    (0..d)
        .map(|i| (0..a.ncols()).map(|k| a[(i, k)] * v[k]).sum())
        .collect()
}

/// Builds `P = Q^{1/2}` from the Lyapunov solution at `ŷ` and conjugates the model.
pub fn optimal_coordinate_change(model: &SystemModel, y_hat: &[f64]) -> Result<CoordinateChange> {
    let a = model.df(y_hat);
    let q = lyapunov_solve(&a)?;
    let p = sym_sqrt(&q)?;
    let p_inv = p
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::numeric("coordinate change is singular"))?;
    let p2 = p.clone().svd(false, false).singular_values.max();
    let pinv2 = p_inv.clone().svd(false, false).singular_values.max();
    let drift = Arc::new(ConjugatedDrift {
        inner: model.drift.clone(),
        p: p.clone(),
        p_inv: p_inv.clone(),
        cond: p2 * pinv2,
    });
    let diffusion = Arc::new(ConjugatedDiffusion {
        inner: model.diffusion.clone(),
        p: p.clone(),
        p_inv: p_inv.clone(),
        p2,
        pinv2,
    });
    let domain = model.domain.as_ref().map(|b| Ball {
        center: mat_vec(&p, &b.center),
        radius: b.radius / pinv2,
    });
    let mut bounds = model.bounds.clone();
    bounds.g *= p2;
    bounds.dg *= p2 * pinv2;
    bounds.d2g *= p2 * pinv2 * pinv2;
    bounds.d3g *= p2 * pinv2.powi(3);
    bounds.ball = bounds.ball.as_ref().map(|b| Ball {
        center: mat_vec(&p, &b.center),
        radius: b.radius / pinv2,
    });
    let transformed = SystemModel {
        drift,
        diffusion,
        bounds,
        lipschitz: model.lipschitz.map(|l| l * p2 * pinv2),
        growth: None,
        dissipativity: None,
        domain,
    };
    Ok(CoordinateChange {
        p,
        p_inv,
        q,
        model: transformed,
    })
}

#[derive(Debug)]
struct ConjugatedDrift {
    inner: Arc<dyn Drift>,
    p: DMatrix<f64>,
    p_inv: DMatrix<f64>,
    cond: f64,
}

impl Drift for ConjugatedDrift {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn eval(&self, z: &[f64], out: &mut [f64]) {
        let y = mat_vec(&self.p_inv, z);
        let mut fy = vec![0.0; y.len()];
        self.inner.eval(&y, &mut fy);
        out.copy_from_slice(&mat_vec(&self.p, &fy));
    }
    fn jacobian(&self, z: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let y = mat_vec(&self.p_inv, z);
        let mut j = vec![0.0; d * d];
        self.inner.jacobian(&y, &mut j);
        let jz = &self.p * DMatrix::from_row_slice(d, d, &j) * &self.p_inv;
        for i in 0..d {
            for k in 0..d {
                out[i * d + k] = jz[(i, k)];
            }
        }
    }
    fn jacobian_bound(&self, ball: &Ball) -> Option<f64> {
        // B(Pc, r) pulls back into B(c, ‖P⁻¹‖ r); the Frobenius norm grows by at most cond(P).
        let pinv2 = self.p_inv.clone().svd(false, false).singular_values.max();
        let pulled = Ball {
            center: mat_vec(&self.p_inv, &ball.center),
            radius: ball.radius * pinv2,
        };
        self.inner.jacobian_bound(&pulled).map(|b| b * self.cond)
    }
}

#[derive(Debug)]
struct ConjugatedDiffusion {
    inner: Arc<dyn Diffusion>,
    p: DMatrix<f64>,
    p_inv: DMatrix<f64>,
    p2: f64,
    pinv2: f64,
}

impl Diffusion for ConjugatedDiffusion {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn noise_dim(&self) -> usize {
        self.inner.noise_dim()
    }
    fn eval(&self, z: &[f64], out: &mut [f64]) {
        let (d, m) = (self.dim(), self.noise_dim());
        let y = mat_vec(&self.p_inv, z);
        let mut g = vec![0.0; d * m];
        self.inner.eval(&y, &mut g);
        for i in 0..d {
            for j in 0..m {
                out[i * m + j] = (0..d).map(|k| self.p[(i, k)] * g[k * m + j]).sum();
            }
        }
    }
    fn jacobian(&self, z: &[f64], out: &mut [f64]) {
        let (d, m) = (self.dim(), self.noise_dim());
        let y = mat_vec(&self.p_inv, z);
        let mut dg = vec![0.0; d * m * d];
        self.inner.jacobian(&y, &mut dg);
        for i in 0..d {
            for j in 0..m {
                for l in 0..d {
                    let mut s = 0.0;
                    for k in 0..d {
                        for n in 0..d {
                            s += self.p[(i, k)] * dg[(k * m + j) * d + n] * self.p_inv[(n, l)];
                        }
                    }
                    out[(i * m + j) * d + l] = s;
                }
            }
        }
    }
    fn hessian(&self, z: &[f64], out: &mut [f64]) {
        let (d, m) = (self.dim(), self.noise_dim());
        let y = mat_vec(&self.p_inv, z);
        let mut h = vec![0.0; d * m * d * d];
        self.inner.hessian(&y, &mut h);
        for i in 0..d {
            for j in 0..m {
                for l in 0..d {
                    for o in 0..d {
                        let mut s = 0.0;
                        for k in 0..d {
                            for n in 0..d {
                                for r in 0..d {
                                    s += self.p[(i, k)]
                                        * h[((k * m + j) * d + n) * d + r]
                                        * self.p_inv[(n, l)]
                                        * self.p_inv[(r, o)];
                                }
                            }
                        }
                        out[((i * m + j) * d + l) * d + o] = s;
                    }
                }
            }
        }
    }
    fn bounds_on(&self, ball: Option<&Ball>) -> Option<[f64; 4]> {
        let pulled = ball.map(|b| Ball {
            center: mat_vec(&self.p_inv, &b.center),
            radius: b.radius * self.pinv2,
        });
        self.inner.bounds_on(pulled.as_ref()).map(|b| {
            [
                b[0] * self.p2,
                b[1] * self.p2 * self.pinv2,
                b[2] * self.p2 * self.pinv2.powi(2),
                b[3] * self.p2 * self.pinv2.powi(3),
            ]
        })
    }
    fn is_zero(&self) -> bool {
        self.inner.is_zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::functionals::{ell, ell_of_matrix};
    use crate::fields::model::{fd_diffusion_jacobian, fd_jacobian, DiffusionSpec, DriftSpec, ModelConfig};

    fn linear(a: Vec<Vec<f64>>) -> SystemModel {
        let d = a.len();
        ModelConfig {
            drift: DriftSpec::Linear { a, b: None },
            diffusion: DiffusionSpec::Zero { dim: d, noise_dim: 1 },
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
    fn rotation_dominated_keeps_ell() {
        let m = linear(vec![vec![-0.1, -1.0], vec![1.0, -0.1]]);
        assert!((ell(&m, &[0.0, 0.0]).unwrap() + 0.1).abs() < 1e-12);
        let cc = optimal_coordinate_change(&m, &[0.0, 0.0]).unwrap();
        assert!((ell(&cc.model, &[0.0, 0.0]).unwrap() + 0.1).abs() < 1e-9);
        assert!(cc.residual(&m.df(&[0.0, 0.0])) < 1e-8);
    }

    #[test]
    fn non_normal_matrix_becomes_dissipative() {
        let a = vec![vec![-0.5, 10.0], vec![0.0, -0.3]];
        let m = linear(a);
        assert!(ell(&m, &[0.0, 0.0]).unwrap() > 0.0);
        let cc = optimal_coordinate_change(&m, &[0.0, 0.0]).unwrap();
        let l = ell(&cc.model, &[0.0, 0.0]).unwrap();
        let qmax = cc.q.clone().symmetric_eigenvalues().max();
        assert!(l < 0.0);
        assert!((l + 0.5 / qmax).abs() < 1e-9);
        assert!(cc.residual(&m.df(&[0.0, 0.0])) < 1e-8);
    }

    #[test]
    fn unstable_spectrum_rejected() {
        let m = linear(vec![vec![0.1, 0.0], vec![0.0, -1.0]]);
        assert!(matches!(
            optimal_coordinate_change(&m, &[0.0, 0.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn conjugated_derivatives_match_fd() {
        let cfg = ModelConfig {
            drift: DriftSpec::Fhn { i_ext: 0.265, mu: 0.75, j: 0.7, eps: 0.08 },
            diffusion: DiffusionSpec::Tanh {
                scale: 0.3,
                weights: vec![vec![1.0, 0.2], vec![0.5, 1.0]],
                offset: None,
                center: Some(vec![-1.0, -0.4]),
            },
            bounds: None,
            domain: None,
            lipschitz: None,
            growth: None,
            dissipativity: None,
        };
        let m = cfg.build().unwrap();
        let cc = optimal_coordinate_change(&m, &[-1.0, -0.4]).unwrap();
        let z = [0.3, -0.7];
        let mut j = vec![0.0; 4];
        cc.model.drift.jacobian(&z, &mut j);
        for (a, b) in j.iter().zip(fd_jacobian(cc.model.drift.as_ref(), &z, 1e-6)) {
            assert!((a - b).abs() < 1e-5 * (1.0 + a.abs()));
        }
        let mut dg = vec![0.0; 8];
        cc.model.diffusion.jacobian(&z, &mut dg);
        for (a, b) in dg.iter().zip(fd_diffusion_jacobian(cc.model.diffusion.as_ref(), &z, 1e-6)) {
            assert!((a - b).abs() < 1e-6);
        }
        // sign and value of ℓ at a symmetric negative definite Jacobian are preserved
        let s = linear(vec![vec![-2.0, 0.5], vec![0.5, -1.0]]);
        let cs = optimal_coordinate_change(&s, &[0.0, 0.0]).unwrap();
        assert!(ell_of_matrix(&cs.model.df(&[0.0, 0.0])) < 0.0);
    }
}
