//! Window-wise checks for the difference `h = y − a` of two scheme runs on a common driver.
//!
//! On a window `[a, b]` of `Π` with `4 C_p L_g |||x|||_{p-var,Π[a,b]} ≤ λ < 1/2`:
//!
//! ```text
//! |||h, R^h||| ≤ [ L_f (b−a) + 2λ ‖f(a^Δ)‖_{∞,[a,b]} (b−a) + (4C_p+1) L_g |||x||| ] · ‖h, R^h‖
//! ```
//!
//! with `R^h_{s,t} = h_{s,t} − (g(y_s) − g(a_s)) x_{s,t}`. When the bracket is at most `λ` and
//! `‖h_a‖ ≤ r / (16(1+C_p))`, the squared distance contracts by
//! `exp{ (2M̄ + L_f²Δ)(b−a) + 6(1+λ)(1+2C_p)² e^{12λ+2λ²} L_g |||x||| }`;
//! single steps with a larger bracket use `exp{ (2M + L_f²Δ)Δ + 3 e^{6L_fΔ} L_g |||x||| }`.

use serde::Serialize;

use super::euler::SchemeRun;
use super::norms::{check_same_grid, diffusion_along, norms_with};
use crate::error::{Error, Result};
use crate::fields::{lg_constant, m_bound, SystemModel};
use crate::linalg::{norm, norm_sq};
use crate::rough::path::{GridPath, RoughPathGrid};
use crate::rough::{rough_norm, Window};
use crate::stopping::{
    greedy_times_discrete, AreaVariationControl, Control, ControlSet, LinearControl, PathVariationControl,
    SupTimesLengthControl,
};

/// Constants shared by the discrete audits and criteria.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchemeConstants {
    pub p: f64,
    pub c_p: f64,
    pub lambda: f64,
    pub l_f: f64,
    pub l_g: f64,
    /// Radius of the ball used for `M(Df, a, r)`.
    pub r: f64,
    /// Sample count for the sampled sup in `M`.
    pub samples: usize,
}

impl SchemeConstants {
    /// Takes `L_f` from the model and `L_g` from its diffusion bounds.
    pub fn from_model(model: &SystemModel, p: f64, c_p: f64, lambda: f64, r: f64, samples: usize) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 0.5) {
            return Err(Error::config("lambda", "must lie in (0, 1/2)"));
        }
        Ok(SchemeConstants {
            p,
            c_p,
            lambda,
            l_f: model.require_lipschitz()?,
            l_g: lg_constant(&model.bounds)?,
            r,
            samples,
        })
    }
}

/// `K = max{ 5(1+λ)(1+2C_p)² e^{12λ+2λ²}, 1.5 e^{6 L_f Δ} }`.
pub fn constant_k(lambda: f64, c_p: f64, l_f: f64, delta: f64) -> f64 {
    let a = 5.0 * (1.0 + lambda) * (1.0 + 2.0 * c_p).powi(2) * (12.0 * lambda + 2.0 * lambda * lambda).exp();
    let b = 1.5 * (6.0 * l_f * delta).exp();
    a.max(b)
}

/// The four controls `L_f(t−s)`, `(4C_p+1)^p L_g^p |||x|||^p`, `(4C_p+1)^p L_g^p |||X|||^q` and
/// `2λ ‖f(a)‖_{∞,[s,t]} (t−s)` on the driver's grid.
pub fn scheme_controls<'a>(
    model: &SystemModel,
    driver: &'a RoughPathGrid,
    reference: &GridPath,
    c: &SchemeConstants,
) -> Result<ControlSet<'a>> {
    if reference.len() != driver.len() {
        return Err(Error::domain("reference path and driver lengths differ"));
    }
    let times = driver.path().times();
    let coef = ((4.0 * c.c_p + 1.0) * c.l_g).powf(c.p);
    let fvals: Vec<f64> = (0..reference.len()).map(|k| norm(&model.f(reference.value(k)))).collect();
    let controls: Vec<Box<dyn Control + 'a>> = vec![
        Box::new(LinearControl::new(c.l_f, times, "drift_lipschitz")?),
        Box::new(PathVariationControl::new(coef, c.p, driver, "path_variation")?),
        Box::new(AreaVariationControl::new(coef, c.p / 2.0, driver, "area_variation")?),
        Box::new(SupTimesLengthControl::new(2.0 * c.lambda, fvals, times, "reference_drift")?),
    ];
    ControlSet::new(controls)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayCheck {
    /// `case1` or `single_step`.
    pub branch: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HnewWindow {
    pub window: [f64; 2],
    pub steps: usize,
    /// `4 C_p L_g |||x||| ≤ λ < 1/2`.
    pub hypothesis: bool,
    pub lhs: f64,
    pub coef: f64,
    pub rhs: f64,
    pub holds: bool,
    pub decay: Option<DecayCheck>,
}

fn check_pair(y: &SchemeRun, a: &SchemeRun) -> Result<()> {
    if y.len() != a.len() || y.trajectory.dim() != a.trajectory.dim() {
        return Err(Error::domain("solution and reference runs differ in shape"));
    }
    check_same_grid(&y.trajectory, &a.driver)?;
    check_same_grid(&a.trajectory, &y.driver)
}

/// Both sides of the contraction inequality on one window and, when applicable, the decay bound.
pub fn audit_hnew(model: &SystemModel, y: &SchemeRun, a: &SchemeRun, w: Window, c: &SchemeConstants) -> Result<HnewWindow> {
    check_pair(y, a)?;
    let driver = &y.driver;
    driver.path().check_window(w)?;
    let d = model.dim();
    let delta = y.delta;
    let xnorm = rough_norm(driver, c.p, w)?;
    let hypothesis = 4.0 * c.c_p * c.l_g * xnorm <= c.lambda && c.lambda < 0.5;

    let hv: Vec<f64> = y
        .trajectory
        .values()
        .iter()
        .zip(a.trajectory.values())
        .map(|(u, v)| u - v)
        .collect();
    let h = GridPath::new(y.trajectory.times().to_vec(), hv, d)?;
    let gy = diffusion_along(model, &y.trajectory);
    let ga = diffusion_along(model, &a.trajectory);
    let gdiff: Vec<f64> = gy.iter().zip(&ga).map(|(u, v)| u - v).collect();
    let norms = norms_with(&h, &gdiff, driver, w, c.p)?;

    let len = driver.path().time(w.end) - driver.path().time(w.start);
    let fsup = (w.start..=w.end)
        .map(|k| norm(&model.f(a.state(k))))
        .fold(0.0, f64::max);
    let coef = c.l_f * len + 2.0 * c.lambda * fsup * len + (4.0 * c.c_p + 1.0) * c.l_g * xnorm;
    let rhs = coef * norms.anchored;

    let h0 = norm_sq(h.value(w.start));
    let h1 = norm_sq(h.value(w.end));
    let near = h0.sqrt() <= c.r / (16.0 * (1.0 + c.c_p));
    let decay = if hypothesis && coef <= c.lambda && near {
        let mut msum = 0.0;
        for k in w.start..w.end {
            msum += m_bound(model, a.state(k), c.r, c.samples)? * delta;
        }
        let mbar = msum / len;
        let lam = c.lambda;
        let growth = 6.0 * (1.0 + lam) * (1.0 + 2.0 * c.c_p).powi(2) * (12.0 * lam + 2.0 * lam * lam).exp();
        let rhs = ((2.0 * mbar + c.l_f * c.l_f * delta) * len + growth * c.l_g * xnorm).exp() * h0;
        Some(DecayCheck {
            branch: "case1".into(),
            lhs: h1,
            rhs,
            holds: h1 <= rhs,
        })
    } else if w.steps() == 1 && coef > c.lambda && h0.sqrt() < c.r {
        let mk = m_bound(model, a.state(w.start), c.r, c.samples)?;
        let rhs = ((2.0 * mk + c.l_f * c.l_f * delta) * delta
            + 3.0 * (6.0 * c.l_f * delta).exp() * c.l_g * xnorm)
            .exp()
            * h0;
        Some(DecayCheck {
            branch: "single_step".into(),
            lhs: h1,
            rhs,
            holds: h1 <= rhs,
        })
    } else {
        None
    };
    Ok(HnewWindow {
        window: [driver.path().time(w.start), driver.path().time(w.end)],
        steps: w.steps(),
        hypothesis,
        lhs: norms.joint,
        coef,
        rhs,
        holds: !hypothesis || norms.joint <= rhs,
        decay,
    })
}

/// Audits every window of the discrete stopping rule for the scheme controls at `γ = λ`.
pub fn audit_hnew_run(model: &SystemModel, y: &SchemeRun, a: &SchemeRun, c: &SchemeConstants) -> Result<Vec<HnewWindow>> {
    check_pair(y, a)?;
    let set = scheme_controls(model, &a.driver, &a.trajectory, c)?;
    let seq = greedy_times_discrete(&set, c.lambda, a.driver.path().full_window())?;
    seq.intervals().map(|w| audit_hnew(model, y, a, w, c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{sewing_constant, Ball, DiffusionSpec, DriftSpec, ModelConfig};
    use crate::noise::{sample_lift, NoiseSpec};
    use crate::schemes::euler::simulate;

    fn model(sigma: f64) -> SystemModel {
        ModelConfig {
            drift: DriftSpec::Pitchfork { alpha: -1.0 },
            diffusion: DiffusionSpec::Tanh {
                scale: sigma,
                weights: vec![vec![1.0]],
                offset: None,
                center: None,
            },
            bounds: None,
            domain: Some(Ball::origin(1, 1.0)),
            lipschitz: None,
            growth: None,
            dissipativity: None,
        }
        .build()
        .unwrap()
    }

    #[test]
    fn k_worked_value() {
        let k = constant_k(0.3, 7.73, 1.0, 0.01);
        let expected = 5.0 * 1.3 * 16.46f64.powi(2) * 3.78f64.exp();
        assert!((k - expected).abs() < 1e-9 * expected);
        assert_eq!(constant_k(1e-9, 0.0, 100.0, 0.01), 1.5 * 6f64.exp());
    }

    #[test]
    fn identical_runs_pass_trivially() {
        let m = model(0.01);
        let rp = sample_lift(&NoiseSpec::fbm(0.45, 1, 1.0, 100, 3)).unwrap();
        let run = simulate(&m, &rp, &[0.0], None).unwrap();
        let c = SchemeConstants::from_model(&m, 2.5, sewing_constant(2.5).unwrap(), 0.3, 0.5, 64).unwrap();
        for w in audit_hnew_run(&m, &run, &run, &c).unwrap() {
            assert!(w.holds);
            assert_eq!(w.lhs, 0.0);
        }
    }

    #[test]
    fn nearby_runs_satisfy_the_contraction_bound() {
        let m = model(0.005);
        let c = SchemeConstants::from_model(&m, 2.5, sewing_constant(2.5).unwrap(), 0.3, 0.5, 64).unwrap();
        let mut hyp = 0;
        for seed in 0..5 {
            let rp = sample_lift(&NoiseSpec::fbm(0.45, 1, 2.0, 200, seed)).unwrap();
            let a = simulate(&m, &rp, &[0.0], None).unwrap();
            let y = simulate(&m, &rp, &[0.02], None).unwrap();
            for w in audit_hnew_run(&m, &y, &a, &c).unwrap() {
                assert!(w.holds, "{w:?}");
                if let Some(dc) = &w.decay {
                    assert!(dc.holds, "{w:?}");
                }
                hyp += w.hypothesis as usize;
            }
        }
        assert!(hyp > 0);
    }
}
