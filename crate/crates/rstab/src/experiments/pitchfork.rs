//! The scalar pitchfork `dy = (αy − y³) dt + σ y dx` with its closed-form rough flow
//!
//! ```text
//! φ(t) y = y e^{αt + σx_t} (1 + 2y² ∫_0^t e^{2(αs + σx_s)} ds)^{−1/2}
//! ```
//!
//! and, for `α > 0`, the stationary points `±c = ±(2 ∫_{−∞}^0 e^{2αt + 2σx_t} dt)^{−1/2}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Ball, DiffusionSpec, Dissipativity, DriftSpec, ModelConfig, SystemModel};
use crate::mc::{estimate, Estimate};
use crate::noise::{sample_lift, wiener_shift_index, NoiseSpec};
use crate::rough::{GridPath, RoughPathGrid};
use crate::schemes::simulate;
use crate::stability::{
    criterion_continuous, fit_decay, radius_r, CriterionParams, DecayFit, EnsembleMember, StabilityReport,
    StationaryEnsemble,
};

pub fn pitchfork_model(alpha: f64, sigma: f64, domain_radius: f64) -> Result<SystemModel> {
    ModelConfig {
        drift: DriftSpec::Pitchfork { alpha },
        diffusion: DiffusionSpec::Linear {
            mats: vec![vec![vec![sigma]]],
        },
        bounds: None,
        domain: Some(Ball::origin(1, domain_radius)),
        lipschitz: None,
        growth: None,
        // αy² − y⁴ ≤ D_1 − D_2 y² with D_2 = max(|α|, 1), D_1 = (α + D_2)² / 4
        dissipativity: Some(Dissipativity {
            d1: 0.25 * (alpha + alpha.abs().max(1.0)).powi(2),
            d2: alpha.abs().max(1.0),
        }),
    }
    .build()
}

fn check_scalar(path: &GridPath) -> Result<()> {
    if path.dim() != 1 {
        return Err(Error::domain("the pitchfork flow needs a scalar driver"));
    }
    Ok(())
}

/// The flow from `y0` at every grid instant of `path`, with `x_s` taken relative to the first
/// instant and the integral by the trapezoid rule.
pub fn pitchfork_exact_path(alpha: f64, sigma: f64, path: &GridPath, y0: f64) -> Result<Vec<f64>> {
    check_scalar(path)?;
    let (t0, x0) = (path.time(0), path.value(0)[0]);
    let e = |k: usize| (alpha * (path.time(k) - t0) + sigma * (path.value(k)[0] - x0)).exp();
    let mut out = Vec::with_capacity(path.len());
    let mut integral = 0.0;
    let mut prev = 1.0;
    out.push(y0);
    for k in 1..path.len() {
        let cur = e(k);
        integral += 0.5 * (prev * prev + cur * cur) * (path.time(k) - path.time(k - 1));
        prev = cur;
        out.push(y0 * cur / (1.0 + 2.0 * y0 * y0 * integral).sqrt());
    }
    Ok(out)
}

/// `φ(t) y0` at the grid instant `t` (time since the first instant).
pub fn pitchfork_exact(alpha: f64, sigma: f64, path: &GridPath, y0: f64, t: f64) -> Result<f64> {
    let k = path.index_of(path.time(0) + t)?;
    Ok(pitchfork_exact_path(alpha, sigma, path, y0)?[k])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationaryPoint {
    pub c: f64,
    /// `e^{−2αT} / (2α)`, the omitted part of the integral without noise.
    pub tail_bound: f64,
}

/// `c(ω)` at the last instant of `past`, integrating over the final `truncation` time units.
pub fn pitchfork_stationary(alpha: f64, sigma: f64, past: &GridPath, truncation: f64) -> Result<StationaryPoint> {
    if !(alpha > 0.0) {
        return Err(Error::domain("stationary points ±c exist only for α > 0"));
    }
    check_scalar(past)?;
    let end = past.len() - 1;
    let t_end = past.time(end);
    let start = past.index_of(t_end - truncation)?;
    let x_end = past.value(end)[0];
    let e = |k: usize| (2.0 * alpha * (past.time(k) - t_end) + 2.0 * sigma * (past.value(k)[0] - x_end)).exp();
    let mut integral = 0.0;
    for k in start..end {
        integral += 0.5 * (e(k) + e(k + 1)) * (past.time(k + 1) - past.time(k));
    }
    Ok(StationaryPoint {
        c: (2.0 * integral).sqrt().recip(),
        tail_bound: (-2.0 * alpha * truncation).exp() / (2.0 * alpha),
    })
}

/// Stationary ensemble at `sign · c`: each replicate of `noise` is split into a past of length
/// `truncation` and the remaining horizon, along which the exact flow of `c` is stored.
pub fn pitchfork_ensemble(
    alpha: f64,
    sigma: f64,
    noise: &NoiseSpec,
    truncation: f64,
    n: usize,
    sign: f64,
) -> Result<StationaryEnsemble> {
    noise.validate()?;
    let members = (0..n)
        .into_par_iter()
        .map(|i| {
            let spec = noise.replicate(i);
            let rp = sample_lift(&spec)?;
            let split = rp.path().index_of(truncation)?;
            let past = rp.path().slice(crate::rough::Window::new(0, split)?)?;
            let c = sign * pitchfork_stationary(alpha, sigma, &past, truncation)?.c;
            let driver = wiener_shift_index(&rp, split)?;
            let traj = pitchfork_exact_path(alpha, sigma, driver.path(), c)?;
            Ok(EnsembleMember {
                seed: spec.seed,
                initial: vec![c],
                trajectory: Some(GridPath::new(driver.path().times().to_vec(), traj, 1)?),
                driver: Some(driver),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    StationaryEnsemble::closed_form(members)
}

/// Mean sup-error of the scheme against the closed form on `[0, 1]`, relative to the sup of the
/// closed form, for steps `2^{−k}`, `k ∈ levels`. The closed form and the lift live on the
/// `2^{−fine}` grid; coarser drivers are its restrictions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub deltas: Vec<f64>,
    pub errors: Vec<Estimate>,
}

pub fn scheme_convergence(
    alpha: f64,
    sigma: f64,
    hurst: f64,
    y0: f64,
    fine: u32,
    levels: &[u32],
    n_paths: usize,
    seed: u64,
) -> Result<ConvergenceStudy> {
    if levels.iter().any(|&k| k > fine) {
        return Err(Error::domain("scheme levels must not exceed the reference level"));
    }
    let model = pitchfork_model(alpha, sigma, 2.0)?;
    let noise = NoiseSpec::fbm(hurst, 1, 1.0, 1 << fine, seed);
    let per_path = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let rp = sample_lift(&noise.replicate(i))?;
            let exact = pitchfork_exact_path(alpha, sigma, rp.path(), y0)?;
            let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            levels
                .iter()
                .map(|&k| {
                    let stride = 1usize << (fine - k);
                    let coarse: RoughPathGrid = rp.coarsen(stride)?;
                    let run = simulate(&model, &coarse, &[y0], None)?;
                    let err = (0..run.len())
                        .map(|j| (run.state(j)[0] - exact[j * stride]).abs())
                        .fold(0.0, f64::max);
                    Ok(err / scale)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let errors = (0..levels.len())
        .map(|l| estimate(&per_path.iter().map(|e| e[l]).collect::<Vec<_>>()))
        .collect();
    Ok(ConvergenceStudy {
        deltas: levels.iter().map(|&k| 0.5f64.powi(k as i32)).collect(),
        errors,
    })
}

/// Settings of the pitchfork preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PitchforkConfig {
    pub alpha: f64,
    pub sigma: f64,
    pub hurst: f64,
    pub truncation: f64,
    pub steps_per_unit: usize,
    /// Length of the stored stationary trajectories.
    pub horizon: f64,
    pub n_moment: usize,
    pub n_ensemble: usize,
    pub n_paths: usize,
    pub n_perturbed: usize,
    pub domain_radius: f64,
    pub seed: u64,
    pub criterion: CriterionParams,
}

impl Default for PitchforkConfig {
    fn default() -> Self {
        PitchforkConfig {
            alpha: 1.0,
            sigma: 0.05,
            hurst: 0.45,
            truncation: 50.0,
            steps_per_unit: 100,
            horizon: 5.0,
            n_moment: 2000,
            n_ensemble: 200,
            n_paths: 200,
            n_perturbed: 200,
            domain_radius: 2.0,
            seed: 0,
            criterion: CriterionParams::default(),
        }
    }
}

impl PitchforkConfig {
    pub fn noise(&self) -> NoiseSpec {
        let horizon = self.truncation + self.horizon;
        NoiseSpec::fbm(
            self.hurst,
            1,
            horizon,
            (horizon * self.steps_per_unit as f64).round() as usize,
            self.seed,
        )
    }

    /// Spec for the `[0, 1]` counts of the criteria.
    pub fn unit_noise(&self) -> NoiseSpec {
        NoiseSpec::fbm(self.hurst, 1, 1.0, self.steps_per_unit, crate::mc::derive_seed(self.seed, 1))
    }
}

/// Half the members at `+c`, half at `−c`, on independent drivers.
pub fn pitchfork_pm_ensemble(cfg: &PitchforkConfig) -> Result<StationaryEnsemble> {
    let noise = cfg.noise();
    let half = cfg.n_ensemble / 2;
    let plus = pitchfork_ensemble(cfg.alpha, cfg.sigma, &noise, cfg.truncation, cfg.n_ensemble - half, 1.0)?;
    let minus = pitchfork_ensemble(
        cfg.alpha,
        cfg.sigma,
        &noise.with_seed(crate::mc::derive_seed(cfg.seed, 2)),
        cfg.truncation,
        half,
        -1.0,
    )?;
    let mut members = plus.members;
    members.extend(minus.members);
    StationaryEnsemble::closed_form(members)
}

/// Scheme stationary ensemble at step `delta` by pullback over `burn_time`, keeping `horizon`
/// time units. The starts straddle the origin when it attracts (`α ≤ 0`) and lie on the positive
/// side otherwise.
pub fn pitchfork_burn_in_ensemble(
    cfg: &PitchforkConfig,
    delta: f64,
    burn_time: f64,
    horizon: f64,
    tol: f64,
) -> Result<StationaryEnsemble> {
    let model = pitchfork_model(cfg.alpha, cfg.sigma, cfg.domain_radius)?;
    let total = burn_time + horizon;
    let noise = NoiseSpec::fbm(cfg.hurst, 1, total, (total / delta).round() as usize, cfg.seed);
    let starts = if cfg.alpha <= 0.0 {
        vec![vec![1.0], vec![-1.0]]
    } else {
        vec![vec![1.0], vec![0.5]]
    };
    StationaryEnsemble::burn_in(&model, &noise, cfg.n_ensemble, burn_time, &starts, tol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbedRun {
    pub seed: u64,
    pub radius: f64,
    pub start: f64,
    pub decay: Option<DecayFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PitchforkReport {
    pub config: PitchforkConfig,
    /// `Ê c²`, to be compared with `α`.
    pub c_squared: Estimate,
    pub tail_bound: f64,
    pub at_c: StabilityReport,
    pub at_zero: StabilityReport,
    pub perturbed: Vec<PerturbedRun>,
    /// Fraction of perturbed runs with a positive fitted rate.
    pub decay_fraction: f64,
    /// `(t, mean log‖y_t − a_t‖)` over the perturbed runs that stayed above rounding level.
    pub log_distance: Vec<(f64, f64)>,
}

/// Moment identity, the criterion at `±c` and at `0`, and decay of exact trajectories started
/// halfway to the radius `R(ω)` around `a(ω)`.
pub fn run_pitchfork(cfg: &PitchforkConfig) -> Result<PitchforkReport> {
    let model = pitchfork_model(cfg.alpha, cfg.sigma, cfg.domain_radius)?;
    let past_only = cfg.noise().with_horizon(cfg.truncation, (cfg.truncation * cfg.steps_per_unit as f64).round() as usize);
    let cs = (0..cfg.n_moment)
        .into_par_iter()
        .map(|i| {
            let path = crate::noise::sample_path(&past_only.replicate(i))?;
            pitchfork_stationary(cfg.alpha, cfg.sigma, &path, cfg.truncation).map(|s| s.c * s.c)
        })
        .collect::<Result<Vec<f64>>>()?;
    let c_squared = estimate(&cs);
    let tail_bound = (-2.0 * cfg.alpha * cfg.truncation).exp() / (2.0 * cfg.alpha);

    let ensemble = pitchfork_pm_ensemble(cfg)?;
    let unit = cfg.unit_noise();
    let at_c = criterion_continuous(&model, &cfg.criterion, &ensemble, &unit, cfg.n_paths)?;
    let zero = StationaryEnsemble::constant(&[0.0], cfg.n_ensemble.max(2))?;
    let zero_params = CriterionParams {
        time_average: false,
        ..cfg.criterion.clone()
    };
    let at_zero = criterion_continuous(&model, &zero_params, &zero, &unit, cfg.n_paths)?;

    let params = CriterionParams {
        lambda: at_c.inputs.lambda,
        ..cfg.criterion.clone()
    };
    let perturbed = (0..cfg.n_perturbed.min(ensemble.len()))
        .into_par_iter()
        .map(|i| {
            let mem = &ensemble.members[i];
            let (traj, driver) = (mem.trajectory.as_ref().unwrap(), mem.driver.as_ref().unwrap());
            let radius = radius_r(&model, &params, driver, traj, cfg.horizon)?.radius;
            let a0 = mem.initial[0];
            let start = a0 + 0.5 * radius * a0.signum();
            let y = pitchfork_exact_path(cfg.alpha, cfg.sigma, driver.path(), start)?;
            let y = GridPath::new(traj.times().to_vec(), y, 1)?;
            let decay = fit_decay(&y, traj).ok();
            Ok((PerturbedRun { seed: mem.seed, radius, start, decay }, y))
        })
        .collect::<Result<Vec<_>>>()?;
    let positive = perturbed
        .iter()
        .filter(|(p, _)| p.decay.is_some_and(|d| !d.inconclusive && d.mu > 0.0))
        .count();
    let decay_fraction = positive as f64 / perturbed.len().max(1) as f64;
    let log_distance = mean_log_distance(
        perturbed
            .iter()
            .enumerate()
            .map(|(i, (_, y))| (y, ensemble.members[i].trajectory.as_ref().unwrap())),
    );
    Ok(PitchforkReport {
        config: cfg.clone(),
        c_squared,
        tail_bound,
        at_c,
        at_zero,
        perturbed: perturbed.into_iter().map(|(p, _)| p).collect(),
        decay_fraction,
        log_distance,
    })
}

/// `(t, mean log‖y_t − a_t‖)` over pairs, skipping separations at rounding level.
pub(crate) fn mean_log_distance<'a>(pairs: impl Iterator<Item = (&'a GridPath, &'a GridPath)>) -> Vec<(f64, f64)> {
    let mut sums: Vec<(f64, f64, usize)> = Vec::new();
    for (y, a) in pairs {
        if sums.is_empty() {
            sums = y.times().iter().map(|&t| (t, 0.0, 0)).collect();
        }
        for (k, s) in sums.iter_mut().enumerate().take(y.len()) {
            let d = crate::linalg::dist(y.value(k), a.value(k));
            if d > 100.0 * f64::EPSILON {
                s.1 += d.ln();
                s.2 += 1;
            }
        }
    }
    sums.into_iter()
        .filter(|s| s.2 > 0)
        .map(|(t, v, n)| (t, v / n as f64))
        .collect()
}
