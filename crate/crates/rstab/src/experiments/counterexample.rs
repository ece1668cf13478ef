//! Itô system `dy = y(μ − ‖y‖²) dt + σ J y dW` in the plane, `J` the rotation by −π/2.
//!
//! The noise is tangential, so `η = ‖y‖²` solves the logistic equation `η̇ = η(2μ + σ² − 2η)`
//! pathwise and the origin loses stability as soon as `2μ + σ² > 0`, even when `μ < 0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Ball, DiffusionSpec, DriftSpec, ModelConfig, SystemModel};
use crate::mc::{derive_seed, estimate, Estimate};
use crate::noise::{sample_lift, NoiseKind, NoiseSpec};
use crate::rough::GridPath;
use crate::schemes::simulate;
use crate::stability::{fit_decay, DecayFit};

pub fn counterexample_model(mu: f64, sigma: f64) -> Result<SystemModel> {
    ModelConfig {
        drift: DriftSpec::CubicRadial { mu, dim: 2 },
        diffusion: DiffusionSpec::Linear {
            mats: vec![vec![vec![0.0, sigma], vec![-sigma, 0.0]]],
        },
        bounds: None,
        // ‖y‖² stays between its start and max(η0, 2μ + σ²) / 2; the ball only feeds the bounds
        domain: Some(Ball::origin(2, 4.0)),
        lipschitz: None,
        growth: None,
        dissipativity: None,
    }
    .build()
}

/// Solution of `η̇ = η(r − 2η)` from `eta0`, with `r = 2μ + σ²`.
pub fn logistic(mu: f64, sigma: f64, eta0: f64, t: f64) -> f64 {
    let r = 2.0 * mu + sigma * sigma;
    if r == 0.0 {
        return eta0 / (1.0 + 2.0 * eta0 * t);
    }
    let e = (r * t).exp_m1();
    r * eta0 * (e + 1.0) / (r + 2.0 * eta0 * e)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CounterexampleConfig {
    pub mu: f64,
    pub sigma: f64,
    pub delta: f64,
    pub horizon: f64,
    /// Start `(y0, 0)`.
    pub y0: f64,
    pub n_paths: usize,
    /// Noise intensities of the threshold sweep.
    pub sweep: Vec<f64>,
    pub seed: u64,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        CounterexampleConfig {
            mu: -1.0,
            sigma: 2.0,
            delta: 1.0 / 1024.0,
            horizon: 5.0,
            y0: 0.5,
            n_paths: 20,
            sweep: vec![0.0, 0.5, 1.0, 1.25, 1.6, 2.0],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexamplePath {
    pub seed: u64,
    pub squared_norm_at_1: f64,
    pub relative_error_at_1: f64,
    /// Largest relative deviation from the logistic solution over the horizon.
    pub sup_relative_error: f64,
    pub final_squared_norm: f64,
    /// Fit against the origin; the rate on the `‖y‖²` scale is `2μ̂`.
    pub decay: DecayFit,
}

impl CounterexamplePath {
    pub fn decays(&self) -> bool {
        !self.decay.inconclusive && self.decay.lo > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub sigma: f64,
    /// `2μ + σ²`; the origin is unstable when positive.
    pub growth_rate: f64,
    /// Fitted rate on the `‖y‖²` scale.
    pub squared_rate: Estimate,
    pub decay_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleReport {
    pub config: CounterexampleConfig,
    pub logistic_at_1: f64,
    pub paths: Vec<CounterexamplePath>,
    pub squared_rate: Estimate,
    pub sweep: Vec<SweepPoint>,
    /// `√(−2μ)`, where `2μ + σ² = 0`.
    pub threshold: f64,
    /// Largest swept σ at which every path decays and smallest at which none does.
    pub bracket: (Option<f64>, Option<f64>),
    /// `(t, mean log‖y_t‖)` over the paths at the configured σ.
    pub log_distance: Vec<(f64, f64)>,
}

fn run_paths(cfg: &CounterexampleConfig, sigma: f64, seed: u64) -> Result<Vec<(CounterexamplePath, GridPath)>> {
    let model = counterexample_model(cfg.mu, sigma)?;
    let steps = (cfg.horizon / cfg.delta).round() as usize;
    if steps < 2 || ((steps as f64) * cfg.delta - cfg.horizon).abs() > 1e-9 * cfg.horizon {
        return Err(Error::config("delta", "must divide the horizon"));
    }
    let noise = NoiseSpec {
        kind: NoiseKind::BmIto,
        hurst: 0.5,
        dim: 1,
        horizon: cfg.horizon,
        fine_steps: steps,
        seed,
    };
    let eta0 = cfg.y0 * cfg.y0;
    (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let spec = noise.replicate(i);
            let run = simulate(&model, &sample_lift(&spec)?, &[cfg.y0, 0.0], None)?;
            let eta = |k: usize| run.state(k).iter().map(|v| v * v).sum::<f64>();
            let one = run.trajectory.index_of(1.0)?;
            let exact_1 = logistic(cfg.mu, sigma, eta0, 1.0);
            let sup = (0..run.len())
                .map(|k| {
                    let e = logistic(cfg.mu, sigma, eta0, run.trajectory.time(k));
                    (eta(k) - e).abs() / e
                })
                .fold(0.0, f64::max);
            let zero = GridPath::new(run.trajectory.times().to_vec(), vec![0.0; 2 * run.len()], 2)?;
            let decay = fit_decay(&run.trajectory, &zero)?;
            Ok((
                CounterexamplePath {
                    seed: spec.seed,
                    squared_norm_at_1: eta(one),
                    relative_error_at_1: (eta(one) - exact_1).abs() / exact_1,
                    sup_relative_error: sup,
                    final_squared_norm: eta(run.len() - 1),
                    decay,
                },
                run.trajectory,
            ))
        })
        .collect()
}

fn squared_rates(paths: &[(CounterexamplePath, GridPath)]) -> Estimate {
    let rates: Vec<f64> = paths.iter().map(|(p, _)| 2.0 * p.decay.mu).collect();
    estimate(&rates)
}

/// Scheme against the logistic oracle at the configured σ, then a σ sweep locating the loss of
/// stability.
pub fn run_counterexample(cfg: &CounterexampleConfig) -> Result<CounterexampleReport> {
    if !(cfg.y0 > 0.0) {
        return Err(Error::config("y0", "must be positive"));
    }
    let main = run_paths(cfg, cfg.sigma, cfg.seed)?;
    let mut sweep = Vec::with_capacity(cfg.sweep.len());
    for (j, &sigma) in cfg.sweep.iter().enumerate() {
        let paths = run_paths(cfg, sigma, derive_seed(cfg.seed, j as u64 + 1))?;
        let decaying = paths.iter().filter(|(p, _)| p.decays()).count();
        sweep.push(SweepPoint {
            sigma,
            growth_rate: 2.0 * cfg.mu + sigma * sigma,
            squared_rate: squared_rates(&paths),
            decay_fraction: decaying as f64 / paths.len().max(1) as f64,
        });
    }
    let stable = sweep
        .iter()
        .filter(|s| s.decay_fraction == 1.0)
        .map(|s| s.sigma)
        .fold(None, |m: Option<f64>, s| Some(m.map_or(s, |v| v.max(s))));
    let unstable = sweep
        .iter()
        .filter(|s| s.decay_fraction == 0.0)
        .map(|s| s.sigma)
        .fold(None, |m: Option<f64>, s| Some(m.map_or(s, |v| v.min(s))));
    let origin = GridPath::new(main[0].1.times().to_vec(), vec![0.0; 2 * main[0].1.len()], 2)?;
    let log_distance = super::pitchfork::mean_log_distance(main.iter().map(|(_, y)| (y, &origin)));
    Ok(CounterexampleReport {
        config: cfg.clone(),
        logistic_at_1: logistic(cfg.mu, cfg.sigma, cfg.y0 * cfg.y0, 1.0),
        squared_rate: squared_rates(&main),
        paths: main.into_iter().map(|(p, _)| p).collect(),
        sweep,
        threshold: (-2.0 * cfg.mu).max(0.0).sqrt(),
        bracket: (stable, unstable),
        log_distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_limits() {
        assert!((logistic(-1.0, 2.0, 0.25, 50.0) - 1.0).abs() < 1e-12);
        assert_eq!(logistic(-1.0, 2.0, 0.25, 0.0), 0.25);
        assert!((logistic(-1.0, 2.0f64.sqrt(), 0.25, 2.0) - 0.25 / 2.0).abs() < 1e-12);
        // r = −2 and small η behaves like e^{−2t}
        let v = logistic(-1.0, 0.0, 1e-8, 1.0);
        assert!((v / (1e-8 * (-2.0f64).exp()) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn noise_free_decay_rate_on_the_squared_scale() {
        let cfg = CounterexampleConfig {
            sigma: 0.0,
            n_paths: 1,
            y0: 0.1,
            delta: 1.0 / 256.0,
            ..CounterexampleConfig::default()
        };
        let paths = run_paths(&cfg, 0.0, 3).unwrap();
        let rate = 2.0 * paths[0].0.decay.mu;
        assert!((rate - 2.0).abs() < 0.1, "{rate}");
        assert!(paths[0].0.relative_error_at_1 < 1e-2);
    }

    #[test]
    fn strong_noise_tracks_the_logistic_solution() {
        let cfg = CounterexampleConfig {
            n_paths: 4,
            horizon: 2.0,
            sweep: vec![0.0, 2.0],
            ..CounterexampleConfig::default()
        };
        let rep = run_counterexample(&cfg).unwrap();
        for p in &rep.paths {
            assert!(p.relative_error_at_1 < 0.05, "{}", p.relative_error_at_1);
            assert!(!p.decays());
        }
        assert_eq!(rep.bracket, (Some(0.0), Some(2.0)));
        assert!((rep.threshold - 2.0f64.sqrt()).abs() < 1e-15);
    }
}
