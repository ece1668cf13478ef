//! The `criterion` command: build a stationary ensemble for the chosen model and evaluate one
//! stability criterion on it.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::models::{choose, Chosen};
use super::Ctx;
use crate::args::{CriterionArgs, Preset, Theorem};
use crate::config::Overrides;
use crate::error::{CliError, CliResult};
use rstab::experiments::{
    pitchfork_burn_in_ensemble, pitchfork_pm_ensemble, run_fhn, FhnConfig, PitchforkConfig,
};
use rstab::mc::derive_seed;
use rstab::noise::NoiseSpec;
use rstab::stability::{
    criterion_continuous, criterion_discrete, criterion_discrete_dissipative, criterion_trivial, CriterionParams,
    StabilityReport, StationaryEnsemble, Verdict,
};

/// Ensemble and Monte Carlo settings; the `run` block of the settings file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    pub hurst: f64,
    pub n_paths: usize,
    pub n_ensemble: usize,
    /// Scheme step of the discrete criteria.
    pub delta: f64,
    pub gamma_bar: f64,
    pub burn_time: f64,
    /// Kept trajectory length after the burn-in.
    pub horizon: f64,
    pub tol: f64,
    /// Grid steps per time unit for the `[0, 1]` counts of the continuous criteria.
    pub steps_per_unit: usize,
    /// Deterministic stationary point (where `g` vanishes); replaces the burn-in.
    pub point: Option<Vec<f64>>,
    /// Burn-in starts for models from the settings file.
    pub starts: Option<Vec<Vec<f64>>>,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            hurst: 0.45,
            n_paths: 200,
            n_ensemble: 200,
            delta: 0.01,
            gamma_bar: 1.0,
            burn_time: 20.0,
            horizon: 2.0,
            tol: 1e-6,
            steps_per_unit: 100,
            point: None,
            starts: None,
        }
    }
}

/// Verdict convention of the process exit status.
pub fn exit_code(v: Verdict) -> i32 {
    match v {
        Verdict::Pass => 0,
        Verdict::Fail => 1,
        Verdict::Inconclusive => 2,
    }
}

fn unit_noise(chosen: &Chosen, run: &RunSettings, steps: usize, seed: u64) -> NoiseSpec {
    NoiseSpec {
        kind: chosen.kind,
        hurst: run.hurst,
        dim: chosen.model.noise_dim(),
        horizon: 1.0,
        fine_steps: steps,
        seed: derive_seed(seed, 1),
    }
}

fn default_starts(chosen: &Chosen) -> Vec<Vec<f64>> {
    let y = &chosen.y0;
    let mut other = y.clone();
    for (i, v) in other.iter_mut().enumerate() {
        *v += if i % 2 == 0 { 0.01 } else { -0.01 };
    }
    match chosen.preset {
        Some(Preset::Fhn) => vec![y.clone(), other],
        _ => vec![y.clone(), y.iter().map(|v| -v).collect()],
    }
}

fn burn_in(chosen: &Chosen, run: &RunSettings, seed: u64) -> CliResult<StationaryEnsemble> {
    let starts = run.starts.clone().unwrap_or_else(|| default_starts(chosen));
    let total = run.burn_time + run.horizon;
    let noise = NoiseSpec {
        kind: chosen.kind,
        hurst: run.hurst,
        dim: chosen.model.noise_dim(),
        horizon: total,
        fine_steps: (total / run.delta).round() as usize,
        seed,
    };
    Ok(StationaryEnsemble::burn_in(&chosen.model, &noise, run.n_ensemble, run.burn_time, &starts, run.tol)?)
}

fn pitchfork_config(chosen: &Chosen, run: &RunSettings, params: &CriterionParams, seed: u64) -> PitchforkConfig {
    let pp = chosen.params.expect("pitchfork preset carries its parameters");
    PitchforkConfig {
        alpha: pp.alpha,
        sigma: pp.sigma,
        hurst: run.hurst,
        steps_per_unit: run.steps_per_unit,
        n_ensemble: run.n_ensemble,
        n_paths: run.n_paths,
        domain_radius: pp.domain_radius,
        seed,
        criterion: params.clone(),
        ..PitchforkConfig::default()
    }
}

pub fn run_criterion(ctx: &Ctx, a: &CriterionArgs) -> CliResult<i32> {
    let chosen = choose(ctx, &a.model)?;
    let fhn = chosen.preset == Some(Preset::Fhn);
    let mut base = serde_json::to_value(if fhn {
        FhnConfig::default().criterion
    } else {
        CriterionParams::default()
    })?;
    let flags = Overrides::default()
        .set("p", a.p)
        .set("c_p", a.c_p)
        .set("lambda", a.lambda)
        .value();
    if let Some(block) = ctx.file.get("criterion") {
        crate::config::merge(&mut base, block.clone());
    }
    crate::config::merge(&mut base, flags);
    let params: CriterionParams = serde_path_to_error::deserialize(base)
        .map_err(|e| CliError::config(format!("criterion.{}", e.path()), e.into_inner().to_string()))?;
    let run: RunSettings = ctx.file.resolve(
        "run",
        Overrides::default()
            .set("hurst", a.hurst)
            .set("n_paths", a.n_paths)
            .set("n_ensemble", a.n_ensemble)
            .set("delta", a.delta)
            .set("gamma_bar", a.gamma_bar)
            .value(),
    )?;
    let seed = ctx.seed;
    let report: StabilityReport = match a.theorem {
        Theorem::Trivial => {
            let noise = unit_noise(&chosen, &run, run.steps_per_unit, seed);
            criterion_trivial(&chosen.model, &params, &noise, run.n_paths)?
        }
        Theorem::Continuous if fhn => {
            let pp = chosen.params.expect("fhn preset carries its parameters");
            let d = FhnConfig::default();
            // the FitzHugh–Nagumo burn-in is long, so its own smaller sizes apply unless given
            let cfg = FhnConfig {
                levels: vec![pp.cg],
                hurst: run.hurst,
                n_ensemble: a.n_ensemble.unwrap_or(d.n_ensemble),
                n_paths: a.n_paths.unwrap_or(d.n_paths),
                seed,
                criterion: params.clone(),
                ..FhnConfig::default()
            };
            let mut r = run_fhn(&cfg)?;
            r.levels.remove(0).report
        }
        Theorem::Continuous => {
            let ensemble = match (&run.point, chosen.preset) {
                (Some(point), _) => StationaryEnsemble::constant(point, run.n_ensemble)?,
                (None, Some(Preset::Pitchfork)) => {
                    let cfg = pitchfork_config(&chosen, &run, &params, seed);
                    if cfg.alpha > 0.0 {
                        pitchfork_pm_ensemble(&cfg)?
                    } else {
                        StationaryEnsemble::constant(&[0.0], run.n_ensemble)?
                    }
                }
                (None, Some(Preset::Counterexample)) => StationaryEnsemble::constant(&[0.0, 0.0], run.n_ensemble)?,
                (None, _) => burn_in(&chosen, &run, seed)?,
            };
            let noise = unit_noise(&chosen, &run, run.steps_per_unit, seed);
            criterion_continuous(&chosen.model, &params, &ensemble, &noise, run.n_paths)?
        }
        Theorem::Discrete | Theorem::DiscreteDissipative => {
            let ensemble = match chosen.preset {
                Some(Preset::Pitchfork) if run.starts.is_none() => pitchfork_burn_in_ensemble(
                    &pitchfork_config(&chosen, &run, &params, seed),
                    run.delta,
                    run.burn_time,
                    run.horizon,
                    run.tol,
                )?,
                _ => burn_in(&chosen, &run, seed)?,
            };
            let steps = (1.0 / run.delta).round() as usize;
            let noise = unit_noise(&chosen, &run, steps, seed);
            if a.theorem == Theorem::Discrete {
                criterion_discrete(&chosen.model, &params, &ensemble, &noise, run.n_paths)?
            } else {
                criterion_discrete_dissipative(&chosen.model, &params, &ensemble, &noise, run.gamma_bar, run.n_paths)?
            }
        }
    };
    let code = exit_code(report.verdict);
    ctx.emit(&report, || {
        format!(
            "criterion,lhs,lhs_stderr,rhs,rhs_stderr,verdict\n{},{:?},{:?},{:?},{:?},{}\n",
            report.criterion,
            report.lhs.mean,
            report.lhs.stderr,
            report.rhs.mean,
            report.rhs.stderr,
            json!(report.verdict).as_str().unwrap_or("")
        )
    })?;
    Ok(code)
}
