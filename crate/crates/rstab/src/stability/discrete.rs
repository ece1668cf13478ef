//! Criteria for the discrete scheme at a stationary ensemble of scheme trajectories:
//!
//! ```text
//! η := −E ℓ(f, a^Δ) − ½ L_f² Δ > K L_g γ* [ E N*(γ*, x, [0,1]) + 2 E N*(λ, S, [0,1]) ]
//! ```
//!
//! and the dissipative variant with right-hand side `K Γ̄ L_g [1 + E|||x|||^{p(p+2)}]`.

use rayon::prelude::*;

use super::continuous::{unit_rough_norms, CriterionParams};
use super::ensemble::StationaryEnsemble;
use super::report::{ReportInputs, StabilityReport, SubCheck, Verdict};
use crate::error::{Error, Result};
use crate::fields::{ell, lg_constant, SystemModel};
use crate::mc::{estimate, Estimate};
use crate::noise::NoiseSpec;
use crate::rough::{NormKind, Window};
use crate::schemes::{constant_k, scheme_controls, SchemeConstants};
use crate::stopping::{estimate_en, greedy_times_controls, CountMode};

/// `λ` values tried when none is fixed.
const LAMBDA_GRID: [f64; 6] = [0.05, 0.1, 0.2, 0.3, 0.4, 0.49];

struct Common {
    c_p: f64,
    l_f: f64,
    l_g: f64,
    delta: f64,
    eta: Estimate,
    mean_ell: f64,
}

fn common(model: &SystemModel, params: &CriterionParams, ensemble: &StationaryEnsemble) -> Result<Common> {
    if ensemble.is_empty() {
        return Err(Error::domain("empty ensemble"));
    }
    let c_p = params.c_p()?;
    let l_f = model.require_lipschitz()?;
    let l_g = lg_constant(&model.bounds)?;
    let delta = match (params.delta, ensemble.members[0].driver.as_ref()) {
        (Some(d), _) => d,
        (None, Some(rp)) => rp.path().step(),
        (None, None) => return Err(Error::config("delta", "not set and the ensemble carries no driver")),
    };
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::config("delta", "must lie in (0, 1]"));
    }
    let ells = ensemble.mean_of(|a| ell(model, a))?;
    let eta = Estimate {
        mean: -ells.mean - 0.5 * l_f * l_f * delta,
        ..ells
    };
    Ok(Common {
        c_p,
        l_f,
        l_g,
        delta,
        eta,
        mean_ell: ells.mean,
    })
}

fn cond_check(report: &mut StabilityReport, c: &Common) {
    let cond = SubCheck::new("cond", c.eta, Estimate::exact(0.0));
    match cond.verdict {
        Verdict::Fail => report.verdict = Verdict::Fail,
        Verdict::Inconclusive if report.verdict == Verdict::Pass => report.verdict = Verdict::Inconclusive,
        _ => {}
    }
    report.checks.push(cond);
    if c.mean_ell < 0.0 && c.l_f > 0.0 {
        report.critical = Some(("delta".into(), -2.0 * c.mean_ell / (c.l_f * c.l_f)));
    }
}

/// `N*(λ, S, [0, 1])` for every ensemble member, with `S` built from its trajectory and driver.
fn scheme_counts(
    model: &SystemModel,
    ensemble: &StationaryEnsemble,
    consts: &SchemeConstants,
) -> Result<Vec<f64>> {
    ensemble
        .members
        .par_iter()
        .map(|m| {
            let run = m
                .scheme_run()
                .ok_or_else(|| Error::domain(format!("ensemble member {} has no trajectory", m.seed)))?;
            let end = run.driver.path().index_of(run.driver.path().start_time() + 1.0)?;
            let w = Window::new(0, end)?;
            let driver = run.driver.restrict(w)?;
            let traj = run.trajectory.slice(w)?;
            let set = scheme_controls(model, &driver, &traj, consts)?;
            Ok(greedy_times_controls(&set, consts.lambda, driver.path().full_window())?.count() as f64)
        })
        .collect()
}

/// The general discrete criterion. The ensemble members must carry trajectories of length at
/// least one time unit on the scheme grid.
pub fn criterion_discrete(
    model: &SystemModel,
    params: &CriterionParams,
    ensemble: &StationaryEnsemble,
    noise: &NoiseSpec,
    n_paths: usize,
) -> Result<StabilityReport> {
    let c = common(model, params, ensemble)?;
    let gs = params.gamma_star;
    if !(gs > 0.0 && gs < 1.0) {
        return Err(Error::config("gamma_star", "must lie in (0, 1)"));
    }
    let lambdas: Vec<f64> = match params.lambda {
        Some(l) if l > 0.0 && l < 0.5 => vec![l],
        Some(_) => return Err(Error::config("lambda", "must lie in (0, 1/2)")),
        None => LAMBDA_GRID.to_vec(),
    };
    let en_x = if c.l_g > 0.0 {
        estimate_en(noise, params.p, gs, &CountMode::Norm(NormKind::Rough), n_paths)?
    } else {
        Estimate::exact(1.0)
    };
    let mut best: Option<(f64, f64, Estimate)> = None;
    for lambda in lambdas {
        let rhs = if c.l_g > 0.0 {
            let consts = SchemeConstants {
                p: params.p,
                c_p: c.c_p,
                lambda,
                l_f: c.l_f,
                l_g: c.l_g,
                r: params.r,
                samples: params.samples,
            };
            let en_s = estimate(&scheme_counts(model, ensemble, &consts)?);
            let k = constant_k(lambda, c.c_p, c.l_f, c.delta);
            let scale = k * c.l_g * gs;
            Estimate {
                mean: scale * (en_x.mean + 2.0 * en_s.mean),
                stderr: scale * (en_x.stderr.powi(2) + 4.0 * en_s.stderr.powi(2)).sqrt(),
                n: en_s.n,
            }
        } else {
            Estimate::exact(0.0)
        };
        let margin = c.eta.mean - rhs.mean - 2.0 * (c.eta.stderr.powi(2) + rhs.stderr.powi(2)).sqrt();
        if best.as_ref().map_or(true, |b| margin > b.0) {
            best = Some((margin, lambda, rhs));
        }
    }
    let (_, lambda, rhs) = best.expect("non-empty λ list");
    let inputs = ReportInputs {
        p: params.p,
        c_p: c.c_p,
        lambda: Some(lambda),
        gamma_star: Some(gs),
        l_g: Some(c.l_g),
        delta: Some(c.delta),
        n_paths,
        ensemble_size: ensemble.len(),
        ..ReportInputs::default()
    };
    let mut report = StabilityReport::new("discrete", c.eta, rhs, inputs, params.frame);
    cond_check(&mut report, &c);
    Ok(report)
}

/// The dissipative variant with a user-supplied `Γ̄`. Reports the largest `L_g` that would
/// still pass as the critical value.
pub fn criterion_discrete_dissipative(
    model: &SystemModel,
    params: &CriterionParams,
    ensemble: &StationaryEnsemble,
    noise: &NoiseSpec,
    gamma_bar: f64,
    n_paths: usize,
) -> Result<StabilityReport> {
    if model.dissipativity.is_none() {
        return Err(Error::config("dissipativity", "the model must declare D_1 and D_2"));
    }
    if !(gamma_bar > 0.0) || !gamma_bar.is_finite() {
        return Err(Error::config("gamma_bar", "must be positive and finite"));
    }
    let c = common(model, params, ensemble)?;
    let lambda = params.lambda.unwrap_or(0.3);
    if !(lambda > 0.0 && lambda < 0.5) {
        return Err(Error::config("lambda", "must lie in (0, 1/2)"));
    }
    let p = params.p;
    let exponent = p * (p + 2.0);
    let powers: Vec<f64> = unit_rough_norms(noise, p, n_paths)?
        .into_iter()
        .map(|v| v.powf(exponent))
        .collect();
    let moment = estimate(&powers);
    let k = constant_k(lambda, c.c_p, c.l_f, c.delta);
    let rhs = Estimate {
        mean: k * gamma_bar * c.l_g * (1.0 + moment.mean),
        stderr: k * gamma_bar * c.l_g * moment.stderr,
        n: moment.n,
    };
    let inputs = ReportInputs {
        p,
        c_p: c.c_p,
        lambda: Some(lambda),
        l_g: Some(c.l_g),
        delta: Some(c.delta),
        n_paths,
        ensemble_size: ensemble.len(),
        ..ReportInputs::default()
    };
    let mut report = StabilityReport::new("discrete_dissipative", c.eta, rhs, inputs, params.frame);
    report.checks.push(SubCheck::new(
        "moment",
        moment,
        Estimate::exact(0.0),
    ));
    cond_check(&mut report, &c);
    report.critical = Some((
        "l_g".into(),
        (c.eta.mean / (k * gamma_bar * (1.0 + moment.mean))).max(0.0),
    ));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Ball, DiffusionSpec, Dissipativity, DriftSpec, ModelConfig};

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
            dissipativity: Some(Dissipativity { d1: 1.0, d2: 1.0 }),
        }
        .build()
        .unwrap()
    }

    fn ensemble(m: &SystemModel) -> StationaryEnsemble {
        let noise = NoiseSpec::fbm(0.45, 1, 22.0, 2200, 11);
        StationaryEnsemble::burn_in(m, &noise, 6, 20.0, &[vec![0.5], vec![-0.5]], 1e-6).unwrap()
    }

    #[test]
    fn noise_free_reduces_to_the_drift_condition() {
        let m = model(0.0);
        let e = StationaryEnsemble::constant(&[0.0], 4).unwrap();
        let params = CriterionParams {
            delta: Some(0.01),
            ..CriterionParams::default()
        };
        let noise = NoiseSpec::fbm(0.45, 1, 1.0, 100, 1);
        let rep = criterion_discrete(&m, &params, &e, &noise, 4).unwrap();
        assert_eq!(rep.rhs, Estimate::exact(0.0));
        let l_f = m.require_lipschitz().unwrap();
        assert!((rep.lhs.mean - (1.0 - 0.5 * l_f * l_f * 0.01)).abs() < 1e-12);
        assert_eq!(rep.verdict, Verdict::Pass);
        let (name, dstar) = rep.critical.clone().unwrap();
        assert_eq!(name, "delta");
        assert!((dstar - 2.0 / (l_f * l_f)).abs() < 1e-12);
    }

    #[test]
    fn eta_is_linear_in_delta() {
        let m = model(0.0);
        let e = StationaryEnsemble::constant(&[0.1], 2).unwrap();
        let noise = NoiseSpec::fbm(0.45, 1, 1.0, 100, 1);
        let at = |d: f64| {
            let params = CriterionParams {
                delta: Some(d),
                ..CriterionParams::default()
            };
            criterion_discrete(&m, &params, &e, &noise, 4).unwrap().lhs.mean
        };
        let l_f = m.require_lipschitz().unwrap();
        let slope = (at(0.02) - at(0.01)) / 0.01;
        assert!((slope + 0.5 * l_f * l_f).abs() < 1e-9);
    }

    #[test]
    fn small_noise_pitchfork_passes() {
        let m = model(1e-6);
        let e = ensemble(&m);
        let noise = NoiseSpec::fbm(0.45, 1, 1.0, 100, 2);
        let rep = criterion_discrete(&m, &CriterionParams::default(), &e, &noise, 8).unwrap();
        assert_eq!(rep.check("cond").unwrap().verdict, Verdict::Pass);
        assert_eq!(rep.verdict, Verdict::Pass, "{rep:?}");
    }

    #[test]
    fn dissipative_variant() {
        let m = model(1e-3);
        let e = ensemble(&m);
        let noise = NoiseSpec::fbm(0.45, 1, 1.0, 100, 2);
        let rep = criterion_discrete_dissipative(&m, &CriterionParams::default(), &e, &noise, 1.0, 16).unwrap();
        let moment = rep.check("moment").unwrap().lhs;
        assert!(moment.mean > 0.0 && moment.stderr.is_finite());
        let lg_max = rep.critical.as_ref().unwrap().1;
        if rep.verdict == Verdict::Pass {
            assert!(rep.inputs.l_g.unwrap() < lg_max);
        }
        assert!(criterion_discrete_dissipative(&m, &CriterionParams::default(), &e, &noise, 0.0, 4).is_err());
        let mut plain = m.clone();
        plain.dissipativity = None;
        assert!(criterion_discrete_dissipative(&plain, &CriterionParams::default(), &e, &noise, 1.0, 4).is_err());
    }
}
