//! End-to-end acceptance checks. Each check prints one PASS/FAIL line; the process exits
//! nonzero when any of them fails.

use std::time::Instant;

use rstab::experiments::{
    pitchfork_burn_in_ensemble, pitchfork_ensemble, pitchfork_model, run_counterexample, run_fhn, run_pitchfork,
    scheme_convergence, CounterexampleConfig, FhnConfig, PitchforkConfig,
};
use rstab::fields::{sewing_constant, DiffusionSpec, DriftSpec, ModelConfig, SystemModel};
use rstab::flow::{audit_solest, audit_solestdiff, small_lambda_windows, FlowParams};
use rstab::mc::{derive_seed, rng};
use rstab::noise::{sample_lift, NoiseKind, NoiseSpec};
use rstab::rough::{pvar_power, rough_norm, GridPath, NormKind, Window};
use rstab::schemes::{audit_hnew_run, simulate, SchemeConstants};
use rstab::stability::{criterion_discrete, fit_decay, CriterionParams, Verdict};
use rstab::stopping::{
    bound_nhat, bound_nstar, bound_nstar_controls, check_nsum, estimate_en, greedy_times, greedy_times_controls,
    greedy_times_discrete, long_path_check, AreaVariationControl, Control, ControlSet, CountMode, LinearControl,
    PathVariationControl,
};

use rand::Rng as _;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

type Check = fn() -> rstab::Result<Outcome>;

fn pitchfork_moment() -> rstab::Result<Outcome> {
    let cfg = PitchforkConfig {
        sigma: 0.1,
        ..PitchforkConfig::default()
    };
    let ens = pitchfork_ensemble(cfg.alpha, cfg.sigma, &cfg.noise(), cfg.truncation, 2000, 1.0)?;
    let m = ens.moment(2.0);
    Ok(outcome(
        (0.90..=1.10).contains(&m.mean),
        format!("mean c^2 = {:.4} +/- {:.4} over {} seeds, target [0.90, 1.10]", m.mean, m.stderr, m.n),
    ))
}

fn counterexample_threshold() -> rstab::Result<Outcome> {
    let r = run_counterexample(&CounterexampleConfig::default())?;
    let quiet = r.sweep.iter().find(|s| s.sigma == 0.0).expect("sweep includes sigma = 0");
    let rate_ok = (quiet.squared_rate.mean - 2.0).abs() <= 0.2;
    let worst = r.paths.iter().map(|p| p.relative_error_at_1).fold(0.0, f64::max);
    let none_decay = r.paths.iter().all(|p| !p.decays());
    Ok(outcome(
        rate_ok && worst <= 0.05 && none_decay,
        format!(
            "sigma=0 rate {:.4} (target 2 +/- 10%); sigma=2 worst relative error at t=1 {:.2e} (<= 5%), decaying paths {}",
            quiet.squared_rate.mean,
            worst,
            r.paths.iter().filter(|p| p.decays()).count()
        ),
    ))
}

fn chen_exactness() -> rstab::Result<Outcome> {
    let mut worst = 0.0f64;
    let mut lifts = 0;
    let kinds = [
        (NoiseKind::Fbm, 0.4),
        (NoiseKind::Fbm, 0.45),
        (NoiseKind::BmIto, 0.5),
        (NoiseKind::BmStrat, 0.5),
    ];
    for (k, &(kind, hurst)) in kinds.iter().enumerate() {
        for dim in 1..=3 {
            for i in 0..5u64 {
                let seed = derive_seed(k as u64 * 100 + dim as u64, i);
                let spec = NoiseSpec {
                    kind,
                    hurst,
                    dim,
                    horizon: 1.0,
                    fine_steps: 512,
                    seed,
                };
                let rp = sample_lift(&spec)?;
                let coarse = rp.coarsen(4)?;
                let part = rp.restrict(Window::new(100, 400)?)?;
                for lift in [&rp, &coarse, &part] {
                    worst = worst.max(lift.chen_audit(1000, seed));
                    lifts += 1;
                }
            }
        }
    }
    Ok(outcome(
        worst <= 1e-12,
        format!("{lifts} lifts, 1000 triples each, worst relative defect {worst:.2e} (<= 1e-12)"),
    ))
}

/// Largest `Σ |x_{t_{i+1}} − x_{t_i}|^p` over every partition of the index range.
fn brute_pvar_power(x: &GridPath, p: f64) -> f64 {
    let n = x.len();
    let interior = n.saturating_sub(2);
    let mut best = 0.0f64;
    for mask in 0u32..(1 << interior) {
        let mut prev = 0;
        let mut sum = 0.0;
        for k in 1..n {
            if k == n - 1 || mask & (1 << (k - 1)) != 0 {
                let inc: f64 = x
                    .value(k)
                    .iter()
                    .zip(x.value(prev))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                sum += inc.powf(p);
                prev = k;
            }
        }
        best = best.max(sum);
    }
    best
}

fn pvar_oracle() -> rstab::Result<Outcome> {
    let mut r = rng(4);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = r.gen_range(2..=12);
        let dim = r.gen_range(1..=3);
        let values: Vec<f64> = (0..n * dim).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        let x = GridPath::uniform(0.0, 1.0 / (n - 1) as f64, values, dim)?;
        for p in [2.2, 2.5, 2.9] {
            let dp = pvar_power(&x, p, x.full_window())?;
            let bf = brute_pvar_power(&x, p);
            worst = worst.max((dp - bf).abs() / bf.max(1.0));
        }
    }
    Ok(outcome(
        worst <= 1e-12,
        format!("100 paths with n <= 12, p in {{2.2, 2.5, 2.9}}, worst relative gap {worst:.2e} (<= 1e-12)"),
    ))
}

fn stopping_audits() -> rstab::Result<Outcome> {
    let p = 2.5;
    let mut violations = Vec::new();
    let mut checked = 0;
    for (h, hurst) in [0.4, 0.45, 0.5].into_iter().enumerate() {
        for i in 0..100u64 {
            let seed = derive_seed(h as u64, i);
            let rp = sample_lift(&NoiseSpec::fbm(hurst, 2, 1.0, 256, seed))?;
            let full = rp.path().full_window();
            let times = rp.path().times();
            for gamma in [0.5, 1.0] {
                let seq = greedy_times(&rp, p, gamma, full)?;
                let n = seq.count() as f64;
                if n > bound_nstar(&rp, p, gamma, full)? {
                    violations.push(format!("count bound, H={hurst} seed {seed}"));
                }
                if gamma * n < rough_norm(&rp, p, full)? {
                    violations.push(format!("gamma N* >= norm, H={hurst} seed {seed}"));
                }
                let last = full.end;
                if !check_nsum(&rp, p, gamma, &[0, last / 3, last / 2, last])?.holds {
                    violations.push(format!("count subadditivity, H={hurst} seed {seed}"));
                }
                let controls: Vec<Box<dyn Control + '_>> = vec![
                    Box::new(PathVariationControl::new(1.0, p, &rp, "path")?),
                    Box::new(AreaVariationControl::new(1.0, p / 2.0, &rp, "area")?),
                    Box::new(LinearControl::new(0.5, times, "time")?),
                ];
                let set = ControlSet::new(controls)?;
                let cont = greedy_times_controls(&set, gamma, full)?.count() as f64;
                if cont >= bound_nstar_controls(&set, gamma, full)? {
                    violations.push(format!("control count bound, H={hurst} seed {seed}"));
                }
                let disc = greedy_times_discrete(&set, gamma, full)?.count() as f64;
                if disc >= bound_nhat(&set, gamma, full)? {
                    violations.push(format!("discrete count bound, H={hurst} seed {seed}"));
                }
                checked += 5;
            }
        }
    }
    Ok(outcome(
        violations.is_empty(),
        format!(
            "{checked} inequality instances on 300 lifts, {} violations{}",
            violations.len(),
            violations.first().map(|v| format!(" (first: {v})")).unwrap_or_default()
        ),
    ))
}

fn saturated(scale: f64, offset: bool) -> rstab::Result<SystemModel> {
    ModelConfig {
        drift: DriftSpec::Zero { dim: 2 },
        diffusion: DiffusionSpec::Tanh {
            scale,
            weights: vec![vec![1.0, 0.5], vec![-0.4, 0.8]],
            offset: offset.then(|| vec![vec![0.3, 0.0], vec![0.0, 0.2]]),
            center: None,
        },
        bounds: None,
        domain: None,
        lipschitz: None,
        growth: None,
        dissipativity: None,
    }
    .build()
}

fn flow_audits() -> rstab::Result<Outcome> {
    let params = FlowParams::new(2.5)?;
    let (z, z_bar) = ([0.4, -0.3], [0.41, -0.295]);
    let mut summary = Vec::new();
    let mut violations = 0;
    for (label, offset, diff) in [("solest", true, false), ("solest g(0)=0", false, false), ("difference", true, true)] {
        let model = saturated(0.02, offset)?;
        let (mut windows, mut checks, mut steps, mut seed) = (0, 0, 0, 0u64);
        while windows < 100 {
            let rp = sample_lift(&NoiseSpec::fbm(0.45, 2, 1.0, 512, derive_seed(77, seed)))?;
            seed += 1;
            for w in small_lambda_windows(&model, &rp, &params, 0.125)? {
                if windows == 100 {
                    break;
                }
                let report = if diff {
                    audit_solestdiff(&model, &rp, w, &z, &z_bar, &params)?
                } else {
                    audit_solest(&model, &rp, w, &z, &params)?
                };
                if !report.precondition || report.lambda > 0.125 {
                    violations += 1;
                }
                if !offset && !report.checks.iter().any(|c| c.name == "path_linear") {
                    violations += 1;
                }
                checks += report.checks.len();
                violations += report.checks.iter().filter(|c| !c.holds).count();
                windows += 1;
                steps += w.steps();
            }
        }
        summary.push(format!(
            "{label}: {windows} windows of {:.1} steps on average / {checks} inequalities",
            steps as f64 / windows as f64
        ));
    }
    Ok(outcome(
        violations == 0,
        format!("{}; {violations} violations", summary.join(", ")),
    ))
}

fn birkhoff_proxy() -> rstab::Result<Outcome> {
    let spec = NoiseSpec::fbm(0.45, 1, 1.0, 256, 11);
    let mode = CountMode::Norm(NormKind::Rough);
    let gamma = 0.5;
    let en = estimate_en(&spec, 2.5, gamma, &mode, 200)?;
    let check = long_path_check(&spec, 2.5, gamma, &mode, en.mean, 200, 0.1)?;
    Ok(outcome(
        check.holds,
        format!(
            "E N* = {:.3} +/- {:.3}; tau_200 / 200 = {:.5} vs 0.9 / E N* = {:.5}",
            en.mean, en.stderr, check.ratio, check.threshold
        ),
    ))
}

fn continuous_consistency() -> rstab::Result<Outcome> {
    let r = run_pitchfork(&PitchforkConfig::default())?;
    let ok = r.at_c.verdict == Verdict::Pass && r.decay_fraction >= 0.95 && r.at_zero.verdict == Verdict::Fail;
    Ok(outcome(
        ok,
        format!(
            "at +/-c: {:?} (lhs {:.4}, rhs {:.4}{}); decay fraction {:.3} (>= 0.95); at 0: {:?}",
            r.at_c.verdict,
            r.at_c.lhs.mean,
            r.at_c.rhs.mean,
            r.at_c.notes.iter().map(|n| format!("; {n}")).collect::<String>(),
            r.decay_fraction,
            r.at_zero.verdict
        ),
    ))
}

fn discrete_consistency() -> rstab::Result<Outcome> {
    let cfg = PitchforkConfig {
        alpha: -1.0,
        sigma: 1e-6,
        domain_radius: 1.0,
        n_ensemble: 200,
        ..PitchforkConfig::default()
    };
    let delta = 0.01;
    let model = pitchfork_model(cfg.alpha, cfg.sigma, cfg.domain_radius)?;
    let ensemble = pitchfork_burn_in_ensemble(&cfg, delta, 20.0, 5.0, 1e-6)?;
    let params = CriterionParams::default();
    let unit = NoiseSpec::fbm(cfg.hurst, 1, 1.0, (1.0 / delta) as usize, derive_seed(cfg.seed, 1));
    let report = criterion_discrete(&model, &params, &ensemble, &unit, 200)?;
    let cond = report.checks.iter().find(|c| c.name == "cond").map(|c| c.verdict);

    let c_p = sewing_constant(params.p)?;
    let radius = params.r / (16.0 * (1.0 + c_p));
    let lambda = report.inputs.lambda.unwrap_or(0.05);
    let consts = SchemeConstants::from_model(&model, params.p, c_p, lambda, params.r, params.samples)?;
    let (mut decaying, mut hyp_windows, mut hnew_bad) = (0, 0, 0);
    for (i, m) in ensemble.members.iter().enumerate() {
        let a = m.scheme_run().expect("burn-in members carry trajectories");
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let y = simulate(&model, &a.driver, &[m.initial[0] + 0.9 * sign * radius], None)?;
        let fit = fit_decay(&y.trajectory, &a.trajectory)?;
        decaying += (!fit.inconclusive && fit.mu > 0.0) as usize;
        for w in audit_hnew_run(&model, &y, &a, &consts)? {
            if w.hypothesis {
                hyp_windows += 1;
                hnew_bad += (!w.holds || w.decay.as_ref().is_some_and(|d| !d.holds)) as usize;
            }
        }
    }
    let fraction = decaying as f64 / ensemble.len() as f64;
    Ok(outcome(
        report.verdict == Verdict::Pass
            && cond == Some(Verdict::Pass)
            && fraction >= 0.95
            && hyp_windows > 0
            && hnew_bad == 0,
        format!(
            "criterion {:?} (lhs {:.4}, rhs {:.4}), cond {:?}; decay fraction {fraction:.3} (>= 0.95); contraction holds on {} of {hyp_windows} windows",
            report.verdict,
            report.lhs.mean,
            report.rhs.mean,
            cond,
            hyp_windows - hnew_bad
        ),
    ))
}

fn scheme_convergence_check() -> rstab::Result<Outcome> {
    let study = scheme_convergence(1.0, 0.5, 0.45, 0.5, 12, &[6, 7, 8, 9, 10], 20, 3)?;
    let errs: Vec<f64> = study.errors.iter().map(|e| e.mean).collect();
    let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
    let last = *errs.last().unwrap();
    Ok(outcome(
        decreasing && last <= 0.01,
        format!(
            "relative sup-errors {} ; strictly decreasing: {decreasing}; final {last:.2e} (<= 1e-2)",
            errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(" ")
        ),
    ))
}

fn fhn_pipeline() -> rstab::Result<Outcome> {
    let r = run_fhn(&FhnConfig::default())?;
    let smallest = r
        .levels
        .iter()
        .min_by(|a, b| a.c_g.total_cmp(&b.c_g))
        .expect("at least one level");
    let ok = r.fixed_point.residual <= 1e-12
        && r.ell_raw > 0.0
        && r.ell_transformed < 0.0
        && r.levels.len() == 6
        && smallest.report.verdict == Verdict::Pass
        && r.spearman >= 0.8;
    Ok(outcome(
        ok,
        format!(
            "fixed point ({:.6}, {:.6}) residual {:.1e}; ell raw {:.4} transformed {:.5}; C_g = {:.0e}: {:?}; Spearman {:.2}",
            r.fixed_point.v,
            r.fixed_point.w,
            r.fixed_point.residual,
            r.ell_raw,
            r.ell_transformed,
            smallest.c_g,
            smallest.report.verdict,
            r.spearman
        ),
    ))
}

fn main() {
    let checks: [(&str, Check); 11] = [
        ("pitchfork moment identity", pitchfork_moment),
        ("counterexample threshold", counterexample_threshold),
        ("Chen exactness", chen_exactness),
        ("p-variation oracle", pvar_oracle),
        ("stopping-time audits", stopping_audits),
        ("pure-flow audits", flow_audits),
        ("long-path stopping density", birkhoff_proxy),
        ("continuous criterion vs behaviour", continuous_consistency),
        ("discrete criterion vs behaviour", discrete_consistency),
        ("scheme convergence", scheme_convergence_check),
        ("FitzHugh-Nagumo pipeline", fhn_pipeline),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let o = check().unwrap_or_else(|e| outcome(false, format!("error: {e}")));
        failed += !o.pass as usize;
        println!(
            "[{}] {:>2} {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria pass", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
