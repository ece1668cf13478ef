//! The `experiment` command: run a preset study and write its tables.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Value};

use super::{ensure_dir, write_json, Ctx};
use crate::args::{ExperimentArgs, Preset};
use crate::config::Overrides;
use crate::error::CliResult;
use crate::manifest::Recorder;
use rstab::experiments::{
    run_counterexample, run_fhn, run_pitchfork, CounterexampleConfig, FhnConfig, PitchforkConfig,
};
use rstab::stability::{DecayFit, StabilityReport};

fn log_table(out: &mut String, rows: &[(f64, f64)]) {
    for (t, v) in rows {
        let _ = writeln!(out, "{t:?} {v:?}");
    }
}

fn fit_cells(d: Option<&DecayFit>) -> String {
    match d {
        Some(d) => format!("{:?},{:?},{:?},{}", d.mu, d.lo, d.hi, d.inconclusive),
        None => ",,,".to_string(),
    }
}

fn brief(r: &StabilityReport) -> Value {
    json!({"criterion": r.criterion, "verdict": r.verdict, "lhs": r.lhs, "rhs": r.rhs, "notes": r.notes})
}

fn write(dir: &Path, name: &str, text: &str) -> CliResult<()> {
    std::fs::write(dir.join(name), text)?;
    Ok(())
}

pub fn run_experiment(ctx: &Ctx, a: &ExperimentArgs) -> CliResult<i32> {
    ensure_dir(&a.out)?;
    let mut rec = Recorder::new("experiment", ctx.seed);
    let dir = a.out.as_path();
    let (summary, paths, logd) = match a.preset {
        Preset::Pitchfork => {
            let o = Overrides::default()
                .set("alpha", a.alpha)
                .set("sigma", a.sigma)
                .set("n_perturbed", a.n_paths)
                .set("seed", Some(ctx.seed));
            let cfg: PitchforkConfig = ctx.file.resolve("pitchfork", o.value())?;
            rec.settings(&cfg);
            write_json(&dir.join("config.json"), &cfg)?;
            let r = run_pitchfork(&cfg)?;
            let summary = json!({
                "c_squared": r.c_squared, "tail_bound": r.tail_bound,
                "at_c": brief(&r.at_c), "at_zero": brief(&r.at_zero), "decay_fraction": r.decay_fraction,
            });
            let mut paths = String::from("seed,radius,start,mu,lo,hi,inconclusive\n");
            for p in &r.perturbed {
                let _ = writeln!(paths, "{},{:?},{:?},{}", p.seed, p.radius, p.start, fit_cells(p.decay.as_ref()));
            }
            let mut logd = String::from("# t mean_log_distance\n");
            log_table(&mut logd, &r.log_distance);
            (summary, paths, logd)
        }
        Preset::Counterexample => {
            let o = Overrides::default()
                .set("mu", a.mu)
                .set("sigma", a.sigma)
                .set("n_paths", a.n_paths)
                .set("seed", Some(ctx.seed));
            let cfg: CounterexampleConfig = ctx.file.resolve("counterexample", o.value())?;
            rec.settings(&cfg);
            write_json(&dir.join("config.json"), &cfg)?;
            let r = run_counterexample(&cfg)?;
            let summary = json!({
                "logistic_at_1": r.logistic_at_1, "squared_rate": r.squared_rate, "threshold": r.threshold,
                "bracket": r.bracket, "sweep": r.sweep,
            });
            let mut paths = String::from(
                "seed,squared_norm_at_1,relative_error_at_1,sup_relative_error,final_squared_norm,mu,lo,hi,inconclusive\n",
            );
            for p in &r.paths {
                let _ = writeln!(
                    paths,
                    "{},{:?},{:?},{:?},{:?},{}",
                    p.seed,
                    p.squared_norm_at_1,
                    p.relative_error_at_1,
                    p.sup_relative_error,
                    p.final_squared_norm,
                    fit_cells(Some(&p.decay))
                );
            }
            let mut logd = String::from("# t mean_log_norm\n");
            log_table(&mut logd, &r.log_distance);
            (summary, paths, logd)
        }
        Preset::Fhn => {
            let o = Overrides::default().set("n_paths", a.n_paths).set("seed", Some(ctx.seed));
            let cfg: FhnConfig = ctx.file.resolve("fhn", o.value())?;
            rec.settings(&cfg);
            write_json(&dir.join("config.json"), &cfg)?;
            let r = run_fhn(&cfg)?;
            let levels: Vec<Value> = r
                .levels
                .iter()
                .map(|l| json!({"c_g": l.c_g, "report": brief(&l.report), "distance": l.distance,
                                "decay_fraction": l.decay_fraction}))
                .collect();
            let summary = json!({
                "fixed_point": r.fixed_point, "ell_raw": r.ell_raw, "ell_transformed": r.ell_transformed,
                "lyapunov_residual": r.lyapunov_residual, "noise_free_distance": r.noise_free_distance,
                "spearman": r.spearman, "boundary": r.boundary, "levels": levels,
            });
            let mut paths = String::from("c_g,verdict,lhs,rhs,distance,mean_distance,decay_fraction\n");
            for l in &r.levels {
                let _ = writeln!(
                    paths,
                    "{:?},{},{:?},{:?},{:?},{:?},{:?}",
                    l.c_g,
                    json!(l.report.verdict).as_str().unwrap_or(""),
                    l.report.lhs.mean,
                    l.report.rhs.mean,
                    l.distance,
                    l.mean_distance,
                    l.decay_fraction
                );
            }
            // one gnuplot data block per level, selected with `index`
            let mut logd = String::new();
            for l in &r.levels {
                let _ = writeln!(logd, "# c_g = {:?}\n# t mean_log_distance", l.c_g);
                log_table(&mut logd, &l.log_distance);
                logd.push_str("\n\n");
            }
            (summary, paths, logd)
        }
    };
    write_json(&dir.join("summary.json"), &summary)?;
    write(dir, "paths.csv", &paths)?;
    write(dir, "log_distance.dat", &logd)?;
    rec.finish(dir)?;
    ctx.emit(&summary, || paths.clone())?;
    Ok(0)
}
