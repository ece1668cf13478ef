//! Commands on sampled or stored drivers: sampling, norms, stopping times, counts and audits.

use std::fs::File;
use std::io::{BufWriter, Read};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::models::{noise_for, Chosen};
use super::{ensure_dir, Ctx};
use crate::args::{AuditArgs, AuditProp, EstimateEnArgs, NormArg, PvarArgs, SampleNoiseArgs, StoppingArgs};
use crate::config::{parse_pair, NoiseSettings};
use crate::error::{CliError, CliResult};
use crate::manifest::Recorder;
use rstab::fields::{sewing_constant, Ball, DiffusionSpec, DriftSpec, ModelConfig, SystemModel};
use rstab::flow::{audit_solest, audit_solestdiff, small_lambda_windows, AuditReport, FlowParams};
use rstab::mc::derive_seed;
use rstab::noise::{sample_lift, sample_path, NoiseKind};
use rstab::rough::io::{read_binary, read_csv, write_lift_binary, write_lift_csv, write_path_binary, write_path_csv};
use rstab::rough::io::{PathData, BINARY_MAGIC};
use rstab::rough::{lift_piecewise_linear, pvar_norm, qvar_area_norm, rough_norm, NormKind, RoughPathGrid, Window};
use rstab::schemes::{audit_hnew_run, simulate, SchemeConstants};
use rstab::stopping::{audit_crossings, bound_nstar_kind, check_nsum_kind, estimate_en, greedy_times_kind, CountMode};

pub fn run_sample_noise(ctx: &Ctx, a: &SampleNoiseArgs) -> CliResult<i32> {
    let noise = NoiseSettings::resolve(&ctx.file, &a.noise)?;
    let spec = noise.spec(ctx.seed);
    ensure_dir(&a.out)?;
    let mut rec = Recorder::new("sample-noise", ctx.seed);
    rec.settings(json!({"noise": noise, "lift": a.lift, "binary": a.binary}));
    let name = if a.binary { "path.bin" } else { "path.csv" };
    let out = BufWriter::new(File::create(a.out.join(name))?);
    let n = if a.lift {
        let rp = sample_lift(&spec)?;
        if a.binary {
            write_lift_binary(out, &rp)?
        } else {
            write_lift_csv(out, &rp)?
        }
        rp.len()
    } else {
        let x = sample_path(&spec)?;
        if a.binary {
            write_path_binary(out, &x)?
        } else {
            write_path_csv(out, &x, "x")?
        }
        x.len()
    };
    rec.finish(&a.out)?;
    let file = a.out.join(name);
    ctx.emit(&json!({"file": file, "instants": n, "dim": noise.dim}), || {
        format!("file,instants,dim\n{},{n},{}\n", file.display(), noise.dim)
    })?;
    Ok(0)
}

/// Reads a path or lift file, telling the binary container apart by its magic bytes.
pub fn read_input(path: &Path) -> CliResult<PathData> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    Ok(if bytes.starts_with(BINARY_MAGIC) {
        read_binary(bytes.as_slice())?
    } else {
        read_csv(bytes.as_slice())?
    })
}

/// The stored lift, or the piecewise-linear lift of a plain path.
fn as_lift(data: PathData) -> RoughPathGrid {
    match data {
        PathData::Lift(rp) => rp,
        PathData::Path(x) => lift_piecewise_linear(&x),
    }
}

fn window_of(rp: &RoughPathGrid, flag: &Option<String>) -> CliResult<Window> {
    match flag {
        Some(s) => {
            let (s, t) = parse_pair(s, "window")?;
            Ok(rp.path().window(s, t)?)
        }
        None => Ok(rp.path().full_window()),
    }
}

pub fn run_pvar(ctx: &Ctx, a: &PvarArgs) -> CliResult<i32> {
    let data = read_input(&a.input)?;
    let norm = a.norm.unwrap_or(match data {
        PathData::Lift(_) => NormArg::Rough,
        PathData::Path(_) => NormArg::Path,
    });
    let p = a.p.unwrap_or(2.5);
    let rp = as_lift(data);
    let w = window_of(&rp, &a.window)?;
    let (name, value) = match norm {
        NormArg::Path => ("path", pvar_norm(rp.path(), p, w)?),
        NormArg::Area => ("area", qvar_area_norm(&rp, p / 2.0, w)?),
        NormArg::Rough => ("rough", rough_norm(&rp, p, w)?),
    };
    let (s, t) = (rp.path().time(w.start), rp.path().time(w.end));
    ctx.emit(&json!({"norm": name, "p": p, "window": [s, t], "value": value}), || {
        format!("norm,p,s,t,value\n{name},{p:?},{s:?},{t:?},{value:?}\n")
    })?;
    Ok(0)
}

#[derive(Serialize)]
struct StoppingOutput {
    gamma: f64,
    times: Vec<f64>,
    count: usize,
    bound: f64,
    exhausted: bool,
}

fn kind_of(path_only: bool) -> NormKind {
    if path_only {
        NormKind::PathOnly
    } else {
        NormKind::Rough
    }
}

pub fn run_stopping_times(ctx: &Ctx, a: &StoppingArgs) -> CliResult<i32> {
    let rp = match &a.input {
        Some(path) => as_lift(read_input(path)?),
        None => sample_lift(&NoiseSettings::resolve(&ctx.file, &a.noise)?.spec(ctx.seed))?,
    };
    let (p, gamma) = (a.p.unwrap_or(2.5), a.gamma.unwrap_or(1.0));
    let kind = kind_of(a.path_only);
    let w = window_of(&rp, &a.window)?;
    let seq = greedy_times_kind(&rp, p, gamma, w, kind)?;
    let out = StoppingOutput {
        gamma,
        times: seq.instants(rp.path().times()),
        count: seq.count(),
        bound: bound_nstar_kind(&rp, p, gamma, w, kind)?,
        exhausted: seq.exhausted,
    };
    ctx.emit(&out, || {
        let mut s = String::from("i,t\n");
        for (i, t) in out.times.iter().enumerate() {
            s += &format!("{i},{t:?}\n");
        }
        s
    })?;
    Ok(0)
}

pub fn run_estimate_en(ctx: &Ctx, a: &EstimateEnArgs) -> CliResult<i32> {
    let noise = NoiseSettings::resolve(&ctx.file, &a.noise)?;
    let (p, gamma, n) = (a.p.unwrap_or(2.5), a.gamma.unwrap_or(1.0), a.n_paths.unwrap_or(200));
    let est = estimate_en(&noise.spec(ctx.seed), p, gamma, &CountMode::Norm(kind_of(a.path_only)), n)?;
    let out = json!({"mean": est.mean, "stderr": est.stderr, "n_paths": est.n});
    ctx.emit(&out, || format!("mean,stderr,n_paths\n{:?},{:?},{}\n", est.mean, est.stderr, est.n))?;
    Ok(0)
}

/// Normalized Chen defects are pure rounding; anything above this is a real inconsistency.
const CHEN_TOL: f64 = 1e-10;

fn solest_model(sigma: f64) -> CliResult<SystemModel> {
    Ok(ModelConfig {
        drift: DriftSpec::Zero { dim: 2 },
        diffusion: DiffusionSpec::Tanh {
            scale: sigma,
            weights: vec![vec![1.0, 0.5], vec![-0.4, 0.8]],
            offset: Some(vec![vec![0.3, 0.0], vec![0.0, 0.2]]),
            center: None,
        },
        bounds: None,
        domain: None,
        lipschitz: None,
        growth: None,
        dissipativity: None,
    }
    .build()?)
}

fn hnew_model(sigma: f64) -> CliResult<SystemModel> {
    Ok(ModelConfig {
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
    .build()?)
}

fn flow_rows(seed: u64, reports: Vec<AuditReport>) -> Vec<Value> {
    reports
        .into_iter()
        .map(|r| {
            let passed = r.passed();
            let margin = r.checks.iter().map(|c| c.margin()).fold(f64::INFINITY, f64::min);
            let margins: Vec<Value> = r
                .checks
                .iter()
                .map(|c| json!({"name": c.name, "lhs": c.lhs, "rhs": c.rhs, "margin": c.margin(), "holds": c.holds}))
                .collect();
            json!({"seed": seed, "window": r.window, "lambda": r.lambda, "precondition": r.precondition,
                   "checks": margins, "margin": margin.is_finite().then_some(margin), "holds": passed})
        })
        .collect()
}

pub fn run_audit(ctx: &Ctx, a: &AuditArgs) -> CliResult<i32> {
    let (p, gamma) = (a.p.unwrap_or(2.5), a.gamma.unwrap_or(0.5));
    let (n, triples, sigma) = (a.paths.unwrap_or(100), a.triples.unwrap_or(1000), a.sigma.unwrap_or(0.05));
    if n == 0 {
        return Err(CliError::Usage("--paths must be positive".into()));
    }
    let model = match a.prop {
        AuditProp::Solest | AuditProp::Solestdiff => Some(solest_model(sigma)?),
        AuditProp::Hnew => Some(hnew_model(sigma)?),
        _ => None,
    };
    let noise = match &model {
        Some(m) => {
            let chosen = Chosen {
                model: m.clone(),
                description: Value::Null,
                preset: None,
                params: None,
                y0: vec![],
                kind: NoiseKind::Fbm,
            };
            noise_for(ctx, &a.noise, &chosen)?
        }
        None => NoiseSettings::resolve(&ctx.file, &a.noise)?,
    };
    let c_p = sewing_constant(p)?;
    let rows: Vec<Vec<Value>> = (0..n as u64)
        .into_par_iter()
        .map(|i| -> CliResult<Vec<Value>> {
            let seed = derive_seed(ctx.seed, i);
            let rp = sample_lift(&noise.spec(seed))?;
            let full = rp.path().full_window();
            Ok(match a.prop {
                AuditProp::Chen => {
                    let defect = rp.chen_audit(triples, seed);
                    vec![json!({"seed": seed, "max_defect": defect, "holds": defect <= CHEN_TOL})]
                }
                AuditProp::Stopping => {
                    let mut out = Vec::new();
                    for kind in [NormKind::Rough, NormKind::PathOnly] {
                        let seq = greedy_times_kind(&rp, p, gamma, full, kind)?;
                        let crossing = audit_crossings(&rp, p, kind, &seq)?;
                        let bound = bound_nstar_kind(&rp, p, gamma, full, kind)?;
                        let last = full.end;
                        let cuts = [0, last / 4, last / 2, 3 * last / 4, last];
                        let nsum = check_nsum_kind(&rp, p, gamma, &cuts, kind)?;
                        let holds = crossing.is_none() && (seq.count() as f64) <= bound && nsum.holds;
                        out.push(json!({"seed": seed, "kind": kind, "count": seq.count(), "bound": bound,
                            "margin": bound - seq.count() as f64,
                            "crossing_violation": crossing, "nsum": nsum, "holds": holds}));
                    }
                    out
                }
                AuditProp::Solest | AuditProp::Solestdiff => {
                    let m = model.as_ref().expect("flow audits carry a model");
                    let params = FlowParams { p, c_p };
                    let z = [0.3, -0.2];
                    let z_bar = [0.301, -0.2005];
                    let reports = small_lambda_windows(m, &rp, &params, 0.125)?
                        .into_iter()
                        .map(|w| match a.prop {
                            AuditProp::Solest => audit_solest(m, &rp, w, &z, &params),
                            _ => audit_solestdiff(m, &rp, w, &z, &z_bar, &params),
                        })
                        .collect::<rstab::Result<Vec<_>>>()?;
                    flow_rows(seed, reports)
                }
                AuditProp::Hnew => {
                    let m = model.as_ref().expect("hnew audit carries a model");
                    let c = SchemeConstants::from_model(m, p, c_p, 0.3, 0.5, 64)?;
                    let reference = simulate(m, &rp, &[0.0], None)?;
                    let y = simulate(m, &rp, &[0.02], None)?;
                    audit_hnew_run(m, &y, &reference, &c)?
                        .into_iter()
                        .map(|w| {
                            let holds = w.holds && w.decay.as_ref().map_or(true, |d| d.holds);
                            json!({"seed": seed, "window": w.window, "hypothesis": w.hypothesis, "lhs": w.lhs,
                                   "rhs": w.rhs, "margin": w.rhs - w.lhs, "decay": w.decay, "holds": holds})
                        })
                        .collect()
                }
            })
        })
        .collect::<CliResult<_>>()?;
    let rows: Vec<Value> = rows.into_iter().flatten().collect();
    let violations = rows.iter().filter(|r| r["holds"] == json!(false)).count();
    ctx.emit(&rows, || {
        let mut s = String::from("seed,margin,holds\n");
        for r in &rows {
            let margin = r.get("margin").or(r.get("max_defect")).cloned().unwrap_or(Value::Null);
            s += &format!("{},{},{}\n", r["seed"], margin, r["holds"]);
        }
        s
    })?;
    if violations > 0 {
        eprintln!("{violations} of {} audited items violate their inequality", rows.len());
        return Ok(1);
    }
    Ok(0)
}
