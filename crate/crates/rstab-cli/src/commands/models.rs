//! Model selection and the `simulate` command.

use std::fs::File;
use std::io::BufWriter;

use serde::Serialize;
use serde_json::{json, Value};

use super::{ensure_dir, Ctx};
use crate::args::{ModelArgs, NoiseArgs, Preset, SimulateArgs};
use crate::config::{parse_vector, NoiseSettings};
use crate::error::{CliError, CliResult};
use crate::manifest::Recorder;
use rstab::experiments::{counterexample_model, fhn_fixed_point, fhn_model, pitchfork_model, FhnParams};
use rstab::fields::{cg_constant, ModelConfig, SystemModel};
use rstab::noise::{sample_lift, NoiseKind};
use rstab::rough::io::{write_lift_csv, write_path_csv};
use rstab::schemes::simulate;

/// A model ready to run, with the settings that produced it and a sensible start.
pub struct Chosen {
    pub model: SystemModel,
    pub description: Value,
    pub preset: Option<Preset>,
    pub params: Option<PresetParams>,
    pub y0: Vec<f64>,
    /// Driver kind the model is meant for.
    pub kind: NoiseKind,
}

/// Preset parameters after flag overrides.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PresetParams {
    pub alpha: f64,
    pub sigma: f64,
    pub mu: f64,
    pub cg: f64,
    pub domain_radius: f64,
}

impl PresetParams {
    pub fn new(preset: Preset, a: &ModelArgs) -> Self {
        let sigma = match preset {
            Preset::Counterexample => 2.0,
            _ => 0.05,
        };
        PresetParams {
            alpha: a.alpha.unwrap_or(1.0),
            sigma: a.sigma.unwrap_or(sigma),
            mu: a.mu.unwrap_or(-1.0),
            cg: a.cg.unwrap_or(1e-7),
            domain_radius: a.domain_radius.unwrap_or(2.0),
        }
    }
}

/// The file's `model` block when present, otherwise the preset (pitchfork by default).
pub fn choose(ctx: &Ctx, a: &ModelArgs) -> CliResult<Chosen> {
    if ctx.file.has("model") && a.preset.is_none() {
        let cfg: ModelConfig = ctx.file.required("model")?;
        let model = cfg.build()?;
        let y0 = vec![0.0; model.dim()];
        return Ok(Chosen {
            model,
            description: serde_json::to_value(&cfg)?,
            preset: None,
            params: None,
            y0,
            kind: NoiseKind::Fbm,
        });
    }
    let preset = a.preset.unwrap_or(Preset::Pitchfork);
    let pp = PresetParams::new(preset, a);
    let description = json!({"preset": format!("{preset:?}").to_lowercase(), "params": pp});
    let (model, y0, kind) = match preset {
        Preset::Pitchfork => (pitchfork_model(pp.alpha, pp.sigma, pp.domain_radius)?, vec![0.5], NoiseKind::Fbm),
        Preset::Counterexample => (counterexample_model(pp.mu, pp.sigma)?, vec![0.5, 0.0], NoiseKind::BmIto),
        Preset::Fhn => {
            let params = FhnParams::default();
            let unit = cg_constant(&fhn_model(&params, 1.0)?.bounds)?;
            let fp = fhn_fixed_point(&params)?;
            (fhn_model(&params, pp.cg / unit)?, fp.point().to_vec(), NoiseKind::Fbm)
        }
    };
    Ok(Chosen {
        model,
        description,
        preset: Some(preset),
        params: Some(pp),
        y0,
        kind,
    })
}

/// Noise settings with the dimension and kind filled in from the model unless given.
pub fn noise_for(ctx: &Ctx, a: &NoiseArgs, chosen: &Chosen) -> CliResult<NoiseSettings> {
    let mut s = NoiseSettings::resolve(&ctx.file, a)?;
    let from_file = |k: &str| ctx.file.get("noise").and_then(|n| n.get(k)).is_some();
    if a.dim.is_none() && !from_file("dim") {
        s.dim = chosen.model.noise_dim();
    }
    if a.kind.is_none() && !from_file("kind") {
        s.kind = chosen.kind;
    }
    if s.dim != chosen.model.noise_dim() {
        return Err(CliError::config(
            "noise.dim",
            format!("model is driven by {} components", chosen.model.noise_dim()),
        ));
    }
    Ok(s)
}

pub fn run_simulate(ctx: &Ctx, a: &SimulateArgs) -> CliResult<i32> {
    let chosen = choose(ctx, &a.model)?;
    let noise = noise_for(ctx, &a.noise, &chosen)?;
    let y0 = match &a.y0 {
        Some(s) => parse_vector(s, "y0")?,
        None => chosen.y0.clone(),
    };
    let rp = sample_lift(&noise.spec(ctx.seed))?;
    let run = simulate(&chosen.model, &rp, &y0, None)?;

    ensure_dir(&a.out)?;
    let mut rec = Recorder::new("simulate", ctx.seed);
    rec.settings(json!({"model": chosen.description, "noise": noise, "y0": y0}));
    write_path_csv(BufWriter::new(File::create(a.out.join("trajectory.csv"))?), &run.trajectory, "y")?;
    write_lift_csv(BufWriter::new(File::create(a.out.join("driver.csv"))?), &rp)?;
    rec.finish(&a.out)?;

    let last = run.trajectory.value(run.trajectory.len() - 1).to_vec();
    let summary = json!({"steps": run.len() - 1, "delta": run.delta, "final": last, "out": a.out});
    ctx.emit(&summary, || {
        let cells: Vec<String> = last.iter().map(|v| format!("{v:?}")).collect();
        format!("steps,delta,final\n{},{:?},{}\n", run.len() - 1, run.delta, cells.join(";"))
    })?;
    Ok(0)
}
