mod args;
mod commands;
mod config;
mod error;
mod manifest;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use commands::Ctx;
use config::SettingsFile;
use error::{CliError, CliResult};

/// `--seed`, then the settings file's `seed`, then `RSTAB_SEED`, then 0.
fn resolve_seed(flag: Option<u64>, file: &SettingsFile) -> CliResult<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Some(v) = file.get("seed") {
        return v.as_u64().ok_or_else(|| CliError::config("seed", "must be a non-negative integer"));
    }
    match std::env::var("RSTAB_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| CliError::config("RSTAB_SEED", format!("`{s}` is not a non-negative integer"))),
        Err(_) => Ok(0),
    }
}

fn run(cli: Cli) -> CliResult<i32> {
    if let Some(jobs) = cli.global.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let file = SettingsFile::load(cli.global.config.as_deref())?;
    let ctx = Ctx {
        seed: resolve_seed(cli.global.seed, &file)?,
        file,
        format: cli.global.format,
    };
    match &cli.command {
        Command::SampleNoise(a) => commands::paths::run_sample_noise(&ctx, a),
        Command::Pvar(a) => commands::paths::run_pvar(&ctx, a),
        Command::StoppingTimes(a) => commands::paths::run_stopping_times(&ctx, a),
        Command::EstimateEn(a) => commands::paths::run_estimate_en(&ctx, a),
        Command::Simulate(a) => commands::models::run_simulate(&ctx, a),
        Command::Audit(a) => commands::paths::run_audit(&ctx, a),
        Command::Criterion(a) => commands::criterion::run_criterion(&ctx, a),
        Command::Experiment(a) => commands::experiment::run_experiment(&ctx, a),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("rstab: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
