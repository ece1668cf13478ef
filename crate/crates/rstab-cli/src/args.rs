use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "rstab", version, about = "Rough-path stability toolkit", allow_negative_numbers = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct Global {
    /// Base seed [default: settings file, then RSTAB_SEED, then 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads [default: available parallelism]
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// TOML or JSON settings file; command-line flags take precedence over it
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample a driver and write it to DIR/path.csv
    #[command(allow_negative_numbers = true)]
    SampleNoise(SampleNoiseArgs),
    /// p-variation (or rough) norm of a path or lift file on a window
    #[command(allow_negative_numbers = true)]
    Pvar(PvarArgs),
    /// Greedy stopping times of a path file or a sampled driver
    #[command(allow_negative_numbers = true)]
    StoppingTimes(StoppingArgs),
    /// Monte Carlo estimate of E N*(γ, x, [0, 1])
    #[command(allow_negative_numbers = true)]
    EstimateEn(EstimateEnArgs),
    /// Run the scheme and write DIR/trajectory.csv
    #[command(allow_negative_numbers = true)]
    Simulate(SimulateArgs),
    /// Pathwise audits of lifts, stopping times or the flow estimates
    #[command(allow_negative_numbers = true)]
    Audit(AuditArgs),
    /// Evaluate a stability criterion; exit 0 pass, 1 fail, 2 inconclusive
    #[command(allow_negative_numbers = true)]
    Criterion(CriterionArgs),
    /// Run a preset study and write its artefacts to DIR
    #[command(allow_negative_numbers = true)]
    Experiment(ExperimentArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseKindArg {
    Fbm,
    BmIto,
    BmStrat,
}

/// Driver flags; each overrides the `noise` block of the settings file.
#[derive(Args, Debug, Default)]
pub struct NoiseArgs {
    /// [default: fbm]
    #[arg(long, value_enum)]
    pub kind: Option<NoiseKindArg>,
    /// [default: 0.45]
    #[arg(long)]
    pub hurst: Option<f64>,
    /// Number of driver components [default: 1]
    #[arg(long)]
    pub dim: Option<usize>,
    /// [default: 1]
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Grid steps over the horizon [default: 1024]
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SampleNoiseArgs {
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// Include the second level
    #[arg(long)]
    pub lift: bool,
    /// Write the binary container instead of CSV
    #[arg(long)]
    pub binary: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormArg {
    Path,
    Area,
    Rough,
}

#[derive(Args, Debug)]
pub struct PvarArgs {
    /// CSV or binary path/lift file
    #[arg(long)]
    pub input: PathBuf,
    /// [default: 2.5]
    #[arg(long)]
    pub p: Option<f64>,
    /// Window `s,t` in time units [default: whole path]
    #[arg(long)]
    pub window: Option<String>,
    /// [default: rough for lifts, path otherwise]
    #[arg(long, value_enum)]
    pub norm: Option<NormArg>,
}

#[derive(Args, Debug)]
pub struct StoppingArgs {
    /// Path or lift file; a driver is sampled when absent
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// [default: 2.5]
    #[arg(long)]
    pub p: Option<f64>,
    /// [default: 1]
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub window: Option<String>,
    /// Track the path p-variation only
    #[arg(long)]
    pub path_only: bool,
}

#[derive(Args, Debug)]
pub struct EstimateEnArgs {
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// [default: 2.5]
    #[arg(long)]
    pub p: Option<f64>,
    /// [default: 1]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// [default: 200]
    #[arg(long)]
    pub n_paths: Option<usize>,
    #[arg(long)]
    pub path_only: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Pitchfork,
    Counterexample,
    Fhn,
}

/// Model flags; a settings file with a `model` block replaces the preset.
#[derive(Args, Debug, Default)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Pitchfork linear rate [default: 1]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Noise intensity of the pitchfork [default: 0.05] and counterexample [default: 2]
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Counterexample drift rate [default: -1]
    #[arg(long)]
    pub mu: Option<f64>,
    /// FitzHugh–Nagumo diffusion constant C_g [default: 1e-7]
    #[arg(long)]
    pub cg: Option<f64>,
    /// Radius of the pitchfork state ball that the Lipschitz and diffusion bounds range over [default: 2]
    #[arg(long)]
    pub domain_radius: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// Initial state, comma separated
    #[arg(long)]
    pub y0: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum AuditProp {
    /// Chen's relation on random triples
    Chen,
    /// Crossing property, interval-count bound and count subadditivity of greedy times
    Stopping,
    /// Pure-flow path, remainder and Jacobian bounds on small-λ windows
    Solest,
    /// Pure-flow dependence on the initial value
    Solestdiff,
    /// Contraction of the scheme between two nearby runs
    Hnew,
}

#[derive(Args, Debug)]
pub struct AuditArgs {
    #[arg(long, value_enum)]
    pub prop: AuditProp,
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// Sampled drivers [default: 100]
    #[arg(long)]
    pub paths: Option<usize>,
    /// Random triples per driver for the Chen audit [default: 1000]
    #[arg(long)]
    pub triples: Option<usize>,
    /// [default: 2.5]
    #[arg(long)]
    pub p: Option<f64>,
    /// Threshold of the stopping audit [default: 0.5]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Diffusion scale of the built-in audit models [default: 0.05]
    #[arg(long)]
    pub sigma: Option<f64>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Theorem {
    Continuous,
    Discrete,
    DiscreteDissipative,
    Trivial,
}

#[derive(Args, Debug)]
pub struct CriterionArgs {
    #[arg(long, value_enum)]
    pub theorem: Theorem,
    #[command(flatten)]
    pub model: ModelArgs,
    /// [default: 0.45]
    #[arg(long)]
    pub hurst: Option<f64>,
    /// [default: 2.5]
    #[arg(long)]
    pub p: Option<f64>,
    /// Sewing constant [default: (1 − 2^{1−3/p})^{−1}]
    #[arg(long)]
    pub c_p: Option<f64>,
    /// Fix λ instead of scanning
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Monte Carlo paths for E N* [default: 200]
    #[arg(long)]
    pub n_paths: Option<usize>,
    /// Stationary ensemble size [default: 200]
    #[arg(long)]
    pub n_ensemble: Option<usize>,
    /// Scheme step for the discrete theorems [default: 0.01]
    #[arg(long)]
    pub delta: Option<f64>,
    /// Constant of the dissipative discrete criterion [default: 1]
    #[arg(long)]
    pub gamma_bar: Option<f64>,
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    #[arg(long, value_enum)]
    pub preset: Preset,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    /// Monte Carlo paths of the preset
    #[arg(long)]
    pub n_paths: Option<usize>,
}
