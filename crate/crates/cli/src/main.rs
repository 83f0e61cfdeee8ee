use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

mod commands;
mod io;

/// Invalid input files or inputs inconsistent with each other (exit code 2).
#[derive(Debug)]
pub struct DataError(pub String);

impl std::fmt::Display for DataError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DataError {}

/// Invalid combination of flags (exit code 1).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "tslpm", version, about = "Poisson latent-position network autoregression")]
pub struct Cli {
    /// Worker threads for chains, trajectories and replications.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Draw ground-truth parameters and simulate a count panel.
    Simulate(SimulateArgs),
    /// Fit a model by MAP optimisation or HMC sampling.
    #[command(subcommand)]
    Fit(FitCommand),
    /// Procrustes-align the latent positions of HMC chains.
    Align(AlignArgs),
    /// Forecast from a MAP fit or posterior chains.
    Forecast(ForecastArgs),
    /// Train/test RMSE study of one-step and multi-step forecasts.
    Evaluate(EvaluateArgs),
    /// Deviance information criterion of posterior chains.
    Dic(DicArgs),
    /// One-step posterior predictive coverage per node.
    Ppc(PpcArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub nodes: usize,
    #[arg(long)]
    pub timesteps: usize,
    #[arg(long)]
    pub seed: u64,
    /// Panel CSV output.
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth parameter JSON output.
    #[arg(long)]
    pub params_out: PathBuf,
    /// Variance of the initial latent coordinates.
    #[arg(long, default_value_t = 0.01)]
    pub sigma0: f64,
    #[arg(long, default_value_t = 1.05)]
    pub expand_factor: f64,
    /// Model configuration JSON (default: shared α, per-node β).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DataArgs {
    /// Panel CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Model configuration JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Covariate CSV, one row per node.
    #[arg(long)]
    pub covariates: Option<PathBuf>,
    /// Standardise covariate columns to mean 0, sd 1.
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Subcommand, Debug)]
pub enum FitCommand {
    Map(MapArgs),
    Hmc(HmcArgs),
}

#[derive(Args, Debug)]
pub struct MapArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub starts: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct HmcArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 5_000)]
    pub burnin: usize,
    #[arg(long, default_value_t = 5)]
    pub thin: usize,
    #[arg(long, default_value_t = 4)]
    pub chains: usize,
    #[arg(long, default_value_t = 0.8)]
    pub target_accept: f64,
    #[arg(long, default_value_t = 20)]
    pub leapfrog: usize,
    /// Start every chain at this MAP fit.
    #[arg(long)]
    pub init_map: Option<PathBuf>,
    /// Directory for chain_<k>.json and diagnostics.json.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("reference").required(true).args(["reference_map", "reference_sample", "reference_truth"])))]
pub struct AlignArgs {
    /// Chain JSON files.
    #[arg(required = true)]
    pub chains: Vec<PathBuf>,
    /// Align to the latent positions of a MAP fit.
    #[arg(long)]
    pub reference_map: Option<PathBuf>,
    /// Align to this sample of the first chain.
    #[arg(long)]
    pub reference_sample: Option<usize>,
    /// Align to the positions in a ground-truth parameter file.
    #[arg(long)]
    pub reference_truth: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeArg {
    OneStep,
    MultiStep,
    PlugIn,
}

#[derive(Args, Debug)]
#[group(id = "source", required = true, multiple = false, args = ["fit", "chain"])]
pub struct SourceArgs {
    /// MAP fit JSON.
    #[arg(long)]
    pub fit: Option<PathBuf>,
    /// Chain JSON; repeat to pool chains.
    #[arg(long)]
    pub chain: Vec<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::MultiStep)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 5)]
    pub horizon: usize,
    /// Time index of the first forecast. Defaults to the end of the panel
    /// (multi-step) or the last `horizon` observed steps (one-step).
    #[arg(long)]
    pub origin: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    pub draws: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long)]
    pub seed: u64,
    /// ForecastResult JSON output.
    #[arg(long)]
    pub out: PathBuf,
    /// Tidy CSV output (node,h,point,lower,upper).
    #[arg(long)]
    pub csv: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 0.8)]
    pub split: f64,
    #[arg(long, default_value_t = 5)]
    pub horizon: usize,
    /// Simulated trajectories per forecast origin.
    #[arg(long, default_value_t = 200)]
    pub draws: usize,
    #[arg(long)]
    pub seed: u64,
    /// Per-h RMSE CSV output.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the training-segment MAP fit.
    #[arg(long)]
    pub fit_out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlugInArg {
    MeanParams,
    MeanInteraction,
}

#[derive(Args, Debug)]
pub struct DicArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Chain JSON files, pooled.
    #[arg(long, required = true)]
    pub chain: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = PlugInArg::MeanParams)]
    pub plug_in: PlugInArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PpcArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Replicates per parameter draw and time point.
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long)]
    pub seed: u64,
    /// Per-node coverage CSV output.
    #[arg(long)]
    pub out: PathBuf,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match err.downcast_ref::<tslpm::Error>() {
        Some(tslpm::Error::Numeric(_)) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            eprintln!("error: cannot configure {jobs} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
