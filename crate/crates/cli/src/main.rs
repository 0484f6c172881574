//! Command-line frontend for union-of-subspaces detection experiments.
//!
//! Exit codes: 0 success, 2 configuration/usage error, 3 numeric failure
//! during computation.

mod commands;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CommandContext, DetectBatchArgs};
use config::RunConfig;
use uniondet_core::error::Error;
use uniondet_core::noise::Regime;

#[derive(Parser)]
#[command(
    name = "uniondet",
    about = "GLRT signal and active-subspace detection under a union-of-subspaces model",
    version
)]
struct Cli {
    /// TOML experiment configuration (required by the experiment commands).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the experiment seed (flag beats the UOS_SEED variable,
    /// which beats the config value).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the Monte-Carlo harness (0 = all cores).
    /// Results are identical for any worker count.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Overrides the config's output directory.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Emit SVG plots next to the CSV outputs.
    #[arg(long, global = true)]
    plot: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate the decision threshold to one or more false-alarm targets.
    Calibrate {
        #[arg(long)]
        target_pfa: Option<f64>,
    },
    /// ROC sweep with empirical rates and all probability bounds.
    Roc,
    /// Sweep one subspace through a grid of principal angles.
    AngleSweep,
    /// Per-subspace detection rates for covariance-eigenvector-aligned
    /// subspaces.
    NoiseGeometry,
    /// Detection-versus-classification gap across SNR levels.
    Gap,
    /// ROC sweeps of the unknown-covariance detector at several training
    /// budgets.
    N0Sweep {
        /// Comma-separated training budgets (defaults to the config list).
        #[arg(long, value_delimiter = ',')]
        n0: Option<Vec<usize>>,
    },
    /// Learn one orthonormal basis per class from labeled samples (SVD).
    LearnBases {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value = "bases")]
        output_dir: PathBuf,
    },
    /// Classify a batch of observations against learned bases.
    DetectBatch {
        #[arg(long)]
        bases_dir: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// known | unknown-cov | unknown-stats
        #[arg(long)]
        regime: String,
        #[arg(long)]
        sigma2: Option<f64>,
        /// Covariance matrix CSV (known regime).
        #[arg(long)]
        covariance: Option<PathBuf>,
        /// Training-sample matrix CSV, columns are samples (unknown regimes).
        #[arg(long)]
        training: Option<PathBuf>,
        #[arg(long)]
        gamma_bar: f64,
        #[arg(long, default_value = "decisions.csv")]
        output: PathBuf,
    },
}

/// Configuration and input mistakes exit with 2; numeric failures inside a
/// structurally valid computation exit with 3.
fn exit_code_for(error: &Error) -> u8 {
    match error {
        Error::InvalidConfig { .. }
        | Error::Io { .. }
        | Error::DimensionMismatch { .. }
        | Error::TooFewSamples { .. }
        | Error::TooFewTrials { .. }
        | Error::RegimeMismatch { .. }
        | Error::InsufficientAmbientDim { .. }
        | Error::DomainError { .. } => 2,
        Error::RankDeficient { .. }
        | Error::NotSymmetric { .. }
        | Error::NotPositiveDefinite { .. }
        | Error::NearSingular { .. }
        | Error::NotOrthogonal { .. }
        | Error::DivisionByZero
        | Error::ConvergenceError { .. }
        | Error::DegenerateJoint { .. } => 3,
    }
}

fn parse_regime(name: &str) -> Result<Regime, Error> {
    match name {
        "known" => Ok(Regime::Known),
        "unknown-cov" => Ok(Regime::UnknownCovariance),
        "unknown-stats" => Ok(Regime::UnknownStatistics),
        other => Err(Error::InvalidConfig {
            what: format!("unknown regime '{other}' (known | unknown-cov | unknown-stats)"),
        }),
    }
}

fn seed_override(flag: Option<u64>) -> Result<Option<u64>, Error> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("UOS_SEED") {
        Ok(text) => text
            .parse::<u64>()
            .map(Some)
            .map_err(|_| Error::InvalidConfig { what: format!("UOS_SEED='{text}' is not a u64") }),
        Err(_) => Ok(None),
    }
}

fn load_context(cli: &Cli) -> Result<CommandContext, Error> {
    let path = cli.config.as_ref().ok_or_else(|| Error::InvalidConfig {
        what: "this command needs --config <file>".into(),
    })?;
    let (config, base_dir) = RunConfig::load(path)?;
    let output_dir = cli
        .output_dir
        .clone()
        .unwrap_or_else(|| base_dir.join(&config.output_dir));
    let seed = seed_override(cli.seed)?;
    Ok(CommandContext {
        plot: cli.plot || config.plot,
        config,
        base_dir,
        output_dir,
        seed_override: seed,
    })
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Calibrate { target_pfa } => {
            let ctx = load_context(cli)?;
            commands::cmd_calibrate(&ctx, *target_pfa)
        }
        Command::Roc => commands::cmd_roc(&load_context(cli)?),
        Command::AngleSweep => commands::cmd_angle_sweep(&load_context(cli)?),
        Command::NoiseGeometry => commands::cmd_noise_geometry(&load_context(cli)?),
        Command::Gap => commands::cmd_gap(&load_context(cli)?),
        Command::N0Sweep { n0 } => {
            let ctx = load_context(cli)?;
            commands::cmd_n0_sweep(&ctx, n0.clone())
        }
        Command::LearnBases { data, labels, dim, output_dir } => {
            commands::cmd_learn_bases(data, labels, *dim, output_dir)
        }
        Command::DetectBatch {
            bases_dir,
            data,
            regime,
            sigma2,
            covariance,
            training,
            gamma_bar,
            output,
        } => {
            let args = DetectBatchArgs {
                bases_dir: bases_dir.clone(),
                data: data.clone(),
                regime: parse_regime(regime)?,
                sigma2: *sigma2,
                covariance: covariance.clone(),
                training: training.clone(),
                gamma_bar: *gamma_bar,
                output: output.clone(),
            };
            commands::cmd_detect_batch(&args)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.workers > 0 {
        if let Err(e) =
            rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global()
        {
            eprintln!("error: cannot configure {} workers: {e}", cli.workers);
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
