//! `ilens`: extract AND-OR interactions from value tables and run the
//! order-wise experiments on small trained networks.

mod commands;
mod config;
mod exit;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ilens_core::experiments::PerturbMode;

use crate::commands::{Common, GridFlags, PerturbFlags};

#[derive(Parser)]
#[command(name = "ilens", version, about = "Sparse AND-OR interaction analysis")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Seed for every random choice of the command.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "ilens-out")]
    out: PathBuf,
    /// Leave wall-clock times out of manifests and plots.
    #[arg(long, global = true)]
    no_timestamp: bool,
    /// Flat `key = value` settings file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one setting, e.g. `--set iterations=5000`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE", value_parser = config::parse_override)]
    set: Vec<(String, String)>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Gaussian,
    Fgsm,
}

#[derive(Subcommand)]
enum Command {
    /// Extract interactions from value-table JSON files or directories.
    Extract {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Order-wise strength distributions of interaction files.
    Distribution {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Count only salient interactions.
        #[arg(long)]
        salient_only: bool,
        /// Divide by the mean first-order salient strength of the inputs.
        #[arg(long)]
        normalize: bool,
    },
    /// Fit a distribution as spindle plus decay components.
    Disentangle {
        /// Distribution CSV.
        distribution: PathBuf,
        /// Converged interactions (file or directory) for the decay component.
        interactions: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha_min: f64,
        #[arg(long, default_value_t = 1.5)]
        alpha_max: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha_step: f64,
        #[arg(long, default_value_t = 1e-4)]
        delta_min: f64,
        #[arg(long, default_value_t = 1.0)]
        delta_max: f64,
        #[arg(long, default_value_t = 40)]
        delta_count: usize,
        /// Separate scales for the positive and negative curves.
        #[arg(long)]
        per_sign: bool,
    },
    /// Order-wise Jaccard similarity between train and test interactions.
    Jaccard { train: PathBuf, test: PathBuf },
    /// Train a small network and track its interactions over training.
    Simulate,
    /// Perturb a network and record which interactions change.
    Perturb {
        /// Trained network JSON; trains a fresh one when omitted.
        #[arg(long, requires = "data")]
        net: Option<PathBuf>,
        /// Dataset CSV whose test samples are explained.
        #[arg(long, requires = "net")]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        features_per_variable: usize,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Comma-separated noise sizes.
        #[arg(long, value_delimiter = ',')]
        sigmas: Option<Vec<f64>>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let g = cli.global;
    if let Some(jobs) = g.jobs {
        if jobs == 0 {
            return Err(exit::UsageError("--jobs must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    let common = Common {
        seed: g.seed,
        out: g.out,
        timestamps: !g.no_timestamp,
        config: g.config,
        overrides: g.set,
    };
    match cli.command {
        Command::Extract { inputs } => commands::extract_cmd(&common, &inputs),
        Command::Distribution {
            inputs,
            salient_only,
            normalize,
        } => commands::distribution_cmd(&common, &inputs, salient_only, normalize),
        Command::Disentangle {
            distribution,
            interactions,
            alpha_min,
            alpha_max,
            alpha_step,
            delta_min,
            delta_max,
            delta_count,
            per_sign,
        } => {
            let flags = GridFlags {
                alpha_min,
                alpha_max,
                alpha_step,
                delta_min,
                delta_max,
                delta_count,
                per_sign,
            };
            commands::disentangle_cmd(&common, &distribution, &interactions, &flags)
        }
        Command::Jaccard { train, test } => commands::jaccard_cmd(&common, &train, &test),
        Command::Simulate => commands::simulate_cmd(&common),
        Command::Perturb {
            net,
            data,
            features_per_variable,
            mode,
            sigmas,
        } => {
            let flags = PerturbFlags {
                net,
                data,
                features_per_variable,
                mode: mode.map(|m| match m {
                    Mode::Gaussian => PerturbMode::Gaussian,
                    Mode::Fgsm => PerturbMode::Fgsm,
                }),
                sigmas,
            };
            commands::perturb_cmd(&common, &flags)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ILENS_LOG", "error")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => exit::report(&e),
    }
}
