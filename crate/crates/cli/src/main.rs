//! `dfunet`: augmentation, fold plans, CNN and SVM training, evaluation and ROC reports.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Seed used when neither `--seed` nor `DFU_SEED` is given.
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Parser)]
#[command(name = "dfunet", version, about = "Diabetic foot ulcer patch classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone, Copy)]
pub struct SeedArg {
    /// Run seed; falls back to DFU_SEED, then to 0.
    #[arg(long, env = "DFU_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HoldoutArg {
    #[value(name = "kfold")]
    Kfold,
    #[value(name = "split-85-5-10")]
    Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Linear,
    Rbf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a manifest CSV for a `<root>/<class>/<source>__<patch>.ppm` tree.
    Manifest {
        #[arg(long)]
        root: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Class directory names; label i is the i-th name.
        #[arg(long, value_delimiter = ',', default_value = "normal,abnormal")]
        classes: Vec<String>,
    },
    /// Write a dataset of synthetic two-class patches plus its manifest.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Write a source-grouped fold plan.
    Folds {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, value_enum, default_value = "kfold")]
        holdout: HoldoutArg,
        /// Split individual patches rather than source photographs.
        #[arg(long)]
        per_patch: bool,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Write the 15 augmented variants of every patch.
    Augment {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "normal,abnormal")]
        classes: Vec<String>,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Extract LBP/HOG/colour descriptors for every manifest patch.
    Features {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "lbp+hog+color")]
        which: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train an SMO support vector machine on a feature CSV.
    SvmTrain(commands::SvmTrainArgs),
    /// Train a CNN on one fold's training split.
    Train(commands::TrainArgs),
    /// Score a fold's test split and write scores and metrics.
    Eval(commands::EvalArgs),
    /// ROC plot and AUC table for one or more scores files.
    Report {
        #[arg(long, value_delimiter = ',', required = true)]
        scores: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        table: PathBuf,
    },
}

fn run(cli: Cli) -> error::CliResult<()> {
    match cli.command {
        Command::Manifest { root, out, classes } => commands::manifest(&root, &out, &classes),
        Command::Synth { out, n, size, seed } => commands::synth(&out, n, size, seed.seed),
        Command::Folds {
            manifest,
            k,
            holdout,
            per_patch,
            out,
            seed,
        } => commands::folds(&manifest, k, holdout, per_patch, &out, seed.seed),
        Command::Augment {
            input,
            out,
            classes,
            seed,
        } => commands::augment(&input, &out, &classes, seed.seed),
        Command::Features { manifest, which, out } => commands::features(&manifest, &which, &out),
        Command::SvmTrain(a) => commands::svm_train(&a),
        Command::Train(a) => commands::train(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Report { scores, out, table } => commands::report(&scores, &out, &table),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
