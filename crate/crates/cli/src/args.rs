use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use costroute::Split;

#[derive(Debug, Parser)]
#[command(name = "costroute", version, about = "Cost-aware routing of prompts across a model pool")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pool file checks
    #[command(subcommand)]
    Pool(PoolCommand),
    /// Replace dataset features with hashed character-trigram vectors
    Featurize(FeaturizeArgs),
    /// Fit a quality estimator and write it to --out
    #[command(subcommand)]
    Train(TrainCommand),
    /// Route every prompt at a fixed lambda; writes decisions JSONL
    Route(RouteArgs),
    /// Find the smallest lambda whose average routed cost fits the budget
    Calibrate(CalibrateArgs),
    /// Sweep lambda and write the deferral curve as CSV
    Sweep(SweepArgs),
    /// Curve and sample statistics
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Blur-residual sharpness of binary PGM/PPM images
    Sharpness(SharpnessArgs),
    /// Synthetic instances with known expected quality
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Debug, Subcommand)]
pub enum PoolCommand {
    /// Check a pool file, and optionally a dataset against it
    Validate {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Pool JSON
    #[arg(long)]
    pub pool: PathBuf,
    /// Dataset JSONL
    #[arg(long)]
    pub data: PathBuf,
    /// Restrict to one split (train, val, test); all records when omitted
    #[arg(long)]
    pub split: Option<Split>,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Feature dimension
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum TrainCommand {
    /// Exact k-nearest-neighbor index
    Knn(TrainKnnArgs),
    /// One-hidden-layer MLP with one sigmoid head per model
    Mlp(TrainMlpArgs),
}

#[derive(Debug, Args)]
pub struct TrainKnnArgs {
    #[command(flatten)]
    pub data: TrainDataArgs,
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainMlpArgs {
    #[command(flatten)]
    pub data: TrainDataArgs,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainDataArgs {
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Split to fit on
    #[arg(long, default_value = "train")]
    pub split: Split,
}

/// Where estimates come from: a saved estimator or the true labels.
#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct EstimatorArgs {
    /// Estimator written by `train`
    #[arg(long)]
    pub estimator: Option<PathBuf>,
    /// Use the scaled true labels instead of an estimator
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Debug, Args)]
pub struct RouteArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub source: EstimatorArgs,
    #[arg(long)]
    pub lambda: f64,
    /// Write decisions here instead of standard output
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub source: EstimatorArgs,
    #[arg(long)]
    pub budget: f64,
    /// Bisection stops once the bracket is narrower than this
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub source: EstimatorArgs,
    /// `log:<lo>:<hi>:<n>` or a comma list such as `0.01,0.1,1`
    #[arg(long, default_value = "log:1e-6:1:50")]
    pub lambdas: String,
    /// Do not prepend lambda = 0
    #[arg(long)]
    pub no_zero: bool,
    /// Write the CSV here instead of standard output
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Quality-neutral cost of a curve against a reference model
    Qnc {
        /// Curve CSV written by `sweep`
        #[arg(long)]
        curve: PathBuf,
        #[arg(long)]
        ref_cost: f64,
        #[arg(long)]
        ref_quality: f64,
    },
    /// Selection rate of every pool model in a decisions file
    Rates {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        decisions: PathBuf,
    },
    /// Welch's two-sample t-test on two files of whitespace-separated numbers
    Ttest {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct SharpnessArgs {
    /// P5 or P6 files, maxval 255
    #[arg(required = true)]
    pub images: Vec<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// Write pool.json, data.jsonl and truth.json for a synthetic spec
    Gen {
        /// Spec JSON; the bundled two-cluster spec when omitted
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Override the spec's seed
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Brute-force Pareto frontier over every prompt-to-model assignment
    Frontier {
        #[command(flatten)]
        data: DataArgs,
        /// Write the CSV here instead of standard output
        #[arg(long)]
        out: Option<PathBuf>,
    },
}
