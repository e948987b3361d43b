use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

/// Reference-prior ensemble super-resolution.
///
/// Set REFESR_THREADS to cap the number of worker threads.
#[derive(Debug, Parser)]
#[command(name = "refesr", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Crop HR images to a multiple of the scale and write their LR versions.
    Degrade(DegradeArgs),
    /// Score resolvers on a reference set and write the weight prior.
    LearnPrior(LearnPriorArgs),
    /// Super-resolve LR images with the prior-regularized ensemble.
    Superres(SuperresArgs),
    /// Compare predictions with ground truth, or run resolvers on degraded
    /// ground truth and compare all of them.
    Evaluate(EvaluateArgs),
    /// Evaluate the ensemble over a grid of rho and lambda values.
    Sweep(SweepArgs),
    /// Write a deterministic synthetic image set.
    SynthCorpus(SynthArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct DegradeArgs {
    /// Directory of HR images.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub scale: u32,
    #[arg(long)]
    pub output_dir: PathBuf,
    /// Also write the cropped HR images to `<output-dir>/hr`.
    #[arg(long)]
    pub keep_hr: bool,
    /// Gaussian noise added to the LR images, on the 0-255 scale.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct ResolverArgs {
    /// Resolver set (JSON, or TOML with a `.toml` extension). Defaults to
    /// the six built-in resolvers.
    #[arg(long)]
    pub resolvers: Option<PathBuf>,
    /// Wrap every resolver in the eight-fold geometric self-ensemble.
    #[arg(long)]
    pub self_ensemble: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct RhoArgs {
    /// Bandwidth on raw `psnr * ssim` scores.
    #[arg(long, conflicts_with = "rho_relative")]
    pub rho: Option<f64>,
    /// Bandwidth as a fraction of the score spread (scores normalized to
    /// [0, 1]). This is the default mode, with 0.07.
    #[arg(long)]
    pub rho_relative: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct LearnPriorArgs {
    /// Directory of HR reference images.
    #[arg(long)]
    pub reference: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub resolvers: ResolverArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub rho: RhoArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [2u32, 3, 4])]
    pub scales: Vec<u32>,
    /// Prior file to write.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EnsembleArgs {
    /// Prior file from `learn-prior`. Without it the prior is uniform.
    #[arg(long)]
    pub prior: Option<PathBuf>,
    #[arg(long, default_value_t = refesr::ensemble::DEFAULT_LAMBDA)]
    pub lambda: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub resolvers: ResolverArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SuperresArgs {
    /// LR image or directory of LR images.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub scale: u32,
    #[command(flatten)]
    #[serde(flatten)]
    pub ensemble: EnsembleArgs,
    /// Skip the solver and average the resolver outputs uniformly.
    #[arg(long)]
    pub average: bool,
    #[arg(long)]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    /// Ground-truth HR image or directory.
    #[arg(long)]
    pub gt: PathBuf,
    /// Predicted HR image or directory (matched to ground truth by file
    /// stem). Without it, the ground truth is degraded by `--scale` and
    /// every resolver plus both ensembles is evaluated.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    #[arg(long)]
    pub scale: Option<u32>,
    /// Border pixels ignored by the metrics. Defaults to the scale.
    #[arg(long)]
    pub shave: Option<usize>,
    /// Name shown in the resolver column for `--pred` results.
    #[arg(long, default_value = "pred")]
    pub label: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub ensemble: EnsembleArgs,
    /// Also write the results as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    /// HR reference images for the prior.
    #[arg(long)]
    pub reference: PathBuf,
    /// HR test images; degraded by `--scale` before super-resolution.
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub scale: u32,
    #[command(flatten)]
    #[serde(flatten)]
    pub resolvers: ResolverArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [0.001, 0.07, 100.0])]
    pub rho_grid: Vec<f64>,
    /// Interpret the rho grid on raw scores instead of normalized ones.
    #[arg(long)]
    pub rho_raw: bool,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.8, 10.0])]
    pub lambda_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [2u32, 3, 4])]
    pub scales: Vec<u32>,
    /// Writes `sweep.csv` and `sweep.json` here.
    #[arg(long)]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub output_dir: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    #[arg(long, default_value_t = 96)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
