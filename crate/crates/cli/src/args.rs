use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use xnn::train::{ProxScaling, TrainConfig};
use xnn::{Activation, XnnConfig};

/// Explainable neural networks: simulate data, fit, explain, predict and distill.
#[derive(Debug, Parser)]
#[command(name = "xnn", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a simulated dataset (legendre, interaction or nonlinear).
    Simulate(SimulateArgs),
    /// Fit a model to a dataset.
    Train(TrainArgs),
    /// Export ridge profiles, conditional effects and sparsity summaries.
    Explain(ExplainArgs),
    /// Predict every row of a dataset.
    Predict(PredictArgs),
    /// Fit a surrogate model to base-model predictions.
    Distill(DistillArgs),
    /// Repeat the run recorded in a manifest and verify its outputs.
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SeedArgs {
    /// Seed for all randomness; the XNN_SEED environment variable overrides it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    pub generator: String,
    #[arg(long, default_value_t = xnn::simulate::DEFAULT_N)]
    pub n: usize,
    #[command(flatten)]
    pub seed: SeedArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to `<out>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ActivationArg {
    Tanh,
    Linear,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProxScalingArg {
    Uniform,
    Preconditioned,
}

/// Model architecture and training flags, named after the configuration fields.
#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Number of subnetworks.
    #[arg(long = "subnets", default_value_t = 5)]
    pub num_subnets: usize,
    /// Hidden layer widths of each subnetwork, comma separated.
    #[arg(long = "hidden", value_delimiter = ',', default_value = "12,6")]
    pub subnet_hidden: Vec<usize>,
    #[arg(long, value_enum, default_value_t = ActivationArg::Tanh)]
    pub activation: ActivationArg,
    #[arg(long, visible_alias = "lr", default_value_t = TrainConfig::default().learning_rate)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    pub batch_size: usize,
    #[arg(long, visible_alias = "epochs", default_value_t = TrainConfig::default().max_epochs)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().lambda_beta)]
    pub lambda_beta: f64,
    #[arg(long, default_value_t = TrainConfig::default().lambda_gamma)]
    pub lambda_gamma: f64,
    #[arg(long, default_value_t = TrainConfig::default().adam_beta1)]
    pub adam_beta1: f64,
    #[arg(long, default_value_t = TrainConfig::default().adam_beta2)]
    pub adam_beta2: f64,
    #[arg(long, default_value_t = TrainConfig::default().adam_eps)]
    pub adam_eps: f64,
    #[arg(long, visible_alias = "holdout", default_value_t = TrainConfig::default().holdout_fraction)]
    pub holdout_fraction: f64,
    #[arg(long, default_value_t = TrainConfig::default().patience)]
    pub patience: usize,
    /// Seed for the holdout split and batch order; defaults to the model seed.
    #[arg(long)]
    pub shuffle_seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = ProxScalingArg::Preconditioned)]
    pub prox_scaling: ProxScalingArg,
    /// Leading epochs trained without shrinkage.
    #[arg(long, default_value_t = TrainConfig::default().penalty_warmup_epochs)]
    pub penalty_warmup_epochs: usize,
    #[command(flatten)]
    pub seed: SeedArgs,
}

impl FitArgs {
    pub fn configs(&self, input_dim: usize, seed: u64) -> (XnnConfig, TrainConfig) {
        let mut xcfg = XnnConfig::new(input_dim, self.num_subnets, &self.subnet_hidden).with_seed(seed);
        xcfg.activation = match self.activation {
            ActivationArg::Tanh => Activation::Tanh,
            ActivationArg::Linear => Activation::Linear,
        };
        let tcfg = TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            lambda_beta: self.lambda_beta,
            lambda_gamma: self.lambda_gamma,
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            adam_eps: self.adam_eps,
            holdout_fraction: self.holdout_fraction,
            patience: self.patience,
            shuffle_seed: self.shuffle_seed.unwrap_or(seed),
            prox_scaling: match self.prox_scaling {
                ProxScalingArg::Uniform => ProxScaling::Uniform,
                ProxScalingArg::Preconditioned => ProxScaling::Preconditioned,
            },
            penalty_warmup_epochs: self.penalty_warmup_epochs,
        };
        (xcfg, tcfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Response column; the last column when omitted.
    #[arg(long)]
    pub response: Option<String>,
    #[arg(long)]
    pub model_out: PathBuf,
    /// Defaults to `<model-out>.report.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Defaults to `<model-out>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub response: Option<String>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Relative range a scaled ridge function must exceed to count as active.
    #[arg(long, default_value_t = xnn::explain::DEFAULT_ACTIVE_THRESHOLD)]
    pub active_threshold: f64,
    /// Defaults to `<out-dir>/manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Feature columns, optionally followed by the response column.
    #[arg(long)]
    pub data: PathBuf,
    /// Column to drop before predicting when present.
    #[arg(long, default_value = xnn::dataset::DEFAULT_RESPONSE_NAME)]
    pub response: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to `<out>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DistillArgs {
    /// Probe features plus a `base_prediction` column.
    #[arg(long)]
    pub probe: PathBuf,
    #[arg(long)]
    pub model_out: PathBuf,
    /// Defaults to `<model-out>.report.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Defaults to `<model-out>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Clone, Args)]
pub struct RerunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}
