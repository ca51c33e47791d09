use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use svdd_core::optimizer::Objective;
use svdd_core::EmbeddingFormat;

use crate::config::Overrides;

#[derive(Debug, Parser)]
#[command(name = "svdd", version, about = "Deep SVDD and AI-SVDD anomaly detection on embedding vectors")]
#[command(after_help = "Logging goes to stderr; set SVDD_LOG=info or SVDD_LOG=debug for more detail.")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset to disk
    Gen(GenArgs),
    /// Pretrain an autoencoder and save its encoder with the fixed center
    Pretrain(PretrainArgs),
    /// Train an encoder and save a checkpoint
    Train(TrainArgs),
    /// Score a test set with a checkpoint
    Score(ScoreArgs),
    /// Compute MAP, Recall@k and AUC from a scores file
    Eval(EvalArgs),
    /// Run the linear 2-D case study
    Casestudy(CaseStudyArgs),
    /// Compare plain and signed centers on the mislabeling illustration
    CenterDemo(CenterDemoArgs),
    /// Run the pollution sweep on the synthetic benchmark or on your own pools
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatKind {
    /// EMB1 binary embeddings with a separate LBL1 label file
    Binary,
    /// Comma-separated decimal rows
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct FormatArgs {
    /// Embedding file format
    #[arg(long, value_enum, default_value_t = FormatKind::Binary)]
    pub format: FormatKind,
    /// CSV rows end with an integer label column (-1 or 1); requires --format csv
    #[arg(long)]
    pub labels_inline: bool,
}

impl FormatArgs {
    pub fn format(&self) -> EmbeddingFormat {
        match self.format {
            FormatKind::Binary => EmbeddingFormat::Binary,
            FormatKind::Csv => EmbeddingFormat::Csv {
                labels_inline: self.labels_inline,
            },
        }
    }

    pub fn extension(&self) -> &'static str {
        match self.format {
            FormatKind::Binary => "emb",
            FormatKind::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Recipe {
    /// 2-D Gaussian normals with anomalies on a ring
    CaseStudy,
    /// Inliers, mislabeled far points and anomalies for the center comparison
    Center,
    /// D=32 clustered benchmark with an anomaly pool and a labelled test set
    Benchmark,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Which generator to run
    #[arg(long, value_enum)]
    pub recipe: Recipe,
    /// Random seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (created if missing)
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub format: FormatArgs,
}

/// Training hyperparameters; each flag overrides the preset and the config file.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Flat `key = value` config file
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Named hyperparameter preset (topic-change, ag, yelp, rct, medical, with -oc variants)
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,
    /// Training objective: oc_fixed_center, oc_joint, ai_svdd or oc_joint_regularized
    #[arg(long, value_parser = parse_objective)]
    pub objective: Option<Objective>,
    /// Weight-decay strength for oc_fixed_center and oc_joint_regularized
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Learning rate
    #[arg(long)]
    pub lr: Option<f64>,
    /// Training epochs
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Mini-batch size
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Width of each hidden layer
    #[arg(long)]
    pub hidden_size: Option<usize>,
    /// Latent (output) dimension
    #[arg(long)]
    pub latent_size: Option<usize>,
    /// Number of hidden layers (0 gives a single linear layer)
    #[arg(long)]
    pub hidden_layers: Option<usize>,
    /// Random seed for initialisation and batch order
    #[arg(long)]
    pub seed: Option<u64>,
    /// Autoencoder pretraining epochs (oc_fixed_center and pretrain)
    #[arg(long)]
    pub pretrain_epochs: Option<usize>,
    /// Autoencoder pretraining learning rate
    #[arg(long)]
    pub pretrain_lr: Option<f64>,
    /// Add bias vectors to every layer
    #[arg(long)]
    pub bias: bool,
    /// Negative slope of the leaky ReLU
    #[arg(long)]
    pub slope: Option<f64>,
}

fn parse_objective(s: &str) -> Result<Objective, String> {
    s.parse().map_err(|e: svdd_core::SvddError| e.to_string())
}

impl ModelArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            objective: self.objective,
            lambda: self.lambda,
            lr: self.lr,
            epochs: self.epochs,
            batch_size: self.batch_size,
            hidden_size: self.hidden_size,
            latent_size: self.latent_size,
            hidden_layers: self.hidden_layers,
            seed: self.seed,
            pretrain_epochs: self.pretrain_epochs,
            pretrain_lr: self.pretrain_lr,
            use_bias: self.bias,
            slope: self.slope,
        }
    }
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    /// Training embeddings
    #[arg(long)]
    pub train: PathBuf,
    /// Where to write the checkpoint (encoder plus fixed center)
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Optional CSV of per-epoch reconstruction losses
    #[arg(long, value_name = "FILE")]
    pub losses: Option<PathBuf>,
    #[command(flatten)]
    pub format: FormatArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training embeddings
    #[arg(long)]
    pub train: PathBuf,
    /// Label file for the training embeddings (required by ai_svdd unless labels are inline)
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Where to write the trained checkpoint
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Start from this checkpoint (e.g. one written by `pretrain`) instead of a fresh network
    #[arg(long, value_name = "FILE")]
    pub init: Option<PathBuf>,
    /// Optional CSV with the loss and layer norms of every step
    #[arg(long, value_name = "FILE")]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub format: FormatArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Checkpoint written by `train`
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Embeddings to score
    #[arg(long)]
    pub test: PathBuf,
    /// Label file for the test embeddings (needed later by `eval`)
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Where to write the scores CSV (id,label,score)
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub format: FormatArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Scores CSV written by `score`
    #[arg(long)]
    pub scores: PathBuf,
    /// Recall cutoff in percent; repeat for several
    #[arg(long = "recall-k", value_name = "K", default_values_t = vec![5u32])]
    pub recall_k: Vec<u32>,
    /// Optional metrics CSV
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Optional ROC curve CSV (fpr,tpr)
    #[arg(long, value_name = "FILE")]
    pub roc: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CaseStudyArgs {
    /// First seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of consecutive seeds to run
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// Gradient steps for each trained map
    #[arg(long, default_value_t = 500)]
    pub steps: usize,
    /// Learning rate for every trained map
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    /// Ridge strength of the regularized baseline
    #[arg(long, default_value_t = 0.01)]
    pub lambda: f64,
    /// Report directory for casestudy.csv and casestudy_points.csv
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CenterDemoArgs {
    /// First seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of consecutive seeds to run
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// Report directory for center_illustration.csv and center_illustration_points.csv
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Seed for data generation, pollution draws and training
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Runs per (method, proportion) cell
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
    /// Worker threads; results do not depend on this value
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Comma-separated pollution proportions
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.01, 0.02, 0.04, 0.08])]
    pub proportions: Vec<f64>,
    /// Comma-separated methods: objectives and/or rank_baseline
    #[arg(long, value_delimiter = ',', default_values_t = vec!["oc_fixed_center".to_string(), "ai_svdd".to_string(), "rank_baseline".to_string()])]
    pub methods: Vec<String>,
    /// Recall cutoff in percent; repeat for several
    #[arg(long = "recall-k", value_name = "K", default_values_t = vec![5u32])]
    pub recall_k: Vec<u32>,
    /// Config file applied to the one-class methods (oc_fixed_center, oc_joint_regularized)
    #[arg(long, value_name = "FILE")]
    pub oc_config: Option<PathBuf>,
    /// Config file applied to ai_svdd and oc_joint
    #[arg(long, value_name = "FILE")]
    pub ai_config: Option<PathBuf>,
    /// Your own normal embeddings (use with --anomalies instead of the synthetic benchmark)
    #[arg(long, requires = "anomalies")]
    pub normals: Option<PathBuf>,
    /// Your own anomaly embeddings (use with --normals)
    #[arg(long, requires = "normals")]
    pub anomalies: Option<PathBuf>,
    /// Fraction of your normals held out for testing
    #[arg(long, default_value_t = 0.3)]
    pub test_fraction: f64,
    /// Anomalies in your test set, as a fraction of its normals
    #[arg(long, default_value_t = 0.05)]
    pub test_pollution: f64,
    /// Report directory for sweep.csv and sweep_runs.csv
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[command(flatten)]
    pub format: FormatArgs,
}
