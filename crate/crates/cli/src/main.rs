//! `d4x`: generate data, train the classifier and the explainer, explain,
//! sample and evaluate. Every command is a pure function of its config file,
//! flags and seed.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use config::ConfigFile;

/// Exit status plus the message printed on stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub const USAGE: u8 = 2;
    pub const NUMERIC: u8 = 3;

    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: Self::USAGE, message: message.into() }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Self { code: Self::NUMERIC, message: message.into() }
    }
}

impl From<d4x_core::Error> for Failure {
    fn from(e: d4x_core::Error) -> Self {
        match e {
            d4x_core::Error::Numeric(_) => Self::numeric(e.to_string()),
            _ => Self::usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::usage(e.to_string())
    }
}

/// Comma-separated numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct List(pub Vec<f64>);

impl FromStr for List {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| format!("not a number: {v:?}")))
            .collect::<Result<_, _>>()
            .map(List)
    }
}

#[derive(Debug, Parser)]
#[command(name = "d4x", version, about = "Diffusion-based explanations for graph classifiers")]
pub struct Cli {
    /// Flat key-value config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed; every command derives its own substream from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    GenData(GenData),
    /// Train the graph classifier to be explained.
    TrainClassifier(TrainClassifier),
    /// Train the denoiser against a frozen classifier.
    TrainExplainer(TrainExplainer),
    /// Counterfactual explanations at the given modification ratios.
    Explain(Explain),
    /// Model-level explanation by guided reverse sampling.
    Sample(Sample),
    /// MR sweep with AUC, MMD and optional robustness.
    Evaluate(Evaluate),
    /// Print a saved metric report.
    Report(Report),
}

#[derive(Debug, Args)]
pub struct GenData {
    /// tree-cycle, tree-grid or ba-3motif.
    #[arg(long)]
    pub kind: Option<String>,
    /// Tree levels.
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub motifs: Option<usize>,
    #[arg(long)]
    pub graphs: Option<usize>,
    #[arg(long)]
    pub base_min: Option<usize>,
    #[arg(long)]
    pub base_max: Option<usize>,
    #[arg(long)]
    pub ba_edges: Option<usize>,
    /// Dataset file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainClassifier {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub out_ckpt: Option<PathBuf>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainExplainer {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub classifier_ckpt: Option<PathBuf>,
    #[arg(long)]
    pub out_ckpt: Option<PathBuf>,
    /// Per-dataset defaults for width, depth, batch and alpha.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Diffusion steps `T`.
    #[arg(long = "steps", short = 'T')]
    pub steps: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// counterfactual or model-level.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub blocks: Option<usize>,
    /// Use at most this many training instances.
    #[arg(long)]
    pub max_instances: Option<usize>,
}

#[derive(Debug, Args)]
pub struct Explain {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub classifier_ckpt: Option<PathBuf>,
    #[arg(long)]
    pub explainer_ckpt: Option<PathBuf>,
    /// Target modification ratios.
    #[arg(long)]
    pub mr: Option<List>,
    /// train, val, test or all.
    #[arg(long)]
    pub split: Option<String>,
    /// Corrupted views averaged per instance.
    #[arg(long)]
    pub views: Option<usize>,
    /// Inference noise level, or `random` for one draw per view.
    #[arg(long)]
    pub beta_bar: Option<String>,
    /// topk or bernoulli.
    #[arg(long)]
    pub strategy: Option<String>,
    /// JSON-lines record file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Sample {
    #[arg(long)]
    pub classifier_ckpt: Option<PathBuf>,
    #[arg(long)]
    pub explainer_ckpt: Option<PathBuf>,
    /// Nodes in the generated graph.
    #[arg(long)]
    pub n: Option<usize>,
    /// Candidates per step.
    #[arg(long)]
    pub k: Option<usize>,
    /// Reverse steps.
    #[arg(long)]
    pub t: Option<usize>,
    #[arg(long)]
    pub class: Option<usize>,
    #[arg(long)]
    pub density_weight: Option<f64>,
    /// Trajectory CSV to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Evaluate {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub classifier_ckpt: Option<PathBuf>,
    #[arg(long)]
    pub explainer_ckpt: Option<PathBuf>,
    /// Only `default` (10 points over [0, 0.3]) is supported.
    #[arg(long)]
    pub mr_grid: Option<String>,
    /// train, val, test or all.
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub views: Option<usize>,
    #[arg(long)]
    pub beta_bar: Option<String>,
    /// Ratio for the MMD comparison, or `none`.
    #[arg(long)]
    pub mmd_mr: Option<String>,
    #[arg(long)]
    pub mmd_sigma: Option<f64>,
    /// Skip the random-flip baseline.
    #[arg(long)]
    pub no_random: bool,
    /// Measure Top-K robustness under feature noise.
    #[arg(long)]
    pub robustness: bool,
    #[arg(long)]
    pub sigmas: Option<List>,
    #[arg(long)]
    pub topk: Option<usize>,
    #[arg(long)]
    pub robustness_mr: Option<f64>,
    /// Directory for the report and CSV files.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Report {
    /// `report.json` written by `evaluate`.
    #[arg(long)]
    pub report: PathBuf,
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let exec = d4x_core::Exec::default();
    match cli.command {
        Command::GenData(a) => commands::gen_data(&a, &file, cli.seed),
        Command::TrainClassifier(a) => commands::train_classifier(&a, &file, cli.seed, exec),
        Command::TrainExplainer(a) => commands::train_explainer(&a, &file, cli.seed, exec),
        Command::Explain(a) => commands::explain(&a, &file, cli.seed, exec),
        Command::Sample(a) => commands::sample(&a, &file, cli.seed, exec),
        Command::Evaluate(a) => commands::evaluate(&a, &file, cli.seed, exec),
        Command::Report(a) => commands::report(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    d4x_core::exec::init_threads(None);
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Failure::USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
