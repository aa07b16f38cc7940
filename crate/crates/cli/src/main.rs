//! `hswlm`: estimate, inspect and evaluate hierarchical significant words
//! language models from the command line.

mod commands;
mod error;
mod input;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hswlm::evalkit::FeatureScheme;
use hswlm::{Config, ParsimonyConfig, PruneFallback};
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "hswlm", version, about = "Hierarchical significant words language models")]
struct Cli {
    /// Seed for every random choice (synthetic corpora, folds, classifier).
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Cap on worker threads; defaults to one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate HSWLMs for every entity of a corpus.
    Estimate(EstimateArgs),
    /// Print the top terms of entities, or curve data in one shared term order.
    Inspect(InspectArgs),
    /// Jensen-Shannon divergences between models or class representations.
    Divergence(DivergenceArgs),
    /// Within- and cross-period classification experiments.
    Classify(ClassifyArgs),
    /// Generate a planted-vocabulary corpus with a status shift between periods.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimationArgs {
    /// Weight of the entity model in every EM mixture, in (0, 1).
    #[arg(long, default_value_t = 0.5)]
    pub lambda: f64,
    /// Entries below this are dropped after each parsimonization.
    #[arg(long, default_value_t = 1e-5)]
    pub prune: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub em_tol: f64,
    #[arg(long, default_value_t = 50)]
    pub em_iters: usize,
    /// Largest per-entity L1 change of one full iteration treated as converged.
    #[arg(long, default_value_t = 1e-4)]
    pub outer_tol: f64,
    #[arg(long, default_value_t = 10)]
    pub outer_iters: usize,
    /// Keep an entity's most probable term instead of failing when all are pruned.
    #[arg(long)]
    pub floor: bool,
}

impl EstimationArgs {
    pub fn config(&self) -> Config {
        Config {
            parsimony: ParsimonyConfig {
                lambda: self.lambda,
                em_tolerance: self.em_tol,
                max_em_iters: self.em_iters,
                prune_epsilon: self.prune,
            },
            outer_tolerance: self.outer_tol,
            max_outer_iters: self.outer_iters,
            on_all_pruned: if self.floor {
                PruneFallback::KeepTop
            } else {
                PruneFallback::Abort
            },
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CorpusArgs {
    /// Hierarchy as nested JSON or `child<TAB>parent` lines.
    #[arg(long)]
    pub hierarchy: PathBuf,
    /// JSON-lines documents: {"id", "entity", "text"}, entity being a leaf.
    #[arg(long)]
    pub docs: PathBuf,
    /// Leaves with fewer tokens are dropped before estimation.
    #[arg(long, default_value_t = 100)]
    pub min_tokens: usize,
    /// Treat every document as its own leaf under its entity.
    #[arg(long)]
    pub documents_as_leaves: bool,
}

/// One or more periods, each a hierarchy and a documents file given in order.
#[derive(Debug, Clone, Args, Serialize)]
pub struct PeriodArgs {
    #[arg(long = "hierarchy")]
    pub hierarchies: Vec<PathBuf>,
    #[arg(long = "docs")]
    pub docs: Vec<PathBuf>,
    /// Period names, in order; defaults to p1, p2, ...
    #[arg(long = "period")]
    pub names: Vec<String>,
    #[arg(long, default_value_t = 100)]
    pub min_tokens: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Tf,
    Ig,
    Hswlm,
}

impl Scheme {
    pub fn resolve(self, ig_top_n: usize) -> FeatureScheme {
        match self {
            Scheme::Tf => FeatureScheme::Tf,
            Scheme::Ig => FeatureScheme::Ig { top_n: ig_top_n },
            Scheme::Hswlm => FeatureScheme::Hswlm,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub estimation: EstimationArgs,
    /// Directory for models.jsonl, trace.tsv and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InspectArgs {
    #[arg(long)]
    pub models: PathBuf,
    /// Entities to show; the first one fixes the term order.
    #[arg(long = "entity", required = true)]
    pub entities: Vec<String>,
    #[arg(long, default_value_t = 20)]
    pub top_k: usize,
    /// Every term of every listed entity instead of the top k.
    #[arg(long)]
    pub curve: bool,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DivergenceArgs {
    /// One models file (pairs of entities) or two (same entity across files).
    #[arg(long)]
    pub models: Vec<PathBuf>,
    /// Entities to compare; all when absent.
    #[arg(long = "entity")]
    pub entities: Vec<String>,
    #[command(flatten)]
    pub periods: PeriodArgs,
    /// Weighting schemes of the class report; all three when absent.
    #[arg(long, value_enum)]
    pub scheme: Vec<Scheme>,
    #[arg(long, default_value_t = 1000)]
    pub ig_top_n: usize,
    /// Depth of the class layer; defaults to the parents of the deepest leaves.
    #[arg(long)]
    pub class_depth: Option<usize>,
    /// Cut each distribution to its top k terms first. Defaults to 500 for
    /// class reports and no cut for model files.
    #[arg(long)]
    pub top_k: Option<usize>,
    #[command(flatten)]
    pub estimation: EstimationArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub periods: PeriodArgs,
    /// Weighting schemes to compare; all three when absent.
    #[arg(long, value_enum)]
    pub scheme: Vec<Scheme>,
    #[arg(long, default_value_t = 1000)]
    pub ig_top_n: usize,
    #[arg(long)]
    pub class_depth: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub regularization: f64,
    /// Also export per-period feature matrices under `features/`.
    #[arg(long)]
    pub features: bool,
    #[command(flatten)]
    pub estimation: EstimationArgs,
    /// Directory for transfer.tsv, folds.tsv and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    /// Children per node, layer by layer below the root.
    #[arg(long, value_delimiter = ',', default_value = "2,3,5")]
    pub fanouts: Vec<usize>,
    /// Planted terms per entity.
    #[arg(long, default_value_t = 20)]
    pub planted: usize,
    /// Size of the shared general vocabulary.
    #[arg(long, default_value_t = 100)]
    pub general: usize,
    #[arg(long, default_value_t = 20)]
    pub docs_per_leaf: usize,
    #[arg(long, default_value_t = 50)]
    pub doc_length: usize,
    /// Token share of the general set, then of each layer from the root down.
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.05,0.5,0.1,0.1")]
    pub proportions: Vec<f64>,
    #[arg(long, default_value_t = 2)]
    pub periods: usize,
    #[arg(long)]
    pub out: PathBuf,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::input("--threads", e))?;
    }
    match &cli.command {
        Command::Estimate(a) => commands::estimate(a, cli.seed),
        Command::Inspect(a) => commands::inspect(a, cli.seed),
        Command::Divergence(a) => commands::divergence(a, cli.seed),
        Command::Classify(a) => commands::classify(a, cli.seed),
        Command::Synth(a) => commands::synth(a, cli.seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
