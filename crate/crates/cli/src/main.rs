use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use conceptlink::corpus::{Level, Ratios, SplitKind};
use conceptlink::embed::LayerChoice;
use conceptlink::eval::TableFormat;
use conceptlink::recipe::Recipe;

mod commands;
mod settings;

use settings::Settings;

/// Link free-text medical mentions to concepts of a SNOMED-style graph.
///
/// Every setting can also come from a TOML file given with `--config`
/// (keys are flag names with underscores). Flags win over the file, the file
/// wins over built-in defaults. A run manifest is itself a valid config.
#[derive(Parser)]
#[command(name = "conceptlink", version)]
pub struct Cli {
    /// TOML settings file or a previous run's manifest.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads. With 1 worker every output is bit-reproducible.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Validate a concept graph and write it back in normalised form.
    IngestKg(IngestKgArgs),
    /// Split a mention corpus into train/dev/test.
    Split(SplitArgs),
    /// Build the term -> concept dictionary from training mentions.
    BuildDict(BuildDictArgs),
    /// Pick fuzzy-matching thresholds on a development set.
    TuneThreshold(TuneArgs),
    /// Train node2vec embeddings on the IS-A graph.
    Node2vec(Node2vecArgs),
    /// Train an alignment model for one embedding recipe.
    TrainAlign(TrainAlignArgs),
    /// Link mentions with one method or a back-off cascade.
    Link(LinkArgs),
    /// Score a predictions file against gold mentions.
    Eval(EvalArgs),
    /// Run every method end to end and print one combined table.
    Bench(BenchArgs),
    /// Print the string-similarity breakdown for two strings.
    Strsim(StrsimArgs),
    /// Write a small synthetic graph, corpus and embedding set.
    Synth(SynthArgs),
}

#[derive(Args, Default)]
pub struct GraphArgs {
    /// Concept table: sctid, pipe-separated labels, semantic tag.
    #[arg(long)]
    pub concepts: Option<PathBuf>,
    /// IS-A edges: child sctid, parent sctid.
    #[arg(long)]
    pub edges: Option<PathBuf>,
}

#[derive(Args, Default)]
pub struct ResourceArgs {
    /// Word vectors in text format (`N d` header).
    #[arg(long)]
    pub word_vectors: Option<PathBuf>,
    /// Node embeddings written by `node2vec`.
    #[arg(long)]
    pub node2vec: Option<PathBuf>,
    /// Per-layer mention embeddings keyed by mention id.
    #[arg(long)]
    pub mention_stacks: Option<PathBuf>,
    /// Per-layer label embeddings keyed `label:<sctid>:<i>`.
    #[arg(long)]
    pub label_stacks: Option<PathBuf>,
}

#[derive(Args, Default)]
pub struct WalkArgs {
    /// Return parameter.
    #[arg(long)]
    pub p: Option<f64>,
    /// In-out parameter.
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub walk_length: Option<usize>,
    /// Walks started from every node.
    #[arg(long)]
    pub walks: Option<usize>,
}

#[derive(Args, Default)]
pub struct TrainArgs {
    /// Triplet margin.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Defaults to the recipe's own rate.
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Layer for plain contextual vectors: `top` or a 0-based index.
    #[arg(long)]
    pub layer: Option<LayerChoice>,
    /// Output width of the branch transform.
    #[arg(long)]
    pub branch_dim: Option<usize>,
}

#[derive(Args)]
pub struct IngestKgArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SplitArgs {
    /// Mention corpus (tab-separated, with header).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Optional graph to check gold concepts against.
    #[command(flatten)]
    pub graph: GraphArgs,
    /// `stratified` or `zero-shot`.
    #[arg(long)]
    pub kind: Option<SplitKind>,
    /// `general` or `specific`.
    #[arg(long)]
    pub level: Option<Level>,
    /// Train,dev,test fractions.
    #[arg(long)]
    pub ratios: Option<Ratios>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct BuildDictArgs {
    /// Training mentions.
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub level: Option<Level>,
    /// Dictionary file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Development mentions.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long)]
    pub level: Option<Level>,
    /// `lev`, `stoilos` or `both`.
    #[arg(long)]
    pub metric: Option<String>,
    /// Comma-separated thresholds to try instead of the metric's grid.
    #[arg(long)]
    pub grid: Option<String>,
    /// Thresholds file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct Node2vecArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub walk: WalkArgs,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    /// Negative samples per context.
    #[arg(long)]
    pub neg: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Initial SGNS learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Embedding file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrainAlignArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long)]
    pub level: Option<Level>,
    /// n1 .. n6.
    #[arg(long)]
    pub recipe: Option<Recipe>,
    #[command(flatten)]
    pub resources: ResourceArgs,
    #[command(flatten)]
    pub train_args: TrainArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct LinkArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Mentions to link.
    #[arg(long)]
    pub mentions: Option<PathBuf>,
    /// dictionary, exact, lev, stoilos, neural or cascade.
    #[arg(long)]
    pub method: Option<String>,
    /// Stages joined by `+`, e.g. `dict+stoilos:0.07+neural:n6`.
    #[arg(long)]
    pub cascade_spec: Option<String>,
    /// Candidates kept per mention.
    #[arg(long)]
    pub k: Option<usize>,
    /// Dictionary written by `build-dict`.
    #[arg(long)]
    pub dict: Option<PathBuf>,
    /// Thresholds written by `tune-threshold`.
    #[arg(long)]
    pub thresholds: Option<PathBuf>,
    /// Threshold for `--method lev|stoilos`.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Checkpoint as `NAME=PATH` or `PATH` (named after its recipe). Repeatable.
    #[arg(long)]
    pub model: Vec<String>,
    #[command(flatten)]
    pub resources: ResourceArgs,
    /// Predictions file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Gold mentions.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long)]
    pub level: Option<Level>,
    /// Row label; defaults to the predictions file name.
    #[arg(long)]
    pub method: Option<String>,
    /// Split label shown in the table.
    #[arg(long)]
    pub split: Option<String>,
    /// `text` or `csv`.
    #[arg(long)]
    pub format: Option<TableFormat>,
    /// Machine-readable report; defaults to `<predictions>.eval.kv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[command(flatten)]
    pub resources: ResourceArgs,
    #[arg(long)]
    pub level: Option<Level>,
    #[arg(long)]
    pub kind: Option<SplitKind>,
    #[arg(long)]
    pub ratios: Option<Ratios>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Comma-separated recipes, or `all`.
    #[arg(long)]
    pub recipes: Option<String>,
    #[command(flatten)]
    pub walk: WalkArgs,
    #[arg(long)]
    pub n2v_dim: Option<usize>,
    #[arg(long)]
    pub n2v_window: Option<usize>,
    #[arg(long)]
    pub n2v_neg: Option<usize>,
    #[arg(long)]
    pub n2v_epochs: Option<usize>,
    #[command(flatten)]
    pub train_args: TrainArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub format: Option<TableFormat>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct StrsimArgs {
    pub x: String,
    pub y: String,
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n_concepts: Option<usize>,
    #[arg(long)]
    pub n_mentions: Option<usize>,
    #[arg(long)]
    pub word_dim: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub stack_dim: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::IngestKg(_) => "ingest-kg",
            Command::Split(_) => "split",
            Command::BuildDict(_) => "build-dict",
            Command::TuneThreshold(_) => "tune-threshold",
            Command::Node2vec(_) => "node2vec",
            Command::TrainAlign(_) => "train-align",
            Command::Link(_) => "link",
            Command::Eval(_) => "eval",
            Command::Bench(_) => "bench",
            Command::Strsim(_) => "strsim",
            Command::Synth(_) => "synth",
        }
    }
}

fn run(cli: Cli) -> conceptlink::Result<()> {
    let name = cli.command.name();
    let mut settings = match &cli.config {
        Some(p) => Settings::load(p, name)?,
        None => Settings::empty(),
    };
    let workers = settings.or("workers", cli.workers, 1usize)?;
    if workers == 0 {
        return Err(conceptlink::Error::Config("--workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| conceptlink::Error::Config(format!("thread pool: {e}")))?;

    let start = Instant::now();
    let manifest = commands::dispatch(cli.command, &mut settings, workers)?;
    if let Some(path) = manifest {
        conceptlink::manifest::write_timing(&path.with_extension("timing"), start.elapsed())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
