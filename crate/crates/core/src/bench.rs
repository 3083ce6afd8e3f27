//! End-to-end benchmark: split, dictionary, threshold tuning, node2vec,
//! alignment training, linking with every single and cascaded method, and
//! one combined evaluation table.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::align::{self, TrainConfig, TrainOutcome};
use crate::corpus::{make_split, write_corpus, Level, Mention, Ratios, SplitKind};
use crate::embed::{LayerChoice, LayerStackSet, WordVectorStore};
use crate::error::{write_file, Error, Result};
use crate::eval::{self, machine_report, report_table, write_predictions, PredictionSet, ReportRow, TableFormat};
use crate::kg::ConceptGraph;
use crate::linker::{link_all, Linker, LinkerContext, NeuralLinker, Stage};
use crate::matchers::{build_dictionary, render_thresholds, tune_threshold, FuzzyMetric, LabelTable};
use crate::node2vec::{generate_walks, train_sgns, NodeEmbeddings, SgnsConfig, WalkConfig};
use crate::recipe::{self, Recipe, RecipeConfig, Resources};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub level: Level,
    pub kind: SplitKind,
    pub ratios: Ratios,
    pub seed: u64,
    pub k: usize,
    pub recipes: Vec<Recipe>,
    pub layer: LayerChoice,
    pub branch_dim: usize,
    /// The seeds inside these three are replaced by `seed`.
    pub walk: WalkConfig,
    pub sgns: SgnsConfig,
    pub train: TrainConfig,
    /// Overrides each recipe's own default learning rate.
    pub learning_rate: Option<f64>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            level: Level::Specific,
            kind: SplitKind::Stratified,
            ratios: Ratios::default(),
            seed: 42,
            k: 10,
            recipes: Recipe::ALL.to_vec(),
            layer: LayerChoice::Top,
            branch_dim: 300,
            walk: WalkConfig::default(),
            sgns: SgnsConfig::default(),
            train: TrainConfig::default(),
            learning_rate: None,
        }
    }
}

pub struct BenchInputs<'a> {
    pub graph: &'a ConceptGraph,
    pub mentions: &'a [Mention],
    pub word_vectors: Option<&'a WordVectorStore>,
    pub mention_stacks: Option<&'a LayerStackSet>,
    pub label_stacks: Option<&'a LayerStackSet>,
    /// Pretrained graph embeddings; trained from the graph when absent and
    /// some recipe needs them.
    pub node2vec: Option<&'a NodeEmbeddings>,
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub rows: Vec<ReportRow>,
    pub skipped: Vec<(Recipe, String)>,
    /// Every file written, in writing order, relative to the output dir.
    pub outputs: Vec<PathBuf>,
}

/// Why a recipe cannot run with these inputs, if it cannot.
fn missing_input(recipe: Recipe, inputs: &BenchInputs) -> Option<&'static str> {
    if recipe.uses_word_vectors() && inputs.word_vectors.is_none() {
        return Some("no word vectors");
    }
    if recipe.uses_layer_stacks() && (inputs.mention_stacks.is_none() || inputs.label_stacks.is_none()) {
        return Some("no layer stacks");
    }
    None
}

/// Cascade rows, built around the strongest trained neural model.
fn cascade_rows(neural: Option<&str>) -> Vec<Vec<Stage>> {
    let lev = || Stage::Fuzzy(FuzzyMetric::LevenshteinRatio, None);
    let stoilos = || Stage::Fuzzy(FuzzyMetric::stoilos(), None);
    let mut rows = vec![
        vec![Stage::Dictionary, Stage::Exact],
        vec![Stage::Dictionary, lev()],
        vec![Stage::Dictionary, stoilos()],
    ];
    if let Some(n) = neural {
        let n = || Stage::Neural(n.to_string());
        rows.extend([
            vec![Stage::Dictionary, n()],
            vec![Stage::Exact, n()],
            vec![Stage::Dictionary, Stage::Exact, n()],
            vec![Stage::Dictionary, lev(), n()],
            vec![Stage::Dictionary, stoilos(), n()],
        ]);
    }
    rows
}

fn spec_name(stages: &[Stage]) -> String {
    stages.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("+")
}

fn file_slug(method: &str) -> String {
    method.replace(':', "-")
}

pub fn render_trace(outcome: &TrainOutcome) -> String {
    let mut out = String::from("epoch\ttrain_loss\tdev_acc1\n");
    for e in &outcome.trace {
        let dev = e.dev_acc1.map_or("-".to_string(), |a| a.to_string());
        writeln!(out, "{}\t{}\t{}", e.epoch, e.train_loss, dev).unwrap();
    }
    writeln!(out, "# best epoch {}", outcome.best_epoch).unwrap();
    out
}

/// Runs the whole benchmark, writing every artefact under `out_dir`.
pub fn run_bench(inputs: &BenchInputs, cfg: &BenchConfig, out_dir: &Path) -> Result<BenchOutcome> {
    if cfg.k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    cfg.train.validate()?;
    cfg.walk.validate()?;
    let mut outputs = Vec::new();
    let emit = |outputs: &mut Vec<PathBuf>, rel: &str, contents: String| -> Result<()> {
        write_file(&out_dir.join(rel), contents)?;
        outputs.push(PathBuf::from(rel));
        Ok(())
    };

    let split = make_split(inputs.mentions, cfg.level, cfg.kind, cfg.ratios, cfg.seed)?;
    for (name, part) in [("train", &split.train), ("dev", &split.dev), ("test", &split.test)] {
        let rel = format!("split/{name}.tsv");
        write_corpus(&out_dir.join(&rel), part)?;
        outputs.push(PathBuf::from(rel));
    }
    log::info!(
        "split: {} train, {} dev, {} test",
        split.train.len(),
        split.dev.len(),
        split.test.len()
    );

    let dictionary = Arc::new(build_dictionary(&split.train, cfg.level));
    emit(&mut outputs, "dict.tsv", dictionary.render())?;

    let table = Arc::new(LabelTable::new(inputs.graph));
    let mut tuned = Vec::new();
    for metric in [FuzzyMetric::LevenshteinRatio, FuzzyMetric::stoilos()] {
        let sweep = tune_threshold(&table, &split.dev, cfg.level, &metric, &metric.default_grid())?;
        log::info!("{metric}: tau {} (dev Acc@1 {:.4})", sweep.best_tau, sweep.best_acc1);
        tuned.push((metric, sweep));
    }
    emit(&mut outputs, "thresholds.toml", render_thresholds(&tuned))?;

    let mut runnable = Vec::new();
    let mut skipped = Vec::new();
    for &r in &cfg.recipes {
        match missing_input(r, inputs) {
            Some(why) => {
                log::warn!("skipping {r}: {why}");
                skipped.push((r, why.to_string()));
            }
            None => runnable.push(r),
        }
    }

    let trained_nodes;
    let node2vec = match inputs.node2vec {
        Some(n) => Some(n),
        None if runnable.iter().any(|r| r.uses_node2vec()) => {
            let walks = generate_walks(
                inputs.graph,
                &WalkConfig {
                    seed: cfg.seed,
                    ..cfg.walk.clone()
                },
            )?;
            trained_nodes = train_sgns(
                &walks,
                &SgnsConfig {
                    seed: cfg.seed,
                    ..cfg.sgns.clone()
                },
            )?;
            emit(&mut outputs, "node2vec.txt", trained_nodes.render())?;
            Some(&trained_nodes)
        }
        None => None,
    };
    let res = Resources {
        graph: inputs.graph,
        word_vectors: inputs.word_vectors,
        node2vec,
        mention_stacks: inputs.mention_stacks,
        label_stacks: inputs.label_stacks,
    };

    let mut neural: HashMap<String, Arc<NeuralLinker>> = HashMap::new();
    for &r in &runnable {
        let rc = RecipeConfig {
            recipe: r,
            layer: cfg.layer,
            branch_dim: cfg.branch_dim,
        };
        let index = Arc::new(recipe::build_target_index(&rc, &res)?);
        let train_ex = recipe::examples(&rc, &res, &split.train, cfg.level)?;
        let dev_ex = recipe::examples(&rc, &res, &split.dev, cfg.level)?;
        let tc = TrainConfig {
            learning_rate: cfg.learning_rate.unwrap_or(r.default_learning_rate()),
            seed: cfg.seed,
            ..cfg.train.clone()
        };
        let model = recipe::init_model(&rc, &res, cfg.seed)?;
        log::info!("training {r} ({} parameters)", model.params().len());
        let outcome = align::train(model, &train_ex, &dev_ex, &index, &tc)?;
        emit(&mut outputs, &format!("models/{r}.ckpt"), outcome.model.render())?;
        emit(&mut outputs, &format!("models/{r}.trace.tsv"), render_trace(&outcome))?;
        let test_inputs = split
            .test
            .iter()
            .map(|m| Ok((m.id, recipe::mention_input(&rc, &res, m)?)))
            .collect::<Result<HashMap<_, _>>>()?;
        neural.insert(
            r.to_string(),
            Arc::new(NeuralLinker::new(r.to_string(), outcome.model, index, test_inputs)?),
        );
    }
    let best_neural = runnable.last().map(|r| r.to_string());
    if let Some(n) = &best_neural {
        if n != "n6" {
            log::warn!("n6 is unavailable; cascades back off to {n}");
        }
    }

    let mut ctx = LinkerContext::new(inputs.graph);
    ctx.dictionary = Some(dictionary);
    ctx.table = table;
    ctx.thresholds = tuned.iter().map(|(m, s)| (m.method(), s.best_tau)).collect();
    ctx.neural = neural;

    let mut methods: Vec<(String, Vec<Stage>)> = vec![
        ("dict".into(), vec![Stage::Dictionary]),
        ("exact".into(), vec![Stage::Exact]),
        ("lev".into(), vec![Stage::Fuzzy(FuzzyMetric::LevenshteinRatio, None)]),
        ("stoilos".into(), vec![Stage::Fuzzy(FuzzyMetric::stoilos(), None)]),
    ];
    for r in &runnable {
        methods.push((r.to_string(), vec![Stage::Neural(r.to_string())]));
    }
    for stages in cascade_rows(best_neural.as_deref()) {
        methods.push((spec_name(&stages), stages));
    }

    let mut rows = Vec::new();
    for (method, stages) in &methods {
        let cascade = ctx.cascade(stages)?;
        let predictions = link_all(&cascade as &dyn Linker, &split.test, cfg.k)?;
        let rel = format!("predictions/{}.tsv", file_slug(method));
        write_predictions(&out_dir.join(&rel), &predictions)?;
        outputs.push(PathBuf::from(rel));
        let report = eval::score(&PredictionSet::from_predictions(&predictions), &split.test, cfg.level);
        rows.push(ReportRow {
            method: method.clone(),
            split: "test".into(),
            level: cfg.level.to_string(),
            report,
        });
    }

    emit(&mut outputs, "report.txt", report_table(&rows, TableFormat::Text))?;
    emit(&mut outputs, "report.csv", report_table(&rows, TableFormat::Csv))?;
    emit(&mut outputs, "report.kv", machine_report(&rows))?;
    Ok(BenchOutcome { rows, skipped, outputs })
}
