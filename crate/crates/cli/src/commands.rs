use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use conceptlink::align::{self, AlignModel, TrainConfig};
use conceptlink::bench::{render_trace, run_bench, BenchConfig, BenchInputs};
use conceptlink::corpus::{
    load_corpus, make_split, split_stats, validate_against, write_corpus, Level, Ratios, SplitKind,
};
use conceptlink::embed::{LayerChoice, LayerStackSet, WordVectorStore};
use conceptlink::error::write_file;
use conceptlink::eval::{
    machine_report, report_table, score, write_predictions, PredictionSet, ReportRow, TableFormat,
};
use conceptlink::kg::load_graph;
use conceptlink::linker::{link_all, parse_cascade_spec, LinkerContext, NeuralLinker, Stage};
use conceptlink::matchers::{
    build_dictionary, load_thresholds, render_thresholds, tune_threshold, Dictionary, FuzzyMetric, LabelTable,
};
use conceptlink::node2vec::{generate_walks, train_sgns, NodeEmbeddings, SgnsConfig, WalkConfig};
use conceptlink::recipe::{self, Recipe, RecipeConfig, Resources};
use conceptlink::strsim::{jaro, jaro_winkler, levenshtein, levenshtein_ratio, stoilos_breakdown, StoilosParams};
use conceptlink::synth::{synthetic_dataset, SynthConfig};
use conceptlink::{ConceptGraph, Error, Result};

use crate::settings::Settings;
use crate::{
    BenchArgs, BuildDictArgs, Command, EvalArgs, GraphArgs, IngestKgArgs, LinkArgs, Node2vecArgs, ResourceArgs,
    SplitArgs, StrsimArgs, SynthArgs, TrainAlignArgs, TrainArgs, TuneArgs, WalkArgs,
};

type Files = Vec<(String, PathBuf)>;

/// Runs one subcommand and returns the manifest it wrote, if any.
pub fn dispatch(cmd: Command, s: &mut Settings, workers: usize) -> Result<Option<PathBuf>> {
    match cmd {
        Command::IngestKg(a) => ingest_kg(a, s).map(Some),
        Command::Split(a) => split(a, s).map(Some),
        Command::BuildDict(a) => build_dict(a, s).map(Some),
        Command::TuneThreshold(a) => tune(a, s).map(Some),
        Command::Node2vec(a) => node2vec(a, s, workers).map(Some),
        Command::TrainAlign(a) => train_align(a, s).map(Some),
        Command::Link(a) => link(a, s).map(Some),
        Command::Eval(a) => eval(a, s).map(Some),
        Command::Bench(a) => bench(a, s, workers).map(Some),
        Command::Synth(a) => synth(a, s).map(Some),
        Command::Strsim(a) => {
            strsim(a);
            Ok(None)
        }
    }
}

fn finish(s: &Settings, command: &str, inputs: &Files, outputs: &Files, path: PathBuf) -> Result<PathBuf> {
    let mut m = s.manifest(command);
    for (name, p) in inputs {
        m.input_file(name, p)?;
    }
    for (name, p) in outputs {
        m.output_file(name, p)?;
    }
    m.write(&path)?;
    Ok(path)
}

fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

fn graph(s: &mut Settings, g: GraphArgs, inputs: &mut Files) -> Result<ConceptGraph> {
    let concepts = s.input("concepts", g.concepts)?;
    let edges = s.input("edges", g.edges)?;
    let graph = load_graph(&concepts, &edges)?;
    log::info!("graph: {} concepts, {} IS-A edges", graph.len(), graph.edge_count());
    inputs.push(("concepts".into(), concepts));
    inputs.push(("edges".into(), edges));
    Ok(graph)
}

fn corpus(
    s: &mut Settings,
    key: &str,
    flag: Option<PathBuf>,
    inputs: &mut Files,
) -> Result<Vec<conceptlink::corpus::Mention>> {
    let p = s.input(key, flag)?;
    let ms = load_corpus(&p)?;
    log::info!("{}: {} mentions", p.display(), ms.len());
    inputs.push((key.into(), p));
    Ok(ms)
}

#[derive(Default)]
struct Loaded {
    words: Option<WordVectorStore>,
    nodes: Option<NodeEmbeddings>,
    mention_stacks: Option<LayerStackSet>,
    label_stacks: Option<LayerStackSet>,
}

impl Loaded {
    fn load(s: &mut Settings, r: ResourceArgs, inputs: &mut Files) -> Result<Self> {
        let mut out = Loaded::default();
        if let Some(p) = s.input_opt("word_vectors", r.word_vectors)? {
            out.words = Some(WordVectorStore::load(&p)?);
            inputs.push(("word_vectors".into(), p));
        }
        if let Some(p) = s.input_opt("node2vec", r.node2vec)? {
            out.nodes = Some(NodeEmbeddings::load(&p)?);
            inputs.push(("node2vec".into(), p));
        }
        if let Some(p) = s.input_opt("mention_stacks", r.mention_stacks)? {
            out.mention_stacks = Some(LayerStackSet::load(&p)?);
            inputs.push(("mention_stacks".into(), p));
        }
        if let Some(p) = s.input_opt("label_stacks", r.label_stacks)? {
            out.label_stacks = Some(LayerStackSet::load(&p)?);
            inputs.push(("label_stacks".into(), p));
        }
        Ok(out)
    }

    fn resources<'a>(&'a self, graph: &'a ConceptGraph) -> Resources<'a> {
        Resources {
            graph,
            word_vectors: self.words.as_ref(),
            node2vec: self.nodes.as_ref(),
            mention_stacks: self.mention_stacks.as_ref(),
            label_stacks: self.label_stacks.as_ref(),
        }
    }
}

fn walk_config(s: &mut Settings, w: WalkArgs, seed: u64) -> Result<WalkConfig> {
    let d = WalkConfig::default();
    let cfg = WalkConfig {
        p: s.or("p", w.p, d.p)?,
        q: s.or("q", w.q, d.q)?,
        walk_length: s.or("walk_length", w.walk_length, d.walk_length)?,
        walks_per_node: s.or("walks", w.walks, d.walks_per_node)?,
        seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn train_config(
    s: &mut Settings,
    t: &TrainArgs,
    recipe: Option<Recipe>,
    seed: u64,
) -> Result<(TrainConfig, Option<f64>)> {
    let d = TrainConfig::default();
    let lr = s.get("lr", t.lr)?;
    let cfg = TrainConfig {
        alpha: s.or("alpha", t.alpha, d.alpha)?,
        batch_size: s.or("batch_size", t.batch_size, d.batch_size)?,
        epochs: s.or("epochs", t.epochs, d.epochs)?,
        learning_rate: lr
            .or(recipe.map(Recipe::default_learning_rate))
            .unwrap_or(d.learning_rate),
        weight_decay: s.or("weight_decay", t.weight_decay, d.weight_decay)?,
        seed,
        ..d
    };
    cfg.validate()?;
    Ok((cfg, lr))
}

fn ingest_kg(a: IngestKgArgs, s: &mut Settings) -> Result<PathBuf> {
    let mut inputs = Files::new();
    let g = graph(s, a.graph, &mut inputs)?;
    let out: PathBuf = s.need("out", a.out)?;
    let (c, e) = (out.join("concepts.tsv"), out.join("edges.tsv"));
    g.write(&c, &e)?;
    println!(
        "{} concepts, {} IS-A edges, {} distinct labels",
        g.len(),
        g.edge_count(),
        g.label_index().len()
    );
    let outputs = vec![("concepts".into(), c), ("edges".into(), e)];
    finish(s, "ingest-kg", &inputs, &outputs, out.join("manifest.toml"))
}

fn split(a: SplitArgs, s: &mut Settings) -> Result<PathBuf> {
    let mut inputs = Files::new();
    let mentions = corpus(s, "corpus", a.corpus, &mut inputs)?;
    let concepts = s.input_opt("concepts", a.graph.concepts)?;
    let edges = s.input_opt("edges", a.graph.edges)?;
    match (concepts, edges) {
        (Some(c), Some(e)) => {
            validate_against(&mentions, &load_graph(&c, &e)?)?;
            inputs.push(("concepts".into(), c));
            inputs.push(("edges".into(), e));
        }
        (None, None) => {}
        _ => return Err(Error::Config("--concepts and --edges go together".into())),
    }
    let kind = s.or("kind", a.kind, SplitKind::Stratified)?;
    let level = s.or("level", a.level, Level::Specific)?;
    let ratios = s.or("ratios", a.ratios, Ratios::default())?;
    let seed = s.seed(a.seed)?;
    let out: PathBuf = s.need("out", a.out)?;

    let sp = make_split(&mentions, level, kind, ratios, seed)?;
    let mut outputs = Files::new();
    for (name, part) in [("train", &sp.train), ("dev", &sp.dev), ("test", &sp.test)] {
        let p = out.join(format!("{name}.tsv"));
        write_corpus(&p, part)?;
        outputs.push((name.into(), p));
    }
    println!("{}", split_stats(&sp));
    finish(s, "split", &inputs, &outputs, out.join("split.meta"))
}

fn build_dict(a: BuildDictArgs, s: &mut Settings) -> Result<PathBuf> {
    let mut inputs = Files::new();
    let train = corpus(s, "train", a.train, &mut inputs)?;
    let level = s.or("level", a.level, Level::Specific)?;
    let out: PathBuf = s.need("out", a.out)?;
    let dict = build_dictionary(&train, level);
    dict.save(&out)?;
    println!("{} terms ({} empty terms skipped)", dict.len(), dict.skipped());
    let outputs = vec![("dictionary".into(), out.clone())];
    finish(s, "build-dict", &inputs, &outputs, sidecar(&out, ".manifest.toml"))
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("invalid threshold {t:?} in grid")))
        })
        .collect()
}

fn tune(a: TuneArgs, s: &mut Settings) -> Result<PathBuf> {
    let mut inputs = Files::new();
    let g = graph(s, a.graph, &mut inputs)?;
    let dev = corpus(s, "dev", a.dev, &mut inputs)?;
    let level = s.or("level", a.level, Level::Specific)?;
    let metric: String = s.or("metric", a.metric, "both".into())?;
    let grid = s.get::<String>("grid", a.grid)?.map(|g| parse_grid(&g)).transpose()?;
    let out: PathBuf = s.need("out", a.out)?;
    let metrics = match metric.as_str() {
        "both" => vec![FuzzyMetric::LevenshteinRatio, FuzzyMetric::stoilos()],
        m => vec![m.parse()?],
    };
    let table = LabelTable::new(&g);
    let mut tuned = Vec::new();
    for m in metrics {
        let grid = grid.clone().unwrap_or_else(|| m.default_grid());
        let sweep = tune_threshold(&table, &dev, level, &m, &grid)?;
        for (tau, acc) in &sweep.accuracies {
            println!("{m}\ttau={tau}\tdev_acc1={acc:.4}");
        }
        println!("{m}: best tau {} (dev Acc@1 {:.4})", sweep.best_tau, sweep.best_acc1);
        tuned.push((m, sweep));
    }
    write_file(&out, render_thresholds(&tuned))?;
    let outputs = vec![("thresholds".into(), out.clone())];
    finish(s, "tune-threshold", &inputs, &outputs, sidecar(&out, ".manifest.toml"))
}

fn node2vec(a: Node2vecArgs, s: &mut Settings, workers: usize) -> Result<PathBuf> {
    let mut inputs = Files::new();
    let g = graph(s, a.graph, &mut inputs)?;
    let seed = s.seed(a.seed)?;
    let walk = walk_config(s, a.walk, seed)?;
    let d = SgnsConfig::default();
    let sgns = SgnsConfig {
        dim: s.or("dim", a.dim, d.dim)?,
        window: s.or("window", a.window, d.window)?,
        negatives: s.or("neg", a.neg, d.negatives)?,
        epochs: s.or("epochs", a.epochs, d.epochs)?,
        initial_learning_rate: s.or("lr", a.lr, d.initial_learning_rate)?,
        seed,
        workers,
    };
    let out: PathBuf = s.need("out", a.out)?;
    let walks = generate_walks(&g, &walk)?;
    log::info!("{} walks", walks.len());
    let emb = train_sgns(&walks, &sgns)?;
    emb.save(&out)?;
    println!("{} node vectors of dimension {}", emb.len(), emb.dim);
    let outputs = vec![("embeddings".into(), out.clone())];
    finish(s, "node2vec", &inputs, &outputs, sidecar(&out, ".manifest.toml"))
}

fn train_align(a: TrainAlignArgs, s: &mut Settings) -> Result<PathBuf> {
    let mut inputs = Files::new();
    let g = graph(s, a.graph, &mut inputs)?;
    let train = corpus(s, "train", a.train, &mut inputs)?;
    let dev = match s.get::<PathBuf>("dev", a.dev)? {
        Some(p) => corpus(s, "dev", Some(p), &mut inputs)?,
        None => {
            log::warn!("no --dev set; the last epoch is kept");
            Vec::new()
        }
    };
    let level = s.or("level", a.level, Level::Specific)?;
    let recipe: Recipe = s.need("recipe", a.recipe)?;
    let loaded = Loaded::load(s, a.resources, &mut inputs)?;
    let rc = RecipeConfig {
        recipe,
        layer: s.or("layer", a.train_args.layer, LayerChoice::Top)?,
        branch_dim: s.or("branch_dim", a.train_args.branch_dim, 300)?,
    };
    let seed = s.seed(a.seed)?;
    let (tc, _) = train_config(s, &a.train_args, Some(recipe), seed)?;
    let out: PathBuf = s.need("out", a.out)?;

    let res = loaded.resources(&g);
    let index = recipe::build_target_index(&rc, &res)?;
    let train_ex = recipe::examples(&rc, &res, &train, level)?;
    let dev_ex = recipe::examples(&rc, &res, &dev, level)?;
    let model = recipe::init_model(&rc, &res, seed)?;
    log::info!(
        "{recipe}: {} parameters, {} train / {} dev examples",
        model.params().len(),
        train_ex.len(),
        dev_ex.len()
    );
    let outcome = align::train(model, &train_ex, &dev_ex, &index, &tc)?;
    outcome.model.save(&out)?;
    let trace = sidecar(&out, ".trace.tsv");
    write_file(&trace, render_trace(&outcome))?;
    let best = &outcome.trace[outcome.best_epoch - 1];
    match best.dev_acc1 {
        Some(acc) => println!("best epoch {} (dev Acc@1 {acc:.4})", outcome.best_epoch),
        None => println!("kept epoch {}", outcome.best_epoch),
    }
    let outputs = vec![("checkpoint".into(), out.clone()), ("trace".into(), trace)];
    finish(s, "train-align", &inputs, &outputs, sidecar(&out, ".manifest.toml"))
}

/// Splits `NAME=PATH`; a bare path is named after the checkpoint's recipe.
fn model_spec(spec: &str) -> (Option<&str>, &str) {
    match spec.split_once('=') {
        Some((name, path)) if !name.is_empty() => (Some(name), path),
        _ => (None, spec),
    }
}

fn link(a: LinkArgs, s: &mut Settings) -> Result<PathBuf> {
    let mut inputs = Files::new();
    let g = graph(s, a.graph, &mut inputs)?;
    let mentions = corpus(s, "mentions", a.mentions, &mut inputs)?;
    let method: String = s.need("method", a.method)?;
    let cascade_spec: Option<String> = s.get("cascade_spec", a.cascade_spec)?;
    let k = s.or("k", a.k, 10usize)?;
    let dict_path = s.input_opt("dict", a.dict)?;
    let thresholds_path = s.input_opt("thresholds", a.thresholds)?;
    let tau = s.get("tau", a.tau)?;
    let models = s.list("model", a.model)?;
    let loaded = Loaded::load(s, a.resources, &mut inputs)?;
    let out: PathBuf = s.need("out", a.out)?;
    let mut stages = match method.as_str() {
        "dictionary" | "dict" => vec![Stage::Dictionary],
        "exact" => vec![Stage::Exact],
        "lev" | "stoilos" => vec![Stage::Fuzzy(method.parse()?, tau)],
        "neural" => match models.as_slice() {
            [_] => vec![Stage::Neural(String::new())],
            _ => return Err(Error::Config("--method neural takes exactly one --model".into())),
        },
        "cascade" => parse_cascade_spec(
            cascade_spec
                .as_deref()
                .ok_or_else(|| Error::Config("--method cascade needs --cascade-spec".into()))?,
        )?,
        other => return Err(Error::Config(format!("unknown method {other:?}"))),
    };

    let mut ctx = LinkerContext::new(&g);
    ctx.table = Arc::new(LabelTable::new(&g));
    if let Some(p) = dict_path {
        ctx.dictionary = Some(Arc::new(Dictionary::load(&p)?));
        inputs.push(("dict".into(), p));
    }
    if let Some(p) = thresholds_path {
        ctx.thresholds = load_thresholds(&p)?;
        inputs.push(("thresholds".into(), p));
    }
    let res = loaded.resources(&g);
    let mut names = Vec::new();
    for spec in &models {
        let (name, path) = model_spec(spec);
        let path = PathBuf::from(path);
        crate::settings::check_exists(&path)?;
        let model = AlignModel::load(&path)?;
        let rc = RecipeConfig::from_model(&model)?;
        let name = name.map_or_else(|| rc.recipe.to_string(), str::to_string);
        if ctx.neural.contains_key(&name) {
            return Err(Error::Config(format!("two models named {name:?}")));
        }
        let index = Arc::new(recipe::build_target_index(&rc, &res)?);
        let features = mentions
            .iter()
            .map(|m| Ok((m.id, recipe::mention_input(&rc, &res, m)?)))
            .collect::<Result<HashMap<_, _>>>()?;
        let linker = NeuralLinker::new(name.clone(), model, index, features)?;
        ctx.neural.insert(name.clone(), Arc::new(linker));
        inputs.push((format!("model_{name}"), path));
        names.push(name);
    }
    // A lone neural stage takes whatever name its model ended up with.
    if let [Stage::Neural(n)] = stages.as_mut_slice() {
        if n.is_empty() {
            *n = names[0].clone();
        }
    }

    let linker = ctx.cascade(&stages)?;
    let predictions = link_all(&linker, &mentions, k)?;
    write_predictions(&out, &predictions)?;

    let mut by: BTreeMap<String, usize> = BTreeMap::new();
    for p in &predictions {
        let key = p
            .answer
            .as_ref()
            .map_or("(no answer)".to_string(), |a| a.provenance.clone());
        *by.entry(key).or_default() += 1;
    }
    for (prov, n) in &by {
        println!("{prov}\t{n}");
    }
    let outputs = vec![("predictions".into(), out.clone())];
    finish(s, "link", &inputs, &outputs, sidecar(&out, ".manifest.toml"))
}

fn eval(a: EvalArgs, s: &mut Settings) -> Result<PathBuf> {
    let mut inputs = Files::new();
    let pred_path = s.input("predictions", a.predictions)?;
    let gold = corpus(s, "gold", a.gold, &mut inputs)?;
    let level = s.or("level", a.level, Level::Specific)?;
    let stem = pred_path
        .file_stem()
        .map_or("predictions".to_string(), |s| s.to_string_lossy().into_owned());
    let method: String = s.or("method", a.method, stem)?;
    let split: String = s.or("split", a.split, "test".into())?;
    let format = s.or("format", a.format, TableFormat::Text)?;
    let out: PathBuf = s.or("out", a.out, sidecar(&pred_path, ".eval.kv"))?;

    let set = PredictionSet::load(&pred_path)?;
    inputs.push(("predictions".into(), pred_path));
    let report = score(&set, &gold, level);
    let row = ReportRow {
        method,
        split,
        level: level.to_string(),
        report,
    };
    print!("{}", report_table(std::slice::from_ref(&row), format));
    if format == TableFormat::Text && row.report.breakdown.len() > 1 {
        for b in &row.report.breakdown {
            println!("  answered by {}: {} mentions, Acc@1 {:.4}", b.provenance, b.n, b.acc1);
        }
    }
    write_file(&out, machine_report(std::slice::from_ref(&row)))?;
    let outputs = vec![("report".into(), out.clone())];
    finish(s, "eval", &inputs, &outputs, sidecar(&out, ".manifest.toml"))
}

fn parse_recipes(text: &str) -> Result<Vec<Recipe>> {
    if text.trim() == "all" {
        return Ok(Recipe::ALL.to_vec());
    }
    if text.trim().is_empty() || text.trim() == "none" {
        return Ok(Vec::new());
    }
    text.split(',').map(|r| r.trim().parse()).collect()
}

fn bench(a: BenchArgs, s: &mut Settings, workers: usize) -> Result<PathBuf> {
    let mut inputs = Files::new();
    let g = graph(s, a.graph, &mut inputs)?;
    let mentions = corpus(s, "corpus", a.corpus, &mut inputs)?;
    validate_against(&mentions, &g)?;
    let loaded = Loaded::load(s, a.resources, &mut inputs)?;
    let seed = s.seed(a.seed)?;
    let d = BenchConfig::default();
    let sd = SgnsConfig::default();
    let recipes: String = s.or("recipes", a.recipes, "all".into())?;
    let layer = s.or("layer", a.train_args.layer, d.layer)?;
    let branch_dim = s.or("branch_dim", a.train_args.branch_dim, d.branch_dim)?;
    let (train, lr) = train_config(s, &a.train_args, None, seed)?;
    let cfg = BenchConfig {
        level: s.or("level", a.level, d.level)?,
        kind: s.or("kind", a.kind, d.kind)?,
        ratios: s.or("ratios", a.ratios, d.ratios)?,
        seed,
        k: s.or("k", a.k, d.k)?,
        recipes: parse_recipes(&recipes)?,
        layer,
        branch_dim,
        walk: walk_config(s, a.walk, seed)?,
        sgns: SgnsConfig {
            dim: s.or("n2v_dim", a.n2v_dim, sd.dim)?,
            window: s.or("n2v_window", a.n2v_window, sd.window)?,
            negatives: s.or("n2v_neg", a.n2v_neg, sd.negatives)?,
            epochs: s.or("n2v_epochs", a.n2v_epochs, sd.epochs)?,
            seed,
            workers,
            ..sd
        },
        train,
        learning_rate: lr,
    };
    let format = s.or("format", a.format, TableFormat::Text)?;
    let out: PathBuf = s.need("out", a.out)?;

    let bi = BenchInputs {
        graph: &g,
        mentions: &mentions,
        word_vectors: loaded.words.as_ref(),
        mention_stacks: loaded.mention_stacks.as_ref(),
        label_stacks: loaded.label_stacks.as_ref(),
        node2vec: loaded.nodes.as_ref(),
    };
    let outcome = run_bench(&bi, &cfg, &out)?;
    for (r, why) in &outcome.skipped {
        eprintln!("skipped {r}: {why}");
    }
    print!("{}", report_table(&outcome.rows, format));
    let outputs: Files = outcome
        .outputs
        .iter()
        .map(|rel| (rel.display().to_string(), out.join(rel)))
        .collect();
    finish(s, "bench", &inputs, &outputs, out.join("manifest.toml"))
}

fn synth(a: SynthArgs, s: &mut Settings) -> Result<PathBuf> {
    let d = SynthConfig::default();
    let cfg = SynthConfig {
        concepts: s.or("n_concepts", a.n_concepts, d.concepts)?,
        mentions: s.or("n_mentions", a.n_mentions, d.mentions)?,
        word_dim: s.or("word_dim", a.word_dim, d.word_dim)?,
        layers: s.or("layers", a.layers, d.layers)?,
        stack_dim: s.or("stack_dim", a.stack_dim, d.stack_dim)?,
        seed: s.seed(a.seed)?,
    };
    let out: PathBuf = s.need("out", a.out)?;
    let data = synthetic_dataset(&cfg)?;
    let f = |n: &str| out.join(n);
    data.graph.write(&f("concepts.tsv"), &f("edges.tsv"))?;
    write_corpus(&f("corpus.tsv"), &data.mentions)?;
    data.word_vectors.save(&f("words.vec"))?;
    data.mention_stacks.save(&f("mention_stacks.txt"))?;
    data.label_stacks.save(&f("label_stacks.txt"))?;
    let outputs: Files = [
        "concepts.tsv",
        "edges.tsv",
        "corpus.tsv",
        "words.vec",
        "mention_stacks.txt",
        "label_stacks.txt",
    ]
    .iter()
    .map(|n| (n.to_string(), f(n)))
    .collect();
    println!(
        "{} concepts, {} mentions written to {}",
        data.graph.len(),
        data.mentions.len(),
        out.display()
    );
    finish(s, "synth", &Files::new(), &outputs, out.join("manifest.toml"))
}

fn strsim(a: StrsimArgs) {
    let (x, y) = (a.x.as_str(), a.y.as_str());
    let st = stoilos_breakdown(x, y, &StoilosParams::default());
    println!("levenshtein\t{}", levenshtein(x, y));
    println!("levenshtein_ratio\t{}", levenshtein_ratio(x, y));
    println!("jaro\t{}", jaro(x, y));
    println!("jaro_winkler\t{}", jaro_winkler(x, y));
    println!("stoilos_comm\t{}", st.comm);
    println!("stoilos_diff\t{}", st.diff);
    println!("stoilos_winkler\t{}", st.jaro_winkler);
    println!("stoilos_similarity\t{}", st.similarity);
    println!("stoilos_distance\t{}", st.distance());
}
