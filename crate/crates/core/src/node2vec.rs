//! Graph-structural concept embeddings: second-order biased random walks
//! over the undirected IS-A graph, then skip-gram with negative sampling.

use std::cell::Cell;
use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::embed::{Vector, WordVectorStore};
use crate::error::{Error, Result};
use crate::kg::{ConceptGraph, Sctid};

#[derive(Debug, Clone, PartialEq)]
pub struct WalkConfig {
    /// Return parameter: weight 1/p for stepping back to the previous node.
    pub p: f64,
    /// In-out parameter: weight 1/q for moving away from the previous node.
    pub q: f64,
    pub walk_length: usize,
    pub walks_per_node: usize,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            p: 1.0,
            q: 1.0,
            walk_length: 80,
            walks_per_node: 10,
            seed: 42,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.q > 0.0 && self.p.is_finite() && self.q.is_finite()) {
            return Err(Error::Config("p and q must be positive".into()));
        }
        if self.walk_length < 2 || self.walks_per_node < 1 {
            return Err(Error::Config("walk_length must be >= 2 and walks_per_node >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgnsConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_learning_rate: f64,
    pub seed: u64,
    /// More than one worker enables lock-free shared updates, which are not
    /// reproducible bit for bit.
    pub workers: usize,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dim: 300,
            window: 10,
            negatives: 5,
            epochs: 1,
            initial_learning_rate: 0.025,
            seed: 42,
            workers: 1,
        }
    }
}

impl SgnsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.window == 0 || self.negatives == 0 {
            return Err(Error::Config("dim, window and negatives must be >= 1".into()));
        }
        if !(self.initial_learning_rate >= 0.0) {
            return Err(Error::Config("learning rate must be non-negative".into()));
        }
        Ok(())
    }
}

/// SplitMix64 finaliser.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn stream_seed(seed: u64, a: u64, b: u64) -> u64 {
    mix64(mix64(seed ^ mix64(a)) ^ b)
}

/// Walker's alias table for O(1) sampling from a discrete distribution.
#[derive(Debug, Clone)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<usize>,
}

impl AliasTable {
    /// `weights` must be non-empty, non-negative, with a positive sum.
    pub fn new(weights: &[f64]) -> Self {
        let n = weights.len();
        let total: f64 = weights.iter().sum();
        let mut prob: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
        let mut alias = vec![0; n];
        let (mut small, mut large): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| prob[i] < 1.0);
        while let (Some(s), Some(&l)) = (small.pop(), large.last()) {
            alias[s] = l;
            prob[l] -= 1.0 - prob[s];
            if prob[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        for i in large.into_iter().chain(small) {
            prob[i] = 1.0;
        }
        AliasTable { prob, alias }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let i = rng.gen_range(0..self.prob.len());
        if rng.gen::<f64>() < self.prob[i] {
            i
        } else {
            self.alias[i]
        }
    }
}

/// Index-based undirected view of a [`ConceptGraph`].
#[derive(Debug, Clone)]
pub struct WalkGraph {
    nodes: Vec<Sctid>,
    index: HashMap<Sctid, usize>,
    adj: Vec<Vec<usize>>,
}

impl WalkGraph {
    pub fn new(graph: &ConceptGraph) -> Self {
        let nodes: Vec<Sctid> = graph.ids().collect();
        let index: HashMap<Sctid, usize> = nodes.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let adj = nodes
            .iter()
            .map(|s| {
                graph
                    .undirected_neighbors(*s)
                    .expect("node comes from the graph")
                    .iter()
                    .map(|n| index[n])
                    .collect()
            })
            .collect();
        WalkGraph { nodes, index, adj }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, sctid: Sctid) -> Result<usize> {
        self.index.get(&sctid).copied().ok_or(Error::NotFound(sctid))
    }

    pub fn sctid(&self, i: usize) -> Sctid {
        self.nodes[i]
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adj[a].binary_search(&b).is_ok()
    }

    /// Unnormalised weights of stepping from `cur` (reached from `prev`) to
    /// each neighbour of `cur`, in neighbour order.
    pub fn transition_weights(&self, prev: usize, cur: usize, p: f64, q: f64) -> Vec<f64> {
        self.adj[cur]
            .iter()
            .map(|&x| {
                if x == prev {
                    1.0 / p
                } else if self.adjacent(prev, x) {
                    1.0
                } else {
                    1.0 / q
                }
            })
            .collect()
    }

    /// Normalised transition distribution as (next node, probability).
    pub fn transition_probabilities(&self, prev: Sctid, cur: Sctid, p: f64, q: f64) -> Result<Vec<(Sctid, f64)>> {
        let (pi, ci) = (self.index_of(prev)?, self.index_of(cur)?);
        let w = self.transition_weights(pi, ci, p, q);
        let total: f64 = w.iter().sum();
        Ok(self.adj[ci]
            .iter()
            .zip(w)
            .map(|(&x, wx)| (self.nodes[x], wx / total))
            .collect())
    }
}

/// Walk state with a lazily filled cache of per-edge alias tables.
pub struct Walker<'g> {
    graph: &'g WalkGraph,
    p: f64,
    q: f64,
    cache: HashMap<(usize, usize), AliasTable>,
}

impl<'g> Walker<'g> {
    pub fn new(graph: &'g WalkGraph, p: f64, q: f64) -> Self {
        Walker {
            graph,
            p,
            q,
            cache: HashMap::new(),
        }
    }

    /// Samples the successor of `cur` given the previous node.
    pub fn step<R: Rng + ?Sized>(&mut self, prev: usize, cur: usize, rng: &mut R) -> usize {
        let graph = self.graph;
        let (p, q) = (self.p, self.q);
        let table = self
            .cache
            .entry((prev, cur))
            .or_insert_with(|| AliasTable::new(&graph.transition_weights(prev, cur, p, q)));
        graph.adj[cur][table.sample(rng)]
    }

    pub fn walk<R: Rng + ?Sized>(&mut self, start: usize, length: usize, rng: &mut R) -> Vec<usize> {
        let mut walk = Vec::with_capacity(length);
        walk.push(start);
        while walk.len() < length {
            let cur = walk[walk.len() - 1];
            let nbrs = &self.graph.adj[cur];
            if nbrs.is_empty() {
                break;
            }
            let next = if walk.len() == 1 {
                nbrs[rng.gen_range(0..nbrs.len())]
            } else {
                self.step(walk[walk.len() - 2], cur, rng)
            };
            walk.push(next);
        }
        walk
    }
}

/// `walks_per_node` walks from every node, round by round. Each walk draws
/// from its own RNG stream keyed by (seed, node, round), so the output does
/// not depend on how walks are spread over threads.
pub fn generate_walks(graph: &ConceptGraph, cfg: &WalkConfig) -> Result<Vec<Vec<Sctid>>> {
    cfg.validate()?;
    let wg = WalkGraph::new(graph);
    let n = wg.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let walks = (0..n * cfg.walks_per_node)
        .into_par_iter()
        .map_init(
            || Walker::new(&wg, cfg.p, cfg.q),
            |walker, k| {
                let (round, node) = (k / n, k % n);
                let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, node as u64, round as u64));
                walker
                    .walk(node, cfg.walk_length, &mut rng)
                    .into_iter()
                    .map(|i| wg.sctid(i))
                    .collect()
            },
        )
        .collect();
    Ok(walks)
}

/// Concept id -> structural embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEmbeddings {
    pub dim: usize,
    pub vectors: BTreeMap<Sctid, Vector>,
}

impl NodeEmbeddings {
    pub fn get(&self, sctid: Sctid) -> Option<&Vector> {
        self.vectors.get(&sctid)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    fn to_store(&self) -> WordVectorStore {
        let mut store = WordVectorStore::new(self.dim);
        for (id, v) in &self.vectors {
            store
                .insert(id.to_string(), v.clone())
                .expect("embedding dims are uniform");
        }
        store
    }

    pub fn render(&self) -> String {
        self.to_store().render()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_store().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let store = WordVectorStore::load(path)?;
        Self::from_store(&store, &path.display().to_string())
    }

    pub fn parse(text: &str, path: &str) -> Result<Self> {
        Self::from_store(&WordVectorStore::parse(text, path)?, path)
    }

    fn from_store(store: &WordVectorStore, path: &str) -> Result<Self> {
        let mut vectors = BTreeMap::new();
        for (token, v) in store.iter() {
            let id: Sctid = token
                .parse()
                .map_err(|_| Error::parse(path, 0, format!("token {token:?} is not an sctid")))?;
            vectors.insert(id, v.clone());
        }
        Ok(NodeEmbeddings {
            dim: store.dim(),
            vectors,
        })
    }
}

trait SharedParams {
    fn get(&self, i: usize) -> f64;
    fn add(&self, i: usize, delta: f64);
}

impl SharedParams for [AtomicU64] {
    fn get(&self, i: usize) -> f64 {
        f64::from_bits(self[i].load(Ordering::Relaxed))
    }

    // Racy read-modify-write: concurrent updates may be lost (Hogwild).
    fn add(&self, i: usize, delta: f64) {
        let v = SharedParams::get(self, i) + delta;
        self[i].store(v.to_bits(), Ordering::Relaxed);
    }
}

struct Local<'a>(&'a [Cell<f64>]);

impl SharedParams for Local<'_> {
    fn get(&self, i: usize) -> f64 {
        self.0[i].get()
    }

    fn add(&self, i: usize, delta: f64) {
        self.0[i].set(self.0[i].get() + delta);
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn log_sigmoid(x: f64) -> f64 {
    // stable for large |x|
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// One SGD update for (center, context) plus negatives. Returns the pair's
/// loss before the update.
#[allow(clippy::too_many_arguments)]
fn sgd_pair<P: SharedParams + ?Sized>(
    input: &P,
    output: &P,
    dim: usize,
    center: usize,
    context: usize,
    negatives: &[usize],
    lr: f64,
    grad: &mut [f64],
) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let hi = center * dim;
    let mut loss = 0.0;
    for (target, label) in std::iter::once((context, 1.0)).chain(negatives.iter().map(|&n| (n, 0.0))) {
        let oi = target * dim;
        let f: f64 = (0..dim).map(|k| input.get(hi + k) * output.get(oi + k)).sum();
        loss -= if label == 1.0 { log_sigmoid(f) } else { log_sigmoid(-f) };
        let g = (label - sigmoid(f)) * lr;
        for (k, gk) in grad.iter_mut().enumerate() {
            *gk += g * output.get(oi + k);
            output.add(oi + k, g * input.get(hi + k));
        }
    }
    for (k, gk) in grad.iter().enumerate() {
        input.add(hi + k, *gk);
    }
    loss
}

/// Skip-gram parameters over a dense vocabulary `0..n`.
#[derive(Debug, Clone)]
pub struct SkipGram {
    pub dim: usize,
    pub input: Vec<f64>,
    pub output: Vec<f64>,
}

impl SkipGram {
    /// word2vec initialisation: inputs uniform in ±0.5/dim, outputs zero.
    pub fn new(vocab: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 0.5 / dim as f64;
        SkipGram {
            dim,
            input: (0..vocab * dim).map(|_| rng.gen_range(-bound..bound)).collect(),
            output: vec![0.0; vocab * dim],
        }
    }

    /// Negative-sampling loss of one (center, context, negatives) example.
    pub fn loss(&self, center: usize, context: usize, negatives: &[usize]) -> f64 {
        let d = self.dim;
        let h = &self.input[center * d..(center + 1) * d];
        let score = |t: usize| -> f64 { h.iter().zip(&self.output[t * d..(t + 1) * d]).map(|(a, b)| a * b).sum() };
        -log_sigmoid(score(context)) - negatives.iter().map(|&n| log_sigmoid(-score(n))).sum::<f64>()
    }

    pub fn step(&mut self, center: usize, context: usize, negatives: &[usize], lr: f64) -> f64 {
        let mut grad = vec![0.0; self.dim];
        let dim = self.dim;
        let input = Local(Cell::from_mut(&mut self.input[..]).as_slice_of_cells());
        let output = Local(Cell::from_mut(&mut self.output[..]).as_slice_of_cells());
        sgd_pair(&input, &output, dim, center, context, negatives, lr, &mut grad)
    }
}

struct Corpus {
    vocab: Vec<Sctid>,
    walks: Vec<Vec<usize>>,
    noise: AliasTable,
    tokens: usize,
}

fn build_corpus(walks: &[Vec<Sctid>]) -> Corpus {
    let mut counts: BTreeMap<Sctid, usize> = BTreeMap::new();
    for w in walks {
        for s in w {
            *counts.entry(*s).or_default() += 1;
        }
    }
    let vocab: Vec<Sctid> = counts.keys().copied().collect();
    let index: HashMap<Sctid, usize> = vocab.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let noise = AliasTable::new(&counts.values().map(|&c| (c as f64).powf(0.75)).collect::<Vec<_>>());
    let walks: Vec<Vec<usize>> = walks.iter().map(|w| w.iter().map(|s| index[s]).collect()).collect();
    let tokens = walks.iter().map(Vec::len).sum();
    Corpus {
        vocab,
        walks,
        noise,
        tokens,
    }
}

#[allow(clippy::too_many_arguments)]
fn train_shard<P: SharedParams + ?Sized>(
    input: &P,
    output: &P,
    corpus: &Corpus,
    walks: &[Vec<usize>],
    cfg: &SgnsConfig,
    shard_tokens: usize,
    seed: u64,
) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grad = vec![0.0; cfg.dim];
    let mut negs = Vec::with_capacity(cfg.negatives);
    let total = (cfg.epochs * shard_tokens).max(1) as f64;
    let mut seen = 0usize;
    for _ in 0..cfg.epochs {
        for walk in walks {
            for (i, &center) in walk.iter().enumerate() {
                let lr = cfg.initial_learning_rate * (1.0 - seen as f64 / total).max(1e-4);
                seen += 1;
                let reduced = rng.gen_range(0..cfg.window);
                let span = cfg.window - reduced;
                let lo = i.saturating_sub(span);
                let hi = (i + span + 1).min(walk.len());
                for (j, &context) in walk.iter().enumerate().take(hi).skip(lo) {
                    if j == i {
                        continue;
                    }
                    negs.clear();
                    for _ in 0..cfg.negatives {
                        let n = corpus.noise.sample(&mut rng);
                        if n != context {
                            negs.push(n);
                        }
                    }
                    sgd_pair(input, output, cfg.dim, center, context, &negs, lr, &mut grad);
                }
            }
        }
    }
}

/// Trains skip-gram embeddings over the walk corpus. With one worker the
/// result is a pure function of (walks, cfg).
pub fn train_sgns(walks: &[Vec<Sctid>], cfg: &SgnsConfig) -> Result<NodeEmbeddings> {
    cfg.validate()?;
    if walks.iter().all(Vec::is_empty) {
        return Err(Error::Config("walk corpus is empty".into()));
    }
    let corpus = build_corpus(walks);
    let mut model = SkipGram::new(corpus.vocab.len(), cfg.dim, cfg.seed);
    if cfg.workers <= 1 {
        let input = Local(Cell::from_mut(&mut model.input[..]).as_slice_of_cells());
        let output = Local(Cell::from_mut(&mut model.output[..]).as_slice_of_cells());
        train_shard(
            &input,
            &output,
            &corpus,
            &corpus.walks,
            cfg,
            corpus.tokens,
            stream_seed(cfg.seed, 0, 1),
        );
    } else {
        let to_atomic = |v: &[f64]| -> Vec<AtomicU64> { v.iter().map(|x| AtomicU64::new(x.to_bits())).collect() };
        let input = to_atomic(&model.input);
        let output = to_atomic(&model.output);
        let chunk = corpus.walks.len().div_ceil(cfg.workers);
        std::thread::scope(|s| {
            for (w, shard) in corpus.walks.chunks(chunk).enumerate() {
                let (input, output, corpus) = (&input[..], &output[..], &corpus);
                let tokens = shard.iter().map(Vec::len).sum();
                s.spawn(move || {
                    train_shard(
                        input,
                        output,
                        corpus,
                        shard,
                        cfg,
                        tokens,
                        stream_seed(cfg.seed, w as u64, 1),
                    )
                });
            }
        });
        model.input = input
            .iter()
            .map(|a| f64::from_bits(a.load(Ordering::Relaxed)))
            .collect();
    }
    let d = cfg.dim;
    let vectors = corpus
        .vocab
        .iter()
        .enumerate()
        .map(|(i, s)| (*s, Vector(model.input[i * d..(i + 1) * d].to_vec())))
        .collect();
    Ok(NodeEmbeddings { dim: d, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::cosine;
    use crate::kg::Concept;

    fn graph(n: u64, edges: &[(u64, u64)]) -> ConceptGraph {
        ConceptGraph::from_parts(
            (1..=n).map(|i| Concept::new(Sctid(i), vec![format!("c{i}")], "t")),
            edges.iter().map(|(a, b)| (Sctid(*a), Sctid(*b))),
        )
        .unwrap()
    }

    #[test]
    fn single_edge_alternates() {
        let g = graph(2, &[(1, 2)]);
        let cfg = WalkConfig {
            walk_length: 4,
            walks_per_node: 1,
            p: 0.3,
            q: 7.0,
            ..Default::default()
        };
        let walks = generate_walks(&g, &cfg).unwrap();
        assert_eq!(walks[0], vec![Sctid(1), Sctid(2), Sctid(1), Sctid(2)]);
    }

    #[test]
    fn isolated_nodes_and_empty_graph() {
        let g = graph(3, &[(1, 2)]);
        let walks = generate_walks(
            &g,
            &WalkConfig {
                walks_per_node: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(walks[2], vec![Sctid(3)]);
        assert!(generate_walks(&ConceptGraph::default(), &WalkConfig::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn biased_weights_on_path() {
        // a(1) - b(2) - c(3), arrived at b from a
        let wg = WalkGraph::new(&graph(3, &[(1, 2), (2, 3)]));
        assert_eq!(wg.transition_weights(0, 1, 0.25, 4.0), vec![4.0, 0.25]);
        let probs = wg.transition_probabilities(Sctid(1), Sctid(2), 0.25, 4.0).unwrap();
        assert!((probs[0].1 - 16.0 / 17.0).abs() < 1e-15);
        // p = q = 1: uniform
        let uni = wg.transition_probabilities(Sctid(1), Sctid(2), 1.0, 1.0).unwrap();
        assert_eq!(uni[0].1, 0.5);
    }

    #[test]
    fn weight_one_for_common_neighbours() {
        // triangle 1-2-3 plus pendant 4 on 2: from 1 at 2, node 3 is adjacent to 1
        let wg = WalkGraph::new(&graph(4, &[(1, 2), (2, 3), (1, 3), (4, 2)]));
        assert_eq!(wg.transition_weights(0, 1, 2.0, 0.5), vec![0.5, 1.0, 2.0]);
    }

    #[test]
    fn walks_are_valid_paths_and_deterministic() {
        let g = graph(6, &[(1, 2), (2, 3), (3, 4), (5, 3), (6, 5)]);
        let cfg = WalkConfig {
            walk_length: 15,
            walks_per_node: 3,
            p: 0.5,
            q: 2.0,
            seed: 9,
        };
        let walks = generate_walks(&g, &cfg).unwrap();
        assert_eq!(walks.len(), 18);
        for w in &walks {
            assert_eq!(w.len(), 15);
            for pair in w.windows(2) {
                assert!(g.undirected_neighbors(pair[0]).unwrap().contains(&pair[1]));
            }
        }
        assert_eq!(walks, generate_walks(&g, &cfg).unwrap());
    }

    #[test]
    fn alias_table_matches_weights() {
        let t = AliasTable::new(&[1.0, 2.0, 7.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut counts = [0usize; 3];
        for _ in 0..100_000 {
            counts[t.sample(&mut rng)] += 1;
        }
        for (c, p) in counts.iter().zip([0.1, 0.2, 0.7]) {
            assert!((*c as f64 / 1e5 - p).abs() < 0.01);
        }
    }

    #[test]
    fn single_node_training_keeps_init() {
        let walks = vec![vec![Sctid(5)]];
        let cfg = SgnsConfig {
            dim: 4,
            ..Default::default()
        };
        let emb = train_sgns(&walks, &cfg).unwrap();
        let init = SkipGram::new(1, 4, cfg.seed);
        assert_eq!(emb.get(Sctid(5)).unwrap().0, init.input);
    }

    #[test]
    fn batch_loss_decreases() {
        let mut model = SkipGram::new(6, 8, 3);
        // nudge output vectors away from zero so every term has gradient
        model
            .output
            .iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = ((i % 7) as f64 - 3.0) * 0.01);
        let batch = [
            (0, 1, vec![2, 3]),
            (1, 0, vec![4, 5]),
            (2, 3, vec![0, 5]),
            (4, 5, vec![1, 2]),
        ];
        let total = |m: &SkipGram| batch.iter().map(|(c, x, n)| m.loss(*c, *x, n)).sum::<f64>();
        let mut last = total(&model);
        for _ in 0..10 {
            for (c, x, n) in &batch {
                model.step(*c, *x, n, 0.05);
            }
            let now = total(&model);
            assert!(now < last, "{now} >= {last}");
            last = now;
        }
    }

    #[test]
    fn sgns_is_deterministic_single_worker() {
        let g = graph(6, &[(1, 2), (2, 3), (3, 4), (5, 3), (6, 5)]);
        let walks = generate_walks(
            &g,
            &WalkConfig {
                walk_length: 10,
                walks_per_node: 2,
                ..Default::default()
            },
        )
        .unwrap();
        let cfg = SgnsConfig {
            dim: 8,
            window: 3,
            ..Default::default()
        };
        assert_eq!(train_sgns(&walks, &cfg).unwrap(), train_sgns(&walks, &cfg).unwrap());
        let par = train_sgns(&walks, &SgnsConfig { workers: 3, ..cfg }).unwrap();
        assert_eq!(par.len(), 6);
    }

    #[test]
    fn save_load_round_trip() {
        let emb = NodeEmbeddings {
            dim: 2,
            vectors: [
                (Sctid(3), Vector(vec![0.25, -1.5])),
                (Sctid(10), Vector(vec![1e-9, 2.0])),
            ]
            .into_iter()
            .collect(),
        };
        assert_eq!(NodeEmbeddings::parse(&emb.render(), "n").unwrap(), emb);
        let empty = NodeEmbeddings {
            dim: 300,
            vectors: BTreeMap::new(),
        };
        assert_eq!(empty.render(), "0 300\n");
        assert!(NodeEmbeddings::parse("1 3\n5 1 2\n", "n").is_err());
    }

    #[test]
    fn cliques_separate() {
        let mut edges = Vec::new();
        for base in [0, 5] {
            for i in 1..=5 {
                for j in (i + 1)..=5 {
                    edges.push((base + i, base + j));
                }
            }
        }
        let g = graph(10, &edges);
        let walks = generate_walks(
            &g,
            &WalkConfig {
                walk_length: 20,
                walks_per_node: 20,
                seed: 1,
                ..Default::default()
            },
        )
        .unwrap();
        let emb = train_sgns(
            &walks,
            &SgnsConfig {
                dim: 16,
                window: 4,
                epochs: 3,
                seed: 1,
                ..Default::default()
            },
        )
        .unwrap();
        let (mut intra, mut inter) = (Vec::new(), Vec::new());
        for a in 1..=10u64 {
            for b in (a + 1)..=10 {
                let c = cosine(emb.get(Sctid(a)).unwrap(), emb.get(Sctid(b)).unwrap());
                if (a <= 5) == (b <= 5) {
                    intra.push(c)
                } else {
                    inter.push(c)
                }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&intra) > mean(&inter), "{} vs {}", mean(&intra), mean(&inter));
    }
}
