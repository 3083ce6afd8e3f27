//! Seeded synthetic data: a separable alignment task for sanity-checking
//! the trainer, and a small end-to-end linking dataset (graph, corpus,
//! word vectors, layer stacks) for demos and pipeline tests.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::align::{AlignExample, AlignInput};
use crate::corpus::Mention;
use crate::embed::{LayerStack, LayerStackSet, Vector, WordVectorStore};
use crate::error::Result;
use crate::index::ConceptTargetIndex;
use crate::kg::{Concept, ConceptGraph, Sctid};

#[derive(Debug, Clone, PartialEq)]
pub struct ToyConfig {
    pub concepts: usize,
    pub dim: usize,
    /// Noisy copies per concept; the last `held_out` go to dev.
    pub copies: usize,
    pub held_out: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            concepts: 50,
            dim: 300,
            copies: 5,
            held_out: 1,
            sigma: 0.1,
            seed: 42,
        }
    }
}

pub struct ToyTask {
    pub index: ConceptTargetIndex,
    pub train: Vec<AlignExample>,
    pub dev: Vec<AlignExample>,
}

/// Random ±1 targets (nearly orthogonal in high dimension); inputs are the
/// targets plus isotropic Gaussian noise.
pub fn toy_alignment_task(cfg: &ToyConfig) -> Result<ToyTask> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.sigma).expect("sigma is finite and non-negative");
    let targets: Vec<(Sctid, Vector)> = (0..cfg.concepts)
        .map(|c| {
            let v = (0..cfg.dim)
                .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
                .collect();
            (Sctid(c as u64 + 1), Vector(v))
        })
        .collect();
    let (mut train, mut dev) = (Vec::new(), Vec::new());
    let mut id = 0;
    for (sctid, t) in &targets {
        for copy in 0..cfg.copies {
            id += 1;
            let raw = t.iter().map(|x| x + noise.sample(&mut rng)).collect();
            let ex = AlignExample {
                id,
                input: AlignInput {
                    raw,
                    ..Default::default()
                },
                gold: *sctid,
            };
            if copy + cfg.held_out >= cfg.copies {
                dev.push(ex);
            } else {
                train.push(ex);
            }
        }
    }
    Ok(ToyTask {
        index: ConceptTargetIndex::new(targets)?,
        train,
        dev,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub concepts: usize,
    pub mentions: usize,
    pub word_dim: usize,
    pub layers: usize,
    pub stack_dim: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            concepts: 60,
            mentions: 500,
            word_dim: 32,
            layers: 4,
            stack_dim: 24,
            seed: 42,
        }
    }
}

pub struct SynthData {
    pub graph: ConceptGraph,
    pub mentions: Vec<Mention>,
    pub word_vectors: WordVectorStore,
    /// Keyed by mention id.
    pub mention_stacks: LayerStackSet,
    /// Keyed `label:<sctid>:<i>`.
    pub label_stacks: LayerStackSet,
}

const SYLLABLES: &[&str] = &[
    "ba", "ce", "di", "fo", "gu", "ka", "le", "mi", "no", "pu", "ra", "se", "ti", "vo", "zu", "tra", "ple", "cro",
    "sti", "ne", "lo", "ma", "re", "xi",
];
const SUFFIXES: &[&str] = &["itis", "osis", "algia", "emia", "oma", "ism", "pathy", "ia"];
const TEMPLATES: &[&str] = &[
    "i have been dealing with {} for weeks",
    "does anyone else get {} after running",
    "my doctor said it was {} but i am not sure",
    "{} again today, any tips",
    "woke up with {} and it will not go away",
];
const SUBREDDITS: &[&str] = &["AskDocs", "health", "running", "diabetes", "Fitness"];

fn word<R: Rng>(rng: &mut R, used: &mut BTreeSet<String>, suffix: bool) -> String {
    loop {
        let n = rng.gen_range(2..4);
        let mut w: String = (0..n).map(|_| *SYLLABLES.choose(rng).unwrap()).collect();
        if suffix {
            w.push_str(SUFFIXES.choose(rng).unwrap());
        }
        if used.insert(w.clone()) {
            return w;
        }
    }
}

fn misspell<R: Rng>(rng: &mut R, s: &str) -> String {
    let mut chars: Vec<char> = s.chars().collect();
    let i = rng.gen_range(0..chars.len());
    match rng.gen_range(0..3) {
        0 if chars.len() > 4 => {
            chars.remove(i);
        }
        1 => chars.insert(i, chars[i]),
        _ => {
            let c = (b'a' + rng.gen_range(0..26)) as char;
            chars[i] = if chars[i] == c { 'y' } else { c };
        }
    }
    chars.into_iter().collect()
}

fn gaussian<R: Rng>(rng: &mut R, dim: usize, sigma: f64) -> Vec<f64> {
    let n = Normal::new(0.0, sigma).expect("valid sigma");
    (0..dim).map(|_| n.sample(rng)).collect()
}

/// Builds a random IS-A tree of concepts whose labels share vocabulary with
/// their mentions. Mentions are canonical labels, misspelled labels, or lay
/// synonyms that only the embedding models can resolve.
pub fn synthetic_dataset(cfg: &SynthConfig) -> Result<SynthData> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut used = BTreeSet::new();
    let ids: Vec<Sctid> = (0..cfg.concepts).map(|i| Sctid(100_000 + 7 * i as u64)).collect();

    let mut vectors: HashMap<String, Vec<f64>> = HashMap::new();
    let mut concepts = Vec::new();
    let mut lay: HashMap<Sctid, String> = HashMap::new();
    let mut edges = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        let head = word(&mut rng, &mut used, true);
        let modifier = word(&mut rng, &mut used, false);
        let synonym = word(&mut rng, &mut used, false);
        let head_vec = gaussian(&mut rng, cfg.word_dim, 1.0);
        let syn_vec: Vec<f64> = head_vec
            .iter()
            .zip(gaussian(&mut rng, cfg.word_dim, 0.3))
            .map(|(a, b)| a + b)
            .collect();
        vectors.insert(modifier.clone(), gaussian(&mut rng, cfg.word_dim, 1.0));
        vectors.insert(head.clone(), head_vec);
        vectors.insert(synonym.clone(), syn_vec);
        let mut labels = vec![format!("{modifier} {head}"), head.clone()];
        if rng.gen_bool(0.5) {
            labels.push(format!("{head} of {modifier}"));
        }
        lay.insert(*id, synonym);
        concepts.push(Concept::new(*id, labels, "disorder"));
        if i > 0 {
            edges.push((*id, ids[rng.gen_range(0..i)]));
        }
    }
    vectors.insert("of".into(), gaussian(&mut rng, cfg.word_dim, 0.2));
    vectors.insert("my".into(), gaussian(&mut rng, cfg.word_dim, 0.2));
    let graph = ConceptGraph::from_parts(concepts, edges)?;

    // Zipf-like concept popularity
    let weights: Vec<f64> = (1..=cfg.concepts).map(|r| 1.0 / (r as f64).sqrt()).collect();
    let mut order = ids.clone();
    order.shuffle(&mut rng);
    let pick = rand::distributions::WeightedIndex::new(&weights).expect("positive weights");
    let mut mentions = Vec::with_capacity(cfg.mentions);
    let mut canonical: HashMap<u64, String> = HashMap::new();
    for m in 0..cfg.mentions {
        let specific = order[pick.sample(&mut rng)];
        let (parents, _) = graph.neighbors(specific)?;
        let general = match parents.first() {
            Some(p) if rng.gen_bool(0.25) => *p,
            _ => specific,
        };
        let labels = graph.labels_of(specific)?;
        let label = labels.choose(&mut rng).unwrap().clone();
        let roll: f64 = rng.gen();
        let (term, resolved) = if roll < 0.35 {
            (label.clone(), label.clone())
        } else if roll < 0.6 {
            (misspell(&mut rng, &label), label.clone())
        } else if roll < 0.8 {
            (lay[&specific].clone(), lay[&specific].clone())
        } else {
            (format!("my {}", lay[&specific]), lay[&specific].clone())
        };
        let example = TEMPLATES.choose(&mut rng).unwrap().replace("{}", &term);
        let id = 1000 + m as u64;
        canonical.insert(id, resolved);
        mentions.push(Mention::new(
            id,
            term,
            general,
            specific,
            example,
            *SUBREDDITS.choose(&mut rng).unwrap(),
        ));
    }

    let mut word_vectors = WordVectorStore::new(cfg.word_dim);
    let mut sorted: Vec<(String, Vec<f64>)> = vectors.into_iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    for (w, v) in sorted {
        word_vectors.insert(w, Vector(v))?;
    }

    // Contextual stacks: a fixed projection of the (typo-free) meaning,
    // noisier in lower layers.
    let projection: Vec<f64> = gaussian(
        &mut rng,
        cfg.stack_dim * cfg.word_dim,
        1.0 / (cfg.word_dim as f64).sqrt(),
    );
    let encode = |rng: &mut ChaCha8Rng, text: &str| -> Vec<f64> {
        let meaning = word_vectors.term_embedding(text).vector;
        let mut data = Vec::with_capacity(cfg.layers * cfg.stack_dim);
        for l in 0..cfg.layers {
            let sigma = 0.8 / (l + 1) as f64;
            for r in 0..cfg.stack_dim {
                let row = &projection[r * cfg.word_dim..(r + 1) * cfg.word_dim];
                let clean: f64 = row.iter().zip(meaning.iter()).map(|(a, b)| a * b).sum();
                data.push(clean + sigma * Normal::new(0.0, 1.0).unwrap().sample(rng));
            }
        }
        data
    };
    let mut mention_stacks = LayerStackSet::new(cfg.layers, cfg.stack_dim);
    for m in &mentions {
        let data = encode(&mut rng, &canonical[&m.id]);
        mention_stacks.insert(LayerStack::new(m.id.to_string(), cfg.layers, cfg.stack_dim, data)?)?;
    }
    let mut label_stacks = LayerStackSet::new(cfg.layers, cfg.stack_dim);
    for c in graph.concepts() {
        for (i, label) in c.labels.iter().enumerate() {
            let data = encode(&mut rng, label);
            label_stacks.insert(LayerStack::new(
                crate::embed::label_key(c.sctid, i),
                cfg.layers,
                cfg.stack_dim,
                data,
            )?)?;
        }
    }
    Ok(SynthData {
        graph,
        mentions,
        word_vectors,
        mention_stacks,
        label_stacks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::validate_against;

    #[test]
    fn toy_shapes() {
        let t = toy_alignment_task(&ToyConfig::default()).unwrap();
        assert_eq!(
            (t.train.len(), t.dev.len(), t.index.len(), t.index.dim()),
            (200, 50, 50, 300)
        );
    }

    #[test]
    fn synthetic_data_is_consistent_and_seeded() {
        let cfg = SynthConfig {
            mentions: 120,
            ..Default::default()
        };
        let a = synthetic_dataset(&cfg).unwrap();
        validate_against(&a.mentions, &a.graph).unwrap();
        assert_eq!(a.mention_stacks.len(), 120);
        assert!(a.mentions.iter().all(|m| m.term_in_example));
        let b = synthetic_dataset(&cfg).unwrap();
        assert_eq!(a.mentions, b.mentions);
        assert_eq!(a.word_vectors.render(), b.word_vectors.render());
        assert_eq!(a.label_stacks.render(), b.label_stacks.render());
    }
}
