//! Embedding recipes: which term features feed the alignment model and
//! which concept vectors it is aligned to.
//!
//! | recipe | term side                    | concept side                          | map    |
//! |--------|------------------------------|---------------------------------------|--------|
//! | n1     | FT-term                      | FT-label                              | ReLU   |
//! | n2     | FT-term                      | node2vec                              | ReLU   |
//! | n3     | BERT-term (one layer)        | BERT-label (same layer)               | ReLU   |
//! | n4     | BERT-term via attention      | BERT-label                            | ReLU   |
//! | n5     | FT-term                      | FT-label ⊕ node2vec                   | linear |
//! | n6     | [W'·FT-term + b']_+ ⊕ MLA    | FT-label ⊕ BERT-label ⊕ node2vec      | linear |

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::align::{AlignExample, AlignInput, AlignModel, BranchDims, MlaDims, ModelShape};
use crate::corpus::{Level, Mention};
use crate::embed::{concat, LayerChoice, LayerStackSet, Vector, WordVectorStore};
use crate::error::{Error, Result};
use crate::index::ConceptTargetIndex;
use crate::kg::ConceptGraph;
use crate::node2vec::NodeEmbeddings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Recipe {
    N1,
    N2,
    N3,
    N4,
    N5,
    N6,
}

impl Recipe {
    pub const ALL: [Recipe; 6] = [Recipe::N1, Recipe::N2, Recipe::N3, Recipe::N4, Recipe::N5, Recipe::N6];

    pub fn uses_word_vectors(self) -> bool {
        matches!(self, Recipe::N1 | Recipe::N2 | Recipe::N5 | Recipe::N6)
    }

    pub fn uses_node2vec(self) -> bool {
        matches!(self, Recipe::N2 | Recipe::N5 | Recipe::N6)
    }

    pub fn uses_layer_stacks(self) -> bool {
        matches!(self, Recipe::N3 | Recipe::N4 | Recipe::N6)
    }

    pub fn use_relu(self) -> bool {
        !matches!(self, Recipe::N5 | Recipe::N6)
    }

    pub fn default_learning_rate(self) -> f64 {
        if self.use_relu() {
            1e-4
        } else {
            1e-5
        }
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = Recipe::ALL.iter().position(|r| r == self).unwrap() + 1;
        write!(f, "n{i}")
    }
}

impl FromStr for Recipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Recipe::ALL
            .into_iter()
            .find(|r| r.to_string() == s.replace('.', ""))
            .ok_or_else(|| Error::Config(format!("unknown recipe {s:?} (expected n1..n6)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecipeConfig {
    pub recipe: Recipe,
    /// Layer used for plain BERT-term and BERT-label vectors.
    pub layer: LayerChoice,
    /// Output width of the FT-term branch transform (n6).
    pub branch_dim: usize,
}

impl RecipeConfig {
    pub fn new(recipe: Recipe) -> Self {
        RecipeConfig {
            recipe,
            layer: LayerChoice::Top,
            branch_dim: 300,
        }
    }

    pub fn to_meta(&self) -> BTreeMap<String, String> {
        [
            ("recipe", self.recipe.to_string()),
            ("layer", self.layer.to_string()),
            ("branch_dim", self.branch_dim.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    /// Reads back the recipe recorded in a checkpoint.
    pub fn from_model(model: &AlignModel) -> Result<Self> {
        let get = |k: &str| {
            model
                .meta
                .get(k)
                .ok_or_else(|| Error::Config(format!("checkpoint has no {k:?} entry")))
        };
        Ok(RecipeConfig {
            recipe: get("recipe")?.parse()?,
            layer: get("layer")?.parse()?,
            branch_dim: get("branch_dim")?
                .parse()
                .map_err(|_| Error::Config("invalid branch_dim in checkpoint".into()))?,
        })
    }
}

/// Pretrained inputs a recipe may draw on.
#[derive(Clone, Copy)]
pub struct Resources<'a> {
    pub graph: &'a ConceptGraph,
    pub word_vectors: Option<&'a WordVectorStore>,
    pub node2vec: Option<&'a NodeEmbeddings>,
    /// Keyed by mention id.
    pub mention_stacks: Option<&'a LayerStackSet>,
    /// Keyed `label:<sctid>:<i>`.
    pub label_stacks: Option<&'a LayerStackSet>,
}

impl<'a> Resources<'a> {
    fn words(&self) -> Result<&'a WordVectorStore> {
        self.word_vectors
            .ok_or_else(|| Error::Config("this recipe needs word vectors".into()))
    }

    fn nodes(&self) -> Result<&'a NodeEmbeddings> {
        self.node2vec
            .ok_or_else(|| Error::Config("this recipe needs node2vec embeddings".into()))
    }

    fn mention_stacks(&self) -> Result<&'a LayerStackSet> {
        self.mention_stacks
            .ok_or_else(|| Error::Config("this recipe needs mention layer stacks".into()))
    }

    fn label_stacks(&self) -> Result<&'a LayerStackSet> {
        self.label_stacks
            .ok_or_else(|| Error::Config("this recipe needs label layer stacks".into()))
    }
}

pub fn model_shape(cfg: &RecipeConfig, res: &Resources) -> Result<ModelShape> {
    let r = cfg.recipe;
    let ft = || res.words().map(|w| w.dim());
    let bert = || res.mention_stacks().map(|s| s.dim());
    let n2v = || res.nodes().map(|n| n.dim);
    let bert_label = || res.label_stacks().map(|s| s.dim());
    let (branch, mla, raw_dim) = match r {
        Recipe::N1 | Recipe::N2 | Recipe::N5 => (None, None, ft()?),
        Recipe::N3 => (None, None, bert()?),
        Recipe::N4 => {
            let s = res.mention_stacks()?;
            (
                None,
                Some(MlaDims {
                    layers: s.layers(),
                    dim: s.dim(),
                }),
                0,
            )
        }
        Recipe::N6 => {
            let s = res.mention_stacks()?;
            (
                Some(BranchDims {
                    input: ft()?,
                    output: cfg.branch_dim,
                }),
                Some(MlaDims {
                    layers: s.layers(),
                    dim: s.dim(),
                }),
                0,
            )
        }
    };
    let out_dim = match r {
        Recipe::N1 => ft()?,
        Recipe::N2 => n2v()?,
        Recipe::N3 | Recipe::N4 => bert_label()?,
        Recipe::N5 => ft()? + n2v()?,
        Recipe::N6 => ft()? + bert_label()? + n2v()?,
    };
    let shape = ModelShape {
        branch,
        mla,
        raw_dim,
        out_dim,
        use_relu: r.use_relu(),
    };
    shape.validate()?;
    Ok(shape)
}

pub fn init_model(cfg: &RecipeConfig, res: &Resources, seed: u64) -> Result<AlignModel> {
    let mut model = AlignModel::init(model_shape(cfg, res)?, seed)?;
    model.meta = cfg.to_meta();
    Ok(model)
}

/// Term-side features of one mention.
pub fn mention_input(cfg: &RecipeConfig, res: &Resources, mention: &Mention) -> Result<AlignInput> {
    let stack = || {
        res.mention_stacks()?
            .get(&mention.id.to_string())
            .ok_or_else(|| Error::Validation(format!("mention {} has no layer stack", mention.id)))
    };
    let ft = || res.words().map(|w| w.term_embedding(&mention.term).vector.into_inner());
    Ok(match cfg.recipe {
        Recipe::N1 | Recipe::N2 | Recipe::N5 => AlignInput {
            raw: ft()?,
            ..Default::default()
        },
        Recipe::N3 => AlignInput {
            raw: stack()?.select(cfg.layer).to_vec(),
            ..Default::default()
        },
        Recipe::N4 => AlignInput {
            stack: stack()?.layers_flat().to_vec(),
            ..Default::default()
        },
        Recipe::N6 => AlignInput {
            ft: ft()?,
            stack: stack()?.layers_flat().to_vec(),
            raw: Vec::new(),
        },
    })
}

pub fn examples(cfg: &RecipeConfig, res: &Resources, mentions: &[Mention], level: Level) -> Result<Vec<AlignExample>> {
    mentions
        .iter()
        .map(|m| {
            Ok(AlignExample {
                id: m.id,
                input: mention_input(cfg, res, m)?,
                gold: m.gold(level),
            })
        })
        .collect()
}

/// Concept vectors for every concept of the graph, in ascending sctid
/// order. Missing components are zero-filled with one warning per kind.
pub fn build_target_index(cfg: &RecipeConfig, res: &Resources) -> Result<ConceptTargetIndex> {
    let r = cfg.recipe;
    let mut missing: BTreeMap<&str, usize> = BTreeMap::new();
    let mut entries = Vec::with_capacity(res.graph.len());
    for id in res.graph.ids() {
        let mut parts: Vec<Vector> = Vec::new();
        if matches!(r, Recipe::N1 | Recipe::N5 | Recipe::N6) {
            let e = res.words()?.concept_label_embedding(res.graph, id)?;
            if e.oov {
                *missing.entry("FT-label").or_default() += 1;
            }
            parts.push(e.vector);
        }
        if matches!(r, Recipe::N3 | Recipe::N4 | Recipe::N6) {
            let e = res.label_stacks()?.concept_label_embedding(res.graph, id, cfg.layer)?;
            if e.oov {
                *missing.entry("BERT-label").or_default() += 1;
            }
            parts.push(e.vector);
        }
        if r.uses_node2vec() {
            let nodes = res.nodes()?;
            parts.push(match nodes.get(id) {
                Some(v) => v.clone(),
                None => {
                    *missing.entry("node2vec").or_default() += 1;
                    Vector::zeros(nodes.dim)
                }
            });
        }
        entries.push((id, concat(parts.iter().map(|p| &p[..]))?));
    }
    for (kind, n) in missing {
        log::warn!("{n} concepts have no {kind} vector; using zeros");
    }
    ConceptTargetIndex::new(entries)
}
