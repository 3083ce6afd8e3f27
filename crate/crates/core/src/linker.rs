//! Linkers turn a mention into ranked concept candidates. Surface matchers
//! may miss; neural rankers always answer. A [`Cascade`] tries its
//! components in order and returns the first answer.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use crate::align::{AlignInput, AlignModel};
use crate::corpus::Mention;
use crate::error::{Error, Result};
use crate::index::ConceptTargetIndex;
use crate::kg::{ConceptGraph, Sctid};
use crate::matchers::{exact_match, Dictionary, FuzzyMetric, LabelTable, MatchMethod, MatchResult};

/// Candidates in rank order plus the name of the component that produced
/// them. Scores are distances for surface matchers (0 for dictionary and
/// exact hits) and cosine similarities for neural rankers.
#[derive(Debug, Clone, PartialEq)]
pub struct Answer {
    pub candidates: Vec<(Sctid, f64)>,
    pub provenance: String,
}

pub trait Linker: Send + Sync {
    fn name(&self) -> String;

    /// True when [`Linker::link`] never returns `Ok(None)`.
    fn always_answers(&self) -> bool {
        false
    }

    fn link(&self, mention: &Mention, k: usize) -> Result<Option<Answer>>;
}

impl<T: Linker + ?Sized> Linker for Arc<T> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn always_answers(&self) -> bool {
        (**self).always_answers()
    }

    fn link(&self, mention: &Mention, k: usize) -> Result<Option<Answer>> {
        (**self).link(mention, k)
    }
}

fn singleton(result: MatchResult, name: String) -> Option<Answer> {
    match result {
        MatchResult::Hit { sctid, score, .. } => Some(Answer {
            candidates: vec![(sctid, score)],
            provenance: name,
        }),
        MatchResult::Miss { .. } => None,
    }
}

pub struct DictionaryLinker {
    pub dictionary: Arc<Dictionary>,
}

impl Linker for DictionaryLinker {
    fn name(&self) -> String {
        "dict".into()
    }

    fn link(&self, mention: &Mention, _k: usize) -> Result<Option<Answer>> {
        Ok(singleton(self.dictionary.lookup(&mention.term), self.name()))
    }
}

pub struct ExactLinker<'g> {
    pub graph: &'g ConceptGraph,
}

impl Linker for ExactLinker<'_> {
    fn name(&self) -> String {
        "exact".into()
    }

    fn link(&self, mention: &Mention, _k: usize) -> Result<Option<Answer>> {
        Ok(singleton(exact_match(self.graph, &mention.term), self.name()))
    }
}

pub struct FuzzyLinker {
    pub table: Arc<LabelTable>,
    pub metric: FuzzyMetric,
    pub tau: f64,
}

impl Linker for FuzzyLinker {
    fn name(&self) -> String {
        format!("{}:{}", self.metric, self.tau)
    }

    fn link(&self, mention: &Mention, _k: usize) -> Result<Option<Answer>> {
        Ok(singleton(
            self.table.fuzzy_match(&mention.term, &self.metric, self.tau),
            self.name(),
        ))
    }
}

/// Cosine ranking of a trained alignment model's predictions against a
/// concept target index. Mention features are prepared up front.
pub struct NeuralLinker {
    pub label: String,
    pub model: AlignModel,
    pub index: Arc<ConceptTargetIndex>,
    pub inputs: HashMap<u64, AlignInput>,
}

impl NeuralLinker {
    pub fn new(
        label: impl Into<String>,
        model: AlignModel,
        index: Arc<ConceptTargetIndex>,
        inputs: HashMap<u64, AlignInput>,
    ) -> Result<Self> {
        if index.is_empty() {
            return Err(Error::Validation(
                "neural linker needs a non-empty concept index".into(),
            ));
        }
        if index.dim() != model.shape().out_dim {
            return Err(Error::Validation(format!(
                "model output dim {} does not match index dim {}",
                model.shape().out_dim,
                index.dim()
            )));
        }
        for (id, input) in &inputs {
            model
                .check_input(input)
                .map_err(|e| Error::Validation(format!("mention {id}: {e}")))?;
        }
        Ok(NeuralLinker {
            label: label.into(),
            model,
            index,
            inputs,
        })
    }
}

impl Linker for NeuralLinker {
    fn name(&self) -> String {
        format!("neural:{}", self.label)
    }

    fn always_answers(&self) -> bool {
        true
    }

    fn link(&self, mention: &Mention, k: usize) -> Result<Option<Answer>> {
        let input = self
            .inputs
            .get(&mention.id)
            .ok_or_else(|| Error::Validation(format!("no prepared features for mention {}", mention.id)))?;
        let prediction = self.model.forward(input);
        Ok(Some(Answer {
            candidates: self.index.rank(&prediction, k)?,
            provenance: self.name(),
        }))
    }
}

/// Ordered back-off over linkers.
pub struct Cascade<'a> {
    components: Vec<Box<dyn Linker + 'a>>,
}

impl<'a> Cascade<'a> {
    /// Rejects empty cascades and any component placed after one that
    /// always answers, since it could never fire.
    pub fn new(components: Vec<Box<dyn Linker + 'a>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Validation("a cascade needs at least one component".into()));
        }
        if let Some(pos) = components.iter().position(|c| c.always_answers()) {
            if pos + 1 < components.len() {
                return Err(Error::Validation(format!(
                    "component {} follows {}, which always answers",
                    components[pos + 1].name(),
                    components[pos].name()
                )));
            }
        }
        Ok(Cascade { components })
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

impl Linker for Cascade<'_> {
    fn name(&self) -> String {
        self.components.iter().map(|c| c.name()).collect::<Vec<_>>().join("+")
    }

    fn always_answers(&self) -> bool {
        self.components.last().is_some_and(|c| c.always_answers())
    }

    fn link(&self, mention: &Mention, k: usize) -> Result<Option<Answer>> {
        for c in &self.components {
            if let Some(answer) = c.link(mention, k)? {
                return Ok(Some(answer));
            }
        }
        Ok(None)
    }
}

/// Per-mention outcome; `answer` is `None` when every component missed.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mention_id: u64,
    pub answer: Option<Answer>,
}

/// Links every mention, in input order.
pub fn link_all(linker: &dyn Linker, mentions: &[Mention], k: usize) -> Result<Vec<Prediction>> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    mentions
        .par_iter()
        .map(|m| {
            Ok(Prediction {
                mention_id: m.id,
                answer: linker.link(m, k)?,
            })
        })
        .collect()
}

/// One stage of a textual cascade spec such as `dict+stoilos:0.07+neural:n6`.
#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    Dictionary,
    Exact,
    /// Threshold `None` means "use the tuned value".
    Fuzzy(FuzzyMetric, Option<f64>),
    Neural(String),
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Dictionary => f.write_str("dict"),
            Stage::Exact => f.write_str("exact"),
            Stage::Fuzzy(m, None) => write!(f, "{m}"),
            Stage::Fuzzy(m, Some(t)) => write!(f, "{m}:{t}"),
            Stage::Neural(n) => write!(f, "neural:{n}"),
        }
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let no_arg = |stage: Stage| match arg {
            None => Ok(stage),
            Some(_) => Err(Error::Config(format!("stage {head:?} takes no argument"))),
        };
        match head {
            "dict" | "dictionary" => no_arg(Stage::Dictionary),
            "exact" => no_arg(Stage::Exact),
            "lev" | "stoilos" => {
                let tau = arg
                    .map(|a| {
                        a.parse::<f64>()
                            .ok()
                            .filter(|t| (0.0..=1.0).contains(t))
                            .ok_or_else(|| Error::Config(format!("invalid threshold {a:?}")))
                    })
                    .transpose()?;
                Ok(Stage::Fuzzy(head.parse()?, tau))
            }
            "neural" => match arg {
                Some(a) if !a.is_empty() => Ok(Stage::Neural(a.to_string())),
                _ => Err(Error::Config("neural stage needs a model name, e.g. neural:n6".into())),
            },
            other => Err(Error::Config(format!("unknown cascade stage {other:?}"))),
        }
    }
}

/// Parses `a+b+c`; the cascade builder performs the ordering checks.
pub fn parse_cascade_spec(spec: &str) -> Result<Vec<Stage>> {
    let stages: Vec<Stage> = spec.split('+').map(|s| s.trim().parse()).collect::<Result<_>>()?;
    if let Some(pos) = stages.iter().position(|s| matches!(s, Stage::Neural(_))) {
        if pos + 1 < stages.len() {
            return Err(Error::Validation(format!(
                "stage {} follows a neural stage and could never fire",
                stages[pos + 1]
            )));
        }
    }
    Ok(stages)
}

/// Everything a cascade spec can refer to.
pub struct LinkerContext<'a> {
    pub graph: &'a ConceptGraph,
    pub dictionary: Option<Arc<Dictionary>>,
    pub table: Arc<LabelTable>,
    /// Tuned thresholds used when a fuzzy stage gives none.
    pub thresholds: HashMap<MatchMethod, f64>,
    pub neural: HashMap<String, Arc<NeuralLinker>>,
}

impl<'a> LinkerContext<'a> {
    pub fn new(graph: &'a ConceptGraph) -> Self {
        LinkerContext {
            graph,
            dictionary: None,
            table: Arc::new(LabelTable::new(graph)),
            thresholds: HashMap::new(),
            neural: HashMap::new(),
        }
    }

    pub fn stage(&self, stage: &Stage) -> Result<Box<dyn Linker + 'a>> {
        Ok(match stage {
            Stage::Dictionary => Box::new(DictionaryLinker {
                dictionary: self
                    .dictionary
                    .clone()
                    .ok_or_else(|| Error::Config("the dict stage needs a dictionary".into()))?,
            }),
            Stage::Exact => Box::new(ExactLinker { graph: self.graph }),
            Stage::Fuzzy(metric, tau) => {
                let tau = tau
                    .or_else(|| self.thresholds.get(&metric.method()).copied())
                    .ok_or_else(|| {
                        Error::Config(format!(
                            "no threshold for {metric}; write {metric}:<tau> or supply a tuned one"
                        ))
                    })?;
                Box::new(FuzzyLinker {
                    table: self.table.clone(),
                    metric: *metric,
                    tau,
                })
            }
            Stage::Neural(name) => Box::new(
                self.neural
                    .get(name)
                    .cloned()
                    .ok_or_else(|| Error::Config(format!("no neural model named {name:?}")))?,
            ),
        })
    }

    pub fn cascade(&self, stages: &[Stage]) -> Result<Cascade<'a>> {
        Cascade::new(stages.iter().map(|s| self.stage(s)).collect::<Result<_>>()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed {
        name: &'static str,
        answers: HashMap<u64, Sctid>,
        always: bool,
    }

    impl Linker for Fixed {
        fn name(&self) -> String {
            self.name.into()
        }
        fn always_answers(&self) -> bool {
            self.always
        }
        fn link(&self, m: &Mention, _k: usize) -> Result<Option<Answer>> {
            Ok(self
                .answers
                .get(&m.id)
                .or(self.always.then_some(&Sctid(0)))
                .map(|s| Answer {
                    candidates: vec![(*s, 0.0)],
                    provenance: self.name.into(),
                }))
        }
    }

    fn mention(id: u64) -> Mention {
        Mention::new(id, "t", Sctid(1), Sctid(1), "t", "r")
    }

    #[test]
    fn first_answer_wins() {
        let a = Fixed {
            name: "a",
            answers: [(1, Sctid(10))].into(),
            always: false,
        };
        let b = Fixed {
            name: "b",
            answers: [(1, Sctid(20)), (2, Sctid(21))].into(),
            always: false,
        };
        let c = Cascade::new(vec![Box::new(a), Box::new(b)]).unwrap();
        assert_eq!(c.link(&mention(1), 1).unwrap().unwrap().candidates[0].0, Sctid(10));
        let second = c.link(&mention(2), 1).unwrap().unwrap();
        assert_eq!((second.candidates[0].0, second.provenance.as_str()), (Sctid(21), "b"));
        assert_eq!(c.link(&mention(3), 1).unwrap(), None);
        assert_eq!(c.name(), "a+b");
    }

    #[test]
    fn nothing_after_an_always_answering_stage() {
        let n = Fixed {
            name: "n",
            answers: HashMap::new(),
            always: true,
        };
        let d = Fixed {
            name: "d",
            answers: HashMap::new(),
            always: false,
        };
        assert!(Cascade::new(vec![Box::new(n), Box::new(d)])
            .err()
            .unwrap()
            .is_validation());
        assert!(Cascade::new(vec![]).is_err());
    }

    #[test]
    fn spec_parsing() {
        let s = parse_cascade_spec("dict+stoilos:0.07+neural:n6").unwrap();
        assert_eq!(
            s,
            vec![
                Stage::Dictionary,
                Stage::Fuzzy(FuzzyMetric::stoilos(), Some(0.07)),
                Stage::Neural("n6".into())
            ]
        );
        assert_eq!(
            parse_cascade_spec("lev").unwrap(),
            vec![Stage::Fuzzy(FuzzyMetric::LevenshteinRatio, None)]
        );
        assert!(parse_cascade_spec("neural:n1+dict").unwrap_err().is_validation());
        assert!(parse_cascade_spec("dict+bogus").is_err());
        assert!(parse_cascade_spec("lev:1.5").is_err());
        assert!(parse_cascade_spec("dict:3").is_err());
    }
}
