//! Surface-form linkers: the training-set dictionary, exact label matching,
//! and thresholded fuzzy matching over every label of the graph.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::corpus::{Level, Mention};
use crate::error::{read_to_string, write_file, Error, Result};
use crate::kg::{fold, ConceptGraph, Sctid};
use crate::strsim::{self, StoilosParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MatchMethod {
    Dictionary,
    Exact,
    Levenshtein,
    Stoilos,
}

impl fmt::Display for MatchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchMethod::Dictionary => "dict",
            MatchMethod::Exact => "exact",
            MatchMethod::Levenshtein => "lev",
            MatchMethod::Stoilos => "stoilos",
        })
    }
}

/// Outcome of a surface matcher. A miss carries neither concept nor score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatchResult {
    Hit {
        sctid: Sctid,
        /// Distance for fuzzy matchers, 0 for exact and dictionary hits.
        score: f64,
        method: MatchMethod,
    },
    Miss {
        method: MatchMethod,
    },
}

impl MatchResult {
    pub fn sctid(&self) -> Option<Sctid> {
        match self {
            MatchResult::Hit { sctid, .. } => Some(*sctid),
            MatchResult::Miss { .. } => None,
        }
    }

    pub fn method(&self) -> MatchMethod {
        match self {
            MatchResult::Hit { method, .. } | MatchResult::Miss { method } => *method,
        }
    }

    pub fn is_hit(&self) -> bool {
        matches!(self, MatchResult::Hit { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DictEntry {
    pub sctid: Sctid,
    pub support: usize,
}

/// Folded training term -> most frequent gold concept.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dictionary {
    entries: BTreeMap<String, DictEntry>,
    skipped: usize,
}

impl Dictionary {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Training rows dropped because their term folded to the empty string.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn get(&self, term: &str) -> Option<&DictEntry> {
        self.entries.get(&fold(term))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &DictEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn lookup(&self, term: &str) -> MatchResult {
        match self.get(term) {
            Some(e) => MatchResult::Hit {
                sctid: e.sctid,
                score: 0.0,
                method: MatchMethod::Dictionary,
            },
            None => MatchResult::Miss {
                method: MatchMethod::Dictionary,
            },
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (term, e) in &self.entries {
            out.push_str(&format!("{term}\t{}\t{}\n", e.sctid, e.support));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, self.render())
    }

    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, row) in text.lines().enumerate() {
            let row = row.trim_end_matches('\r');
            if row.is_empty() {
                continue;
            }
            let cols: Vec<&str> = row.split('\t').collect();
            if cols.len() != 3 {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("expected 3 columns, found {}", cols.len()),
                ));
            }
            let sctid = cols[1]
                .parse()
                .map_err(|_| Error::parse(path, i + 1, "invalid sctid"))?;
            let support = cols[2]
                .parse()
                .map_err(|_| Error::parse(path, i + 1, "invalid support count"))?;
            entries.insert(cols[0].to_string(), DictEntry { sctid, support });
        }
        Ok(Dictionary { entries, skipped: 0 })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Dictionary::parse(&read_to_string(path)?, &path.display().to_string())
    }
}

/// Records, for every folded training term, its most frequent gold concept
/// at `level`. Frequency ties go to the smaller sctid.
pub fn build_dictionary(train: &[Mention], level: Level) -> Dictionary {
    let mut counts: BTreeMap<String, BTreeMap<Sctid, usize>> = BTreeMap::new();
    let mut skipped = 0;
    for m in train {
        let key = fold(&m.term);
        if key.is_empty() {
            log::warn!("mention {} has an empty term; skipped", m.id);
            skipped += 1;
            continue;
        }
        *counts.entry(key).or_default().entry(m.gold(level)).or_default() += 1;
    }
    let entries = counts
        .into_iter()
        .map(|(term, per_concept)| {
            let mut best = DictEntry {
                sctid: Sctid(0),
                support: 0,
            };
            for (sctid, support) in per_concept {
                if support > best.support {
                    best = DictEntry { sctid, support };
                }
            }
            (term, best)
        })
        .collect();
    Dictionary { entries, skipped }
}

pub fn dictionary_lookup(dict: &Dictionary, term: &str) -> MatchResult {
    dict.lookup(term)
}

/// Exact match of the folded term against folded labels; several owners
/// resolve to the smallest sctid.
pub fn exact_match(graph: &ConceptGraph, term: &str) -> MatchResult {
    match graph.lookup_label(&fold(term)).and_then(|s| s.iter().next()) {
        Some(&sctid) => MatchResult::Hit {
            sctid,
            score: 0.0,
            method: MatchMethod::Exact,
        },
        None => MatchResult::Miss {
            method: MatchMethod::Exact,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FuzzyMetric {
    LevenshteinRatio,
    Stoilos(StoilosParams),
}

impl FuzzyMetric {
    pub fn stoilos() -> Self {
        FuzzyMetric::Stoilos(StoilosParams::default())
    }

    pub fn method(&self) -> MatchMethod {
        match self {
            FuzzyMetric::LevenshteinRatio => MatchMethod::Levenshtein,
            FuzzyMetric::Stoilos(_) => MatchMethod::Stoilos,
        }
    }

    fn distance(&self, a: &[char], b: &[char]) -> f64 {
        match self {
            FuzzyMetric::LevenshteinRatio => strsim::levenshtein_ratio_chars(a, b),
            FuzzyMetric::Stoilos(p) => strsim::stoilos_breakdown_chars(a, b, p).distance(),
        }
    }

    /// Threshold grid searched when tuning on a development set.
    pub fn default_grid(&self) -> Vec<f64> {
        match self {
            FuzzyMetric::LevenshteinRatio => (10..=20).map(|i| i as f64 / 100.0).collect(),
            FuzzyMetric::Stoilos(_) => (0..=10).map(|i| (50 + 5 * i) as f64 / 1000.0).collect(),
        }
    }
}

impl FromStr for FuzzyMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lev" | "levenshtein" | "levenshtein_ratio" => Ok(FuzzyMetric::LevenshteinRatio),
            "stoilos" | "stoilos_distance" => Ok(FuzzyMetric::stoilos()),
            other => Err(Error::Config(format!("unknown metric {other:?}"))),
        }
    }
}

impl fmt::Display for FuzzyMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.method().fmt(f)
    }
}

#[derive(Debug, Clone)]
struct LabelEntry {
    sctid: Sctid,
    folded: Vec<char>,
}

/// Flat list of every folded label, ordered by (sctid, label position), so
/// that a first-minimum scan realises the matcher tie-break.
#[derive(Debug, Clone, Default)]
pub struct LabelTable {
    entries: Vec<LabelEntry>,
}

impl LabelTable {
    pub fn new(graph: &ConceptGraph) -> Self {
        let entries = graph
            .concepts()
            .flat_map(|c| {
                c.labels.iter().map(move |l| LabelEntry {
                    sctid: c.sctid,
                    folded: fold(l).chars().collect(),
                })
            })
            .collect();
        LabelTable { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Globally closest label as (distance, owner). With `prefilter` set,
    /// labels whose length difference alone puts the Levenshtein ratio above
    /// the bound are skipped.
    fn scan(&self, term: &[char], metric: &FuzzyMetric, prefilter: Option<f64>) -> Option<(f64, Sctid)> {
        let mut best: Option<(f64, Sctid)> = None;
        for e in &self.entries {
            if let (Some(tau), FuzzyMetric::LevenshteinRatio) = (prefilter, metric) {
                let longest = term.len().max(e.folded.len());
                if longest > 0 {
                    let gap = term.len().abs_diff(e.folded.len()) as f64 / longest as f64;
                    if gap > tau {
                        continue;
                    }
                }
            }
            let d = metric.distance(term, &e.folded);
            if best.map_or(true, |(bd, _)| strsim::cmp_distance(d, bd).is_lt()) {
                best = Some((d, e.sctid));
                if d == 0.0 {
                    break;
                }
            }
        }
        best
    }

    /// Closest label regardless of threshold.
    pub fn closest(&self, term: &str, metric: &FuzzyMetric) -> Option<(f64, Sctid)> {
        let term: Vec<char> = fold(term).chars().collect();
        self.scan(&term, metric, None)
    }

    pub fn fuzzy_match(&self, term: &str, metric: &FuzzyMetric, tau: f64) -> MatchResult {
        self.fuzzy_match_opts(term, metric, tau, true)
    }

    pub fn fuzzy_match_opts(&self, term: &str, metric: &FuzzyMetric, tau: f64, prefilter: bool) -> MatchResult {
        let term: Vec<char> = fold(term).chars().collect();
        match self.scan(&term, metric, prefilter.then_some(tau)) {
            Some((d, sctid)) if d <= tau => MatchResult::Hit {
                sctid,
                score: d,
                method: metric.method(),
            },
            _ => MatchResult::Miss {
                method: metric.method(),
            },
        }
    }
}

/// Convenience wrapper that builds a [`LabelTable`] per call; use the table
/// directly when matching many terms.
pub fn fuzzy_match(graph: &ConceptGraph, term: &str, metric: &FuzzyMetric, tau: f64) -> MatchResult {
    LabelTable::new(graph).fuzzy_match(term, metric, tau)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSweep {
    pub best_tau: f64,
    pub best_acc1: f64,
    /// (tau, dev Acc@1) in grid order.
    pub accuracies: Vec<(f64, f64)>,
}

/// Picks the grid threshold with the best dev Acc@1 (ties: smallest tau).
pub fn tune_threshold(
    table: &LabelTable,
    dev: &[Mention],
    level: Level,
    metric: &FuzzyMetric,
    grid: &[f64],
) -> Result<ThresholdSweep> {
    if grid.is_empty() {
        return Err(Error::Config("threshold grid is empty".into()));
    }
    if let Some(bad) = grid.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::Config(format!("threshold {bad} outside [0, 1]")));
    }
    // The closest label does not depend on tau, so scan once per mention.
    let closest: Vec<Option<(f64, Sctid)>> = dev.par_iter().map(|m| table.closest(&m.term, metric)).collect();
    let accuracies: Vec<(f64, f64)> = grid
        .iter()
        .map(|&tau| {
            let hits = dev
                .iter()
                .zip(&closest)
                .filter(|(m, c)| matches!(c, Some((d, s)) if *d <= tau && *s == m.gold(level)))
                .count();
            let acc = if dev.is_empty() {
                0.0
            } else {
                hits as f64 / dev.len() as f64
            };
            (tau, acc)
        })
        .collect();
    let mut best = accuracies[0];
    for &(tau, acc) in &accuracies[1..] {
        if acc > best.1 || (acc == best.1 && tau < best.0) {
            best = (tau, acc);
        }
    }
    Ok(ThresholdSweep {
        best_tau: best.0,
        best_acc1: best.1,
        accuracies,
    })
}

/// Renders tuned thresholds as TOML, one table per metric.
pub fn render_thresholds(tuned: &[(FuzzyMetric, ThresholdSweep)]) -> String {
    let mut root = toml::Table::new();
    for (metric, sweep) in tuned {
        let mut t = toml::Table::new();
        t.insert("tau".into(), toml::Value::Float(sweep.best_tau));
        t.insert("dev_acc1".into(), toml::Value::Float(sweep.best_acc1));
        root.insert(metric.to_string(), toml::Value::Table(t));
    }
    toml::to_string(&root).expect("threshold tables always serialize")
}

/// Reads the `tau` of every metric table in a thresholds file.
pub fn parse_thresholds(text: &str, path: &str) -> Result<HashMap<MatchMethod, f64>> {
    let root: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::parse(path, 0, e.to_string()))?;
    let mut out = HashMap::new();
    for (name, value) in &root {
        let metric: FuzzyMetric = name.parse()?;
        let tau = value
            .get("tau")
            .and_then(|t| t.as_float().or_else(|| t.as_integer().map(|i| i as f64)))
            .ok_or_else(|| Error::parse(path, 0, format!("[{name}] has no numeric tau")))?;
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::parse(path, 0, format!("[{name}] tau {tau} outside [0, 1]")));
        }
        out.insert(metric.method(), tau);
    }
    Ok(out)
}

pub fn load_thresholds(path: &Path) -> Result<HashMap<MatchMethod, f64>> {
    parse_thresholds(&read_to_string(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::Concept;
    use proptest::prelude::*;

    fn graph(concepts: &[(u64, &[&str])]) -> ConceptGraph {
        ConceptGraph::from_parts(
            concepts
                .iter()
                .map(|(id, labels)| Concept::new(Sctid(*id), labels.iter().map(|s| s.to_string()).collect(), "t")),
            vec![],
        )
        .unwrap()
    }

    fn mention(id: u64, term: &str, concept: u64) -> Mention {
        Mention::new(id, term, Sctid(concept), Sctid(concept), term, "r")
    }

    #[test]
    fn thresholds_round_trip() {
        let sweep = |tau| ThresholdSweep {
            best_tau: tau,
            best_acc1: 0.5,
            accuracies: vec![(tau, 0.5)],
        };
        let text = render_thresholds(&[
            (FuzzyMetric::LevenshteinRatio, sweep(0.15)),
            (FuzzyMetric::stoilos(), sweep(0.07)),
        ]);
        let back = parse_thresholds(&text, "t.toml").unwrap();
        assert_eq!(back[&MatchMethod::Levenshtein], 0.15);
        assert_eq!(back[&MatchMethod::Stoilos], 0.07);
        assert!(parse_thresholds("[lev]\ntau = 2.0\n", "t").is_err());
        assert!(parse_thresholds("[cosine]\ntau = 0.1\n", "t").is_err());
    }

    #[test]
    fn dictionary_keeps_most_frequent() {
        let train = vec![
            mention(1, "benzos", 20),
            mention(2, "Benzos", 20),
            mention(3, "benzos", 10),
            mention(4, "x", 30),
            mention(5, "x", 25),
        ];
        let d = build_dictionary(&train, Level::General);
        assert_eq!(
            d.get("benzos"),
            Some(&DictEntry {
                sctid: Sctid(20),
                support: 2
            })
        );
        assert_eq!(d.get("x").unwrap().sctid, Sctid(25));
        assert_eq!(d.lookup("BENZOS").sctid(), Some(Sctid(20)));
        assert!(!d.lookup("unseen").is_hit());
    }

    #[test]
    fn dictionary_skips_blank_terms() {
        let d = build_dictionary(&[mention(1, "  ", 1), mention(2, "a", 1)], Level::General);
        assert_eq!(d.len(), 1);
        assert_eq!(d.skipped(), 1);
    }

    #[test]
    fn dictionary_tsv_round_trip() {
        let d = build_dictionary(&[mention(1, "a b", 1), mention(2, "c", 2)], Level::General);
        let back = Dictionary::parse(&d.render(), "d").unwrap();
        assert_eq!(back.render(), d.render());
    }

    #[test]
    fn exact_match_tie_and_miss() {
        let g = graph(&[(9, &["Leg"]), (4, &["leg", "limb"]), (5, &["arm"])]);
        assert_eq!(exact_match(&g, "LEG").sctid(), Some(Sctid(4)));
        assert_eq!(exact_match(&g, "arm").sctid(), Some(Sctid(5)));
        assert!(!exact_match(&g, "foot").is_hit());
    }

    #[test]
    fn fuzzy_anemia_example() {
        let g = graph(&[(1, &["anaemia"]), (2, &["angina"])]);
        let t = LabelTable::new(&g);
        let lev = FuzzyMetric::LevenshteinRatio;
        assert_eq!(strsim::levenshtein_ratio("anemia", "anaemia"), 1.0 / 7.0);
        // three substitutions (e-g, m-i, i-n); confirmed with a full DP table
        assert_eq!(strsim::levenshtein_ratio("anemia", "angina"), 3.0 / 6.0);
        assert_eq!(t.fuzzy_match("anemia", &lev, 1.0 / 7.0).sctid(), Some(Sctid(1)));
        assert_eq!(t.fuzzy_match("anemia", &lev, 0.2).sctid(), Some(Sctid(1)));
        assert!(!t.fuzzy_match("anemia", &lev, 0.14).is_hit());
        match t.fuzzy_match("anaemia", &lev, 0.0) {
            MatchResult::Hit { sctid, score, .. } => assert_eq!((sctid, score), (Sctid(1), 0.0)),
            other => panic!("{other:?}"),
        }
        assert!(!t.fuzzy_match("anemiaa", &lev, 0.0).is_hit());
    }

    #[test]
    fn fuzzy_ties_go_to_smaller_sctid() {
        let g = graph(&[(7, &["abcd"]), (3, &["abce"])]);
        let t = LabelTable::new(&g);
        let r = t.fuzzy_match("abcf", &FuzzyMetric::LevenshteinRatio, 0.5);
        assert_eq!(r.sctid(), Some(Sctid(3)));
    }

    #[test]
    fn tune_threshold_cases() {
        let g = graph(&[(1, &["abcdefghij"]), (2, &["zzzz"])]);
        let t = LabelTable::new(&g);
        let lev = FuzzyMetric::LevenshteinRatio;
        // one substitution in ten characters: only reachable once tau >= 0.10
        let dev = vec![mention(1, "abcdefghiX", 1)];
        let sweep = tune_threshold(&t, &dev, Level::General, &lev, &[0.05, 0.10, 0.15]).unwrap();
        assert_eq!(sweep.best_tau, 0.10);
        let single = tune_threshold(&t, &dev, Level::General, &lev, &[0.3]).unwrap();
        assert_eq!(single.best_tau, 0.3);
        assert!(tune_threshold(&t, &dev, Level::General, &lev, &[]).is_err());
        assert_eq!(lev.default_grid().len(), 11);
        assert_eq!(lev.default_grid()[0], 0.10);
        assert_eq!(lev.default_grid()[10], 0.20);
        let sg = FuzzyMetric::stoilos().default_grid();
        assert_eq!((sg[0], sg[10], sg.len()), (0.05, 0.10, 11));
    }

    fn labels() -> impl Strategy<Value = Vec<Vec<String>>> {
        prop::collection::vec(prop::collection::vec("[abc]{1,6}", 1..4), 1..12)
    }

    fn build(labels: &[Vec<String>]) -> ConceptGraph {
        ConceptGraph::from_parts(
            labels
                .iter()
                .enumerate()
                .map(|(i, l)| Concept::new(Sctid(100 + i as u64), l.clone(), "t")),
            vec![],
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn fuzzy_is_global_minimum(ls in labels(), term in "[abc]{0,6}", stoilos in any::<bool>()) {
            let g = build(&ls);
            let t = LabelTable::new(&g);
            let metric = if stoilos { FuzzyMetric::stoilos() } else { FuzzyMetric::LevenshteinRatio };
            // linear-scan oracle over (sctid, label order)
            let mut oracle: Option<(f64, Sctid)> = None;
            for c in g.concepts() {
                for l in &c.labels {
                    let d = match metric {
                        FuzzyMetric::LevenshteinRatio => strsim::levenshtein_ratio(&term, &fold(l)),
                        FuzzyMetric::Stoilos(p) => strsim::stoilos_distance(&term, &fold(l), &p),
                    };
                    if oracle.map_or(true, |(bd, _)| d < bd) {
                        oracle = Some((d, c.sctid));
                    }
                }
            }
            prop_assert_eq!(t.closest(&term, &metric), oracle);
        }

        #[test]
        fn prefilter_changes_nothing(ls in labels(), term in "[abc]{0,6}", tau in 0.0f64..1.0) {
            let t = LabelTable::new(&build(&ls));
            let lev = FuzzyMetric::LevenshteinRatio;
            prop_assert_eq!(
                t.fuzzy_match_opts(&term, &lev, tau, true),
                t.fuzzy_match_opts(&term, &lev, tau, false)
            );
        }

        #[test]
        fn tau_one_never_misses(ls in labels(), term in "[abcd]{0,6}") {
            let t = LabelTable::new(&build(&ls));
            prop_assert!(t.fuzzy_match(&term, &FuzzyMetric::LevenshteinRatio, 1.0).is_hit());
        }

        #[test]
        fn raising_tau_keeps_hits(ls in labels(), term in "[abc]{0,6}", a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let t = LabelTable::new(&build(&ls));
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            for metric in [FuzzyMetric::LevenshteinRatio, FuzzyMetric::stoilos()] {
                let low = t.fuzzy_match(&term, &metric, lo);
                if low.is_hit() {
                    prop_assert_eq!(t.fuzzy_match(&term, &metric, hi).sctid(), low.sctid());
                }
            }
        }

        #[test]
        fn dictionary_recalls_unambiguous_training_terms(
            rows in prop::collection::vec(("[ab]{1,3}", 1u64..5), 1..30)
        ) {
            let train: Vec<Mention> = rows
                .iter()
                .enumerate()
                .map(|(i, (t, c))| mention(i as u64, t, *c))
                .collect();
            let d = build_dictionary(&train, Level::General);
            for m in &train {
                let unique = train
                    .iter()
                    .filter(|o| fold(&o.term) == fold(&m.term))
                    .all(|o| o.general == m.general);
                if unique {
                    prop_assert_eq!(d.lookup(&m.term).sctid(), Some(m.general));
                }
            }
        }
    }
}
