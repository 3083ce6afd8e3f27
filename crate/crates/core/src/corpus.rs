//! Mention corpora and Stratified / Zero-Shot train-dev-test splits.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{read_to_string, write_file, Error, Result};
use crate::kg::{fold, ConceptGraph, Sctid};
use crate::manifest::Manifest;

pub const CORPUS_HEADER: &str = "ID\tTerm\tGeneral SCTID\tSpecific SCTID\tExample\tSubreddit";

#[derive(Debug, Clone, PartialEq)]
pub struct Mention {
    pub id: u64,
    pub term: String,
    pub general: Sctid,
    pub specific: Sctid,
    pub example: String,
    pub subreddit: String,
    /// Whether `example` contains `term` case-insensitively.
    pub term_in_example: bool,
}

impl Mention {
    pub fn new(
        id: u64,
        term: impl Into<String>,
        general: Sctid,
        specific: Sctid,
        example: impl Into<String>,
        subreddit: impl Into<String>,
    ) -> Self {
        let term = term.into();
        let example = example.into();
        let term_in_example = example.to_lowercase().contains(&term.to_lowercase());
        Mention {
            id,
            term,
            general,
            specific,
            example,
            subreddit: subreddit.into(),
            term_in_example,
        }
    }

    pub fn gold(&self, level: Level) -> Sctid {
        match level {
            Level::General => self.general,
            Level::Specific => self.specific,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Level {
    General,
    Specific,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::General => "general",
            Level::Specific => "specific",
        })
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "general" => Ok(Level::General),
            "specific" => Ok(Level::Specific),
            other => Err(Error::Config(format!("unknown level {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitKind {
    Stratified,
    ZeroShot,
}

impl fmt::Display for SplitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitKind::Stratified => "stratified",
            SplitKind::ZeroShot => "zero-shot",
        })
    }
}

impl FromStr for SplitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "stratified" => Ok(SplitKind::Stratified),
            "zero-shot" | "zeroshot" | "zero_shot" => Ok(SplitKind::ZeroShot),
            other => Err(Error::Config(format!("unknown split kind {other:?}"))),
        }
    }
}

/// Target (train, dev, test) fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratios {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl Default for Ratios {
    fn default() -> Self {
        Ratios {
            train: 0.675,
            dev: 0.11,
            test: 0.215,
        }
    }
}

impl Ratios {
    pub fn new(train: f64, dev: f64, test: f64) -> Result<Self> {
        let r = Ratios { train, dev, test };
        let all = [train, dev, test];
        if all.iter().any(|x| !x.is_finite() || *x <= 0.0) {
            return Err(Error::Config(format!("ratios must be positive: {r}")));
        }
        if (train + dev + test - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("ratios must sum to 1: {r}")));
        }
        Ok(r)
    }

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.dev, self.test]
    }
}

impl fmt::Display for Ratios {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.train, self.dev, self.test)
    }
}

impl FromStr for Ratios {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("invalid ratios {s:?}")))?;
        match parts.as_slice() {
            [a, b, c] => Ratios::new(*a, *b, *c),
            _ => Err(Error::Config(format!("expected three ratios, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSplit {
    pub level: Level,
    pub kind: SplitKind,
    pub seed: u64,
    pub ratios: Ratios,
    pub train: Vec<Mention>,
    pub dev: Vec<Mention>,
    pub test: Vec<Mention>,
}

pub fn parse_corpus(text: &str, path: &str) -> Result<Vec<Mention>> {
    let mut mentions = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let row = raw.trim_end_matches('\r');
        if row.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = row.split('\t').collect();
        if mentions.is_empty() && seen.is_empty() && cols[0].trim() == "ID" {
            continue;
        }
        if cols.len() != 6 {
            return Err(Error::parse(
                path,
                line,
                format!("expected 6 columns, found {}", cols.len()),
            ));
        }
        let id: u64 = cols[0]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line, format!("invalid id {:?}", cols[0])))?;
        let sctid = |s: &str| {
            s.parse::<Sctid>()
                .map_err(|_| Error::parse(path, line, format!("invalid sctid {s:?}")))
        };
        let (general, specific) = (sctid(cols[2])?, sctid(cols[3])?);
        if cols[1].trim().is_empty() || cols[4].trim().is_empty() {
            return Err(Error::Validation(format!(
                "{path}:{line}: term and example must be non-empty"
            )));
        }
        if !seen.insert(id) {
            return Err(Error::Validation(format!("{path}:{line}: duplicate id {id}")));
        }
        mentions.push(Mention::new(id, cols[1], general, specific, cols[4], cols[5]));
    }
    Ok(mentions)
}

pub fn load_corpus(path: &Path) -> Result<Vec<Mention>> {
    parse_corpus(&read_to_string(path)?, &path.display().to_string())
}

pub fn render_corpus(mentions: &[Mention]) -> String {
    let mut out = String::from(CORPUS_HEADER);
    out.push('\n');
    for m in mentions {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            m.id, m.term, m.general, m.specific, m.example, m.subreddit
        ));
    }
    out
}

pub fn write_corpus(path: &Path, mentions: &[Mention]) -> Result<()> {
    write_file(path, render_corpus(mentions))
}

/// Checks that every gold id references a concept of `graph`.
pub fn validate_against(mentions: &[Mention], graph: &ConceptGraph) -> Result<()> {
    for m in mentions {
        for id in [m.general, m.specific] {
            if !graph.contains(id) {
                return Err(Error::Validation(format!(
                    "mention {} references unknown sctid {id}",
                    m.id
                )));
            }
        }
    }
    Ok(())
}

/// Index of the partition whose count lags furthest behind its target.
/// Ties go to the earliest partition (train, dev, test).
fn most_behind(targets: &[f64; 3], counts: &[usize; 3], allowed: &[bool; 3]) -> usize {
    let mut best = usize::MAX;
    let mut best_gap = f64::NEG_INFINITY;
    for i in 0..3 {
        if !allowed[i] {
            continue;
        }
        let gap = targets[i] - counts[i] as f64;
        if gap > best_gap {
            best_gap = gap;
            best = i;
        }
    }
    best
}

/// Splits `mentions` into train/dev/test at `level`.
///
/// Stratified: every concept gets one mention in train first; remaining
/// mentions go to the partition furthest below its target size. ZeroShot:
/// whole concept groups are assigned the same way, so dev/test concepts never
/// occur in train. Both shuffle with a ChaCha RNG seeded from `seed`.
pub fn make_split(
    mentions: &[Mention],
    level: Level,
    kind: SplitKind,
    ratios: Ratios,
    seed: u64,
) -> Result<CorpusSplit> {
    let ratios = Ratios::new(ratios.train, ratios.dev, ratios.test)?;
    let mut groups: BTreeMap<Sctid, Vec<&Mention>> = BTreeMap::new();
    for m in mentions {
        groups.entry(m.gold(level)).or_default().push(m);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut groups: Vec<Vec<&Mention>> = groups
        .into_values()
        .map(|mut g| {
            g.sort_by_key(|m| m.id);
            g.shuffle(&mut rng);
            g
        })
        .collect();
    groups.shuffle(&mut rng);

    let n = mentions.len() as f64;
    let targets = ratios.as_array().map(|r| r * n);
    let mut counts = [0usize; 3];
    let mut parts: [Vec<Mention>; 3] = Default::default();

    match kind {
        SplitKind::Stratified => {
            if groups.iter().all(|g| g.len() < 2) {
                return Err(Error::Infeasible(
                    "stratified split needs at least one concept with two or more mentions".into(),
                ));
            }
            for g in &groups {
                parts[0].push(g[0].clone());
                counts[0] += 1;
            }
            for g in &groups {
                for m in &g[1..] {
                    let p = most_behind(&targets, &counts, &[true; 3]);
                    parts[p].push((*m).clone());
                    counts[p] += 1;
                }
            }
        }
        SplitKind::ZeroShot => {
            if groups.len() < 2 {
                return Err(Error::Infeasible(
                    "zero-shot split needs at least two distinct concepts".into(),
                ));
            }
            let last = groups.len() - 1;
            for (i, g) in groups.iter().enumerate() {
                // Keep train non-empty: the final group may not leave it empty.
                let allowed = if i == last && counts[0] == 0 {
                    [true, false, false]
                } else if i == last && counts[1] + counts[2] == 0 {
                    [false, true, true]
                } else {
                    [true; 3]
                };
                let p = most_behind(&targets, &counts, &allowed);
                parts[p].extend(g.iter().map(|m| (*m).clone()));
                counts[p] += g.len();
            }
        }
    }
    for part in &mut parts {
        part.sort_by_key(|m| m.id);
    }
    let [train, dev, test] = parts;
    Ok(CorpusSplit {
        level,
        kind,
        seed,
        ratios,
        train,
        dev,
        test,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitStats {
    pub sizes: [usize; 3],
    pub unique_concepts: [usize; 3],
    /// Fraction of distinct test concepts also present in train; `None` for
    /// an empty test set.
    pub test_concept_coverage: Option<f64>,
    pub dev_concept_coverage: Option<f64>,
    /// Fraction of test mentions whose folded surface form occurs in train.
    pub test_surface_overlap: Option<f64>,
}

pub fn split_stats(split: &CorpusSplit) -> SplitStats {
    let concepts = |ms: &[Mention]| -> BTreeSet<Sctid> { ms.iter().map(|m| m.gold(split.level)).collect() };
    let train_c = concepts(&split.train);
    let dev_c = concepts(&split.dev);
    let test_c = concepts(&split.test);
    let coverage = |c: &BTreeSet<Sctid>| {
        (!c.is_empty()).then(|| c.iter().filter(|id| train_c.contains(id)).count() as f64 / c.len() as f64)
    };
    let train_terms: HashSet<String> = split.train.iter().map(|m| fold(&m.term)).collect();
    let overlap = (!split.test.is_empty()).then(|| {
        split
            .test
            .iter()
            .filter(|m| train_terms.contains(&fold(&m.term)))
            .count() as f64
            / split.test.len() as f64
    });
    SplitStats {
        sizes: [split.train.len(), split.dev.len(), split.test.len()],
        unique_concepts: [train_c.len(), dev_c.len(), test_c.len()],
        test_concept_coverage: coverage(&test_c),
        dev_concept_coverage: coverage(&dev_c),
        test_surface_overlap: overlap,
    }
}

impl fmt::Display for SplitStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
        writeln!(
            f,
            "sizes: train={} dev={} test={}",
            self.sizes[0], self.sizes[1], self.sizes[2]
        )?;
        writeln!(
            f,
            "unique concepts: train={} dev={} test={}",
            self.unique_concepts[0], self.unique_concepts[1], self.unique_concepts[2]
        )?;
        writeln!(
            f,
            "concept coverage by train: dev={} test={}",
            opt(self.dev_concept_coverage),
            opt(self.test_concept_coverage)
        )?;
        write!(f, "test surface overlap with train: {}", opt(self.test_surface_overlap))
    }
}

/// Writes `train.tsv`, `dev.tsv`, `test.tsv` and `split.meta` into `dir`.
pub fn write_split(dir: &Path, split: &CorpusSplit, input_checksum: &str) -> Result<()> {
    for (name, part) in [
        ("train.tsv", &split.train),
        ("dev.tsv", &split.dev),
        ("test.tsv", &split.test),
    ] {
        write_corpus(&dir.join(name), part)?;
    }
    let mut meta = Manifest::new("split");
    meta.config("kind", split.kind.to_string())
        .config("level", split.level.to_string())
        .config("seed", split.seed)
        .config("ratios", split.ratios.to_string())
        .input_checksum("corpus", input_checksum)
        .output_file("train", &dir.join("train.tsv"))?
        .output_file("dev", &dir.join("dev.tsv"))?
        .output_file("test", &dir.join("test.tsv"))?;
    meta.write(&dir.join("split.meta"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(id: u64, concept: u64) -> Mention {
        Mention::new(id, format!("t{id}"), Sctid(concept), Sctid(concept), "ex", "r")
    }

    #[test]
    fn loads_appendix_rows() {
        let text = format!(
            "{CORPUS_HEADER}\n1\tacid\t34957004\t34957004\tI burned myself with acid\tAskDocs\n\
             2\tacid\t34957004\t698065002\tacid in my throat\tcancer\n"
        );
        let ms = parse_corpus(&text, "c.tsv").unwrap();
        assert_eq!(ms.len(), 2);
        assert_eq!(ms[0].general, ms[0].specific);
        assert_eq!(ms[0].general, Sctid(34957004));
        assert_eq!(ms[1].specific, Sctid(698065002));
        assert_ne!(ms[1].general, ms[1].specific);
        assert!(ms[0].term_in_example);
    }

    #[test]
    fn empty_and_header_only_files() {
        assert!(parse_corpus("", "c").unwrap().is_empty());
        assert!(parse_corpus(&format!("{CORPUS_HEADER}\n"), "c").unwrap().is_empty());
    }

    #[test]
    fn duplicate_id_and_bad_columns() {
        let dup = "1\ta\t1\t1\ta\tr\n1\tb\t1\t1\tb\tr\n";
        assert!(matches!(parse_corpus(dup, "c"), Err(Error::Validation(_))));
        let bad = "1\ta\t1\t1\ta\tr\n2\tb\t1\n";
        assert!(matches!(parse_corpus(bad, "c"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn stratified_single_concept() {
        let ms: Vec<_> = (0..6).map(|i| m(i, 7)).collect();
        let s = make_split(
            &ms,
            Level::General,
            SplitKind::Stratified,
            Ratios::new(4.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0).unwrap(),
            1,
        )
        .unwrap();
        assert!(!s.train.is_empty());
        assert_eq!(s.train.len() + s.dev.len() + s.test.len(), 6);
        let st = split_stats(&s);
        assert_eq!(st.test_concept_coverage, Some(1.0));
    }

    #[test]
    fn zero_shot_four_singletons() {
        let ms: Vec<_> = (0..4).map(|i| m(i, 10 + i)).collect();
        let s = make_split(
            &ms,
            Level::General,
            SplitKind::ZeroShot,
            Ratios::new(0.5, 0.25, 0.25).unwrap(),
            3,
        )
        .unwrap();
        assert_eq!([s.train.len(), s.dev.len(), s.test.len()], [2, 1, 1]);
        let st = split_stats(&s);
        assert_eq!(st.test_concept_coverage, Some(0.0));
    }

    #[test]
    fn stratified_infeasible_with_singletons() {
        let ms: Vec<_> = (0..5).map(|i| m(i, 10 + i)).collect();
        let err = make_split(&ms, Level::General, SplitKind::Stratified, Ratios::default(), 0).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn ratios_validated() {
        assert!(Ratios::new(0.5, 0.5, 0.1).is_err());
        assert!(Ratios::new(1.0, 0.0, 0.0).is_err());
        assert!("0.675,0.11,0.215".parse::<Ratios>().is_ok());
    }

    #[test]
    fn stats_on_manual_split() {
        let s = CorpusSplit {
            level: Level::General,
            kind: SplitKind::Stratified,
            seed: 0,
            ratios: Ratios::default(),
            train: vec![m(1, 1)],
            dev: vec![m(2, 1)],
            test: vec![m(3, 1)],
        };
        let st = split_stats(&s);
        assert_eq!(st.sizes, [1, 1, 1]);
        assert_eq!(st.test_concept_coverage, Some(1.0));
        assert_eq!(st.test_surface_overlap, Some(0.0));
    }

    #[test]
    fn level_selects_gold() {
        let x = Mention::new(1, "acid", Sctid(1), Sctid(2), "acid", "r");
        assert_eq!(x.gold(Level::General), Sctid(1));
        assert_eq!(x.gold(Level::Specific), Sctid(2));
    }
}
