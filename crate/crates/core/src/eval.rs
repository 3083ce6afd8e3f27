//! Top-k evaluation: prediction files, Acc@1 / Acc@10 / MRR, and report
//! rendering.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::corpus::{Level, Mention};
use crate::error::{read_to_string, write_file, Error, Result};
use crate::kg::Sctid;
use crate::linker::Prediction;

/// `mention_id  rank  sctid  score  provenance`, one row per candidate.
pub fn render_predictions(predictions: &[Prediction]) -> String {
    let mut out = String::new();
    for p in predictions {
        if let Some(a) = &p.answer {
            for (rank, (sctid, score)) in a.candidates.iter().enumerate() {
                writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}",
                    p.mention_id,
                    rank + 1,
                    sctid,
                    score,
                    a.provenance
                )
                .unwrap();
            }
        }
    }
    out
}

pub fn write_predictions(path: &Path, predictions: &[Prediction]) -> Result<()> {
    write_file(path, render_predictions(predictions))
}

/// Candidate lists per mention, in rank order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictionSet {
    pub candidates: BTreeMap<u64, Vec<Sctid>>,
    pub provenance: BTreeMap<u64, String>,
}

impl PredictionSet {
    pub fn from_predictions(predictions: &[Prediction]) -> Self {
        let mut set = PredictionSet::default();
        for p in predictions {
            if let Some(a) = &p.answer {
                set.candidates
                    .insert(p.mention_id, a.candidates.iter().map(|(s, _)| *s).collect());
                set.provenance.insert(p.mention_id, a.provenance.clone());
            }
        }
        set
    }

    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut rows: BTreeMap<u64, BTreeMap<usize, Sctid>> = BTreeMap::new();
        let mut provenance = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let no = i + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || (no == 1 && line.starts_with("mention_id")) {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 5 {
                return Err(Error::parse(path, no, format!("expected 5 columns, found {}", f.len())));
            }
            let id: u64 = f[0]
                .parse()
                .map_err(|_| Error::parse(path, no, format!("invalid mention id {:?}", f[0])))?;
            let rank: usize = f[1]
                .parse()
                .ok()
                .filter(|r| *r >= 1)
                .ok_or_else(|| Error::parse(path, no, format!("invalid rank {:?}", f[1])))?;
            let sctid: Sctid = f[2]
                .parse()
                .map_err(|_| Error::parse(path, no, format!("invalid sctid {:?}", f[2])))?;
            f[3].parse::<f64>()
                .ok()
                .filter(|s| s.is_finite())
                .ok_or_else(|| Error::parse(path, no, format!("invalid score {:?}", f[3])))?;
            if rows.entry(id).or_default().insert(rank, sctid).is_some() {
                return Err(Error::parse(
                    path,
                    no,
                    format!("duplicate rank {rank} for mention {id}"),
                ));
            }
            provenance.entry(id).or_insert_with(|| f[4].to_string());
        }
        let mut set = PredictionSet {
            candidates: BTreeMap::new(),
            provenance,
        };
        for (id, ranks) in rows {
            if ranks.keys().copied().ne(1..=ranks.len()) {
                return Err(Error::parse(path, 0, format!("ranks of mention {id} are not 1..n")));
            }
            set.candidates.insert(id, ranks.into_values().collect());
        }
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_to_string(path)?, &path.display().to_string())
    }
}

/// Hits below this rank add nothing to MRR (the metric is MRR@10).
pub const MRR_CUTOFF: usize = 10;

/// 1-based rank of the first occurrence of `gold`.
pub fn first_hit_rank(candidates: &[Sctid], gold: Sctid) -> Option<usize> {
    candidates.iter().position(|c| *c == gold).map(|i| i + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProvenanceRow {
    pub provenance: String,
    pub n: usize,
    pub acc1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n: usize,
    pub acc1: f64,
    pub acc10: f64,
    pub mrr: f64,
    /// Gold mentions without any prediction (scored as misses).
    pub missing: usize,
    /// Per answering component, in name order.
    pub breakdown: Vec<ProvenanceRow>,
}

/// Scores candidate lists against gold mentions at `level`. Mentions absent
/// from `predictions` count as misses.
pub fn score(predictions: &PredictionSet, gold: &[Mention], level: Level) -> EvalReport {
    let (mut hit1, mut hit10, mut rr, mut missing) = (0usize, 0usize, 0.0, 0usize);
    let mut by_source: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for m in gold {
        let Some(c) = predictions.candidates.get(&m.id) else {
            missing += 1;
            continue;
        };
        let rank = first_hit_rank(c, m.gold(level));
        if let Some(r) = rank {
            hit1 += usize::from(r == 1);
            if r <= MRR_CUTOFF {
                hit10 += 1;
                rr += 1.0 / r as f64;
            }
        }
        if let Some(p) = predictions.provenance.get(&m.id) {
            let e = by_source.entry(p).or_default();
            e.0 += 1;
            e.1 += usize::from(rank == Some(1));
        }
    }
    if missing > 0 {
        log::warn!(
            "{missing} of {} gold mentions have no prediction; counted as misses",
            gold.len()
        );
    }
    let n = gold.len();
    let frac = |x: f64| if n == 0 { 0.0 } else { x / n as f64 };
    EvalReport {
        n,
        acc1: frac(hit1 as f64),
        acc10: frac(hit10 as f64),
        mrr: frac(rr),
        missing,
        breakdown: by_source
            .into_iter()
            .map(|(p, (k, h))| ProvenanceRow {
                provenance: p.to_string(),
                n: k,
                acc1: h as f64 / k as f64,
            })
            .collect(),
    }
}

/// Two decimals, halves rounded up (0.515 -> "0.52").
pub fn round2(x: f64) -> String {
    let scaled = (x * 100.0 + 0.5 + 1e-9).floor();
    format!("{:.2}", scaled / 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TableFormat {
    #[default]
    Text,
    Csv,
}

impl FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(TableFormat::Text),
            "csv" => Ok(TableFormat::Csv),
            other => Err(Error::Config(format!("unknown format {other:?} (text or csv)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub split: String,
    pub level: String,
    pub report: EvalReport,
}

const COLUMNS: [&str; 7] = ["method", "split", "level", "n", "Acc@1", "Acc@10", "MRR"];

fn cells(row: &ReportRow) -> [String; 7] {
    let r = &row.report;
    [
        row.method.clone(),
        row.split.clone(),
        row.level.clone(),
        r.n.to_string(),
        round2(r.acc1),
        round2(r.acc10),
        round2(r.mrr),
    ]
}

/// Rows in the given order; an empty slice renders the header only.
pub fn report_table(rows: &[ReportRow], format: TableFormat) -> String {
    let body: Vec<[String; 7]> = rows.iter().map(cells).collect();
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            out.push_str(&COLUMNS.join(","));
            out.push('\n');
            for r in &body {
                let quoted: Vec<String> = r
                    .iter()
                    .map(|c| {
                        if c.contains([',', '"']) {
                            format!("\"{}\"", c.replace('"', "\"\""))
                        } else {
                            c.clone()
                        }
                    })
                    .collect();
                out.push_str(&quoted.join(","));
                out.push('\n');
            }
        }
        TableFormat::Text => {
            let mut width: Vec<usize> = COLUMNS.iter().map(|c| c.len()).collect();
            for r in &body {
                for (w, c) in width.iter_mut().zip(r) {
                    *w = (*w).max(c.chars().count());
                }
            }
            let line = |cols: &[String]| -> String {
                let padded: Vec<String> = cols
                    .iter()
                    .zip(&width)
                    .enumerate()
                    .map(|(i, (c, w))| if i < 3 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                    .collect();
                padded.join("  ").trim_end().to_string() + "\n"
            };
            out.push_str(&line(&COLUMNS.map(String::from)));
            for r in &body {
                out.push_str(&line(r));
            }
        }
    }
    out
}

/// Full-precision `key=value` records separated by blank lines.
pub fn machine_report(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let r = &row.report;
        writeln!(out, "method={}", row.method).unwrap();
        writeln!(out, "split={}", row.split).unwrap();
        writeln!(out, "level={}", row.level).unwrap();
        writeln!(out, "n={}", r.n).unwrap();
        writeln!(out, "acc1={}", r.acc1).unwrap();
        writeln!(out, "acc10={}", r.acc10).unwrap();
        writeln!(out, "mrr={}", r.mrr).unwrap();
        writeln!(out, "missing={}", r.missing).unwrap();
    }
    out
}

/// Reads back records written by [`machine_report`].
pub fn parse_machine_report(text: &str) -> Vec<HashMap<String, String>> {
    text.split("\n\n")
        .filter(|b| !b.trim().is_empty())
        .map(|block| {
            block
                .lines()
                .filter_map(|l| l.split_once('='))
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linker::Answer;

    fn gold(id: u64, s: u64) -> Mention {
        Mention::new(id, "t", Sctid(s), Sctid(s), "t", "r")
    }

    fn set(rows: &[(u64, Vec<u64>)]) -> PredictionSet {
        let preds: Vec<Prediction> = rows
            .iter()
            .map(|(id, c)| Prediction {
                mention_id: *id,
                answer: Some(Answer {
                    candidates: c.iter().map(|s| (Sctid(*s), 0.5)).collect(),
                    provenance: "x".into(),
                }),
            })
            .collect();
        PredictionSet::parse(&render_predictions(&preds), "p").unwrap()
    }

    #[test]
    fn rank_four() {
        let r = score(&set(&[(1, vec![5, 6, 7, 9])]), &[gold(1, 9)], Level::Specific);
        assert_eq!((r.acc1, r.acc10, r.mrr), (0.0, 1.0, 0.25));
    }

    #[test]
    fn fixture_ranks_1_2_11_miss() {
        let mut far: Vec<u64> = (100..110).collect();
        far.push(3);
        let preds = set(&[(1, vec![1]), (2, vec![9, 2]), (3, far), (4, vec![8])]);
        let g = [gold(1, 1), gold(2, 2), gold(3, 3), gold(4, 4)];
        let r = score(&preds, &g, Level::Specific);
        assert_eq!((r.acc1, r.acc10, r.mrr), (0.25, 0.5, 0.375));
    }

    #[test]
    fn missing_predictions_are_misses() {
        let r = score(&set(&[(1, vec![1])]), &[gold(1, 1), gold(2, 2)], Level::Specific);
        assert_eq!((r.acc1, r.missing), (0.5, 1));
    }

    #[test]
    fn malformed_rows() {
        assert!(PredictionSet::parse("1\t1\t5\t0.5\n", "p").is_err());
        assert!(PredictionSet::parse("1\t0\t5\t0.5\tx\n", "p").is_err());
        assert!(PredictionSet::parse("1\t1\t5\t0.5\tx\n1\t1\t6\t0.5\tx\n", "p").is_err());
        assert!(PredictionSet::parse("1\t2\t5\t0.5\tx\n", "p").is_err());
    }

    #[test]
    fn rounding_and_tables() {
        assert_eq!(round2(0.515), "0.52");
        assert_eq!(round2(0.514999), "0.51");
        assert_eq!(round2(1.0), "1.00");
        assert_eq!(round2(0.375), "0.38");
        assert_eq!(
            report_table(&[], TableFormat::Csv),
            "method,split,level,n,Acc@1,Acc@10,MRR\n"
        );
        let row = ReportRow {
            method: "dict".into(),
            split: "stratified".into(),
            level: "specific".into(),
            report: score(&set(&[(1, vec![1])]), &[gold(1, 1)], Level::Specific),
        };
        let t = report_table(std::slice::from_ref(&row), TableFormat::Text);
        assert_eq!(t.lines().count(), 2);
        let cols: Vec<&str> = t.lines().nth(1).unwrap().split_whitespace().collect();
        assert_eq!(cols, ["dict", "stratified", "specific", "1", "1.00", "1.00", "1.00"]);
        let m = parse_machine_report(&machine_report(&[row.clone(), row]));
        assert_eq!(m.len(), 2);
        assert_eq!(m[0]["acc1"], "1");
    }
}
