//! Surface-distance kernels: Levenshtein distance and ratio, Jaro-Winkler,
//! and the Stoilos similarity (iterative longest-common-substring
//! commonality, Hamacher-product difference, Jaro-Winkler).
//!
//! All kernels compare Unicode scalar values, not bytes.

use std::cmp::Ordering;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoilosParams {
    /// Hamacher t-norm parameter, in (0, 1].
    pub hamacher_p: f64,
    /// Common substrings shorter than this are not counted.
    pub min_substring_len: usize,
    pub winkler_prefix_scale: f64,
    pub winkler_max_prefix: usize,
}

impl Default for StoilosParams {
    fn default() -> Self {
        StoilosParams {
            hamacher_p: 0.6,
            min_substring_len: 3,
            winkler_prefix_scale: 0.1,
            winkler_max_prefix: 4,
        }
    }
}

impl StoilosParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.hamacher_p > 0.0 && self.hamacher_p <= 1.0) {
            return Err(Error::Config(format!(
                "hamacher_p must lie in (0, 1], got {}",
                self.hamacher_p
            )));
        }
        if self.min_substring_len == 0 {
            return Err(Error::Config("min_substring_len must be >= 1".into()));
        }
        if !(0.0..=0.25).contains(&self.winkler_prefix_scale) {
            return Err(Error::Config(format!(
                "winkler_prefix_scale must lie in [0, 0.25], got {}",
                self.winkler_prefix_scale
            )));
        }
        // keeps Jaro-Winkler inside [0, 1]
        if self.winkler_prefix_scale * self.winkler_max_prefix as f64 > 1.0 {
            return Err(Error::Config(
                "winkler_prefix_scale * winkler_max_prefix must not exceed 1".into(),
            ));
        }
        Ok(())
    }
}

fn chars(s: &str) -> Vec<char> {
    s.chars().collect()
}

pub fn levenshtein(x: &str, y: &str) -> usize {
    levenshtein_chars(&chars(x), &chars(y))
}

pub(crate) fn levenshtein_chars(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `Lev(x, y) / max(|x|, |y|)`; two empty strings give 0.
pub fn levenshtein_ratio(x: &str, y: &str) -> f64 {
    levenshtein_ratio_chars(&chars(x), &chars(y))
}

pub(crate) fn levenshtein_ratio_chars(a: &[char], b: &[char]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 0.0;
    }
    levenshtein_chars(a, b) as f64 / longest as f64
}

/// Jaro similarity. Two empty strings give 1, one empty string gives 0.
pub fn jaro(x: &str, y: &str) -> f64 {
    jaro_chars(&chars(x), &chars(y))
}

fn jaro_chars(a: &[char], b: &[char]) -> f64 {
    // Greedy matching is order dependent in rare cases; fix the order.
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let window = (a.len().max(b.len()) / 2).saturating_sub(1);
    let mut a_matched = vec![false; a.len()];
    let mut b_matched = vec![false; b.len()];
    let mut matches = 0usize;
    for (i, ca) in a.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window + 1).min(b.len());
        for j in lo..hi {
            if !b_matched[j] && b[j] == *ca {
                a_matched[i] = true;
                b_matched[j] = true;
                matches += 1;
                break;
            }
        }
    }
    if matches == 0 {
        return 0.0;
    }
    let a_seq = a.iter().zip(&a_matched).filter(|(_, m)| **m).map(|(c, _)| c);
    let b_seq = b.iter().zip(&b_matched).filter(|(_, m)| **m).map(|(c, _)| c);
    let half_transpositions = a_seq.zip(b_seq).filter(|(p, q)| p != q).count();
    let m = matches as f64;
    let t = (half_transpositions / 2) as f64;
    (m / a.len() as f64 + m / b.len() as f64 + (m - t) / m) / 3.0
}

/// Jaro similarity boosted by the shared prefix (capped at `max_prefix`).
pub fn jaro_winkler_with(x: &str, y: &str, prefix_scale: f64, max_prefix: usize) -> f64 {
    jaro_winkler_chars(&chars(x), &chars(y), prefix_scale, max_prefix)
}

fn jaro_winkler_chars(a: &[char], b: &[char], prefix_scale: f64, max_prefix: usize) -> f64 {
    let j = jaro_chars(a, b);
    let prefix = a.iter().zip(b).take(max_prefix).take_while(|(p, q)| p == q).count();
    j + prefix as f64 * prefix_scale * (1.0 - j)
}

/// Jaro-Winkler with the usual scale 0.1 and prefix cap 4.
pub fn jaro_winkler(x: &str, y: &str) -> f64 {
    jaro_winkler_with(x, y, 0.1, 4)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Commonality {
    pub comm: f64,
    pub unmatched_x: String,
    pub unmatched_y: String,
}

/// Longest common substring as (start in a, start in b, length). Among
/// equally long substrings the smallest start in `a` wins, then in `b`.
pub(crate) fn longest_common_substring(a: &[char], b: &[char]) -> (usize, usize, usize) {
    let mut best = (0, 0, 0);
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            cur[j] = if a[i - 1] == b[j - 1] { prev[j - 1] + 1 } else { 0 };
            // Scanning end positions in ascending order means the first
            // occurrence of a new maximum also has the smallest starts.
            if cur[j] > best.2 {
                best = (i - cur[j], j - cur[j], cur[j]);
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

fn commonality_chars(a: &[char], b: &[char], params: &StoilosParams) -> (f64, Vec<char>, Vec<char>) {
    // Identical strings match in full, however short.
    if a == b {
        return (1.0, Vec::new(), Vec::new());
    }
    let total = a.len() + b.len();
    let mut ra = a.to_vec();
    let mut rb = b.to_vec();
    let mut matched = 0usize;
    loop {
        let (sa, sb, len) = longest_common_substring(&ra, &rb);
        if len < params.min_substring_len || len == 0 {
            break;
        }
        matched += len;
        ra.drain(sa..sa + len);
        rb.drain(sb..sb + len);
    }
    (2.0 * matched as f64 / total as f64, ra, rb)
}

/// Iterative commonality: repeatedly remove the longest common substring of
/// the residuals until it is shorter than `min_substring_len`. Returns
/// `2 * matched / (|x| + |y|)` and the final residuals.
///
/// The pair is processed in lexicographic order so that the result is
/// symmetric even when several longest substrings tie.
pub fn stoilos_commonality(x: &str, y: &str, params: &StoilosParams) -> Commonality {
    let (a, b) = (chars(x), chars(y));
    let swapped = a > b;
    let (first, second) = if swapped { (&b, &a) } else { (&a, &b) };
    let (comm, r1, r2) = commonality_chars(first, second, params);
    let (rx, ry) = if swapped { (r2, r1) } else { (r1, r2) };
    Commonality {
        comm,
        unmatched_x: rx.into_iter().collect(),
        unmatched_y: ry.into_iter().collect(),
    }
}

fn hamacher_difference(ux: f64, uy: f64, p: f64) -> f64 {
    let prod = ux * uy;
    if prod == 0.0 {
        return 0.0;
    }
    prod / (p + (1.0 - p) * (ux + uy - prod))
}

fn normalized_len(residual: usize, original: usize) -> f64 {
    if original == 0 {
        0.0
    } else {
        residual as f64 / original as f64
    }
}

/// Hamacher product of the residual lengths, each normalised by the length
/// of its original string.
pub fn stoilos_difference(
    unmatched_x: &str,
    unmatched_y: &str,
    orig_x: &str,
    orig_y: &str,
    params: &StoilosParams,
) -> f64 {
    let ux = normalized_len(unmatched_x.chars().count(), orig_x.chars().count());
    let uy = normalized_len(unmatched_y.chars().count(), orig_y.chars().count());
    hamacher_difference(ux, uy, params.hamacher_p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoilosBreakdown {
    pub comm: f64,
    pub diff: f64,
    pub jaro_winkler: f64,
    pub similarity: f64,
}

impl StoilosBreakdown {
    pub fn distance(&self) -> f64 {
        (2.0 - self.similarity) / 3.0
    }
}

pub fn stoilos_breakdown(x: &str, y: &str, params: &StoilosParams) -> StoilosBreakdown {
    stoilos_breakdown_chars(&chars(x), &chars(y), params)
}

pub(crate) fn stoilos_breakdown_chars(a: &[char], b: &[char], params: &StoilosParams) -> StoilosBreakdown {
    let (first, second) = if a <= b { (a, b) } else { (b, a) };
    let (comm, r1, r2) = commonality_chars(first, second, params);
    let diff = hamacher_difference(
        normalized_len(r1.len(), first.len()),
        normalized_len(r2.len(), second.len()),
        params.hamacher_p,
    );
    let jw = jaro_winkler_chars(first, second, params.winkler_prefix_scale, params.winkler_max_prefix);
    StoilosBreakdown {
        comm,
        diff,
        jaro_winkler: jw,
        similarity: comm - diff + jw,
    }
}

/// `comm - diff + jaro_winkler`, in [-1, 2].
pub fn stoilos_similarity(x: &str, y: &str, params: &StoilosParams) -> f64 {
    stoilos_breakdown(x, y, params).similarity
}

/// `(2 - similarity) / 3`: 0 for identical strings, 1 for disjoint ones.
pub fn stoilos_distance(x: &str, y: &str, params: &StoilosParams) -> f64 {
    stoilos_breakdown(x, y, params).distance()
}

/// Total order on distances used for tie-breaking in matchers.
pub(crate) fn cmp_distance(a: f64, b: f64) -> Ordering {
    a.total_cmp(&b)
}
