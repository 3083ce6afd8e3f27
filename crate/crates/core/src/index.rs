//! Concept target vectors in ascending-sctid order, with exhaustive cosine
//! top-k ranking.

use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;

use crate::embed::{dot, norm, Vector};
use crate::error::{Error, Result};
use crate::kg::Sctid;

const PARALLEL_SCORING_MIN: usize = 4096;

#[derive(Debug, Clone)]
pub struct ConceptTargetIndex {
    dim: usize,
    ids: Vec<Sctid>,
    position: HashMap<Sctid, usize>,
    targets: Vec<f64>,
    unit: Vec<f64>,
}

impl ConceptTargetIndex {
    pub fn new(entries: impl IntoIterator<Item = (Sctid, Vector)>) -> Result<Self> {
        let mut entries: Vec<(Sctid, Vector)> = entries.into_iter().collect();
        entries.sort_by_key(|(id, _)| *id);
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Validation(format!("concept {} indexed twice", w[0].0)));
        }
        let dim = entries.first().map_or(0, |(_, v)| v.dim());
        let mut targets = Vec::with_capacity(entries.len() * dim);
        let mut unit = Vec::with_capacity(entries.len() * dim);
        for (id, v) in &entries {
            if v.dim() != dim {
                return Err(Error::Validation(format!(
                    "target of concept {id} has dim {}, expected {dim}",
                    v.dim()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("target of concept {id}")));
            }
            targets.extend_from_slice(v);
            unit.extend_from_slice(&v.normalized());
        }
        let ids: Vec<Sctid> = entries.into_iter().map(|(id, _)| id).collect();
        let position = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        Ok(ConceptTargetIndex {
            dim,
            ids,
            position,
            targets,
            unit,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[Sctid] {
        &self.ids
    }

    pub fn position(&self, sctid: Sctid) -> Option<usize> {
        self.position.get(&sctid).copied()
    }

    pub fn target(&self, sctid: Sctid) -> Option<&[f64]> {
        self.position(sctid)
            .map(|i| &self.targets[i * self.dim..(i + 1) * self.dim])
    }

    pub fn unit_target(&self, sctid: Sctid) -> Option<&[f64]> {
        self.position(sctid).map(|i| self.unit_at(i))
    }

    fn unit_at(&self, i: usize) -> &[f64] {
        &self.unit[i * self.dim..(i + 1) * self.dim]
    }

    /// Cosine of `prediction` against every target, in index order. A zero
    /// prediction scores 0 everywhere.
    pub fn scores(&self, prediction: &[f64]) -> Result<Vec<f64>> {
        if prediction.len() != self.dim {
            return Err(Error::Validation(format!(
                "prediction has dim {}, index has dim {}",
                prediction.len(),
                self.dim
            )));
        }
        let n = norm(prediction);
        let q: Vec<f64> = if n == 0.0 {
            vec![0.0; self.dim]
        } else {
            prediction.iter().map(|x| x / n).collect()
        };
        let score = |i: usize| dot(&q, self.unit_at(i));
        Ok(if self.len() >= PARALLEL_SCORING_MIN {
            (0..self.len()).into_par_iter().map(score).collect()
        } else {
            (0..self.len()).map(score).collect()
        })
    }

    /// Top-`k` concepts by cosine, ties broken by ascending sctid.
    pub fn rank(&self, prediction: &[f64], k: usize) -> Result<Vec<(Sctid, f64)>> {
        let scores = self.scores(prediction)?;
        Ok(top_k(&scores, k)
            .into_iter()
            .map(|i| (self.ids[i], scores[i]))
            .collect())
    }
}

fn by_score_then_index(scores: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    |a, b| {
        scores[*b]
            .partial_cmp(&scores[*a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(b))
    }
}

/// Indices of the `k` best scores (descending, ties by ascending index).
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let cmp = by_score_then_index(scores);
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    let k = k.min(idx.len());
    if k == 0 {
        return Vec::new();
    }
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, &cmp);
        idx.truncate(k);
    }
    idx.sort_unstable_by(&cmp);
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn index(vs: &[(u64, Vec<f64>)]) -> ConceptTargetIndex {
        ConceptTargetIndex::new(vs.iter().map(|(i, v)| (Sctid(*i), Vector(v.clone())))).unwrap()
    }

    #[test]
    fn exact_hit_ranks_first() {
        let idx = index(&[
            (30, vec![0.0, 1.0, 0.0]),
            (10, vec![2.0, 0.0, 0.0]),
            (20, vec![0.0, 0.0, 5.0]),
        ]);
        assert_eq!(idx.ids(), &[Sctid(10), Sctid(20), Sctid(30)]);
        let r = idx.rank(&[0.0, 3.0, 0.0], 2).unwrap();
        assert_eq!(r[0], (Sctid(30), 1.0));
        assert_eq!(idx.rank(&[1.0, 1.0, 1.0], 10).unwrap().len(), 3);
    }

    #[test]
    fn zero_prediction_is_sctid_prefix() {
        let idx = index(&[(3, vec![1.0]), (1, vec![-1.0]), (2, vec![4.0])]);
        let r = idx.rank(&[0.0], 2).unwrap();
        assert_eq!(r, vec![(Sctid(1), 0.0), (Sctid(2), 0.0)]);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(ConceptTargetIndex::new([(Sctid(1), Vector(vec![1.0])), (Sctid(2), Vector(vec![1.0, 2.0]))]).is_err());
        assert!(ConceptTargetIndex::new([(Sctid(1), Vector(vec![1.0])), (Sctid(1), Vector(vec![2.0]))]).is_err());
        assert!(index(&[(1, vec![1.0])]).rank(&[1.0, 0.0], 1).is_err());
    }

    proptest! {
        #[test]
        fn top_k_matches_full_sort(
            scores in prop::collection::vec(prop::sample::select(vec![-1.0, -0.5, 0.0, 0.25, 0.5, 1.0]), 0..40),
            k in 0usize..45,
        ) {
            let mut full: Vec<usize> = (0..scores.len()).collect();
            // stable sort on descending score keeps ascending index for ties
            full.sort_by(|a, b| scores[*b].partial_cmp(&scores[*a]).unwrap());
            full.truncate(k);
            prop_assert_eq!(top_k(&scores, k), full);
        }
    }
}
