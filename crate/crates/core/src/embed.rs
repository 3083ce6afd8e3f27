//! Pretrained vector files: static word vectors (averaged into term and
//! concept-label embeddings) and per-layer contextual stacks.

use std::fmt::Write as _;
use std::ops::Deref;
use std::path::Path;

use indexmap::IndexMap;

use crate::error::{read_to_string, write_file, Error, Result};
use crate::kg::{fold, ConceptGraph, Sctid};

/// Dense embedding with finite components.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vector(pub Vec<f64>);

impl Vector {
    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }

    /// Unit-length copy; the zero vector stays zero.
    pub fn normalized(&self) -> Vector {
        let n = self.norm();
        if n == 0.0 {
            return self.clone();
        }
        Vector(self.0.iter().map(|v| v / n).collect())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity; 0 whenever either side is the zero vector.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

/// Concatenates vectors in order.
pub fn concat<'a>(parts: impl IntoIterator<Item = &'a [f64]>) -> Result<Vector> {
    let mut out = Vec::new();
    let mut any = false;
    for p in parts {
        any = true;
        out.extend_from_slice(p);
    }
    if !any {
        return Err(Error::Config("cannot concatenate an empty list".into()));
    }
    Ok(Vector(out))
}

fn mean<'a>(vectors: impl IntoIterator<Item = &'a [f64]>, dim: usize) -> Option<Vector> {
    let mut sum = vec![0.0; dim];
    let mut n = 0usize;
    for v in vectors {
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
        n += 1;
    }
    (n > 0).then(|| Vector(sum.into_iter().map(|s| s / n as f64).collect()))
}

fn parse_floats(fields: &[&str], path: &str, line: usize) -> Result<Vec<f64>> {
    fields
        .iter()
        .map(|f| {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::parse(path, line, format!("invalid number {f:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse(path, line, format!("non-finite value {f:?}")));
            }
            Ok(v)
        })
        .collect()
}

fn parse_header<const N: usize>(line: Option<&str>, path: &str) -> Result<[usize; N]> {
    let line = line.ok_or_else(|| Error::parse(path, 1, "missing header"))?;
    let fields: Vec<usize> = line
        .split_whitespace()
        .map(|f| f.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::parse(path, 1, format!("invalid header {line:?}")))?;
    fields
        .try_into()
        .map_err(|_| Error::parse(path, 1, format!("header must have {N} fields")))
}

fn push_row(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{v}").unwrap();
    }
    out.push('\n');
}

/// Token -> vector map loaded from the `N d` text format.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectorStore {
    dim: usize,
    vectors: IndexMap<String, Vector>,
    duplicates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermEmbedding {
    pub vector: Vector,
    /// No token of the term was in vocabulary; `vector` is zero.
    pub oov: bool,
}

impl WordVectorStore {
    pub fn new(dim: usize) -> Self {
        WordVectorStore {
            dim,
            vectors: IndexMap::new(),
            duplicates: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Tokens that appeared more than once in the source file.
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn get(&self, token: &str) -> Option<&Vector> {
        self.vectors.get(token)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Vector)> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn insert(&mut self, token: impl Into<String>, vector: Vector) -> Result<()> {
        if vector.dim() != self.dim {
            return Err(Error::Validation(format!(
                "vector of dim {} in a store of dim {}",
                vector.dim(),
                self.dim
            )));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("word vector component".into()));
        }
        self.vectors.insert(token.into(), vector);
        Ok(())
    }

    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut lines = text.lines().map(|l| l.trim_end_matches('\r'));
        let [count, dim] = parse_header::<2>(lines.next(), path)?;
        let mut store = WordVectorStore::new(dim);
        let mut rows = 0usize;
        for (i, row) in lines.enumerate() {
            let line = i + 2;
            if row.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = row.split_whitespace().collect();
            if fields.len() != dim + 1 {
                return Err(Error::parse(
                    path,
                    line,
                    format!("expected {} values, found {}", dim, fields.len() - 1),
                ));
            }
            let values = parse_floats(&fields[1..], path, line)?;
            if store.vectors.insert(fields[0].to_string(), Vector(values)).is_some() {
                log::warn!("{path}:{line}: duplicate token {:?}; keeping the last", fields[0]);
                store.duplicates += 1;
            }
            rows += 1;
        }
        if rows != count {
            return Err(Error::parse(
                path,
                rows + 1,
                format!("header announces {count} rows, found {rows}"),
            ));
        }
        Ok(store)
    }

    pub fn load(path: &Path) -> Result<Self> {
        WordVectorStore::parse(&read_to_string(path)?, &path.display().to_string())
    }

    pub fn render(&self) -> String {
        let mut out = format!("{} {}\n", self.vectors.len(), self.dim);
        for (token, v) in &self.vectors {
            out.push_str(token);
            out.push(' ');
            push_row(&mut out, v);
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, self.render())
    }

    /// Mean of the in-vocabulary token vectors of the folded,
    /// whitespace-tokenised term.
    pub fn term_embedding(&self, term: &str) -> TermEmbedding {
        let folded = fold(term);
        let mut tokens: Vec<&str> = folded.split_whitespace().collect();
        // fixed summation order: the average is exactly order independent
        tokens.sort_unstable();
        let known = tokens.iter().filter_map(|t| self.vectors.get(*t)).map(|v| &v[..]);
        match mean(known, self.dim) {
            Some(vector) => TermEmbedding { vector, oov: false },
            None => TermEmbedding {
                vector: Vector::zeros(self.dim),
                oov: true,
            },
        }
    }

    /// Mean over a concept's label embeddings, skipping fully OOV labels.
    pub fn concept_label_embedding(&self, graph: &ConceptGraph, sctid: Sctid) -> Result<TermEmbedding> {
        let labels = graph.labels_of(sctid)?;
        let embedded: Vec<TermEmbedding> = labels
            .iter()
            .map(|l| self.term_embedding(l))
            .filter(|e| !e.oov)
            .collect();
        Ok(match mean(embedded.iter().map(|e| &e.vector[..]), self.dim) {
            Some(vector) => TermEmbedding { vector, oov: false },
            None => TermEmbedding {
                vector: Vector::zeros(self.dim),
                oov: true,
            },
        })
    }
}

/// L x d per-layer embeddings of one mention or label (layer 0 = lowest).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    pub key: String,
    layers: usize,
    dim: usize,
    data: Vec<f64>,
}

impl LayerStack {
    pub fn new(key: impl Into<String>, layers: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if layers == 0 || data.len() != layers * dim {
            return Err(Error::Validation(format!(
                "layer stack needs {layers} x {dim} values, got {}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("layer stack value".into()));
        }
        Ok(LayerStack {
            key: key.into(),
            layers,
            dim,
            data,
        })
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn layer(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// All layers, row-major, lowest first.
    pub fn layers_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn top(&self) -> &[f64] {
        self.layer(self.layers - 1)
    }

    pub fn select(&self, choice: LayerChoice) -> &[f64] {
        match choice {
            LayerChoice::Top => self.top(),
            LayerChoice::Index(i) => self.layer(i.min(self.layers - 1)),
        }
    }
}

/// Which layer feeds the plain (non-attention) contextual embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LayerChoice {
    #[default]
    Top,
    Index(usize),
}

impl std::str::FromStr for LayerChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "top" {
            return Ok(LayerChoice::Top);
        }
        s.parse()
            .map(LayerChoice::Index)
            .map_err(|_| Error::Config(format!("invalid layer {s:?} (use `top` or an index)")))
    }
}

impl std::fmt::Display for LayerChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LayerChoice::Top => f.write_str("top"),
            LayerChoice::Index(i) => write!(f, "{i}"),
        }
    }
}

pub fn label_key(sctid: Sctid, index: usize) -> String {
    format!("label:{sctid}:{index}")
}

/// All stacks of one file; every stack shares (L, d).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStackSet {
    layers: usize,
    dim: usize,
    stacks: IndexMap<String, LayerStack>,
}

impl LayerStackSet {
    pub fn new(layers: usize, dim: usize) -> Self {
        LayerStackSet {
            layers,
            dim,
            stacks: IndexMap::new(),
        }
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.stacks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stacks.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&LayerStack> {
        self.stacks.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = &LayerStack> {
        self.stacks.values()
    }

    pub fn insert(&mut self, stack: LayerStack) -> Result<()> {
        if stack.layers != self.layers || stack.dim != self.dim {
            return Err(Error::Validation(format!(
                "stack {:?} has shape {}x{}, expected {}x{}",
                stack.key, stack.layers, stack.dim, self.layers, self.dim
            )));
        }
        if self.stacks.contains_key(&stack.key) {
            return Err(Error::Validation(format!("duplicate stack key {:?}", stack.key)));
        }
        self.stacks.insert(stack.key.clone(), stack);
        Ok(())
    }

    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(|l| l.trim_end_matches('\r'))
            .enumerate()
            .map(|(i, l)| (i + 1, l));
        let [count, layers, dim] = parse_header::<3>(lines.next().map(|(_, l)| l), path)?;
        if layers == 0 {
            return Err(Error::parse(path, 1, "layer count must be at least 1"));
        }
        let mut set = LayerStackSet::new(layers, dim);
        let mut lines = lines.filter(|(_, l)| !l.trim().is_empty());
        for _ in 0..count {
            let (key_line, key) = lines
                .next()
                .ok_or_else(|| Error::parse(path, 0, format!("expected {count} records")))?;
            if key.split_whitespace().count() != 1 {
                return Err(Error::parse(path, key_line, format!("invalid record key {key:?}")));
            }
            let mut data = Vec::with_capacity(layers * dim);
            for l in 0..layers {
                let (line, row) = lines.next().ok_or_else(|| {
                    Error::parse(path, key_line, format!("record {key:?} has {l} of {layers} layers"))
                })?;
                let fields: Vec<&str> = row.split_whitespace().collect();
                if fields.len() != dim {
                    return Err(Error::parse(
                        path,
                        line,
                        format!("expected {dim} values, found {}", fields.len()),
                    ));
                }
                data.extend(parse_floats(&fields, path, line)?);
            }
            if set.stacks.contains_key(key) {
                return Err(Error::parse(path, key_line, format!("duplicate key {key:?}")));
            }
            set.stacks.insert(
                key.to_string(),
                LayerStack {
                    key: key.to_string(),
                    layers,
                    dim,
                    data,
                },
            );
        }
        if let Some((line, _)) = lines.next() {
            return Err(Error::parse(path, line, format!("more than {count} records")));
        }
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self> {
        LayerStackSet::parse(&read_to_string(path)?, &path.display().to_string())
    }

    pub fn render(&self) -> String {
        let mut out = format!("{} {} {}\n", self.stacks.len(), self.layers, self.dim);
        for s in self.stacks.values() {
            out.push_str(&s.key);
            out.push('\n');
            for l in 0..self.layers {
                push_row(&mut out, s.layer(l));
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, self.render())
    }

    /// Mean over the concept's `label:<sctid>:<i>` stacks at `layer`;
    /// zero vector with `oov` set when the concept has no stacks.
    pub fn concept_label_embedding(
        &self,
        graph: &ConceptGraph,
        sctid: Sctid,
        layer: LayerChoice,
    ) -> Result<TermEmbedding> {
        let n = graph.labels_of(sctid)?.len();
        let found = (0..n)
            .filter_map(|i| self.stacks.get(&label_key(sctid, i)))
            .map(|s| s.select(layer));
        Ok(match mean(found, self.dim) {
            Some(vector) => TermEmbedding { vector, oov: false },
            None => TermEmbedding {
                vector: Vector::zeros(self.dim),
                oov: true,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::Concept;
    use proptest::prelude::*;

    fn store() -> WordVectorStore {
        WordVectorStore::parse("5 2\nlower 1 0\nextremity 0 1\nlimb 1 1\nleg 2 0\nchest 0 3\n", "v").unwrap()
    }

    #[test]
    fn loads_header_and_rows() {
        let s = WordVectorStore::parse("2 3\na 1 2 3\nb 4 5 6\n", "v").unwrap();
        assert_eq!((s.len(), s.dim()), (2, 3));
        assert_eq!(s.get("b").unwrap().0, vec![4.0, 5.0, 6.0]);
    }

    #[test]
    fn short_row_errors_at_its_line() {
        let err = WordVectorStore::parse("2 3\na 1 2 3\nb 4 5\n", "v").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = WordVectorStore::parse("1 1\na NaN\n", "v").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn duplicate_token_keeps_last() {
        let s = WordVectorStore::parse("3 1\na 1\nb 2\na 3\n", "v").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.duplicates(), 1);
        assert_eq!(s.get("a").unwrap().0, vec![3.0]);
    }

    #[test]
    fn term_embedding_cases() {
        let s = store();
        assert_eq!(s.term_embedding("leg").vector.0, vec![2.0, 0.0]);
        assert_eq!(s.term_embedding("Lower extremity").vector.0, vec![0.5, 0.5]);
        let oov = s.term_embedding("zzz qqq");
        assert!(oov.oov);
        assert!(oov.vector.is_zero());
        // OOV tokens are ignored in the mean
        assert_eq!(s.term_embedding("leg zzz").vector.0, vec![2.0, 0.0]);
    }

    #[test]
    fn concept_label_mean() {
        let s = store();
        let g = ConceptGraph::from_parts(
            vec![
                Concept::new(
                    Sctid(61685007),
                    vec!["Lower extremity".into(), "Lower limb".into(), "Leg".into()],
                    "body structure",
                ),
                Concept::new(Sctid(2), vec!["chest".into()], "t"),
                Concept::new(Sctid(3), vec!["qq".into(), "rr".into()], "t"),
            ],
            vec![],
        )
        .unwrap();
        // labels: (0.5, 0.5), (1, 0.5), (2, 0)
        let e = s.concept_label_embedding(&g, Sctid(61685007)).unwrap();
        assert_eq!(e.vector.0, vec![3.5 / 3.0, 1.0 / 3.0]);
        assert_eq!(
            s.concept_label_embedding(&g, Sctid(2)).unwrap().vector.0,
            vec![0.0, 3.0]
        );
        let none = s.concept_label_embedding(&g, Sctid(3)).unwrap();
        assert!(none.oov && none.vector.is_zero());
        assert!(s.concept_label_embedding(&g, Sctid(9)).is_err());
    }

    #[test]
    fn layer_stack_parsing() {
        let set = LayerStackSet::parse("1 2 3\nm1\n1 2 3\n4 5 6\n", "s").unwrap();
        let s = set.get("m1").unwrap();
        assert_eq!((s.layers(), s.dim()), (2, 3));
        assert_eq!(s.top(), &[4.0, 5.0, 6.0]);
        assert_eq!(s.layer(0), &[1.0, 2.0, 3.0]);

        let err = LayerStackSet::parse("1 2 3\nm1\n1 2 3\n4 5\n", "s").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }));
        let dup = LayerStackSet::parse("2 1 1\nk\n1\nk\n2\n", "s");
        assert!(dup.is_err());
        assert!(LayerStackSet::parse("0 12 768\n", "s").unwrap().is_empty());
        assert!(LayerStackSet::parse("2 1 1\nk\n1\n", "s").is_err());
    }

    #[test]
    fn concat_dims() {
        let a = Vector::zeros(300);
        let b = Vector::zeros(768);
        let c = Vector::zeros(300);
        assert_eq!(concat([&a[..], &b[..]]).unwrap().dim(), 1068);
        assert_eq!(concat([&a[..], &b[..], &c[..]]).unwrap().dim(), 1368);
        let single = Vector(vec![1.0, 2.0]);
        assert_eq!(concat([&single[..]]).unwrap(), single);
        assert!(concat(std::iter::empty::<&[f64]>()).is_err());
    }

    #[test]
    fn cosine_zero_convention() {
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), 0.0);
        assert_eq!(cosine(&[2.0, 0.0], &[1.0, 0.0]), 1.0);
    }

    proptest! {
        #[test]
        fn term_embedding_ignores_token_order(
            perm in Just(vec!["lower", "limb", "leg", "chest", "extremity", "leg"]).prop_shuffle()
        ) {
            let s = store();
            let base = s.term_embedding("lower limb leg chest extremity leg");
            prop_assert_eq!(s.term_embedding(&perm.join(" ")), base);
        }

        #[test]
        fn concat_is_associative(
            a in prop::collection::vec(-1e3f64..1e3, 0..5),
            b in prop::collection::vec(-1e3f64..1e3, 0..5),
            c in prop::collection::vec(-1e3f64..1e3, 0..5),
        ) {
            let ab = concat([&a[..], &b[..]]).unwrap();
            prop_assert_eq!(
                concat([&ab[..], &c[..]]).unwrap(),
                concat([&a[..], &b[..], &c[..]]).unwrap()
            );
        }

        #[test]
        fn text_formats_are_byte_stable(
            rows in prop::collection::vec(("[a-z]{1,4}", prop::collection::vec(-1e6f64..1e6, 3)), 0..8)
        ) {
            let mut s = WordVectorStore::new(3);
            for (t, v) in &rows {
                s.insert(t.clone(), Vector(v.clone())).unwrap();
            }
            let once = WordVectorStore::parse(&s.render(), "v").unwrap();
            prop_assert_eq!(once.render(), s.render());

            let mut set = LayerStackSet::new(1, 3);
            for (i, (_, v)) in rows.iter().enumerate() {
                set.insert(LayerStack::new(format!("k{i}"), 1, 3, v.clone()).unwrap()).unwrap();
            }
            let back = LayerStackSet::parse(&set.render(), "s").unwrap();
            prop_assert_eq!(back.render(), set.render());
        }
    }
}
