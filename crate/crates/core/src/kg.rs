//! Concept graph storage: concepts with ordered labels, IS-A edges, and a
//! case-folded label index.
//!
//! All maps are ordered by numeric concept id, so iteration (and therefore
//! every downstream tie-break) is reproducible.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{read_to_string, write_file, Error, Result};

/// SNOMED CT identifier. Rendered as a decimal string, ordered numerically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sctid(pub u64);

impl fmt::Display for Sctid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for Sctid {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        s.trim().parse().map(Sctid)
    }
}

/// Case folding shared by every surface-form comparison: surrounding
/// whitespace is dropped and the string is lowercased (Unicode aware).
pub fn fold(s: &str) -> String {
    s.trim().to_lowercase()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Concept {
    pub sctid: Sctid,
    /// First label is the preferred one.
    pub labels: Vec<String>,
    pub semantic_tag: String,
}

impl Concept {
    pub fn new(sctid: Sctid, labels: Vec<String>, semantic_tag: impl Into<String>) -> Self {
        Concept {
            sctid,
            labels,
            semantic_tag: semantic_tag.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConceptGraph {
    concepts: BTreeMap<Sctid, Concept>,
    /// (child, parent) pairs.
    edges: BTreeSet<(Sctid, Sctid)>,
    parents: BTreeMap<Sctid, Vec<Sctid>>,
    children: BTreeMap<Sctid, Vec<Sctid>>,
    label_index: BTreeMap<String, BTreeSet<Sctid>>,
}

impl ConceptGraph {
    /// Builds and validates a graph from in-memory parts.
    pub fn from_parts(
        concepts: impl IntoIterator<Item = Concept>,
        edges: impl IntoIterator<Item = (Sctid, Sctid)>,
    ) -> Result<Self> {
        let mut graph = ConceptGraph::default();
        for concept in concepts {
            validate_concept(&concept)?;
            let id = concept.sctid;
            if graph.concepts.insert(id, concept).is_some() {
                return Err(Error::Validation(format!("duplicate sctid {id}")));
            }
        }
        for (child, parent) in edges {
            for end in [child, parent] {
                if !graph.concepts.contains_key(&end) {
                    return Err(Error::Validation(format!(
                        "edge {child} -> {parent} references unknown sctid {end}"
                    )));
                }
            }
            if child == parent {
                return Err(Error::Validation(format!("self-loop on {child}")));
            }
            graph.edges.insert((child, parent));
        }
        graph.build_indexes();
        Ok(graph)
    }

    fn build_indexes(&mut self) {
        for &(child, parent) in &self.edges {
            self.parents.entry(child).or_default().push(parent);
            self.children.entry(parent).or_default().push(child);
        }
        // BTreeSet iteration is ordered by (child, parent); children lists need sorting.
        for list in self.children.values_mut() {
            list.sort_unstable();
        }
        for concept in self.concepts.values() {
            for label in &concept.labels {
                self.label_index.entry(fold(label)).or_default().insert(concept.sctid);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, sctid: Sctid) -> bool {
        self.concepts.contains_key(&sctid)
    }

    pub fn concept(&self, sctid: Sctid) -> Result<&Concept> {
        self.concepts.get(&sctid).ok_or(Error::NotFound(sctid))
    }

    /// Concepts in ascending id order.
    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = Sctid> + '_ {
        self.concepts.keys().copied()
    }

    /// (child, parent) pairs in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (Sctid, Sctid)> + '_ {
        self.edges.iter().copied()
    }

    pub fn labels_of(&self, sctid: Sctid) -> Result<&[String]> {
        Ok(&self.concept(sctid)?.labels)
    }

    /// Direct IS-A parents and children, each ascending by id.
    pub fn neighbors(&self, sctid: Sctid) -> Result<(&[Sctid], &[Sctid])> {
        if !self.contains(sctid) {
            return Err(Error::NotFound(sctid));
        }
        let parents = self.parents.get(&sctid).map_or(&[][..], Vec::as_slice);
        let children = self.children.get(&sctid).map_or(&[][..], Vec::as_slice);
        Ok((parents, children))
    }

    /// Parents and children merged, ascending and deduplicated: the
    /// undirected adjacency used by random walks.
    pub fn undirected_neighbors(&self, sctid: Sctid) -> Result<Vec<Sctid>> {
        let (parents, children) = self.neighbors(sctid)?;
        let mut all: Vec<Sctid> = parents.iter().chain(children).copied().collect();
        all.sort_unstable();
        all.dedup();
        Ok(all)
    }

    /// Concepts owning a label whose folded form equals `folded`.
    pub fn lookup_label(&self, folded: &str) -> Option<&BTreeSet<Sctid>> {
        self.label_index.get(folded)
    }

    pub fn label_index(&self) -> &BTreeMap<String, BTreeSet<Sctid>> {
        &self.label_index
    }

    pub fn write(&self, concepts_path: &Path, edges_path: &Path) -> Result<()> {
        let mut out = String::new();
        for c in self.concepts.values() {
            out.push_str(&format!("{}\t{}\t{}\n", c.sctid, c.labels.join("|"), c.semantic_tag));
        }
        write_file(concepts_path, out)?;
        let mut out = String::new();
        for (child, parent) in &self.edges {
            out.push_str(&format!("{child}\t{parent}\n"));
        }
        write_file(edges_path, out)
    }
}

fn validate_concept(concept: &Concept) -> Result<()> {
    if concept.labels.is_empty() {
        return Err(Error::Validation(format!("concept {} has no labels", concept.sctid)));
    }
    if concept.labels.iter().any(|l| l.trim().is_empty()) {
        return Err(Error::Validation(format!(
            "concept {} has an empty label",
            concept.sctid
        )));
    }
    Ok(())
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn parse_sctid(field: &str, path: &str, line: usize) -> Result<Sctid> {
    field
        .parse()
        .map_err(|_| Error::parse(path, line, format!("invalid sctid {field:?}")))
}

/// Parses `sctid<TAB>label1|label2|...<TAB>semantic_tag` rows.
pub fn parse_concepts(text: &str, path: &str) -> Result<Vec<Concept>> {
    let mut concepts = Vec::new();
    for (line, row) in data_lines(text) {
        let cols: Vec<&str> = row.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::parse(
                path,
                line,
                format!("expected 3 columns, found {}", cols.len()),
            ));
        }
        let sctid = parse_sctid(cols[0], path, line)?;
        let labels = cols[1].split('|').map(str::to_string).collect();
        concepts.push(Concept::new(sctid, labels, cols[2]));
    }
    Ok(concepts)
}

/// Parses `child_sctid<TAB>parent_sctid` rows.
pub fn parse_edges(text: &str, path: &str) -> Result<Vec<(Sctid, Sctid)>> {
    let mut edges = Vec::new();
    for (line, row) in data_lines(text) {
        let cols: Vec<&str> = row.split('\t').collect();
        if cols.len() != 2 {
            return Err(Error::parse(
                path,
                line,
                format!("expected 2 columns, found {}", cols.len()),
            ));
        }
        edges.push((parse_sctid(cols[0], path, line)?, parse_sctid(cols[1], path, line)?));
    }
    Ok(edges)
}

pub fn load_graph(concepts_path: &Path, edges_path: &Path) -> Result<ConceptGraph> {
    let concepts = parse_concepts(&read_to_string(concepts_path)?, &concepts_path.display().to_string())?;
    let edges = parse_edges(&read_to_string(edges_path)?, &edges_path.display().to_string())?;
    let graph = ConceptGraph::from_parts(concepts, edges)?;
    log::info!("loaded {} concepts and {} IS-A edges", graph.len(), graph.edge_count());
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(id: u64, labels: &[&str]) -> Concept {
        Concept::new(
            Sctid(id),
            labels.iter().map(|s| s.to_string()).collect(),
            "Clinical finding",
        )
    }

    #[test]
    fn parses_three_concepts_two_edges() {
        let concepts = parse_concepts("1\tA\tt\n2\tB|b2\tt\n3\tC\tt\n", "c.tsv").unwrap();
        let edges = parse_edges("1\t2\n2\t3\n", "e.tsv").unwrap();
        let g = ConceptGraph::from_parts(concepts, edges).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn dangling_edge_names_the_unknown_id() {
        let err = ConceptGraph::from_parts(vec![c(1, &["a"])], vec![(Sctid(1), Sctid(999))]).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(err.to_string().contains("999"));
    }

    #[test]
    fn duplicate_sctid_rejected() {
        let err = ConceptGraph::from_parts(vec![c(1, &["a"]), c(1, &["b"])], vec![]).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn wrong_column_count_reports_line() {
        let err = parse_concepts("1\ta\tt\n2\tb\n", "c.tsv").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn shared_label_indexes_both_concepts() {
        let g = ConceptGraph::from_parts(vec![c(5, &["Leg"]), c(3, &["leg", "Limb"])], vec![]).unwrap();
        let owners: Vec<_> = g.lookup_label("leg").unwrap().iter().copied().collect();
        assert_eq!(owners, vec![Sctid(3), Sctid(5)]);
    }

    #[test]
    fn labels_keep_stored_order() {
        let g = ConceptGraph::from_parts(
            vec![c(61685007, &["Lower extremity", "Lower limb", "Leg"]), c(2, &["x"])],
            vec![],
        )
        .unwrap();
        assert_eq!(
            g.labels_of(Sctid(61685007)).unwrap(),
            &["Lower extremity", "Lower limb", "Leg"]
        );
        assert_eq!(g.labels_of(Sctid(2)).unwrap(), &["x"]);
        assert!(matches!(g.labels_of(Sctid(7)), Err(Error::NotFound(Sctid(7)))));
    }

    #[test]
    fn neighbors_in_chain() {
        // a -> b -> c (child -> parent)
        let g = ConceptGraph::from_parts(
            vec![c(1, &["a"]), c(2, &["b"]), c(3, &["c"])],
            vec![(Sctid(1), Sctid(2)), (Sctid(2), Sctid(3))],
        )
        .unwrap();
        let (p, ch) = g.neighbors(Sctid(2)).unwrap();
        assert_eq!(p, &[Sctid(3)]);
        assert_eq!(ch, &[Sctid(1)]);
        let (p, ch) = g.neighbors(Sctid(1)).unwrap();
        assert_eq!((p, ch), (&[Sctid(2)][..], &[][..]));
        let (p, ch) = g.neighbors(Sctid(3)).unwrap();
        assert_eq!((p, ch), (&[][..], &[Sctid(2)][..]));
        assert!(g.neighbors(Sctid(9)).is_err());
    }

    #[test]
    fn empty_label_rejected() {
        assert!(ConceptGraph::from_parts(vec![c(1, &["a", ""])], vec![]).is_err());
    }
}
