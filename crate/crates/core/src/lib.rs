//! Biomedical entity linking against SNOMED-style concept graphs.
//!
//! The crate covers the full baseline ladder: a training-set dictionary,
//! exact and fuzzy label matching, neural cross-space alignment models over
//! word, contextual and graph embeddings, and back-off cascades over all of
//! them, plus corpus splitting and top-k evaluation.

pub mod align;
pub mod bench;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod eval;
pub mod index;
pub mod kg;
pub mod linker;
pub mod manifest;
pub mod matchers;
pub mod node2vec;
pub mod recipe;
pub mod strsim;
pub mod synth;

pub use error::{Error, Result};
pub use kg::{ConceptGraph, Sctid};
