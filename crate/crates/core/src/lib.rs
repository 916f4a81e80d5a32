//! Video-caption knowledge graphs: rule-based extraction from dependency
//! parses, ontology linking and inference, dataset construction with
//! closed-world negatives, a trainable fact-prediction head, and set-based
//! evaluation.

pub mod dataset;
pub mod error;
pub mod factmodel;
pub mod kg;
pub mod metrics;
pub mod ontology;
pub mod semparse;
pub mod synth;

pub use error::{Error, Result};
pub use kg::{canonical_atom_string, Atom, DatasetRecord, KnowledgeGraph, Pos, Term, Vocabulary};
