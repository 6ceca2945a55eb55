//! Knowledge-graph substrate: terms, the N-Triples subset, and the indexed store.

mod graph;
pub mod ntriples;
mod term;

use thiserror::Error;

pub use graph::{
    Direction, EdgeDirection, EntityDescriptor, GraphOptions, GraphStats, KnowledgeGraph, Neighbor, NodeId, RDFS_LABEL,
    WDT_INSTANCE_OF, WDT_OCCUPATION,
};
pub use ntriples::{parse_ntriples, parse_ntriples_str, to_ntriples_string, write_ntriples};
pub use term::{Iri, Literal, Term, Triple};

#[derive(Debug, Error)]
pub enum KgError {
    #[error("line {line}: {message} (at {token:?})")]
    Parse { line: usize, token: String, message: String },
    #[error("invalid IRI {value:?}: {reason}")]
    InvalidIri { value: String, reason: &'static str },
    #[error("invalid literal: {0}")]
    InvalidLiteral(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
