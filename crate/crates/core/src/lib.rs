//! Relational exploration over knowledge graphs.
//!
//! Connections are discovered with a small pattern language, scored by an
//! interestingness measure that mixes path-based relatedness with relevance
//! to a user context, and explained through a pluggable text generator.

pub mod baselines;
pub mod evalkit;
pub mod explainer;
pub mod ingest;
pub mod kg;
pub mod par;
pub mod paths;
pub mod pattern;
pub mod relevance;
pub mod text;

pub use kg::{Iri, KnowledgeGraph, Literal, Term, Triple};
pub use par::Execution;
pub use pattern::ConnectionInstance;
