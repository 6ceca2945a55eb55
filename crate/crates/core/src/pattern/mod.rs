//! Declarative connection patterns.
//!
//! A query-set file holds `CONNECTION` blocks; each block is a conjunctive
//! basic graph pattern plus the two entity variables it connects, a type tag,
//! optional metadata variables and a label template.

mod discover;
mod matcher;
mod parser;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{Iri, Literal, Term};

pub use discover::discover_connections;
pub use matcher::{match_pattern, match_pattern_in_order};
pub use parser::{parse_pattern, parse_query_set};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatternError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("invalid query {query:?} at {line}:{column}: {message}")]
    Semantic { query: String, line: usize, column: usize, message: String },
}

impl PatternError {
    pub fn position(&self) -> (usize, usize) {
        match self {
            PatternError::Syntax { line, column, .. } | PatternError::Semantic { line, column, .. } => (*line, *column),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PatternTerm {
    Var(String),
    Iri(Iri),
    Literal(Literal),
}

impl PatternTerm {
    pub fn var_name(&self) -> Option<&str> {
        match self {
            PatternTerm::Var(v) => Some(v),
            _ => None,
        }
    }

    pub(crate) fn constant(&self) -> Option<Term> {
        match self {
            PatternTerm::Var(_) => None,
            PatternTerm::Iri(i) => Some(Term::iri(i.clone())),
            PatternTerm::Literal(l) => Some(Term::literal(l.clone())),
        }
    }
}

impl fmt::Display for PatternTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternTerm::Var(v) => write!(f, "?{v}"),
            PatternTerm::Iri(i) => write!(f, "{}", i.canonical()),
            PatternTerm::Literal(l) => write!(f, "{}", l.canonical()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TriplePattern {
    pub subject: PatternTerm,
    pub predicate: PatternTerm,
    pub object: PatternTerm,
}

impl TriplePattern {
    pub fn terms(&self) -> [&PatternTerm; 3] {
        [&self.subject, &self.predicate, &self.object]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LangFilter {
    pub var: String,
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternQuery {
    pub name: String,
    pub relationship_type: String,
    pub patterns: Vec<TriplePattern>,
    pub lang_filters: Vec<LangFilter>,
    pub entity1_var: String,
    pub entity2_var: String,
    pub metadata_vars: Vec<String>,
    pub label_template: String,
}

impl PatternQuery {
    /// Variables in order of first occurrence across the patterns.
    pub fn variables(&self) -> Vec<String> {
        let mut vars: Vec<String> = Vec::new();
        for p in &self.patterns {
            for t in p.terms() {
                if let Some(v) = t.var_name() {
                    if !vars.iter().any(|x| x == v) {
                        vars.push(v.to_string());
                    }
                }
            }
        }
        vars
    }

    /// `{var}` placeholders of the label template, in order.
    pub fn placeholders(&self) -> Vec<String> {
        parser::template_placeholders(&self.label_template).unwrap_or_default()
    }
}

/// A total assignment of a query's variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Binding(pub BTreeMap<String, Term>);

impl Binding {
    pub fn get(&self, var: &str) -> Option<&Term> {
        self.0.get(var)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A candidate relationship between two entities.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConnectionInstance {
    pub entity1_id: Iri,
    pub entity2_id: Iri,
    pub relationship_type: String,
    pub relevant_metadata: BTreeMap<String, String>,
    pub explanation_text: String,
}

impl ConnectionInstance {
    pub fn key(&self) -> (&Iri, &Iri, &str) {
        (&self.entity1_id, &self.entity2_id, &self.relationship_type)
    }

    pub fn involves(&self, e: &Iri) -> bool {
        &self.entity1_id == e || &self.entity2_id == e
    }
}
