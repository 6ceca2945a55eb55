//! Command-line tool and HTTP service over the `relex-core` engine.

pub mod cli;
pub mod config;
pub mod engine;
pub mod server;

use std::path::{Path, PathBuf};

use thiserror::Error;

use relex_core::explainer::ExplainError;
use relex_core::ingest::IngestError;
use relex_core::pattern::PatternError;

pub use config::EngineConfig;
pub use engine::{Engine, EvaluateRequest, ExploreRequest, ExploreResponse, Facets, Snapshot, SystemKind};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("graph{}: {message}", path.as_ref().map(|p| format!(" {}", p.display())).unwrap_or_default())]
    Graph { path: Option<PathBuf>, message: String },
    #[error("{}: {source}", path.display())]
    Pattern { path: PathBuf, source: PatternError },
    #[error("unknown query set {0:?}")]
    UnknownQuerySet(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

impl EngineError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        EngineError::Io { path: path.to_path_buf(), source }
    }
}
