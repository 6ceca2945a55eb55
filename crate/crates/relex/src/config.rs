//! TOML configuration. Relative paths resolve against the config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use relex_core::explainer::FewShotExample;
use relex_core::kg::GraphOptions;
use relex_core::par::Execution;
use relex_core::paths::PathLimits;
use relex_core::relevance::{UserContext, DEFAULT_ALPHA, DEFAULT_DIM};

use crate::EngineError;

pub const ENV_CONFIG: &str = "RELEX_CONFIG";
pub const ENV_EMBEDDING_URL: &str = "RELEX_EMBEDDING_URL";
pub const ENV_GENERATION_URL: &str = "RELEX_GENERATION_URL";
pub const ENV_API_TOKEN: &str = "RELEX_API_TOKEN";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub graph: GraphSection,
    /// Query-set name to DSL file.
    pub query_sets: BTreeMap<String, PathBuf>,
    pub templates: TemplatesSection,
    pub scoring: ScoringSection,
    pub embedding: EmbeddingSection,
    pub generation: GenerationSection,
    pub server: ServerSection,
    pub evaluation: EvaluationSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphSection {
    pub path: Option<PathBuf>,
    #[serde(flatten)]
    pub options: GraphOptions,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplatesSection {
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoringSection {
    pub alpha: f64,
    #[serde(flatten)]
    pub limits: PathLimits,
    pub execution: Execution,
    pub max_in_flight: usize,
    pub default_k: usize,
}

impl Default for ScoringSection {
    fn default() -> Self {
        ScoringSection {
            alpha: DEFAULT_ALPHA,
            limits: PathLimits::default(),
            execution: Execution::default(),
            max_in_flight: 4,
            default_k: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Local,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSection {
    pub backend: BackendKind,
    pub dim: usize,
    pub url: Option<String>,
    pub timeout_secs: u64,
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        EmbeddingSection { backend: BackendKind::Local, dim: DEFAULT_DIM, url: None, timeout_secs: 30 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSection {
    pub backend: BackendKind,
    pub url: Option<String>,
    pub timeout_secs: u64,
    pub max_tokens: u32,
    pub few_shot: Vec<FewShotExample>,
}

impl Default for GenerationSection {
    fn default() -> Self {
        GenerationSection {
            backend: BackendKind::Local,
            url: None,
            timeout_secs: 60,
            max_tokens: 256,
            few_shot: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerSection {
    pub bind: String,
}

impl Default for ServerSection {
    fn default() -> Self {
        ServerSection { bind: "127.0.0.1:8080".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub gold: Option<PathBuf>,
    pub ratings: Option<PathBuf>,
    pub query_set: Option<String>,
    /// Result budget of the full system.
    pub k: usize,
    /// Search radius of the graph baseline around each seed.
    pub graph_hops: usize,
    pub context: UserContext,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        EvaluationSection {
            gold: None,
            ratings: None,
            query_set: None,
            k: 30,
            graph_hops: 2,
            context: UserContext::default(),
        }
    }
}

impl EngineConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, EngineError> {
        let mut cfg: EngineConfig = toml::from_str(text).map_err(|e| EngineError::Config(e.to_string()))?;
        cfg.resolve_paths(base_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, EngineError> {
        let text = std::fs::read_to_string(path).map_err(|e| EngineError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.graph.path.as_mut().map(fix);
        self.templates.path.as_mut().map(fix);
        self.evaluation.gold.as_mut().map(fix);
        self.evaluation.ratings.as_mut().map(fix);
        self.query_sets.values_mut().for_each(fix);
    }

    /// Environment overrides for backend endpoints.
    pub fn apply_env(&mut self) {
        if let Ok(url) = std::env::var(ENV_EMBEDDING_URL) {
            if !url.is_empty() {
                self.embedding.backend = BackendKind::Remote;
                self.embedding.url = Some(url);
            }
        }
        if let Ok(url) = std::env::var(ENV_GENERATION_URL) {
            if !url.is_empty() {
                self.generation.backend = BackendKind::Remote;
                self.generation.url = Some(url);
            }
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::Config(m));
        if !(0.0..=1.0).contains(&self.scoring.alpha) {
            return bad(format!("scoring.alpha = {} is outside [0, 1]", self.scoring.alpha));
        }
        self.scoring.limits.validate().map_err(|e| EngineError::Config(e.to_string()))?;
        if self.scoring.max_in_flight == 0 {
            return bad("scoring.max_in_flight must be positive".into());
        }
        if self.embedding.dim == 0 {
            return bad("embedding.dim must be positive".into());
        }
        for (section, backend, url) in [
            ("embedding", self.embedding.backend, &self.embedding.url),
            ("generation", self.generation.backend, &self.generation.url),
        ] {
            if backend == BackendKind::Remote && url.as_deref().unwrap_or("").is_empty() {
                return bad(format!("{section}.url is required for the remote backend"));
            }
        }
        self.evaluation.context.validate().map_err(|e| EngineError::Config(e.to_string()))?;
        Ok(())
    }

    /// The named query set, or the only one when no name is given.
    pub fn default_query_set(&self) -> Option<&str> {
        self.evaluation.query_set.as_deref().or_else(|| self.query_sets.keys().next().map(String::as_str))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_relative_paths() {
        let cfg = EngineConfig::parse(
            "[graph]\npath = \"g.nt\"\n[query_sets]\nq = \"/abs/q.rq\"\n[scoring]\nalpha = 0.25\nmax_depth = 3\n",
            Path::new("/base"),
        )
        .unwrap();
        assert_eq!(cfg.graph.path.as_deref(), Some(Path::new("/base/g.nt")));
        assert_eq!(cfg.query_sets["q"], PathBuf::from("/abs/q.rq"));
        assert_eq!(cfg.scoring.alpha, 0.25);
        assert_eq!(cfg.scoring.limits.max_depth, 3);
        assert_eq!(cfg.scoring.limits.max_paths, 1000);
        assert_eq!(cfg.default_query_set(), Some("q"));
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(EngineConfig::parse("[scoring]\nalpha = 1.5", Path::new(".")).is_err());
        assert!(EngineConfig::parse("[embedding]\nbackend = \"remote\"", Path::new(".")).is_err());
        assert!(EngineConfig::parse("[nope]\nx = 1", Path::new(".")).is_err());
    }
}
