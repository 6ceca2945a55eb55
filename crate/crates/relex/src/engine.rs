//! Shared state behind the CLI and the HTTP service.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use relex_core::baselines::{
    graph_baseline, graph_baseline_from, knowledge_baseline, parse_templates, BaselineResult, TemplateSet,
};
use relex_core::evalkit::{evaluate_system, parse_ratings, GoldKey, GoldStandard, MetricsReport, SystemOutput};
use relex_core::explainer::{
    rank_and_explain, score_candidates, Backends, GenerationBackend, RankOptions, Ranking, RemoteGenerator,
    ScoredExplanation, StubGenerator,
};
use relex_core::kg::{GraphStats, Iri, KnowledgeGraph};
use relex_core::paths::Traversal;
use relex_core::pattern::{discover_connections, parse_query_set, ConnectionInstance, PatternQuery};
use relex_core::relevance::{
    resolve_alpha, EmbeddingBackend, EndpointConfig, LocalEmbedder, RemoteEmbedder, UserContext,
};

use crate::config::{BackendKind, EngineConfig, ENV_API_TOKEN};
use crate::EngineError;

/// Immutable view of a loaded graph and everything derived from it.
#[derive(Debug)]
pub struct Snapshot {
    pub kg: KnowledgeGraph,
    pub query_sets: BTreeMap<String, Vec<PatternQuery>>,
    pub discovered: BTreeMap<String, Vec<ConnectionInstance>>,
    pub templates: TemplateSet,
}

impl Snapshot {
    pub fn build(
        kg: KnowledgeGraph,
        query_sets: BTreeMap<String, Vec<PatternQuery>>,
        templates: TemplateSet,
        config: &EngineConfig,
    ) -> Self {
        let discovered = query_sets
            .iter()
            .map(|(name, qs)| (name.clone(), discover_connections(&kg, qs, config.scoring.execution)))
            .collect();
        Snapshot { kg, query_sets, discovered, templates }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Facets {
    pub relationship_type: Option<String>,
    pub min_score: Option<f64>,
    pub max_score: Option<f64>,
}

impl Facets {
    pub fn is_empty(&self) -> bool {
        self.relationship_type.is_none() && self.min_score.is_none() && self.max_score.is_none()
    }

    pub fn accepts(&self, item: &ScoredExplanation) -> bool {
        let s = item.breakdown.score;
        self.relationship_type.as_ref().is_none_or(|t| *t == item.connection.relationship_type)
            && self.min_score.is_none_or(|m| s >= m)
            && self.max_score.is_none_or(|m| s <= m)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExploreRequest {
    pub entity1: Option<Iri>,
    pub entity2: Option<Iri>,
    pub context: UserContext,
    pub alpha: Option<f64>,
    pub k: Option<usize>,
    pub query_set: Option<String>,
    pub facets: Option<Facets>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploreResponse {
    pub alpha: f64,
    pub k: usize,
    pub candidates: usize,
    #[serde(flatten)]
    pub ranking: Ranking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Full,
    Graph,
    Knowledge,
}

impl std::str::FromStr for SystemKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full" => Ok(SystemKind::Full),
            "graph" => Ok(SystemKind::Graph),
            "knowledge" => Ok(SystemKind::Knowledge),
            other => Err(format!("unknown system {other:?}; expected full, graph or knowledge")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateRequest {
    pub gold: Option<PathBuf>,
    pub ratings: Option<PathBuf>,
    pub system: Option<SystemKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacetCount {
    pub relationship_type: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityHit {
    pub id: Iri,
    pub label: String,
}

/// A system's outputs and its (score, rating) pairs.
pub type SystemRun = (Vec<SystemOutput>, Vec<(f64, f64)>);

fn read(path: &Path) -> Result<String, EngineError> {
    fs::read_to_string(path).map_err(|e| EngineError::io(path, e))
}

fn build_embedder(cfg: &EngineConfig) -> Box<dyn EmbeddingBackend> {
    match cfg.embedding.backend {
        BackendKind::Local => Box::new(LocalEmbedder::new(cfg.embedding.dim)),
        BackendKind::Remote => {
            let endpoint = EndpointConfig {
                url: cfg.embedding.url.clone().unwrap_or_default(),
                token: std::env::var(ENV_API_TOKEN).ok(),
                timeout_secs: cfg.embedding.timeout_secs,
            };
            Box::new(RemoteEmbedder::new(endpoint, cfg.embedding.dim))
        }
    }
}

fn build_generator(cfg: &EngineConfig) -> Box<dyn GenerationBackend> {
    match cfg.generation.backend {
        BackendKind::Local => Box::new(StubGenerator),
        BackendKind::Remote => {
            let endpoint = EndpointConfig {
                url: cfg.generation.url.clone().unwrap_or_default(),
                token: std::env::var(ENV_API_TOKEN).ok(),
                timeout_secs: cfg.generation.timeout_secs,
            };
            Box::new(RemoteGenerator::new(endpoint, cfg.generation.few_shot.clone(), cfg.generation.max_tokens))
        }
    }
}

pub struct Engine {
    config: EngineConfig,
    snapshot: RwLock<Arc<Snapshot>>,
    embedder: Box<dyn EmbeddingBackend>,
    generator: Box<dyn GenerationBackend>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("embedder", &self.embedder.id())
            .field("generator", &self.generator.id())
            .finish()
    }
}

impl Engine {
    /// Load the graph, query sets and templates named in the config.
    pub fn from_config(config: EngineConfig) -> Result<Self, EngineError> {
        config.validate()?;
        let kg = match &config.graph.path {
            Some(p) => load_graph_file(p, &config)?,
            None => KnowledgeGraph::empty(),
        };
        let mut query_sets = BTreeMap::new();
        for (name, path) in &config.query_sets {
            let qs =
                parse_query_set(&read(path)?).map_err(|e| EngineError::Pattern { path: path.clone(), source: e })?;
            query_sets.insert(name.clone(), qs);
        }
        let templates = match &config.templates.path {
            Some(p) => parse_templates(&read(p)?).map_err(|e| EngineError::Invalid(format!("{}: {e}", p.display())))?,
            None => TemplateSet::new(),
        };
        let snapshot = Snapshot::build(kg, query_sets, templates, &config);
        Ok(Self::with_snapshot(config, snapshot))
    }

    pub fn with_snapshot(config: EngineConfig, snapshot: Snapshot) -> Self {
        Engine {
            embedder: build_embedder(&config),
            generator: build_generator(&config),
            snapshot: RwLock::new(Arc::new(snapshot)),
            config,
        }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// The current snapshot. Holders keep it alive across a swap.
    pub fn snapshot(&self) -> Arc<Snapshot> {
        Arc::clone(&self.snapshot.read().expect("snapshot lock"))
    }

    /// Replace the graph atomically; query sets and templates carry over.
    pub fn replace_graph(&self, kg: KnowledgeGraph) -> GraphStats {
        let current = self.snapshot();
        let stats = kg.stats();
        let next = Snapshot::build(kg, current.query_sets.clone(), current.templates.clone(), &self.config);
        *self.snapshot.write().expect("snapshot lock") = Arc::new(next);
        stats
    }

    pub fn backends(&self) -> Backends<'_> {
        Backends { embedder: self.embedder.as_ref(), generator: self.generator.as_ref() }
    }

    fn query_set_name(&self, snap: &Snapshot, requested: Option<&str>) -> Result<String, EngineError> {
        let name = requested
            .or(self.config.evaluation.query_set.as_deref())
            .or_else(|| snap.query_sets.keys().next().map(String::as_str))
            .ok_or_else(|| EngineError::Invalid("no query sets are configured".into()))?;
        if !snap.query_sets.contains_key(name) {
            return Err(EngineError::UnknownQuerySet(name.to_string()));
        }
        Ok(name.to_string())
    }

    pub fn discover(&self, query_set: Option<&str>) -> Result<Vec<ConnectionInstance>, EngineError> {
        let snap = self.snapshot();
        discover_on(&snap, &self.query_set_name(&snap, query_set)?)
    }

    pub fn facets(&self, query_set: Option<&str>) -> Result<Vec<FacetCount>, EngineError> {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for c in self.discover(query_set)? {
            *counts.entry(c.relationship_type).or_insert(0) += 1;
        }
        Ok(counts.into_iter().map(|(relationship_type, count)| FacetCount { relationship_type, count }).collect())
    }

    pub fn search(&self, q: &str, limit: usize) -> Vec<EntityHit> {
        self.snapshot().kg.search(q, limit).into_iter().map(|(id, label)| EntityHit { id, label }).collect()
    }

    /// Candidates incident to `entity1` (and `entity2` when given), ranked,
    /// explained, then narrowed by the facets.
    pub fn explore(&self, req: &ExploreRequest) -> Result<ExploreResponse, EngineError> {
        let snap = self.snapshot();
        self.explore_on(&snap, req)
    }

    pub fn explore_on(&self, snap: &Snapshot, req: &ExploreRequest) -> Result<ExploreResponse, EngineError> {
        let name = self.query_set_name(snap, req.query_set.as_deref())?;
        let candidates = select_candidates(&snap.discovered[&name], req.entity1.as_ref(), req.entity2.as_ref());
        let alpha = resolve_alpha(req.alpha, &req.context, Some(self.config.scoring.alpha))
            .map_err(|e| EngineError::Invalid(e.to_string()))?;
        let k = req.k.unwrap_or(self.config.scoring.default_k);
        let options = self.rank_options(alpha, k);
        let mut ranking = rank_and_explain(&snap.kg, &candidates, &req.context, &self.backends(), &options)?;
        if let Some(f) = req.facets.as_ref().filter(|f| !f.is_empty()) {
            ranking.items.retain(|item| f.accepts(item));
        }
        Ok(ExploreResponse { alpha, k, candidates: candidates.len(), ranking })
    }

    fn rank_options(&self, alpha: f64, k: usize) -> RankOptions {
        RankOptions {
            k,
            alpha,
            limits: self.config.scoring.limits,
            execution: self.config.scoring.execution,
            max_in_flight: self.config.scoring.max_in_flight,
        }
    }

    pub fn graph_baseline(&self, e1: &Iri, e2: &Iri) -> Option<BaselineResult> {
        graph_baseline(&self.snapshot().kg, e1, e2, self.config.scoring.limits.traversal)
    }

    pub fn knowledge_baseline(&self, query_set: Option<&str>) -> Result<Vec<BaselineResult>, EngineError> {
        let snap = self.snapshot();
        let name = self.query_set_name(&snap, query_set)?;
        knowledge_baseline(&snap.kg, &snap.query_sets[&name], &snap.templates, self.config.scoring.execution)
            .map_err(|e| EngineError::Invalid(e.to_string()))
    }

    /// Output of one compared system on a gold standard's seeds, plus the
    /// (score, rating) pairs used for rank correlation.
    pub fn system_outputs(
        &self,
        system: SystemKind,
        gold: &GoldStandard,
        ratings: &BTreeMap<GoldKey, f64>,
    ) -> Result<SystemRun, EngineError> {
        let snap = self.snapshot();
        let eval = &self.config.evaluation;
        let name = self.query_set_name(&snap, eval.query_set.as_deref())?;
        let seeds = gold.seeds();
        match system {
            SystemKind::Full => {
                let candidates: Vec<ConnectionInstance> =
                    snap.discovered[&name].iter().filter(|c| seeds.iter().any(|s| c.involves(s))).cloned().collect();
                let alpha = resolve_alpha(None, &eval.context, Some(self.config.scoring.alpha))
                    .map_err(|e| EngineError::Invalid(e.to_string()))?;
                let options = self.rank_options(alpha, eval.k);
                let ranking = rank_and_explain(&snap.kg, &candidates, &eval.context, &self.backends(), &options)?;
                let outputs = ranking
                    .items
                    .into_iter()
                    .map(|i| SystemOutput { connection: i.connection, explanation: i.explanation })
                    .collect();
                let scored = score_candidates(
                    &snap.kg,
                    &candidates,
                    &eval.context,
                    self.embedder.as_ref(),
                    alpha,
                    &options.limits,
                    options.execution,
                )?;
                let pairs = scored
                    .into_iter()
                    .flatten()
                    .filter_map(|s| ratings.get(&GoldKey::of(&s.connection)).map(|r| (s.breakdown.score, *r)))
                    .collect();
                Ok((outputs, pairs))
            }
            SystemKind::Knowledge => {
                let results = knowledge_baseline(
                    &snap.kg,
                    &snap.query_sets[&name],
                    &snap.templates,
                    self.config.scoring.execution,
                )
                .map_err(|e| EngineError::Invalid(e.to_string()))?;
                Ok((to_outputs(results), Vec::new()))
            }
            SystemKind::Graph => {
                let traversal: Traversal = self.config.scoring.limits.traversal;
                let results =
                    seeds.iter().flat_map(|s| graph_baseline_from(&snap.kg, s, eval.graph_hops, traversal)).collect();
                Ok((to_outputs(results), Vec::new()))
            }
        }
    }

    pub fn load_gold(&self, path: Option<&Path>) -> Result<GoldStandard, EngineError> {
        let path = path
            .or(self.config.evaluation.gold.as_deref())
            .ok_or_else(|| EngineError::Invalid("no gold standard given".into()))?;
        GoldStandard::parse(&read(path)?).map_err(|e| EngineError::Invalid(format!("{}: {e}", path.display())))
    }

    pub fn load_ratings(&self, path: Option<&Path>) -> Result<BTreeMap<GoldKey, f64>, EngineError> {
        match path.or(self.config.evaluation.ratings.as_deref()) {
            Some(p) => parse_ratings(&read(p)?).map_err(|e| EngineError::Invalid(format!("{}: {e}", p.display()))),
            None => Ok(BTreeMap::new()),
        }
    }

    pub fn evaluate(&self, req: &EvaluateRequest) -> Result<MetricsReport, EngineError> {
        let gold = self.load_gold(req.gold.as_deref())?;
        let ratings = self.load_ratings(req.ratings.as_deref())?;
        let (outputs, pairs) = self.system_outputs(req.system.unwrap_or(SystemKind::Full), &gold, &ratings)?;
        evaluate_system(&outputs, &gold, &pairs).map_err(|e| EngineError::Invalid(e.to_string()))
    }
}

fn to_outputs(results: Vec<BaselineResult>) -> Vec<SystemOutput> {
    results.into_iter().map(|r| SystemOutput { connection: r.connection, explanation: r.explanation }).collect()
}

fn discover_on(snap: &Snapshot, name: &str) -> Result<Vec<ConnectionInstance>, EngineError> {
    snap.discovered.get(name).cloned().ok_or_else(|| EngineError::UnknownQuerySet(name.to_string()))
}

/// With one entity, every connection touching it; with two, connections
/// between them in either orientation; with none, everything.
pub fn select_candidates(all: &[ConnectionInstance], e1: Option<&Iri>, e2: Option<&Iri>) -> Vec<ConnectionInstance> {
    all.iter()
        .filter(|c| match (e1, e2) {
            (None, None) => true,
            (Some(a), None) | (None, Some(a)) => c.involves(a),
            (Some(a), Some(b)) => c.involves(a) && c.involves(b),
        })
        .cloned()
        .collect()
}

pub fn load_graph_file(path: &Path, config: &EngineConfig) -> Result<KnowledgeGraph, EngineError> {
    let file = fs::File::open(path).map_err(|e| EngineError::io(path, e))?;
    KnowledgeGraph::load_ntriples(std::io::BufReader::new(file), config.graph.options.clone())
        .map_err(|e| EngineError::Graph { path: Some(path.to_path_buf()), message: e.to_string() })
}
