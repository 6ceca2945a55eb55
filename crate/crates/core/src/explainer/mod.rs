//! Score candidates, rank them, and generate explanations for the top k.

mod backend;
mod prompt;

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{Iri, KnowledgeGraph};
use crate::par::{self, Execution};
use crate::paths::{semantic_relatedness, PathError, PathLimits};
use crate::pattern::ConnectionInstance;
use crate::relevance::{
    check_alpha, cosine, interestingness, relationship_text, user_context_text, EmbeddingBackend,
    InterestingnessBreakdown, RelevanceError, UserContext,
};

pub use backend::{
    chat_messages, generate_remote, generate_stub, ChatMessage, FewShotExample, GenerationBackend, GenerationRequest,
    RemoteGenerator, StubGenerator,
};
pub use prompt::{build_prompt, format_score, parse_prompt, ParsedPrompt, PromptInput, EMPTY_CONTEXT};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExplainError {
    #[error("prompt does not follow the explanation template: {0}")]
    PromptMismatch(String),
    #[error("generation service unreachable: {0}")]
    Network(String),
    #[error("generation service rejected credentials (HTTP {0})")]
    Auth(u16),
    #[error("generation service returned HTTP {0}")]
    Status(u16),
    #[error("malformed generation response: {0}")]
    Malformed(String),
    #[error("generation service returned an empty completion")]
    EmptyCompletion,
    #[error("generated explanation does not mention {0:?}")]
    MissingEntity(String),
    #[error(transparent)]
    Relevance(#[from] RelevanceError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error("all {0} selected candidates failed")]
    AllFailed(usize),
}

pub struct Backends<'a> {
    pub embedder: &'a dyn EmbeddingBackend,
    pub generator: &'a dyn GenerationBackend,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankOptions {
    pub k: usize,
    pub alpha: f64,
    pub limits: PathLimits,
    pub execution: Execution,
    /// Upper bound on concurrent generation calls.
    pub max_in_flight: usize,
}

impl Default for RankOptions {
    fn default() -> Self {
        RankOptions {
            k: 10,
            alpha: crate::relevance::DEFAULT_ALPHA,
            limits: PathLimits::default(),
            execution: Execution::default(),
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredConnection {
    pub connection: ConnectionInstance,
    pub breakdown: InterestingnessBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredExplanation {
    pub connection: ConnectionInstance,
    pub breakdown: InterestingnessBreakdown,
    pub explanation: String,
    pub backend_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureStage {
    Scoring,
    Generation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemFailure {
    pub connection: ConnectionInstance,
    pub stage: FailureStage,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Ranking {
    pub items: Vec<ScoredExplanation>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<ItemFailure>,
}

/// Score non-increasing, then entity1, entity2 and relationship type ascending.
pub fn ranking_order(a: &ScoredConnection, b: &ScoredConnection) -> Ordering {
    b.breakdown.score.total_cmp(&a.breakdown.score).then_with(|| tie_break(&a.connection, &b.connection))
}

pub fn tie_break(a: &ConnectionInstance, b: &ConnectionInstance) -> Ordering {
    a.entity1_id
        .as_str()
        .cmp(b.entity1_id.as_str())
        .then_with(|| a.entity2_id.as_str().cmp(b.entity2_id.as_str()))
        .then_with(|| a.relationship_type.cmp(&b.relationship_type))
        .then_with(|| a.explanation_text.cmp(&b.explanation_text))
        .then_with(|| a.relevant_metadata.cmp(&b.relevant_metadata))
}

/// SR, CR and I(r) for every candidate, in input order.
///
/// The user context is embedded once; SR is computed once per entity pair.
// Per-item failures carry the whole connection back to the caller.
#[allow(clippy::result_large_err)]
pub fn score_candidates(
    kg: &KnowledgeGraph,
    candidates: &[ConnectionInstance],
    u: &UserContext,
    embedder: &dyn EmbeddingBackend,
    alpha: f64,
    limits: &PathLimits,
    exec: Execution,
) -> Result<Vec<Result<ScoredConnection, ItemFailure>>, ExplainError> {
    check_alpha(alpha)?;
    limits.validate()?;
    let context_vec = embedder.embed(&user_context_text(u))?;

    let mut pairs: Vec<(Iri, Iri)> = candidates.iter().map(|c| (c.entity1_id.clone(), c.entity2_id.clone())).collect();
    pairs.sort();
    pairs.dedup();
    let sr_values = par::map(exec, &pairs, |(a, b)| semantic_relatedness(kg, a, b, limits));
    let sr: HashMap<(Iri, Iri), Result<f64, PathError>> = pairs.into_iter().zip(sr_values).collect();

    Ok(par::map(exec, candidates, |conn| {
        let fail = |error: String| ItemFailure { connection: conn.clone(), stage: FailureStage::Scoring, error };
        let sr = sr[&(conn.entity1_id.clone(), conn.entity2_id.clone())].clone().map_err(|e| fail(e.to_string()))?;
        let rel_vec = embedder.embed(&relationship_text(conn, kg)).map_err(|e| fail(e.to_string()))?;
        let cr = cosine(&rel_vec, &context_vec).map_err(|e| fail(e.to_string()))?;
        let breakdown = interestingness(sr, cr, alpha).map_err(|e| fail(e.to_string()))?;
        Ok(ScoredConnection { connection: conn.clone(), breakdown })
    }))
}

fn explain_one(
    kg: &KnowledgeGraph,
    scored: &ScoredConnection,
    context_description: &str,
    generator: &dyn GenerationBackend,
) -> Result<ScoredExplanation, ExplainError> {
    let conn = &scored.connection;
    let d1 = kg.entity_descriptor(&conn.entity1_id);
    let d2 = kg.entity_descriptor(&conn.entity2_id);
    let prompt = build_prompt(&PromptInput {
        entity1_description: d1.description,
        entity2_description: d2.description,
        relationship_type: conn.relationship_type.clone(),
        interestingness_score: scored.breakdown.score,
        user_context_description: context_description.to_string(),
    });
    let explanation = generator.generate(&prompt)?;
    if explanation.trim().is_empty() {
        return Err(ExplainError::EmptyCompletion);
    }
    for label in [&d1.label, &d2.label] {
        if !explanation.contains(label.as_str()) {
            if generator.is_deterministic() {
                return Err(ExplainError::MissingEntity(label.clone()));
            }
            log::warn!("explanation from {} does not mention {label:?}", generator.id());
        }
    }
    Ok(ScoredExplanation {
        connection: conn.clone(),
        breakdown: scored.breakdown,
        explanation,
        backend_id: generator.id().to_string(),
    })
}

/// Score all candidates, sort, keep the top `k`, and explain only those.
///
/// Per-item failures are reported in [`Ranking::failures`] and the item is
/// left out; the call fails only when every selected item failed.
// Per-item failures carry the whole connection back to the caller.
#[allow(clippy::result_large_err)]
pub fn rank_and_explain(
    kg: &KnowledgeGraph,
    candidates: &[ConnectionInstance],
    u: &UserContext,
    backends: &Backends<'_>,
    options: &RankOptions,
) -> Result<Ranking, ExplainError> {
    u.validate()?;
    if options.k == 0 {
        return Ok(Ranking::default());
    }
    let scored =
        score_candidates(kg, candidates, u, backends.embedder, options.alpha, &options.limits, options.execution)?;
    let mut failures = Vec::new();
    let mut ok: Vec<ScoredConnection> = Vec::with_capacity(scored.len());
    for s in scored {
        match s {
            Ok(s) => ok.push(s),
            Err(f) => failures.push(f),
        }
    }
    ok.sort_by(ranking_order);
    ok.truncate(options.k);

    let context_description = user_context_text(u);
    let generated = par::map_bounded(options.execution, options.max_in_flight, &ok, |s| {
        explain_one(kg, s, &context_description, backends.generator).map_err(|e| ItemFailure {
            connection: s.connection.clone(),
            stage: FailureStage::Generation,
            error: e.to_string(),
        })
    });
    let mut items = Vec::with_capacity(generated.len());
    for g in generated {
        match g {
            Ok(item) => items.push(item),
            Err(f) => failures.push(f),
        }
    }
    if items.is_empty() && !failures.is_empty() {
        return Err(ExplainError::AllFailed(failures.len()));
    }
    Ok(Ranking { items, failures })
}
