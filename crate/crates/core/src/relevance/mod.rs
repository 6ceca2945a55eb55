//! Contextual relevance and the interestingness score.

mod embedding;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::KnowledgeGraph;
use crate::pattern::ConnectionInstance;

pub use embedding::{
    cosine, embed_remote, Embedding, EmbeddingBackend, EndpointConfig, LocalEmbedder, RemoteEmbedder, DEFAULT_DIM,
};

pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RelevanceError {
    #[error("embedding service unreachable: {0}")]
    Network(String),
    #[error("embedding service returned HTTP {0}")]
    Status(u16),
    #[error("malformed embedding response: {0}")]
    Malformed(String),
    #[error("embedding dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("{name} = {value} is outside {range}")]
    OutOfRange { name: &'static str, value: f64, range: &'static str },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct UserContext {
    pub search_history: Vec<String>,
    pub expertise: String,
    pub interests: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_override: Option<f64>,
}

impl UserContext {
    pub fn with_interests<I, S>(interests: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        UserContext { interests: interests.into_iter().map(Into::into).collect(), ..Default::default() }
    }

    pub fn is_empty(&self) -> bool {
        user_context_text(self).is_empty()
    }

    pub fn validate(&self) -> Result<(), RelevanceError> {
        if let Some(a) = self.alpha_override {
            check_alpha(a)?;
        }
        Ok(())
    }
}

fn join_items(items: &[String]) -> String {
    items.iter().map(|s| s.trim()).filter(|s| !s.is_empty()).collect::<Vec<_>>().join(", ")
}

/// History, expertise and interests, one section per line; empty sections
/// are omitted.
pub fn user_context_text(u: &UserContext) -> String {
    let sections = [join_items(&u.search_history), u.expertise.trim().to_string(), join_items(&u.interests)];
    sections.into_iter().filter(|s| !s.is_empty()).collect::<Vec<_>>().join("\n")
}

/// Entity1 label, seed label, entity2 label, type, then metadata values
/// rendered as labels.
pub fn relationship_text(conn: &ConnectionInstance, kg: &KnowledgeGraph) -> String {
    let mut parts = vec![
        kg.label(&conn.entity1_id),
        conn.explanation_text.clone(),
        kg.label(&conn.entity2_id),
        conn.relationship_type.clone(),
    ];
    parts.extend(conn.relevant_metadata.values().map(|v| kg.display_canonical(v)));
    parts.retain(|p| !p.is_empty());
    parts.join(" ")
}

pub fn contextual_relevance_with(
    conn_embedding: &Embedding,
    context_embedding: &Embedding,
) -> Result<f64, RelevanceError> {
    cosine(conn_embedding, context_embedding)
}

pub fn contextual_relevance(
    conn: &ConnectionInstance,
    u: &UserContext,
    backend: &dyn EmbeddingBackend,
    kg: &KnowledgeGraph,
) -> Result<f64, RelevanceError> {
    let vr = backend.embed(&relationship_text(conn, kg))?;
    let vu = backend.embed(&user_context_text(u))?;
    cosine(&vr, &vu)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterestingnessBreakdown {
    pub sr: f64,
    pub cr: f64,
    pub alpha: f64,
    pub score: f64,
}

pub(crate) fn check_alpha(alpha: f64) -> Result<(), RelevanceError> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(RelevanceError::OutOfRange { name: "alpha", value: alpha, range: "[0, 1]" })
    }
}

/// `alpha * sr + (1 - alpha) * cr`.
pub fn interestingness(sr: f64, cr: f64, alpha: f64) -> Result<InterestingnessBreakdown, RelevanceError> {
    if !(0.0..1.0).contains(&sr) {
        return Err(RelevanceError::OutOfRange { name: "sr", value: sr, range: "[0, 1)" });
    }
    if !(-1.0..=1.0).contains(&cr) {
        return Err(RelevanceError::OutOfRange { name: "cr", value: cr, range: "[-1, 1]" });
    }
    check_alpha(alpha)?;
    Ok(InterestingnessBreakdown { sr, cr, alpha, score: alpha * sr + (1.0 - alpha) * cr })
}

/// Request value, then the user's override, then the configured default.
pub fn resolve_alpha(request: Option<f64>, user: &UserContext, configured: Option<f64>) -> Result<f64, RelevanceError> {
    let alpha = request.or(user.alpha_override).or(configured).unwrap_or(DEFAULT_ALPHA);
    check_alpha(alpha)?;
    Ok(alpha)
}
