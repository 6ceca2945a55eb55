use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::RelevanceError;
use crate::text::tokenize;

pub const DEFAULT_DIM: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    values: Vec<f64>,
}

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self, RelevanceError> {
        if values.is_empty() {
            return Err(RelevanceError::Malformed("embedding has no components".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(RelevanceError::Malformed("embedding has non-finite components".into()));
        }
        Ok(Embedding { values })
    }

    pub fn zeros(dim: usize) -> Self {
        Embedding { values: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, k: f64) -> Embedding {
        Embedding { values: self.values.iter().map(|v| v * k).collect() }
    }
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &Embedding, b: &Embedding) -> Result<f64, RelevanceError> {
    if a.dim() != b.dim() {
        return Err(RelevanceError::DimensionMismatch { expected: a.dim(), actual: b.dim() });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

pub trait EmbeddingBackend: Send + Sync {
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Embedding, RelevanceError>;
}

/// 64-bit FNV-1a.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Deterministic hashed bag-of-words embedder.
///
/// Each token adds ±1 to bucket `hash % dim`, with the sign taken from the
/// hash's top bit; the result is L2-normalized.
#[derive(Debug, Clone)]
pub struct LocalEmbedder {
    dim: usize,
}

impl Default for LocalEmbedder {
    fn default() -> Self {
        LocalEmbedder { dim: DEFAULT_DIM }
    }
}

impl LocalEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        LocalEmbedder { dim }
    }

    pub fn embed_text(&self, text: &str) -> Embedding {
        let mut values = vec![0.0f64; self.dim];
        for token in tokenize(text) {
            let h = fnv1a(token.as_bytes());
            let bucket = (h % self.dim as u64) as usize;
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            values[bucket] += sign;
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut values {
                *v /= norm;
            }
        }
        Embedding { values }
    }
}

impl EmbeddingBackend for LocalEmbedder {
    fn id(&self) -> &str {
        "local-hash"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Embedding, RelevanceError> {
        Ok(self.embed_text(text))
    }
}

/// Connection settings for an HTTP service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_timeout_secs() -> u64 {
    30
}

impl EndpointConfig {
    pub fn new(url: impl Into<String>) -> Self {
        EndpointConfig { url: url.into(), token: None, timeout_secs: default_timeout_secs() }
    }

    pub(crate) fn agent(&self) -> ureq::Agent {
        ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(self.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into()
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    input: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    embedding: Vec<f64>,
}

/// Client for `POST {"input": text} -> {"embedding": [...]}` services.
#[derive(Debug)]
pub struct RemoteEmbedder {
    endpoint: EndpointConfig,
    dim: usize,
    agent: ureq::Agent,
}

impl RemoteEmbedder {
    pub fn new(endpoint: EndpointConfig, dim: usize) -> Self {
        let agent = endpoint.agent();
        RemoteEmbedder { endpoint, dim, agent }
    }
}

impl EmbeddingBackend for RemoteEmbedder {
    fn id(&self) -> &str {
        &self.endpoint.url
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Embedding, RelevanceError> {
        embed_remote(&self.agent, &self.endpoint, self.dim, text)
    }
}

pub fn embed_remote(
    agent: &ureq::Agent,
    endpoint: &EndpointConfig,
    dim: usize,
    text: &str,
) -> Result<Embedding, RelevanceError> {
    let mut req = agent.post(&endpoint.url).header("Accept", "application/json");
    if let Some(token) = &endpoint.token {
        req = req.header("Authorization", &format!("Bearer {token}"));
    }
    let mut resp = req.send_json(EmbedRequest { input: text }).map_err(|e| RelevanceError::Network(e.to_string()))?;
    let status = resp.status().as_u16();
    if !(200..300).contains(&status) {
        return Err(RelevanceError::Status(status));
    }
    let body = resp.body_mut().read_to_string().map_err(|e| RelevanceError::Network(e.to_string()))?;
    let parsed: EmbedResponse =
        serde_json::from_str(&body).map_err(|e| RelevanceError::Malformed(format!("embedding response: {e}")))?;
    if parsed.embedding.len() != dim {
        return Err(RelevanceError::DimensionMismatch { expected: dim, actual: parsed.embedding.len() });
    }
    Embedding::new(parsed.embedding)
}
