use serde::{Deserialize, Serialize};

use super::prompt::parse_prompt;
use super::ExplainError;
use crate::relevance::EndpointConfig;

pub trait GenerationBackend: Send + Sync {
    fn id(&self) -> &str;
    fn generate(&self, prompt: &str) -> Result<String, ExplainError>;
    /// Whether output is guaranteed to quote the entity descriptions.
    fn is_deterministic(&self) -> bool {
        false
    }
}

/// Offline generator that reads the prompt fields back and fills a fixed sentence.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubGenerator;

impl GenerationBackend for StubGenerator {
    fn id(&self) -> &str {
        "stub"
    }

    fn generate(&self, prompt: &str) -> Result<String, ExplainError> {
        generate_stub(prompt)
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

pub fn generate_stub(prompt: &str) -> Result<String, ExplainError> {
    let p = parse_prompt(prompt)?;
    let context =
        p.user_context_description.lines().map(str::trim).filter(|l| !l.is_empty()).collect::<Vec<_>>().join("; ");
    Ok(format!(
        "{} is connected to {} through the relationship '{}' (interestingness {}); this is relevant to a user interested in {}.",
        p.entity1_description, p.entity2_description, p.relationship_type, p.score_text, context
    ))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub prompt: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Serialize)]
pub struct GenerationRequest {
    pub messages: Vec<ChatMessage>,
    pub max_tokens: u32,
}

#[derive(Deserialize)]
struct GenerationResponse {
    text: String,
}

/// Few-shot examples go first as user/assistant turns, then the prompt.
pub fn chat_messages(few_shot: &[FewShotExample], prompt: &str) -> Vec<ChatMessage> {
    let mut messages = Vec::with_capacity(few_shot.len() * 2 + 1);
    for ex in few_shot {
        messages.push(ChatMessage { role: "user".into(), content: ex.prompt.clone() });
        messages.push(ChatMessage { role: "assistant".into(), content: ex.response.clone() });
    }
    messages.push(ChatMessage { role: "user".into(), content: prompt.to_string() });
    messages
}

/// Client for chat-completion style services:
/// `POST {"messages": [...], "max_tokens": n} -> {"text": "..."}`.
#[derive(Debug)]
pub struct RemoteGenerator {
    endpoint: EndpointConfig,
    few_shot: Vec<FewShotExample>,
    max_tokens: u32,
    agent: ureq::Agent,
}

impl RemoteGenerator {
    pub fn new(endpoint: EndpointConfig, few_shot: Vec<FewShotExample>, max_tokens: u32) -> Self {
        let agent = endpoint.agent();
        RemoteGenerator { endpoint, few_shot, max_tokens, agent }
    }
}

impl GenerationBackend for RemoteGenerator {
    fn id(&self) -> &str {
        &self.endpoint.url
    }

    fn generate(&self, prompt: &str) -> Result<String, ExplainError> {
        generate_remote(&self.agent, &self.endpoint, &self.few_shot, self.max_tokens, prompt)
    }
}

pub fn generate_remote(
    agent: &ureq::Agent,
    endpoint: &EndpointConfig,
    few_shot: &[FewShotExample],
    max_tokens: u32,
    prompt: &str,
) -> Result<String, ExplainError> {
    let body = GenerationRequest { messages: chat_messages(few_shot, prompt), max_tokens };
    let mut req = agent.post(&endpoint.url).header("Accept", "application/json");
    if let Some(token) = &endpoint.token {
        req = req.header("Authorization", &format!("Bearer {token}"));
    }
    let mut resp = req.send_json(&body).map_err(|e| ExplainError::Network(e.to_string()))?;
    let status = resp.status().as_u16();
    match status {
        200..=299 => {}
        401 | 403 => return Err(ExplainError::Auth(status)),
        _ => return Err(ExplainError::Status(status)),
    }
    let text = resp.body_mut().read_to_string().map_err(|e| ExplainError::Network(e.to_string()))?;
    let parsed: GenerationResponse =
        serde_json::from_str(&text).map_err(|e| ExplainError::Malformed(format!("generation response: {e}")))?;
    if parsed.text.trim().is_empty() {
        return Err(ExplainError::EmptyCompletion);
    }
    Ok(parsed.text)
}
