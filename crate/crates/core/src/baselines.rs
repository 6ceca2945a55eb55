//! Comparison systems: shortest-path verbalization and fixed templates.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{EdgeDirection, Iri, KnowledgeGraph};
use crate::par::Execution;
use crate::paths::{shortest_path_dijkstra, Path, Traversal};
use crate::pattern::{discover_connections, ConnectionInstance, PatternQuery};

pub const PATH_RELATIONSHIP: &str = "path";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BaselineError {
    #[error("no template for relationship type {0:?}")]
    MissingTemplate(String),
    #[error("line {line}: {message}")]
    TemplateSyntax { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineMethod {
    Graph,
    Knowledge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub connection: ConnectionInstance,
    pub explanation: String,
    pub method: BaselineMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<Path>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplanationTemplate {
    pub relationship_type: String,
    pub template: String,
}

impl ExplanationTemplate {
    pub fn new(relationship_type: impl Into<String>, template: impl Into<String>) -> Result<Self, String> {
        let template = template.into();
        for needed in ["{entity1}", "{entity2}"] {
            if !template.contains(needed) {
                return Err(format!("template must contain {needed}"));
            }
        }
        Ok(ExplanationTemplate { relationship_type: relationship_type.into(), template })
    }
}

pub type TemplateSet = BTreeMap<String, ExplanationTemplate>;

/// Parse `TEMPLATE <relationship_type> "<text>"` lines.
pub fn parse_templates(source: &str) -> Result<TemplateSet, BaselineError> {
    let mut out = TemplateSet::new();
    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let fail = |message: &str| BaselineError::TemplateSyntax { line, message: message.to_string() };
        let text = raw.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let rest = text
            .strip_prefix("TEMPLATE")
            .filter(|r| r.starts_with(char::is_whitespace))
            .ok_or_else(|| fail("expected TEMPLATE"))?;
        let rest = rest.trim_start();
        let (ty, quoted) = rest
            .split_once(char::is_whitespace)
            .ok_or_else(|| fail("expected a relationship type and a quoted template"))?;
        let quoted = quoted.trim();
        let body = quoted
            .strip_prefix('"')
            .and_then(|q| q.strip_suffix('"'))
            .ok_or_else(|| fail("template text must be double-quoted"))?;
        let body = crate::kg::ntriples::unescape(body).ok_or_else(|| fail("invalid escape in template"))?;
        let tpl = ExplanationTemplate::new(ty, body).map_err(|m| fail(&m))?;
        if out.insert(ty.to_string(), tpl).is_some() {
            return Err(fail("duplicate template for this relationship type"));
        }
    }
    Ok(out)
}

/// `A --[p]--> B <--[q]-- C` using labels and predicate local names.
pub fn verbalize_path(kg: &KnowledgeGraph, path: &Path) -> String {
    let mut out = kg.label(&path.nodes[0]);
    for (edge, node) in path.edges.iter().zip(&path.nodes[1..]) {
        let p = edge.predicate.local_name();
        match edge.direction {
            EdgeDirection::Out => out.push_str(&format!(" --[{p}]--> ")),
            EdgeDirection::In => out.push_str(&format!(" <--[{p}]-- ")),
        }
        out.push_str(&kg.label(node));
    }
    out
}

/// Unit-weight shortest path between two entities, verbalized.
pub fn graph_baseline(kg: &KnowledgeGraph, e1: &Iri, e2: &Iri, traversal: Traversal) -> Option<BaselineResult> {
    if e1 == e2 {
        return None;
    }
    let path = shortest_path_dijkstra(kg, e1, e2, traversal, |_| 1.0).expect("unit weights are positive")?;
    let explanation = verbalize_path(kg, &path);
    let mut metadata = BTreeMap::new();
    metadata.insert("hops".to_string(), path.len().to_string());
    Some(BaselineResult {
        connection: ConnectionInstance {
            entity1_id: e1.clone(),
            entity2_id: e2.clone(),
            relationship_type: PATH_RELATIONSHIP.to_string(),
            relevant_metadata: metadata,
            explanation_text: explanation.clone(),
        },
        explanation,
        method: BaselineMethod::Graph,
        path: Some(path),
    })
}

/// Graph baseline for every entity within `max_hops` of `seed`, in IRI order.
pub fn graph_baseline_from(
    kg: &KnowledgeGraph,
    seed: &Iri,
    max_hops: usize,
    traversal: Traversal,
) -> Vec<BaselineResult> {
    let mut seen: BTreeSet<Iri> = BTreeSet::from([seed.clone()]);
    let mut queue = VecDeque::from([(seed.clone(), 0usize)]);
    while let Some((node, depth)) = queue.pop_front() {
        if depth == max_hops {
            continue;
        }
        for nb in kg.neighbors(&node, traversal.direction()) {
            if seen.insert(nb.node.clone()) {
                queue.push_back((nb.node, depth + 1));
            }
        }
    }
    seen.remove(seed);
    seen.iter().filter_map(|target| graph_baseline(kg, seed, target, traversal)).collect()
}

pub fn fill_template(kg: &KnowledgeGraph, conn: &ConnectionInstance, template: &ExplanationTemplate) -> String {
    let mut text = template
        .template
        .replace("{entity1}", &kg.label(&conn.entity1_id))
        .replace("{entity2}", &kg.label(&conn.entity2_id));
    for (var, value) in &conn.relevant_metadata {
        text = text.replace(&format!("{{{var}}}"), &kg.display_canonical(value));
    }
    text
}

/// Discovery plus template filling, in discovery order. No scoring.
pub fn knowledge_baseline(
    kg: &KnowledgeGraph,
    queries: &[PatternQuery],
    templates: &TemplateSet,
    exec: Execution,
) -> Result<Vec<BaselineResult>, BaselineError> {
    discover_connections(kg, queries, exec)
        .into_iter()
        .map(|conn| {
            let tpl = templates
                .get(&conn.relationship_type)
                .ok_or_else(|| BaselineError::MissingTemplate(conn.relationship_type.clone()))?;
            let explanation = fill_template(kg, &conn, tpl);
            Ok(BaselineResult { connection: conn, explanation, method: BaselineMethod::Knowledge, path: None })
        })
        .collect()
}
