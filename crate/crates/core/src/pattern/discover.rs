use std::collections::{BTreeMap, HashSet};

use super::{match_pattern, Binding, ConnectionInstance, PatternQuery};
use crate::kg::KnowledgeGraph;
use crate::par::{self, Execution};

fn fill_template(kg: &KnowledgeGraph, template: &str, binding: &Binding) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after.find('}').expect("templates are validated at parse time");
        let name = &after[..close];
        let value = binding.get(name).expect("placeholders are validated at parse time");
        out.push_str(&kg.display(value));
        rest = &after[close + 1..];
    }
    out.push_str(rest);
    out
}

fn instances_for(kg: &KnowledgeGraph, q: &PatternQuery) -> Vec<ConnectionInstance> {
    let mut out = Vec::new();
    for binding in match_pattern(kg, q) {
        let (Some(e1), Some(e2)) = (
            binding.get(&q.entity1_var).and_then(|t| t.as_iri()),
            binding.get(&q.entity2_var).and_then(|t| t.as_iri()),
        ) else {
            continue;
        };
        if e1 == e2 {
            continue;
        }
        let explanation_text = fill_template(kg, &q.label_template, &binding);
        if explanation_text.trim().is_empty() {
            continue;
        }
        let relevant_metadata: BTreeMap<String, String> = q
            .metadata_vars
            .iter()
            .map(|v| (v.clone(), binding.get(v).expect("validated variable").canonical()))
            .collect();
        out.push(ConnectionInstance {
            entity1_id: e1.clone(),
            entity2_id: e2.clone(),
            relationship_type: q.relationship_type.clone(),
            relevant_metadata,
            explanation_text,
        });
    }
    out
}

/// Run every query and emit one candidate per binding, in query order then
/// binding order. Self-connections and repeated (entity1, entity2, type)
/// keys are dropped, keeping the first occurrence.
pub fn discover_connections(kg: &KnowledgeGraph, queries: &[PatternQuery], exec: Execution) -> Vec<ConnectionInstance> {
    let per_query = par::map(exec, queries, |q| instances_for(kg, q));
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for conn in per_query.into_iter().flatten() {
        let key = (conn.entity1_id.clone(), conn.entity2_id.clone(), conn.relationship_type.clone());
        if seen.insert(key) {
            out.push(conn);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::parse_query_set;

    #[test]
    fn zero_queries_give_empty_list() {
        let kg = KnowledgeGraph::load_ntriples_str("<a> <p> <b> .").unwrap();
        assert!(discover_connections(&kg, &[], Execution::Sequential).is_empty());
    }

    #[test]
    fn self_connections_and_duplicates_dropped() {
        let kg = KnowledgeGraph::load_ntriples_str(
            "<a> <p> <a> .\n<a> <p> <b> .\n<a> <q> <b> .\n<b> <http://www.w3.org/2000/01/rdf-schema#label> \"Bee\" .",
        )
        .unwrap();
        let qs = parse_query_set(
            "CONNECTION one TYPE \"linked\" MATCH (?x <p> ?y) ENTITIES ?x ?y LABEL \"{x} links {y}\"\n\
             CONNECTION two TYPE \"linked\" MATCH (?x <q> ?y) ENTITIES ?x ?y META ?y LABEL \"{x} also links {y}\"",
        )
        .unwrap();
        let cs = discover_connections(&kg, &qs, Execution::Sequential);
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].explanation_text, "a links Bee");
        assert!(cs[0].relevant_metadata.is_empty());
    }

    #[test]
    fn literal_entity_bindings_skipped_and_metadata_kept() {
        let kg = KnowledgeGraph::load_ntriples_str("<a> <p> \"lit\" .\n<a> <p> <b> .\n<b> <when> \"1888\" .").unwrap();
        let qs = parse_query_set(
            "CONNECTION c TYPE \"t\" MATCH (?x <p> ?y) ENTITIES ?x ?y LABEL \"{x}-{y}\"\n\
             CONNECTION d TYPE \"u\" MATCH (?x <p> ?y), (?y <when> ?w) ENTITIES ?x ?y META ?w LABEL \"{x} {y} in {w}\"",
        )
        .unwrap();
        let cs = discover_connections(&kg, &qs, Execution::Parallel);
        assert_eq!(cs.len(), 2);
        assert_eq!(cs[1].relevant_metadata.get("w").map(String::as_str), Some("\"1888\""));
        assert_eq!(cs[1].explanation_text, "a b in 1888");
    }
}
