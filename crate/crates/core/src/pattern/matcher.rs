use std::collections::BTreeMap;

use super::{Binding, PatternQuery, PatternTerm};
use crate::kg::KnowledgeGraph;

#[derive(Debug, Clone, Copy)]
enum Slot {
    Const(u32),
    Var(usize),
}

struct Compiled {
    vars: Vec<String>,
    patterns: Vec<[Slot; 3]>,
    // (variable index, tag) pairs
    filters: Vec<(usize, String)>,
}

fn compile(kg: &KnowledgeGraph, q: &PatternQuery) -> Option<Compiled> {
    let vars = q.variables();
    let index = |name: &str| vars.iter().position(|v| v == name).expect("validated variable");
    let mut patterns = Vec::with_capacity(q.patterns.len());
    for p in &q.patterns {
        let mut slots = [Slot::Var(0); 3];
        for (slot, term) in slots.iter_mut().zip(p.terms()) {
            *slot = match term {
                PatternTerm::Var(v) => Slot::Var(index(v)),
                // A constant absent from the graph can never match.
                other => Slot::Const(kg.id_of(&other.constant().expect("constant term"))?),
            };
        }
        patterns.push(slots);
    }
    let filters = q.lang_filters.iter().map(|f| (index(&f.var), f.tag.clone())).collect();
    Some(Compiled { vars, patterns, filters })
}

/// Greedy plan: most selective pattern first, then patterns joined to the
/// variables bound so far.
fn plan(kg: &KnowledgeGraph, c: &Compiled) -> Vec<usize> {
    let constant_count = |slots: &[Slot; 3]| {
        let id = |s: Slot| match s {
            Slot::Const(id) => Some(id),
            Slot::Var(_) => None,
        };
        kg.count_ids(id(slots[0]), id(slots[1]), id(slots[2]))
    };
    let counts: Vec<usize> = c.patterns.iter().map(constant_count).collect();
    let mut bound = vec![false; c.vars.len()];
    let mut remaining: Vec<usize> = (0..c.patterns.len()).collect();
    let mut order = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let shares_bound = |i: usize| c.patterns[i].iter().any(|s| matches!(s, Slot::Var(v) if bound[*v]));
        let any_connected = order.is_empty() || remaining.iter().any(|&i| shares_bound(i));
        let (pick_at, &pick) = remaining
            .iter()
            .enumerate()
            .filter(|&(_, &i)| !any_connected || order.is_empty() || shares_bound(i))
            .min_by_key(|&(_, &i)| (counts[i], i))
            .expect("non-empty");
        remaining.remove(pick_at);
        for s in &c.patterns[pick] {
            if let Slot::Var(v) = s {
                bound[*v] = true;
            }
        }
        order.push(pick);
    }
    order
}

fn join(
    kg: &KnowledgeGraph,
    c: &Compiled,
    order: &[usize],
    depth: usize,
    row: &mut Vec<Option<u32>>,
    out: &mut Vec<Vec<u32>>,
) {
    let Some(&pi) = order.get(depth) else {
        let full: Vec<u32> = row.iter().map(|v| v.expect("every variable bound")).collect();
        if passes_filters(kg, c, &full) {
            out.push(full);
        }
        return;
    };
    let slots = c.patterns[pi];
    let resolve = |s: Slot, row: &[Option<u32>]| match s {
        Slot::Const(id) => Some(id),
        Slot::Var(v) => row[v],
    };
    let (s, p, o) = (resolve(slots[0], row), resolve(slots[1], row), resolve(slots[2], row));
    for triple in kg.match_ids(s, p, o) {
        let mut newly = Vec::with_capacity(3);
        let mut ok = true;
        for (slot, value) in slots.iter().zip(triple) {
            if let Slot::Var(v) = *slot {
                match row[v] {
                    Some(existing) if existing != value => {
                        ok = false;
                        break;
                    }
                    Some(_) => {}
                    None => {
                        row[v] = Some(value);
                        newly.push(v);
                    }
                }
            }
        }
        if ok {
            join(kg, c, order, depth + 1, row, out);
        }
        for v in newly {
            row[v] = None;
        }
    }
}

fn passes_filters(kg: &KnowledgeGraph, c: &Compiled, row: &[u32]) -> bool {
    c.filters.iter().all(|(v, tag)| {
        let lang = kg.term(row[*v]).as_literal().and_then(|l| l.lang.as_deref()).unwrap_or("");
        lang.eq_ignore_ascii_case(tag)
    })
}

fn to_bindings(kg: &KnowledgeGraph, c: &Compiled, mut rows: Vec<Vec<u32>>) -> Vec<Binding> {
    // Ids follow canonical term order, so this is the documented output order.
    rows.sort_unstable();
    rows.dedup();
    rows.into_iter()
        .map(|row| {
            let map: BTreeMap<String, _> =
                c.vars.iter().cloned().zip(row.iter().map(|&id| kg.term(id).clone())).collect();
            Binding(map)
        })
        .collect()
}

/// All bindings satisfying every pattern and language filter, ordered by the
/// canonical text of the bound values in variable order.
pub fn match_pattern(kg: &KnowledgeGraph, q: &PatternQuery) -> Vec<Binding> {
    let Some(c) = compile(kg, q) else { return Vec::new() };
    let order = plan(kg, &c);
    run(kg, &c, &order)
}

/// Evaluate with an explicit join order (a permutation of pattern indexes).
pub fn match_pattern_in_order(kg: &KnowledgeGraph, q: &PatternQuery, order: &[usize]) -> Vec<Binding> {
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    assert!(sorted == (0..q.patterns.len()).collect::<Vec<_>>(), "order must be a permutation of the patterns");
    let Some(c) = compile(kg, q) else { return Vec::new() };
    run(kg, &c, order)
}

fn run(kg: &KnowledgeGraph, c: &Compiled, order: &[usize]) -> Vec<Binding> {
    let mut row = vec![None; c.vars.len()];
    let mut out = Vec::new();
    join(kg, c, order, 0, &mut row, &mut out);
    to_bindings(kg, c, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{Iri, Term};
    use crate::pattern::parse_pattern;

    fn graph() -> KnowledgeGraph {
        KnowledgeGraph::load_ntriples_str(
            "<a> <born> <x> .\n<b> <born> <y> .\n<c> <born> \"somewhere\" .\n<x> <country> <nl> .\n<y> <country> <fr> .\n\
             <nl> <label> \"Netherlands\"@en .\n<nl> <label> \"Nederland\"@nl .\n<fr> <label> \"France\"@en .\n<a> <knows> <a> .",
        )
        .unwrap()
    }

    #[test]
    fn empty_graph_has_no_bindings() {
        let q = parse_pattern("CONNECTION c TYPE \"t\" MATCH (?x <born> ?y) ENTITIES ?x ?y LABEL \"{x}\"").unwrap();
        assert!(match_pattern(&KnowledgeGraph::empty(), &q).is_empty());
    }

    #[test]
    fn single_pattern() {
        let q = parse_pattern("CONNECTION c TYPE \"t\" MATCH (?x <born> ?y) ENTITIES ?x ?y LABEL \"{x}\"").unwrap();
        let bs = match_pattern(&graph(), &q);
        assert_eq!(bs.len(), 3);
        assert_eq!(bs[0].get("x"), Some(&Term::iri(Iri::new("a").unwrap())));
    }

    #[test]
    fn join_with_lang_filter() {
        let q = parse_pattern(
            "CONNECTION c TYPE \"t\" MATCH (?x <born> ?y), (?y <country> ?c), (?c <label> ?l) FILTER LANG(?l) = \"en\" ENTITIES ?x ?y LABEL \"{x} {l}\"",
        )
        .unwrap();
        let bs = match_pattern(&graph(), &q);
        let labels: Vec<String> = bs.iter().map(|b| b.get("l").unwrap().canonical()).collect();
        assert_eq!(labels, vec!["\"Netherlands\"@en", "\"France\"@en"]);
        for order in [[0, 1, 2], [2, 1, 0], [1, 0, 2], [2, 0, 1]] {
            assert_eq!(match_pattern_in_order(&graph(), &q, &order), bs);
        }
    }

    #[test]
    fn repeated_variable_in_pattern() {
        let q = parse_pattern("CONNECTION c TYPE \"t\" MATCH (?x ?p ?x) ENTITIES ?x ?p LABEL \"{x}\"").unwrap();
        let bs = match_pattern(&graph(), &q);
        assert_eq!(bs.len(), 1);
    }

    #[test]
    fn unknown_constant_matches_nothing() {
        let q = parse_pattern("CONNECTION c TYPE \"t\" MATCH (?x <nope> ?y) ENTITIES ?x ?y LABEL \"{x}\"").unwrap();
        assert!(match_pattern(&graph(), &q).is_empty());
    }
}
