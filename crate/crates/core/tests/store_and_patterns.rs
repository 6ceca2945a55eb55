use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use proptest::prelude::*;

use relex_core::kg::{
    parse_ntriples_str, to_ntriples_string, GraphOptions, Iri, KnowledgeGraph, Literal, Term, Triple,
};
use relex_core::pattern::{
    discover_connections, match_pattern, parse_pattern, parse_query_set, PatternError, PatternQuery, PatternTerm,
};
use relex_core::Execution;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn read(name: &str) -> String {
    std::fs::read_to_string(fixtures().join(name)).unwrap()
}

fn heritage() -> KnowledgeGraph {
    KnowledgeGraph::load_ntriples_str(&read("heritage.nt")).unwrap()
}

/// Fixture queries plus extras that exercise literals and language filters.
fn all_queries() -> Vec<PatternQuery> {
    let mut qs = parse_query_set(&read("heritage.rq")).unwrap();
    qs.extend(
        parse_query_set(
            r#"
CONNECTION named TYPE "named"
  MATCH (?p <http://www.wikidata.org/prop/direct/P106> <http://www.wikidata.org/entity/Q1028181>),
        (?p <http://www.w3.org/2000/01/rdf-schema#label> ?name),
        (?p <http://www.wikidata.org/prop/direct/P19> ?place)
  FILTER LANG(?name) = "EN"
  ENTITIES ?p ?place
  LABEL "{name}"

CONNECTION by_label TYPE "by_label"
  MATCH (?w <http://www.w3.org/2000/01/rdf-schema#label> "The Night Watch"@en),
        (?w ?rel ?other)
  ENTITIES ?w ?other
  LABEL "{w} {rel} {other}"

CONNECTION nowhere TYPE "nowhere"
  MATCH (?a <http://example.org/absent> ?b)
  ENTITIES ?a ?b
  LABEL "{a}"
"#,
        )
        .unwrap(),
    );
    qs
}

fn constant(t: &PatternTerm) -> Option<Term> {
    match t {
        PatternTerm::Var(_) => None,
        PatternTerm::Iri(i) => Some(Term::iri(i.clone())),
        PatternTerm::Literal(l) => Some(Term::literal(l.clone())),
    }
}

/// Textbook nested-loop join over the raw triple list.
fn oracle(triples: &[Triple], q: &PatternQuery) -> BTreeSet<BTreeMap<String, Term>> {
    fn unify(slot: &PatternTerm, value: &Term, row: &mut BTreeMap<String, Term>) -> bool {
        match slot {
            PatternTerm::Var(v) => match row.get(v) {
                Some(bound) => bound == value,
                None => {
                    row.insert(v.clone(), value.clone());
                    true
                }
            },
            other => constant(other).as_ref() == Some(value),
        }
    }
    fn go(
        triples: &[Triple],
        q: &PatternQuery,
        i: usize,
        row: BTreeMap<String, Term>,
        out: &mut BTreeSet<BTreeMap<String, Term>>,
    ) {
        if i == q.patterns.len() {
            let langs_ok = q.lang_filters.iter().all(|f| {
                let lang = row[&f.var].as_literal().and_then(|l| l.lang.clone()).unwrap_or_default();
                lang.to_lowercase() == f.tag.to_lowercase()
            });
            if langs_ok {
                out.insert(row);
            }
            return;
        }
        let p = &q.patterns[i];
        for t in triples {
            let mut next = row.clone();
            if unify(&p.subject, &Term::iri(t.subject.clone()), &mut next)
                && unify(&p.predicate, &Term::iri(t.predicate.clone()), &mut next)
                && unify(&p.object, &t.object, &mut next)
            {
                go(triples, q, i + 1, next, out);
            }
        }
    }
    let mut out = BTreeSet::new();
    go(triples, q, 0, BTreeMap::new(), &mut out);
    out
}

#[test]
fn matcher_equals_nested_loop_join_on_fixture() {
    let kg = heritage();
    assert!(kg.len() <= 200);
    let raw = parse_ntriples_str(&read("heritage.nt")).unwrap();
    for q in all_queries() {
        let got = match_pattern(&kg, &q);
        let got_set: BTreeSet<BTreeMap<String, Term>> = got.iter().map(|b| b.0.clone()).collect();
        assert_eq!(got_set.len(), got.len(), "{}: duplicate bindings", q.name);
        assert_eq!(got_set, oracle(&raw, &q), "query {}", q.name);

        // Documented order: canonical text of values, variable by variable.
        let vars = q.variables();
        let keys: Vec<Vec<String>> = got.iter().map(|b| vars.iter().map(|v| b.0[v].canonical()).collect()).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted, "query {}", q.name);
    }
}

#[test]
fn filtered_query_only_sees_english_labels() {
    let kg = KnowledgeGraph::load_ntriples_str(
        "<http://e/a> <http://www.wikidata.org/prop/direct/P106> <http://www.wikidata.org/entity/Q1028181> .\n\
         <http://e/a> <http://www.w3.org/2000/01/rdf-schema#label> \"A\"@en .\n\
         <http://e/a> <http://www.w3.org/2000/01/rdf-schema#label> \"Ah\"@nl .\n\
         <http://e/a> <http://www.w3.org/2000/01/rdf-schema#label> \"plain\" .\n\
         <http://e/a> <http://www.wikidata.org/prop/direct/P19> <http://e/town> .\n",
    )
    .unwrap();
    let q = all_queries().into_iter().find(|q| q.name == "named").unwrap();
    let got = match_pattern(&kg, &q);
    assert_eq!(got.len(), 1);
    assert_eq!(got[0].get("name"), Some(&Term::literal(Literal::lang("A", "en").unwrap())));
    assert_eq!(got.iter().map(|b| b.0.clone()).collect::<BTreeSet<_>>(), oracle(kg.triples(), &q));
}

#[test]
fn lookup_equals_linear_scan_for_every_mask() {
    let kg = heritage();
    let all = kg.triples().to_vec();
    let mut samples: Vec<&Triple> = all.iter().step_by(7).collect();
    samples.push(all.last().unwrap());
    for t in samples {
        for mask in 0..8u8 {
            let s = (mask & 1 != 0).then_some(&t.subject);
            let p = (mask & 2 != 0).then_some(&t.predicate);
            let o = (mask & 4 != 0).then_some(&t.object);
            let got = kg.lookup(s, p, o);
            let want: Vec<Triple> = all
                .iter()
                .filter(|x| {
                    s.is_none_or(|s| &x.subject == s)
                        && p.is_none_or(|p| &x.predicate == p)
                        && o.is_none_or(|o| &x.object == o)
                })
                .cloned()
                .collect();
            assert_eq!(
                got.iter().collect::<BTreeSet<_>>(),
                want.iter().collect::<BTreeSet<_>>(),
                "mask {mask:03b} on {}",
                t.canonical()
            );
            assert_eq!(got.len(), want.len());
        }
    }
    let absent = Iri::new("http://example.org/absent").unwrap();
    assert!(kg.lookup(Some(&absent), None, None).is_empty());
}

#[test]
fn ntriples_round_trip_on_fixtures() {
    for entry in std::fs::read_dir(fixtures()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("nt") {
            continue;
        }
        let text = std::fs::read_to_string(&path).unwrap();
        let kg = KnowledgeGraph::load_ntriples_str(&text).unwrap();
        let exported = to_ntriples_string(kg.triples());
        let again = KnowledgeGraph::load_ntriples_str(&exported).unwrap();
        assert_eq!(kg.triples(), again.triples(), "{}", path.display());
        assert_eq!(exported, to_ntriples_string(again.triples()));
        let parsed: BTreeSet<Triple> = parse_ntriples_str(&text).unwrap().into_iter().collect();
        assert_eq!(parsed, kg.triples().iter().cloned().collect::<BTreeSet<_>>());
    }
}

fn arb_literal() -> impl Strategy<Value = Literal> {
    let text = "[ -~\\n\\t\\r\"\\\\éß漢]{0,12}";
    prop_oneof![
        text.prop_map(Literal::plain),
        (text, "[a-z]{2}(-[A-Z]{2})?").prop_map(|(l, tag)| Literal::lang(l, tag).unwrap()),
        (text, 0..3usize).prop_map(|(l, d)| Literal::typed(l, Iri::new(format!("http://dt.example/{d}")).unwrap())),
    ]
}

proptest! {
    #[test]
    fn random_graphs_round_trip(
        edges in proptest::collection::vec((0..6usize, 0..3usize, 0..6usize), 0..20),
        lits in proptest::collection::vec((0..6usize, arb_literal()), 0..10),
    ) {
        let iri = |k: &str, i: usize| Iri::new(format!("http://example.org/{k}{i}")).unwrap();
        let mut triples: Vec<Triple> = edges.iter().map(|&(s, p, o)| Triple::new(iri("n", s), iri("p", p), iri("n", o))).collect();
        triples.extend(lits.into_iter().map(|(s, l)| Triple::new(iri("n", s), iri("p", 9), l)));
        let kg = KnowledgeGraph::from_triples(triples.clone(), GraphOptions::default());
        let back = KnowledgeGraph::load_ntriples_str(&to_ntriples_string(kg.triples())).unwrap();
        prop_assert_eq!(kg.triples(), back.triples());
        let distinct: BTreeSet<Triple> = triples.into_iter().collect();
        prop_assert_eq!(kg.len(), distinct.len());
    }
}

#[test]
fn malformed_programs_report_positions() {
    let mut seen = 0;
    let mut files: Vec<PathBuf> =
        std::fs::read_dir(fixtures().join("malformed")).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    for path in files {
        let text = std::fs::read_to_string(&path).unwrap();
        let expect = text.lines().next().and_then(|l| l.strip_prefix("# expect ")).expect("expectation header");
        let (line, column) = expect.split_once(':').unwrap();
        let want: (usize, usize) = (line.parse().unwrap(), column.parse().unwrap());
        let err: PatternError = parse_query_set(&text).expect_err(&path.display().to_string());
        assert_eq!(err.position(), want, "{}: {err}", path.display());
        assert!(err.to_string().contains(&format!("{}:{}", want.0, want.1)), "{err}");
        seen += 1;
    }
    assert_eq!(seen, 20);
}

#[test]
fn single_block_parser_rejects_a_second_block() {
    let text = read("heritage.rq");
    let err = parse_pattern(&text).unwrap_err();
    assert!(matches!(err, PatternError::Syntax { line: 10, column: 1, .. }), "{err}");
}

#[test]
fn discovery_is_identical_across_execution_modes() {
    let kg = heritage();
    let qs = parse_query_set(&read("heritage.rq")).unwrap();
    let seq = discover_connections(&kg, &qs, Execution::Sequential);
    let par = discover_connections(&kg, &qs, Execution::Parallel);
    assert_eq!(seq, par);
    let keys: BTreeSet<_> = seq.iter().map(|c| c.key()).collect();
    assert_eq!(keys.len(), seq.len());
    assert!(seq.iter().all(|c| c.entity1_id != c.entity2_id && !c.explanation_text.is_empty()));
    // Every query contributes and each one yields its own type.
    let types: BTreeSet<&str> = seq.iter().map(|c| c.relationship_type.as_str()).collect();
    assert_eq!(types, ["born_in", "created", "depicts", "died_in", "held_by"].into_iter().collect());
}
