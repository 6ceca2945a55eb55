//! Sequential against parallel execution for discovery and scoring.

use std::hint::black_box;
use std::path::PathBuf;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relex_core::explainer::score_candidates;
use relex_core::kg::{GraphOptions, Iri, KnowledgeGraph, Triple};
use relex_core::paths::PathLimits;
use relex_core::pattern::{discover_connections, parse_query_set, ConnectionInstance, PatternQuery};
use relex_core::relevance::{LocalEmbedder, UserContext};
use relex_core::Execution;

fn fixture(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    std::fs::read_to_string(path).unwrap()
}

fn setup() -> (KnowledgeGraph, Vec<PatternQuery>) {
    let kg = KnowledgeGraph::load_ntriples_str(&fixture("heritage.nt")).unwrap();
    let queries = parse_query_set(&fixture("heritage.rq")).unwrap();
    (kg, queries)
}

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn discovery(c: &mut Criterion) {
    let (kg, queries) = setup();
    let mut group = c.benchmark_group("discover");
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| discover_connections(black_box(&kg), &queries, exec)));
    }
    group.finish();
}

fn scoring(c: &mut Criterion) {
    let (kg, queries) = setup();
    let candidates = discover_connections(&kg, &queries, Execution::Sequential);
    let embedder = LocalEmbedder::new(256);
    let user = UserContext {
        interests: vec!["Dutch Golden Age painting".into()],
        expertise: "art history student".into(),
        ..Default::default()
    };
    let mut group = c.benchmark_group("score_candidates");
    group.sample_size(20);
    for depth in [3, 4] {
        let limits = PathLimits::new(depth, 1000).unwrap();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, depth), &limits, |b, limits| {
                b.iter(|| score_candidates(&kg, black_box(&candidates), &user, &embedder, 0.5, limits, exec).unwrap())
            });
        }
    }
    group.finish();
}

/// Random graph with 400 nodes and mean degree 8, plus 256 candidate pairs.
fn synthetic() -> (KnowledgeGraph, Vec<ConnectionInstance>) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let node = |i: usize| Iri::new(format!("http://example.org/n{i}")).unwrap();
    let triples: Vec<Triple> = (0..1600)
        .map(|_| {
            let p = Iri::new(format!("http://example.org/p{}", rng.random_range(0..4))).unwrap();
            Triple::new(node(rng.random_range(0..400)), p, node(rng.random_range(0..400)))
        })
        .collect();
    let kg = KnowledgeGraph::from_triples(triples, GraphOptions::default());
    let candidates = (0..256)
        .map(|i| ConnectionInstance {
            entity1_id: node(i),
            entity2_id: node(399 - i % 200),
            relationship_type: format!("t{}", i % 5),
            relevant_metadata: Default::default(),
            explanation_text: format!("synthetic pair {i}"),
        })
        .collect();
    (kg, candidates)
}

fn scoring_synthetic(c: &mut Criterion) {
    let (kg, candidates) = synthetic();
    let embedder = LocalEmbedder::new(256);
    let user = UserContext { interests: vec!["random graphs".into()], ..Default::default() };
    let limits = PathLimits::new(3, 1000).unwrap();
    let mut group = c.benchmark_group("score_candidates_synthetic");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| score_candidates(&kg, black_box(&candidates), &user, &embedder, 0.5, &limits, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, discovery, scoring, scoring_synthetic);
criterion_main!(benches);
