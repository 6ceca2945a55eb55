//! Simple-path enumeration, path-based semantic relatedness, and shortest paths.
//!
//! Only entity-to-entity edges are walked; literal objects are never part of
//! a path. In [`Traversal::Undirected`] mode every triple can be walked in
//! either direction and the direction taken is recorded on the edge.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{Direction, EdgeDirection, Iri, KnowledgeGraph, NodeId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("relatedness is undefined between {0} and itself")]
    IdenticalEndpoints(Iri),
    #[error("invalid path limits: {0}")]
    InvalidLimits(&'static str),
    #[error("edge weight for {predicate} must be positive and finite, got {weight}")]
    NonPositiveWeight { predicate: Iri, weight: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Traversal {
    #[default]
    Undirected,
    Directed,
}

impl Traversal {
    /// Neighbor direction used when expanding a node.
    pub fn direction(self) -> Direction {
        match self {
            Traversal::Undirected => Direction::Both,
            Traversal::Directed => Direction::Out,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathLimits {
    pub max_depth: usize,
    pub max_paths: usize,
    pub traversal: Traversal,
}

impl Default for PathLimits {
    fn default() -> Self {
        PathLimits { max_depth: 4, max_paths: 1000, traversal: Traversal::Undirected }
    }
}

impl PathLimits {
    pub fn new(max_depth: usize, max_paths: usize) -> Result<Self, PathError> {
        let limits = PathLimits { max_depth, max_paths, ..Default::default() };
        limits.validate()?;
        Ok(limits)
    }

    /// Limits that never truncate on a graph of `nodes` entities.
    pub fn exhaustive(nodes: usize) -> Self {
        PathLimits { max_depth: nodes.max(1), max_paths: usize::MAX, traversal: Traversal::Undirected }
    }

    pub fn with_traversal(mut self, traversal: Traversal) -> Self {
        self.traversal = traversal;
        self
    }

    pub fn validate(&self) -> Result<(), PathError> {
        if self.max_depth == 0 {
            return Err(PathError::InvalidLimits("max_depth must be at least 1"));
        }
        if self.max_paths == 0 {
            return Err(PathError::InvalidLimits("max_paths must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathEdge {
    pub predicate: Iri,
    pub direction: EdgeDirection,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Path {
    pub nodes: Vec<Iri>,
    pub edges: Vec<PathEdge>,
}

impl Path {
    /// Edge count.
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PathSet {
    pub paths: Vec<Path>,
    pub truncated: bool,
}

type IdEdge = (u32, EdgeDirection);

fn edges_from(
    kg: &KnowledgeGraph,
    node: NodeId,
    traversal: Traversal,
) -> impl Iterator<Item = (NodeId, u32, EdgeDirection)> + '_ {
    let (both, out): (&[_], &[_]) = match traversal {
        Traversal::Undirected => (kg.adjacent_slice(node), &[]),
        Traversal::Directed => (&[], kg.out_slice(node)),
    };
    both.iter()
        .map(|&(nb, p, d)| (NodeId(nb), p, d))
        .chain(out.iter().map(|&(nb, p)| (NodeId(nb), p, EdgeDirection::Out)))
}

/// Hop distance from every node to `target` along the traversal direction.
fn distances_to(kg: &KnowledgeGraph, target: NodeId, traversal: Traversal) -> Vec<usize> {
    let mut dist = vec![usize::MAX; kg.term_count()];
    dist[target.index()] = 0;
    let mut queue = VecDeque::from([target]);
    while let Some(n) = queue.pop_front() {
        let d = dist[n.index()];
        let preds: Box<dyn Iterator<Item = u32>> = match traversal {
            Traversal::Undirected => Box::new(kg.adjacent_slice(n).iter().map(|e| e.0)),
            Traversal::Directed => Box::new(kg.in_slice(n).iter().map(|e| e.0)),
        };
        for nb in preds {
            if dist[nb as usize] == usize::MAX {
                dist[nb as usize] = d + 1;
                queue.push_back(NodeId(nb));
            }
        }
    }
    dist
}

struct Walker<'a, F> {
    kg: &'a KnowledgeGraph,
    target: NodeId,
    traversal: Traversal,
    dist: Vec<usize>,
    on_path: Vec<bool>,
    nodes: Vec<u32>,
    edges: Vec<IdEdge>,
    found: usize,
    cap: usize,
    visit: F,
}

impl<F: FnMut(&[u32], &[IdEdge])> Walker<'_, F> {
    /// Depth-first walk emitting paths of exactly `remaining` more edges.
    /// Returns false once the cap has been exceeded.
    fn walk(&mut self, node: NodeId, remaining: usize) -> bool {
        for (nb, p, dir) in edges_from(self.kg, node, self.traversal) {
            let i = nb.index();
            if self.on_path[i] || self.dist[i] > remaining - 1 {
                continue;
            }
            if nb == self.target {
                if remaining != 1 {
                    continue;
                }
                if self.found == self.cap {
                    return false;
                }
                self.found += 1;
                self.nodes.push(nb.0);
                self.edges.push((p, dir));
                (self.visit)(&self.nodes, &self.edges);
                self.nodes.pop();
                self.edges.pop();
                continue;
            }
            if remaining == 1 {
                continue;
            }
            self.on_path[i] = true;
            self.nodes.push(nb.0);
            self.edges.push((p, dir));
            let keep_going = self.walk(nb, remaining - 1);
            self.nodes.pop();
            self.edges.pop();
            self.on_path[i] = false;
            if !keep_going {
                return false;
            }
        }
        true
    }
}

/// Enumerate simple paths shortest-first (depth-first within each length),
/// calling `visit` for each. Returns whether the path cap was exceeded.
fn walk_paths<F>(kg: &KnowledgeGraph, src: NodeId, dst: NodeId, limits: &PathLimits, visit: F) -> bool
where
    F: FnMut(&[u32], &[IdEdge]),
{
    let dist = distances_to(kg, dst, limits.traversal);
    let mut on_path = vec![false; kg.term_count()];
    on_path[src.index()] = true;
    let mut w = Walker {
        kg,
        target: dst,
        traversal: limits.traversal,
        dist,
        on_path,
        nodes: vec![src.0],
        edges: Vec::new(),
        found: 0,
        cap: limits.max_paths,
        visit,
    };
    let shortest = w.dist[src.index()];
    if shortest == usize::MAX {
        return false;
    }
    for length in shortest.max(1)..=limits.max_depth {
        if !w.walk(src, length) {
            return true;
        }
    }
    false
}

fn resolve_endpoints(
    kg: &KnowledgeGraph,
    e1: &Iri,
    e2: &Iri,
    limits: &PathLimits,
) -> Result<Option<(NodeId, NodeId)>, PathError> {
    limits.validate()?;
    if e1 == e2 {
        return Err(PathError::IdenticalEndpoints(e1.clone()));
    }
    Ok(kg.node(e1).zip(kg.node(e2)))
}

fn materialize(kg: &KnowledgeGraph, nodes: &[u32], edges: &[IdEdge]) -> Path {
    Path {
        nodes: nodes.iter().map(|&n| kg.iri(NodeId(n)).clone()).collect(),
        edges: edges
            .iter()
            .map(|&(p, direction)| PathEdge { predicate: kg.iri(NodeId(p)).clone(), direction })
            .collect(),
    }
}

/// All simple paths between `e1` and `e2` of at most `max_depth` edges.
///
/// Paths come shortest first, in depth-first canonical-neighbor order within
/// each length. When more than `max_paths` exist, the first `max_paths` in
/// that order are kept and `truncated` is set.
pub fn enumerate_simple_paths(
    kg: &KnowledgeGraph,
    e1: &Iri,
    e2: &Iri,
    limits: &PathLimits,
) -> Result<PathSet, PathError> {
    let Some((src, dst)) = resolve_endpoints(kg, e1, e2, limits)? else {
        return Ok(PathSet::default());
    };
    let mut paths = Vec::new();
    let truncated = walk_paths(kg, src, dst, limits, |nodes, edges| paths.push(materialize(kg, nodes, edges)));
    Ok(PathSet { paths, truncated })
}

/// `(1 / (|P| + 1)) * Σ 1/dist(p)` over the bounded simple-path set.
pub fn semantic_relatedness(kg: &KnowledgeGraph, e1: &Iri, e2: &Iri, limits: &PathLimits) -> Result<f64, PathError> {
    let Some((src, dst)) = resolve_endpoints(kg, e1, e2, limits)? else {
        return Ok(0.0);
    };
    let mut count = 0usize;
    let mut sum = 0.0f64;
    walk_paths(kg, src, dst, limits, |_, edges| {
        count += 1;
        sum += 1.0 / edges.len() as f64;
    });
    Ok(relatedness_from_lengths_sum(count, sum))
}

pub(crate) fn relatedness_from_lengths_sum(count: usize, inverse_length_sum: f64) -> f64 {
    inverse_length_sum / (count as f64 + 1.0)
}

/// SR computed from an explicit list of path lengths.
pub fn relatedness_from_lengths(lengths: &[usize]) -> f64 {
    let sum: f64 = lengths.iter().map(|&l| 1.0 / l as f64).sum();
    relatedness_from_lengths_sum(lengths.len(), sum)
}

/// Minimum-hop path; ties go to the canonically smallest neighbor.
/// `None` when disconnected or when `e1 == e2`.
pub fn shortest_path_bfs(kg: &KnowledgeGraph, e1: &Iri, e2: &Iri, traversal: Traversal) -> Option<Path> {
    let (src, dst) = kg.node(e1).zip(kg.node(e2))?;
    if src == dst {
        return None;
    }
    let mut parent: Vec<Option<(u32, u32, EdgeDirection)>> = vec![None; kg.term_count()];
    let mut seen = vec![false; kg.term_count()];
    seen[src.index()] = true;
    let mut queue = VecDeque::from([src]);
    while let Some(n) = queue.pop_front() {
        for (nb, p, dir) in edges_from(kg, n, traversal) {
            if seen[nb.index()] {
                continue;
            }
            seen[nb.index()] = true;
            parent[nb.index()] = Some((n.0, p, dir));
            if nb == dst {
                return Some(trace(kg, &parent, src, dst));
            }
            queue.push_back(nb);
        }
    }
    None
}

fn trace(kg: &KnowledgeGraph, parent: &[Option<(u32, u32, EdgeDirection)>], src: NodeId, dst: NodeId) -> Path {
    let mut nodes = vec![dst.0];
    let mut edges = Vec::new();
    let mut cur = dst.0;
    while cur != src.0 {
        let (prev, p, dir) = parent[cur as usize].expect("reached nodes have parents");
        edges.push((p, dir));
        nodes.push(prev);
        cur = prev;
    }
    nodes.reverse();
    edges.reverse();
    materialize(kg, &nodes, &edges)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Frontier {
    cost: f64,
    node: u32,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed for a min-heap; ties pop the smaller node id first.
        other.cost.total_cmp(&self.cost).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Minimum total-weight path. Every predicate in the graph must map to a
/// positive, finite weight.
pub fn shortest_path_dijkstra<W>(
    kg: &KnowledgeGraph,
    e1: &Iri,
    e2: &Iri,
    traversal: Traversal,
    weight: W,
) -> Result<Option<Path>, PathError>
where
    W: Fn(&Iri) -> f64,
{
    let mut weights: Vec<f64> = vec![f64::NAN; kg.term_count()];
    let mut predicates: Vec<u32> = kg.triples().iter().filter_map(|t| kg.node(&t.predicate).map(|n| n.0)).collect();
    predicates.sort_unstable();
    predicates.dedup();
    for p in predicates {
        let iri = kg.iri(NodeId(p));
        let w = weight(iri);
        if !(w.is_finite() && w > 0.0) {
            return Err(PathError::NonPositiveWeight { predicate: iri.clone(), weight: w });
        }
        weights[p as usize] = w;
    }

    let Some((src, dst)) = kg.node(e1).zip(kg.node(e2)) else { return Ok(None) };
    if src == dst {
        return Ok(None);
    }
    let mut best = vec![f64::INFINITY; kg.term_count()];
    let mut parent: Vec<Option<(u32, u32, EdgeDirection)>> = vec![None; kg.term_count()];
    let mut done = vec![false; kg.term_count()];
    best[src.index()] = 0.0;
    let mut heap = BinaryHeap::from([Frontier { cost: 0.0, node: src.0 }]);
    while let Some(Frontier { cost, node }) = heap.pop() {
        if done[node as usize] {
            continue;
        }
        done[node as usize] = true;
        if node == dst.0 {
            return Ok(Some(trace(kg, &parent, src, dst)));
        }
        for (nb, p, dir) in edges_from(kg, NodeId(node), traversal) {
            let next = cost + weights[p as usize];
            if next < best[nb.index()] {
                best[nb.index()] = next;
                parent[nb.index()] = Some((node, p, dir));
                heap.push(Frontier { cost: next, node: nb.0 });
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iri(s: &str) -> Iri {
        Iri::new(s).unwrap()
    }

    fn triangle() -> KnowledgeGraph {
        KnowledgeGraph::load_ntriples_str("<a> <p> <b> .\n<b> <p> <c> .\n<a> <p> <c> .").unwrap()
    }

    #[test]
    fn triangle_has_two_paths() {
        let set = enumerate_simple_paths(&triangle(), &iri("a"), &iri("c"), &PathLimits::default()).unwrap();
        assert!(!set.truncated);
        let shapes: Vec<Vec<&str>> = set.paths.iter().map(|p| p.nodes.iter().map(Iri::as_str).collect()).collect();
        assert_eq!(shapes, vec![vec!["a", "c"], vec!["a", "b", "c"]]);
    }

    #[test]
    fn directed_mode_respects_edge_direction() {
        let limits = PathLimits::default().with_traversal(Traversal::Directed);
        let set = enumerate_simple_paths(&triangle(), &iri("c"), &iri("a"), &limits).unwrap();
        assert!(set.paths.is_empty());
        let set = enumerate_simple_paths(&triangle(), &iri("a"), &iri("c"), &limits).unwrap();
        assert_eq!(set.paths.len(), 2);
    }

    #[test]
    fn reverse_edges_record_direction() {
        let set = enumerate_simple_paths(&triangle(), &iri("c"), &iri("a"), &PathLimits::default()).unwrap();
        assert_eq!(set.paths[0].edges[0].direction, EdgeDirection::In);
    }

    #[test]
    fn disconnected_is_empty_and_zero() {
        let kg = KnowledgeGraph::load_ntriples_str("<a> <p> <b> .\n<c> <p> <d> .").unwrap();
        let set = enumerate_simple_paths(&kg, &iri("a"), &iri("d"), &PathLimits::default()).unwrap();
        assert_eq!(set, PathSet::default());
        assert_eq!(semantic_relatedness(&kg, &iri("a"), &iri("d"), &PathLimits::default()).unwrap(), 0.0);
        assert_eq!(semantic_relatedness(&kg, &iri("a"), &iri("zz"), &PathLimits::default()).unwrap(), 0.0);
    }

    #[test]
    fn identical_endpoints_are_an_error() {
        let err = semantic_relatedness(&triangle(), &iri("a"), &iri("a"), &PathLimits::default()).unwrap_err();
        assert_eq!(err, PathError::IdenticalEndpoints(iri("a")));
        assert!(enumerate_simple_paths(&triangle(), &iri("a"), &iri("a"), &PathLimits::default()).is_err());
    }

    #[test]
    fn single_edge_gives_one_half() {
        let kg = KnowledgeGraph::load_ntriples_str("<a> <p> <b> .").unwrap();
        assert_eq!(semantic_relatedness(&kg, &iri("a"), &iri("b"), &PathLimits::default()).unwrap(), 0.5);
    }

    #[test]
    fn truncation_keeps_shortest() {
        // Three parallel 1-hop edges plus one 2-hop route.
        let kg = KnowledgeGraph::load_ntriples_str(
            "<a> <p> <b> .\n<a> <q> <b> .\n<a> <r> <b> .\n<a> <p> <m> .\n<m> <p> <b> .",
        )
        .unwrap();
        let limits = PathLimits::new(4, 3).unwrap();
        let set = enumerate_simple_paths(&kg, &iri("a"), &iri("b"), &limits).unwrap();
        assert!(set.truncated);
        assert_eq!(set.paths.len(), 3);
        assert!(set.paths.iter().all(|p| p.len() == 1));
        let exact = PathLimits::new(4, 4).unwrap();
        let set = enumerate_simple_paths(&kg, &iri("a"), &iri("b"), &exact).unwrap();
        assert!(!set.truncated);
        assert_eq!(set.paths.len(), 4);
    }

    #[test]
    fn invalid_limits() {
        assert!(PathLimits::new(0, 10).is_err());
        assert!(PathLimits::new(3, 0).is_err());
    }

    #[test]
    fn literal_objects_not_traversed() {
        let kg = KnowledgeGraph::load_ntriples_str("<a> <p> \"x\" .\n<b> <p> \"x\" .").unwrap();
        assert_eq!(semantic_relatedness(&kg, &iri("a"), &iri("b"), &PathLimits::default()).unwrap(), 0.0);
    }

    #[test]
    fn bfs_and_dijkstra_basics() {
        let kg = triangle();
        let p = shortest_path_bfs(&kg, &iri("a"), &iri("c"), Traversal::Undirected).unwrap();
        assert_eq!(p.len(), 1);
        assert!(shortest_path_bfs(&kg, &iri("a"), &iri("a"), Traversal::Undirected).is_none());
        let weighted = |_: &Iri| 1.0;
        let d = shortest_path_dijkstra(&kg, &iri("a"), &iri("c"), Traversal::Undirected, weighted).unwrap().unwrap();
        assert_eq!(d.len(), 1);
        let err = shortest_path_dijkstra(&kg, &iri("a"), &iri("c"), Traversal::Undirected, |_| 0.0).unwrap_err();
        assert!(matches!(err, PathError::NonPositiveWeight { .. }));
    }

    #[test]
    fn dijkstra_prefers_cheaper_longer_route() {
        let kg = KnowledgeGraph::load_ntriples_str(
            "<a> <expensive> <d> .\n<a> <cheap> <b> .\n<b> <cheap> <c> .\n<c> <cheap> <d> .",
        )
        .unwrap();
        let w = |p: &Iri| if p.as_str() == "expensive" { 10.0 } else { 1.0 };
        let path = shortest_path_dijkstra(&kg, &iri("a"), &iri("d"), Traversal::Undirected, w).unwrap().unwrap();
        assert_eq!(path.len(), 3);
        assert!(shortest_path_dijkstra(&kg, &iri("a"), &iri("zz"), Traversal::Undirected, w).unwrap().is_none());
    }
}
