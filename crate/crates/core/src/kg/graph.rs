use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::ntriples::parse_ntriples;
use super::term::{Iri, Term, Triple};
use super::KgError;

pub const RDFS_LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";
pub const WDT_INSTANCE_OF: &str = "http://www.wikidata.org/prop/direct/P31";
pub const WDT_OCCUPATION: &str = "http://www.wikidata.org/prop/direct/P106";

/// Dense id of a term inside one graph snapshot. Ids follow canonical term order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub(crate) u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeDirection {
    Out,
    In,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Out,
    In,
    Both,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Neighbor {
    pub node: Iri,
    pub predicate: Iri,
    pub direction: EdgeDirection,
}

/// Label and descriptor conventions of a graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphOptions {
    pub label_predicate: Iri,
    /// Predicates whose objects describe an entity (type, occupation).
    pub descriptor_predicates: Vec<Iri>,
    pub max_descriptor_facts: usize,
    pub preferred_lang: String,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions {
            label_predicate: Iri::new(RDFS_LABEL).expect("static iri"),
            descriptor_predicates: vec![
                Iri::new(WDT_INSTANCE_OF).expect("static iri"),
                Iri::new(WDT_OCCUPATION).expect("static iri"),
            ],
            max_descriptor_facts: 3,
            preferred_lang: "en".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityDescriptor {
    pub id: Iri,
    pub label: String,
    pub description: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub triples: usize,
    pub entities: usize,
    pub predicates: usize,
}

type IdTriple = [u32; 3];

/// Immutable, indexed set of triples.
///
/// Terms are interned in canonical order, so sorting by id is sorting by
/// serialized text. Three sorted permutations (SPO, POS, OSP) answer every
/// bound/unbound mask with a prefix range scan.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    terms: Vec<Term>,
    ids: HashMap<Term, u32>,
    triples: Vec<Triple>,
    spo: Vec<IdTriple>,
    pos: Vec<IdTriple>,
    osp: Vec<IdTriple>,
    // Entity-to-entity edges only; literal objects are not traversable.
    out_edges: Vec<Vec<(u32, u32)>>,
    in_edges: Vec<Vec<(u32, u32)>>,
    both_edges: Vec<Vec<(u32, u32, EdgeDirection)>>,
    entities: Vec<u32>,
    labels: BTreeMap<Iri, String>,
    options: GraphOptions,
}

impl Default for KnowledgeGraph {
    fn default() -> Self {
        KnowledgeGraph::from_triples(Vec::new(), GraphOptions::default())
    }
}

impl KnowledgeGraph {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn load_ntriples<R: BufRead>(source: R, options: GraphOptions) -> Result<Self, KgError> {
        Ok(Self::from_triples(parse_ntriples(source)?, options))
    }

    pub fn load_ntriples_str(source: &str) -> Result<Self, KgError> {
        Self::load_ntriples(source.as_bytes(), GraphOptions::default())
    }

    pub fn from_triples(triples: impl IntoIterator<Item = Triple>, options: GraphOptions) -> Self {
        let set: BTreeSet<Triple> = triples.into_iter().collect();
        let mut term_set: BTreeSet<Term> = BTreeSet::new();
        for t in &set {
            term_set.insert(Term::iri(t.subject.clone()));
            term_set.insert(Term::iri(t.predicate.clone()));
            term_set.insert(t.object.clone());
        }
        let terms: Vec<Term> = term_set.into_iter().collect();
        let ids: HashMap<Term, u32> = terms.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        let id_of_iri = |iri: &Iri| ids[&Term::iri(iri.clone())];

        let triples: Vec<Triple> = set.into_iter().collect();
        let spo: Vec<IdTriple> =
            triples.iter().map(|t| [id_of_iri(&t.subject), id_of_iri(&t.predicate), ids[&t.object]]).collect();
        let mut pos: Vec<IdTriple> = spo.iter().map(|&[s, p, o]| [p, o, s]).collect();
        pos.sort_unstable();
        let mut osp: Vec<IdTriple> = spo.iter().map(|&[s, p, o]| [o, s, p]).collect();
        osp.sort_unstable();

        let n = terms.len();
        let mut out_edges = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        let mut is_entity = vec![false; n];
        for (&[s, p, o], t) in spo.iter().zip(&triples) {
            is_entity[s as usize] = true;
            if t.object.as_iri().is_some() {
                is_entity[o as usize] = true;
                out_edges[s as usize].push((o, p));
                in_edges[o as usize].push((s, p));
            }
        }
        let mut both_edges = vec![Vec::new(); n];
        for i in 0..n {
            out_edges[i].sort_unstable();
            in_edges[i].sort_unstable();
            let mut both: Vec<(u32, u32, EdgeDirection)> = out_edges[i]
                .iter()
                .map(|&(nb, p)| (nb, p, EdgeDirection::Out))
                .chain(in_edges[i].iter().map(|&(nb, p)| (nb, p, EdgeDirection::In)))
                .collect();
            both.sort_unstable();
            both_edges[i] = both;
        }
        let entities = (0..n as u32).filter(|&i| is_entity[i as usize]).collect();

        let mut graph = KnowledgeGraph {
            terms,
            ids,
            triples,
            spo,
            pos,
            osp,
            out_edges,
            in_edges,
            both_edges,
            entities,
            labels: BTreeMap::new(),
            options,
        };
        graph.labels = graph.collect_labels();
        graph
    }

    fn collect_labels(&self) -> BTreeMap<Iri, String> {
        let mut labels = BTreeMap::new();
        let Some(label_pred) = self.id_of(&Term::iri(self.options.label_predicate.clone())) else {
            return labels;
        };
        let preferred = self.options.preferred_lang.as_str();
        let rank = |lang: Option<&str>| match lang {
            Some(l) if l.eq_ignore_ascii_case(preferred) => 0,
            None => 1,
            Some(_) => 2,
        };
        let mut best: BTreeMap<u32, (u8, u32)> = BTreeMap::new();
        for &[p, o, s] in self.range(&self.pos, &[label_pred]) {
            let Some(lit) = self.terms[o as usize].as_literal() else { continue };
            let r = rank(lit.lang.as_deref());
            let entry = best.entry(s).or_insert((r, o));
            if (r, o) < *entry {
                *entry = (r, o);
            }
            debug_assert_eq!(p, label_pred);
        }
        for (s, (_, o)) in best {
            let subject = self.terms[s as usize].as_iri().expect("subjects are iris").clone();
            let lexical = self.terms[o as usize].as_literal().expect("checked above").lexical.clone();
            labels.insert(subject, lexical);
        }
        labels
    }

    pub fn options(&self) -> &GraphOptions {
        &self.options
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// All triples in canonical order.
    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn stats(&self) -> GraphStats {
        let predicates = {
            let mut ps: Vec<u32> = self.spo.iter().map(|t| t[1]).collect();
            ps.sort_unstable();
            ps.dedup();
            ps.len()
        };
        GraphStats { triples: self.triples.len(), entities: self.entities.len(), predicates }
    }

    /// Subjects and IRI objects, in canonical order.
    pub fn entities(&self) -> impl Iterator<Item = &Iri> + '_ {
        self.entities.iter().filter_map(|&i| self.terms[i as usize].as_iri())
    }

    pub fn labels(&self) -> &BTreeMap<Iri, String> {
        &self.labels
    }

    pub fn contains_entity(&self, iri: &Iri) -> bool {
        self.node(iri).is_some_and(|id| self.entities.binary_search(&id.0).is_ok())
    }

    /// Preferred label, falling back to the IRI's local name.
    pub fn label(&self, iri: &Iri) -> String {
        self.labels.get(iri).cloned().unwrap_or_else(|| iri.local_name().to_string())
    }

    /// Human-readable text for any term: labels for IRIs, lexical form for literals.
    pub fn display(&self, term: &Term) -> String {
        match term {
            Term::Iri { value } => self.label(value),
            Term::Literal { value } => value.lexical.clone(),
        }
    }

    /// Display form of a serialized term; unparsable text is returned as is.
    pub fn display_canonical(&self, canonical: &str) -> String {
        match Term::parse(canonical) {
            Ok(term) => self.display(&term),
            Err(_) => canonical.to_string(),
        }
    }

    pub fn entity_descriptor(&self, iri: &Iri) -> EntityDescriptor {
        let label = self.label(iri);
        let mut facts: Vec<String> = Vec::new();
        if let Some(subject) = self.node(iri) {
            'outer: for pred in &self.options.descriptor_predicates {
                let Some(p) = self.id_of(&Term::iri(pred.clone())) else { continue };
                for &[_, _, o] in self.range(&self.spo, &[subject.0, p]) {
                    if facts.len() >= self.options.max_descriptor_facts {
                        break 'outer;
                    }
                    let text = self.display(&self.terms[o as usize]);
                    if !text.is_empty() && !facts.contains(&text) {
                        facts.push(text);
                    }
                }
            }
        }
        let description = if facts.is_empty() { label.clone() } else { format!("{label} ({})", facts.join(", ")) };
        EntityDescriptor { id: iri.clone(), label, description }
    }

    /// Triples matching every bound position, in canonical (s, p, o) order.
    pub fn lookup(&self, s: Option<&Iri>, p: Option<&Iri>, o: Option<&Term>) -> Vec<Triple> {
        let resolve = |t: Option<Term>| -> Result<Option<u32>, ()> {
            match t {
                None => Ok(None),
                Some(t) => self.id_of(&t).map(Some).ok_or(()),
            }
        };
        let (Ok(s), Ok(p), Ok(o)) =
            (resolve(s.cloned().map(Term::iri)), resolve(p.cloned().map(Term::iri)), resolve(o.cloned()))
        else {
            return Vec::new();
        };
        let mut hits = self.match_ids(s, p, o);
        hits.sort_unstable();
        hits.into_iter().map(|t| self.triple_of(t)).collect()
    }

    pub(crate) fn triple_of(&self, [s, p, o]: IdTriple) -> Triple {
        Triple {
            subject: self.terms[s as usize].as_iri().expect("subject iri").clone(),
            predicate: self.terms[p as usize].as_iri().expect("predicate iri").clone(),
            object: self.terms[o as usize].clone(),
        }
    }

    /// Id-level lookup, results as (s, p, o) in index order (not necessarily sorted).
    pub(crate) fn match_ids(&self, s: Option<u32>, p: Option<u32>, o: Option<u32>) -> Vec<IdTriple> {
        match (s, p, o) {
            (Some(s), Some(p), Some(o)) => {
                let key = [s, p, o];
                if self.spo.binary_search(&key).is_ok() {
                    vec![key]
                } else {
                    Vec::new()
                }
            }
            (Some(s), Some(p), None) => self.range(&self.spo, &[s, p]).to_vec(),
            (Some(s), None, Some(o)) => self.range(&self.osp, &[o, s]).iter().map(|&[o, s, p]| [s, p, o]).collect(),
            (Some(s), None, None) => self.range(&self.spo, &[s]).to_vec(),
            (None, Some(p), Some(o)) => self.range(&self.pos, &[p, o]).iter().map(|&[p, o, s]| [s, p, o]).collect(),
            (None, Some(p), None) => self.range(&self.pos, &[p]).iter().map(|&[p, o, s]| [s, p, o]).collect(),
            (None, None, Some(o)) => self.range(&self.osp, &[o]).iter().map(|&[o, s, p]| [s, p, o]).collect(),
            (None, None, None) => self.spo.clone(),
        }
    }

    /// Number of triples matching a mask, without materializing them.
    pub(crate) fn count_ids(&self, s: Option<u32>, p: Option<u32>, o: Option<u32>) -> usize {
        match (s, p, o) {
            (Some(_), Some(_), Some(_)) => self.match_ids(s, p, o).len(),
            (Some(s), Some(p), None) => self.range(&self.spo, &[s, p]).len(),
            (Some(s), None, Some(o)) => self.range(&self.osp, &[o, s]).len(),
            (Some(s), None, None) => self.range(&self.spo, &[s]).len(),
            (None, Some(p), Some(o)) => self.range(&self.pos, &[p, o]).len(),
            (None, Some(p), None) => self.range(&self.pos, &[p]).len(),
            (None, None, Some(o)) => self.range(&self.osp, &[o]).len(),
            (None, None, None) => self.spo.len(),
        }
    }

    fn range<'a>(&self, index: &'a [IdTriple], prefix: &[u32]) -> &'a [IdTriple] {
        let k = prefix.len();
        let lo = index.partition_point(|t| t[..k] < *prefix);
        let hi = index.partition_point(|t| t[..k] <= *prefix);
        &index[lo..hi]
    }

    pub fn neighbors(&self, e: &Iri, direction: Direction) -> Vec<Neighbor> {
        let Some(id) = self.node(e) else { return Vec::new() };
        self.adjacent(id, direction)
            .map(|(nb, p, dir)| Neighbor {
                node: self.iri(nb).clone(),
                predicate: self.iri(NodeId(p)).clone(),
                direction: dir,
            })
            .collect()
    }

    /// Entity adjacency in canonical (neighbor, predicate, direction) order.
    pub(crate) fn adjacent(
        &self,
        node: NodeId,
        direction: Direction,
    ) -> Box<dyn Iterator<Item = (NodeId, u32, EdgeDirection)> + '_> {
        let i = node.index();
        match direction {
            Direction::Out => Box::new(self.out_edges[i].iter().map(|&(nb, p)| (NodeId(nb), p, EdgeDirection::Out))),
            Direction::In => Box::new(self.in_edges[i].iter().map(|&(nb, p)| (NodeId(nb), p, EdgeDirection::In))),
            Direction::Both => Box::new(self.both_edges[i].iter().map(|&(nb, p, d)| (NodeId(nb), p, d))),
        }
    }

    pub(crate) fn adjacent_slice(&self, node: NodeId) -> &[(u32, u32, EdgeDirection)] {
        &self.both_edges[node.index()]
    }

    pub(crate) fn out_slice(&self, node: NodeId) -> &[(u32, u32)] {
        &self.out_edges[node.index()]
    }

    pub(crate) fn in_slice(&self, node: NodeId) -> &[(u32, u32)] {
        &self.in_edges[node.index()]
    }

    pub fn node(&self, iri: &Iri) -> Option<NodeId> {
        self.id_of(&Term::iri(iri.clone())).map(NodeId)
    }

    pub(crate) fn id_of(&self, term: &Term) -> Option<u32> {
        self.ids.get(term).copied()
    }

    pub(crate) fn term(&self, id: u32) -> &Term {
        &self.terms[id as usize]
    }

    pub fn iri(&self, id: NodeId) -> &Iri {
        self.terms[id.index()].as_iri().expect("node ids refer to iris")
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Case-insensitive substring search over labels and IRIs.
    pub fn search(&self, query: &str, limit: usize) -> Vec<(Iri, String)> {
        let needle = query.to_lowercase();
        let mut hits: Vec<(Iri, String)> = self
            .entities()
            .filter_map(|iri| {
                let label = self.label(iri);
                let hit = label.to_lowercase().contains(&needle) || iri.as_str().to_lowercase().contains(&needle);
                hit.then(|| (iri.clone(), label))
            })
            .collect();
        hits.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        hits.truncate(limit);
        hits
    }
}
