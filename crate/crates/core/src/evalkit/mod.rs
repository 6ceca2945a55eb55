//! Retrieval, text-quality, correlation and diversity metrics.

mod metrics;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::PATH_RELATIONSHIP;
use crate::kg::Iri;
use crate::pattern::ConnectionInstance;
use crate::text::tokenize;

pub use metrics::{
    average_ranks, bleu, diversity, lcs_len, meteor_alignment, meteor_from_alignment, meteor_lite, rouge_l, spearman,
    Alignment, Diversity, BLEU_EPSILON, BLEU_MAX_N, ROUGE_BETA,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("constant input has no rank correlation")]
    ConstantInput,
    #[error("non-finite value in input")]
    NonFinite,
    #[error("the gold standard is empty")]
    EmptyGold,
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

/// Entity pair in a fixed order, plus the relationship type.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GoldKey {
    pub entity_a: Iri,
    pub entity_b: Iri,
    pub relationship_type: String,
}

impl GoldKey {
    pub fn new(e1: &Iri, e2: &Iri, relationship_type: &str) -> Self {
        let (a, b) = if e1.as_str() <= e2.as_str() { (e1, e2) } else { (e2, e1) };
        GoldKey { entity_a: a.clone(), entity_b: b.clone(), relationship_type: relationship_type.to_string() }
    }

    pub fn of(conn: &ConnectionInstance) -> Self {
        GoldKey::new(&conn.entity1_id, &conn.entity2_id, &conn.relationship_type)
    }

    pub fn same_pair(&self, other: &GoldKey) -> bool {
        self.entity_a == other.entity_a && self.entity_b == other.entity_b
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GoldStandard {
    entries: BTreeSet<GoldKey>,
    seeds: BTreeSet<Iri>,
    references: BTreeMap<GoldKey, Vec<String>>,
}

impl GoldStandard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: GoldKey, reference: Option<String>) {
        if let Some(r) = reference.filter(|r| !r.trim().is_empty()) {
            self.references.entry(key.clone()).or_default().push(r);
        }
        self.entries.insert(key);
    }

    /// Entities written in the first column of the gold file.
    pub fn seeds(&self) -> &BTreeSet<Iri> {
        &self.seeds
    }

    pub fn entries(&self) -> &BTreeSet<GoldKey> {
        &self.entries
    }

    pub fn references(&self, key: &GoldKey) -> &[String] {
        self.references.get(key).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Gold entries a retrieved key counts as. A `path` connection carries no
    /// typed relation, so it matches every gold entry on the same pair.
    pub fn matches(&self, key: &GoldKey) -> Vec<&GoldKey> {
        if key.relationship_type == PATH_RELATIONSHIP {
            let lo = GoldKey { relationship_type: String::new(), ..key.clone() };
            self.entries.range(lo..).take_while(|g| g.same_pair(key)).collect()
        } else {
            self.entries.get(key).into_iter().collect()
        }
    }

    /// Lines of `<e1> <e2> type<TAB>reference`. Repeated keys add references.
    pub fn parse(source: &str) -> Result<Self, EvalError> {
        let mut gold = GoldStandard::new();
        for (idx, raw) in source.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
                continue;
            }
            let (head, reference) = match raw.split_once('\t') {
                Some((h, r)) => (h, Some(r.trim().to_string())),
                None => (raw, None),
            };
            let (e1, e2, ty) = parse_triple_key(head).map_err(|message| EvalError::Syntax { line, message })?;
            gold.seeds.insert(e1.clone());
            gold.insert(GoldKey::new(&e1, &e2, &ty), reference);
        }
        Ok(gold)
    }
}

fn parse_bracketed(token: &str) -> Result<Iri, String> {
    let inner = token
        .strip_prefix('<')
        .and_then(|t| t.strip_suffix('>'))
        .ok_or_else(|| format!("expected <iri>, found {token:?}"))?;
    Iri::new(inner).map_err(|e| e.to_string())
}

fn parse_triple_key(head: &str) -> Result<(Iri, Iri, String), String> {
    let fields: Vec<&str> = head.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(format!("expected `<entity1> <entity2> type`, found {} fields", fields.len()));
    }
    Ok((parse_bracketed(fields[0])?, parse_bracketed(fields[1])?, fields[2].to_string()))
}

/// `<e1> <e2> type`, shared by the gold and ratings files.
pub fn parse_key(head: &str) -> Result<GoldKey, String> {
    let (e1, e2, ty) = parse_triple_key(head)?;
    Ok(GoldKey::new(&e1, &e2, &ty))
}

/// Lines of `<e1> <e2> type<TAB>rating`.
pub fn parse_ratings(source: &str) -> Result<BTreeMap<GoldKey, f64>, EvalError> {
    let mut out = BTreeMap::new();
    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let syntax = |message: String| EvalError::Syntax { line, message };
        if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
            continue;
        }
        let (head, value) = raw.split_once('\t').ok_or_else(|| syntax("missing tab before rating".into()))?;
        let key = parse_key(head).map_err(syntax)?;
        let rating: f64 = value.trim().parse().map_err(|_| syntax(format!("invalid rating {:?}", value.trim())))?;
        if !rating.is_finite() {
            return Err(syntax("rating must be finite".into()));
        }
        if out.insert(key, rating).is_some() {
            return Err(syntax("duplicate rating".into()));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn precision_recall_f1(retrieved: &[ConnectionInstance], gold: &GoldStandard) -> Result<Prf, EvalError> {
    if gold.is_empty() {
        return Err(EvalError::EmptyGold);
    }
    let keys: BTreeSet<GoldKey> = retrieved.iter().map(GoldKey::of).collect();
    if keys.is_empty() {
        return Ok(Prf { precision: 0.0, recall: 0.0, f1: 0.0 });
    }
    let mut hit_gold: BTreeSet<&GoldKey> = BTreeSet::new();
    let mut correct = 0usize;
    for k in &keys {
        let m = gold.matches(k);
        if !m.is_empty() {
            correct += 1;
            hit_gold.extend(m);
        }
    }
    let precision = correct as f64 / keys.len() as f64;
    let recall = hit_gold.len() as f64 / gold.len() as f64;
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Ok(Prf { precision, recall, f1 })
}

/// One system output row: the connection and the explanation shown for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemOutput {
    pub connection: ConnectionInstance,
    pub explanation: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub bleu: f64,
    pub rouge_l: f64,
    pub meteor: f64,
    /// `None` when the system produced no scored pairs to correlate.
    pub spearman: Option<f64>,
    pub diversity_distinct1: f64,
    pub diversity_distinct2: f64,
    pub diversity_type_count: usize,
}

impl MetricsReport {
    /// `key=value` lines in field order; a missing correlation prints `none`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut row = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        row("precision", format!("{:.6}", self.precision));
        row("recall", format!("{:.6}", self.recall));
        row("f1", format!("{:.6}", self.f1));
        row("bleu", format!("{:.6}", self.bleu));
        row("rouge_l", format!("{:.6}", self.rouge_l));
        row("meteor", format!("{:.6}", self.meteor));
        row("spearman", self.spearman.map_or_else(|| "none".to_string(), |s| format!("{s:.6}")));
        row("diversity_distinct1", format!("{:.6}", self.diversity_distinct1));
        row("diversity_distinct2", format!("{:.6}", self.diversity_distinct2));
        row("diversity_type_count", self.diversity_type_count.to_string());
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// All metrics for one system. Text metrics are per entry (best reference
/// for ROUGE-L and METEOR, all references for BLEU) averaged over entries
/// that have gold references.
pub fn evaluate_system(
    outputs: &[SystemOutput],
    gold: &GoldStandard,
    score_pairs: &[(f64, f64)],
) -> Result<MetricsReport, EvalError> {
    let connections: Vec<ConnectionInstance> = outputs.iter().map(|o| o.connection.clone()).collect();
    let prf = precision_recall_f1(&connections, gold)?;

    let (mut b, mut r, mut m) = (Vec::new(), Vec::new(), Vec::new());
    for out in outputs {
        let refs: Vec<Vec<String>> = gold
            .matches(&GoldKey::of(&out.connection))
            .into_iter()
            .flat_map(|k| gold.references(k))
            .map(|s| tokenize(s))
            .filter(|t| !t.is_empty())
            .collect();
        if refs.is_empty() {
            continue;
        }
        let cand = tokenize(&out.explanation);
        if cand.is_empty() {
            b.push(0.0);
            r.push(0.0);
            m.push(0.0);
            continue;
        }
        b.push(bleu(&cand, &refs)?);
        r.push(refs.iter().map(|x| rouge_l(&cand, x)).collect::<Result<Vec<_>, _>>()?.into_iter().fold(0.0, f64::max));
        m.push(
            refs.iter().map(|x| meteor_lite(&cand, x)).collect::<Result<Vec<_>, _>>()?.into_iter().fold(0.0, f64::max),
        );
    }

    let spearman = if score_pairs.is_empty() {
        None
    } else {
        let (xs, ys): (Vec<f64>, Vec<f64>) = score_pairs.iter().copied().unzip();
        Some(spearman(&xs, &ys)?)
    };

    let texts: Vec<Vec<String>> = outputs.iter().map(|o| tokenize(&o.explanation)).collect();
    let div = diversity(&texts, connections.iter().map(|c| c.relationship_type.as_str()));

    Ok(MetricsReport {
        precision: prf.precision,
        recall: prf.recall,
        f1: prf.f1,
        bleu: mean(&b),
        rouge_l: mean(&r),
        meteor: mean(&m),
        spearman,
        diversity_distinct1: div.distinct1,
        diversity_distinct2: div.distinct2,
        diversity_type_count: div.type_count,
    })
}
