//! Extraction from remote graph-query endpoints into local N-Triples.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::kg::ntriples::write_ntriples;
use crate::kg::{Iri, KgError, Literal, Term, Triple, RDFS_LABEL, WDT_INSTANCE_OF, WDT_OCCUPATION};
use crate::par::{self, Execution};

pub const DEFAULT_PAGE_SIZE: usize = 1000;
pub const FETCH_ATTEMPTS: u32 = 3;
const RESULTS_MEDIA_TYPE: &str = "application/sparql-results+json";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("endpoint unreachable after {attempts} attempts: {message}")]
    Network { attempts: u32, message: String },
    #[error("endpoint returned HTTP {0}")]
    Status(u16),
    #[error("malformed results: {0}")]
    Malformed(String),
    #[error("mapping references undeclared variable ?{0}")]
    UndeclaredVariable(String),
    #[error("mapping syntax, line {line}: {message}")]
    MappingSyntax { line: usize, message: String },
    #[error("{0}")]
    Kg(String),
}

impl From<KgError> for IngestError {
    fn from(e: KgError) -> Self {
        IngestError::Kg(e.to_string())
    }
}

/// Tabular query results. Absent cells are simply missing from a row.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub variables: Vec<String>,
    pub rows: Vec<BTreeMap<String, Term>>,
}

impl ResultTable {
    pub fn new(variables: Vec<String>) -> Self {
        ResultTable { variables, rows: Vec::new() }
    }

    pub fn push_row(&mut self, row: BTreeMap<String, Term>) -> Result<(), IngestError> {
        if let Some(v) = row.keys().find(|v| !self.variables.contains(v)) {
            return Err(IngestError::UndeclaredVariable(v.clone()));
        }
        self.rows.push(row);
        Ok(())
    }
}

fn cell_to_term(cell: &Value) -> Result<Option<Term>, IngestError> {
    let bad = |m: &str| IngestError::Malformed(m.to_string());
    let kind = cell.get("type").and_then(Value::as_str).ok_or_else(|| bad("cell without type"))?;
    let value = cell.get("value").and_then(Value::as_str).ok_or_else(|| bad("cell without value"))?;
    let term = match kind {
        "uri" => Term::iri(Iri::new(value)?),
        "literal" | "typed-literal" => {
            if let Some(lang) = cell.get("xml:lang").and_then(Value::as_str) {
                Term::literal(Literal::lang(value, lang)?)
            } else if let Some(dt) = cell.get("datatype").and_then(Value::as_str) {
                Term::literal(Literal::typed(value, Iri::new(dt)?))
            } else {
                Term::literal(Literal::plain(value))
            }
        }
        // Blank nodes have no stable identity across requests.
        "bnode" => return Ok(None),
        other => return Err(IngestError::Malformed(format!("unknown cell type {other:?}"))),
    };
    Ok(Some(term))
}

/// Parse a JSON query-results document.
pub fn parse_results_json(body: &str) -> Result<ResultTable, IngestError> {
    let doc: Value = serde_json::from_str(body).map_err(|e| IngestError::Malformed(e.to_string()))?;
    let vars = doc
        .pointer("/head/vars")
        .and_then(Value::as_array)
        .ok_or_else(|| IngestError::Malformed("missing head.vars".into()))?;
    let variables = vars
        .iter()
        .map(|v| v.as_str().map(str::to_string).ok_or_else(|| IngestError::Malformed("non-string variable".into())))
        .collect::<Result<Vec<_>, _>>()?;
    let bindings = doc
        .pointer("/results/bindings")
        .and_then(Value::as_array)
        .ok_or_else(|| IngestError::Malformed("missing results.bindings".into()))?;
    let mut table = ResultTable::new(variables);
    for b in bindings {
        let obj = b.as_object().ok_or_else(|| IngestError::Malformed("binding is not an object".into()))?;
        let mut row = BTreeMap::new();
        for (var, cell) in obj {
            if let Some(term) = cell_to_term(cell)? {
                row.insert(var.clone(), term);
            }
        }
        table.push_row(row)?;
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FetchOptions {
    pub user_agent: String,
    pub timeout_secs: u64,
    pub page_size: usize,
    pub max_rows: usize,
    /// First retry waits this long; each later retry doubles it.
    pub retry_base_ms: u64,
}

impl Default for FetchOptions {
    fn default() -> Self {
        FetchOptions {
            user_agent: concat!("relex/", env!("CARGO_PKG_VERSION")).to_string(),
            timeout_secs: 60,
            page_size: DEFAULT_PAGE_SIZE,
            max_rows: 10_000,
            retry_base_ms: 500,
        }
    }
}

/// True when the query already ends in its own LIMIT (optionally followed by OFFSET).
pub fn has_trailing_limit(query: &str) -> bool {
    let toks: Vec<String> = query.split_whitespace().rev().take(4).map(str::to_ascii_uppercase).collect();
    let is_num = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    match toks.as_slice() {
        [n, kw, ..] if kw == "LIMIT" && is_num(n) => true,
        [n2, kw2, n1, kw1] if kw2 == "OFFSET" && kw1 == "LIMIT" && is_num(n1) && is_num(n2) => true,
        _ => false,
    }
}

fn is_transient(status: u16) -> bool {
    status == 429 || status >= 500
}

fn fetch_page(agent: &ureq::Agent, url: &str, query: &str, opts: &FetchOptions) -> Result<ResultTable, IngestError> {
    let mut last = String::new();
    for attempt in 0..FETCH_ATTEMPTS {
        if attempt > 0 {
            std::thread::sleep(Duration::from_millis(opts.retry_base_ms.saturating_mul(1 << (attempt - 1))));
        }
        let sent = agent
            .post(url)
            .header("Accept", RESULTS_MEDIA_TYPE)
            .header("User-Agent", &opts.user_agent)
            .send_form([("query", query)]);
        let mut resp = match sent {
            Ok(r) => r,
            Err(e) => {
                last = e.to_string();
                log::warn!("fetch attempt {} failed: {last}", attempt + 1);
                continue;
            }
        };
        let status = resp.status().as_u16();
        if is_transient(status) {
            last = format!("HTTP {status}");
            log::warn!("fetch attempt {} got {last}", attempt + 1);
            continue;
        }
        if !(200..300).contains(&status) {
            return Err(IngestError::Status(status));
        }
        let body = match resp.body_mut().read_to_string() {
            Ok(b) => b,
            Err(e) => {
                last = e.to_string();
                continue;
            }
        };
        return parse_results_json(&body);
    }
    Err(IngestError::Network { attempts: FETCH_ATTEMPTS, message: last })
}

/// Run a query against a remote endpoint, paging with LIMIT/OFFSET unless
/// the query carries its own LIMIT. The query text is sent as is.
pub fn fetch_remote(url: &str, query: &str, opts: &FetchOptions) -> Result<ResultTable, IngestError> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(opts.timeout_secs)))
        .http_status_as_error(false)
        .build()
        .into();
    if has_trailing_limit(query) || opts.page_size == 0 {
        let mut t = fetch_page(&agent, url, query, opts)?;
        t.rows.truncate(opts.max_rows);
        return Ok(t);
    }
    let mut table: Option<ResultTable> = None;
    let mut offset = 0usize;
    loop {
        let paged = format!("{query}\nLIMIT {} OFFSET {offset}", opts.page_size);
        let page = fetch_page(&agent, url, &paged, opts)?;
        let n = page.rows.len();
        let t = table.get_or_insert_with(|| ResultTable::new(page.variables.clone()));
        t.rows.extend(page.rows);
        offset += opts.page_size;
        if n < opts.page_size || t.rows.len() >= opts.max_rows {
            break;
        }
    }
    let mut t = table.unwrap_or_default();
    t.rows.truncate(opts.max_rows);
    Ok(t)
}

/// Independent fetches with at most `max_in_flight` running at once.
pub fn fetch_many(
    requests: &[(String, String)],
    opts: &FetchOptions,
    exec: Execution,
    max_in_flight: usize,
) -> Vec<Result<ResultTable, IngestError>> {
    par::map_bounded(exec, max_in_flight, requests, |(url, query)| fetch_remote(url, query, opts))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectSpec {
    Var(String),
    Const(Term),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingRule {
    pub subject: String,
    pub predicate: Iri,
    pub object: ObjectSpec,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleMapping {
    pub rules: Vec<MappingRule>,
}

impl TripleMapping {
    pub fn validate(&self, variables: &[String]) -> Result<(), IngestError> {
        for r in &self.rules {
            let mut vars = vec![&r.subject];
            if let ObjectSpec::Var(v) = &r.object {
                vars.push(v);
            }
            if let Some(v) = vars.into_iter().find(|v| !variables.contains(v)) {
                return Err(IngestError::UndeclaredVariable(v.clone()));
            }
        }
        Ok(())
    }

    /// One rule per line: `?subject <predicate> ?object` or a constant term object.
    pub fn parse(source: &str) -> Result<Self, IngestError> {
        let mut rules = Vec::new();
        for (idx, raw) in source.lines().enumerate() {
            let line = idx + 1;
            let fail = |message: String| IngestError::MappingSyntax { line, message };
            let text = raw.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let mut parts = text.splitn(3, char::is_whitespace);
            let (s, p, o) = match (parts.next(), parts.next(), parts.next()) {
                (Some(s), Some(p), Some(o)) => (s, p, o.trim()),
                _ => return Err(fail("expected `?subject <predicate> object`".into())),
            };
            let subject =
                s.strip_prefix('?').ok_or_else(|| fail(format!("subject must be a variable, found {s:?}")))?;
            let predicate = match Term::parse(p).map_err(|e| fail(e.to_string()))? {
                Term::Iri { value } => value,
                _ => return Err(fail("predicate must be an IRI".into())),
            };
            let object = match o.strip_prefix('?') {
                Some(v) => ObjectSpec::Var(v.to_string()),
                None => ObjectSpec::Const(Term::parse(o).map_err(|e| fail(e.to_string()))?),
            };
            rules.push(MappingRule { subject: subject.to_string(), predicate, object });
        }
        Ok(TripleMapping { rules })
    }
}

/// Apply every rule to every row. Rules whose cells are unbound, or whose
/// subject is a literal, are skipped for that row. Output is sorted and
/// deduplicated.
pub fn table_to_triples(table: &ResultTable, mapping: &TripleMapping) -> Result<Vec<Triple>, IngestError> {
    mapping.validate(&table.variables)?;
    let mut out = BTreeSet::new();
    for row in &table.rows {
        for rule in &mapping.rules {
            let Some(Term::Iri { value: subject }) = row.get(&rule.subject) else { continue };
            let object = match &rule.object {
                ObjectSpec::Var(v) => match row.get(v) {
                    Some(t) => t.clone(),
                    None => continue,
                },
                ObjectSpec::Const(t) => t.clone(),
            };
            out.insert(Triple::new(subject.clone(), rule.predicate.clone(), object));
        }
    }
    Ok(out.into_iter().collect())
}

pub fn export_ntriples<'a, W, I>(triples: I, sink: &mut W) -> Result<usize, IngestError>
where
    W: Write,
    I: IntoIterator<Item = &'a Triple>,
{
    Ok(write_ntriples(sink, triples)?)
}

/// Ready-made extraction query plus its mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub query: &'static str,
    pub mapping: TripleMapping,
}

const WDT: &str = "http://www.wikidata.org/prop/direct/";

fn rule(subject: &str, predicate: &str, object: &str) -> MappingRule {
    MappingRule {
        subject: subject.into(),
        predicate: Iri::new(predicate).expect("preset predicate"),
        object: ObjectSpec::Var(object.into()),
    }
}

pub const PAINTER_QUERY: &str = r#"SELECT ?painter ?painterLabel ?birthPlace ?birthPlaceLabel ?deathPlace ?deathPlaceLabel ?occupation ?occupationLabel
WHERE {
  ?painter wdt:P106 wd:Q1028181 ;
    rdfs:label ?painterLabel .
  OPTIONAL { ?painter wdt:P19 ?birthPlace.
    ?birthPlace rdfs:label ?birthPlaceLabel .
  }
  OPTIONAL { ?painter wdt:P20 ?deathPlace .
    ?deathPlace rdfs:label ?deathPlaceLabel.
  }
  OPTIONAL { ?painter wdt:P106 ?occupation .
    ?occupation rdfs:label ?occupationLabel .
  }
  FILTER (LANG(?painterLabel) = "en" )
} LIMIT 1000"#;

pub const PAINTING_QUERY: &str = r#"SELECT ?painting ?paintingLabel ?creator ?creatorLabel ?location ?locationLabel ?depicts ?depictsLabel
WHERE {
  ?painting wdt:P31 wd:Q3305213 ;
    rdfs:label ?paintingLabel .
  OPTIONAL { ?painting wdt:P170 ?creator .
    ?creator rdfs:label ?creatorLabel .
  }
  OPTIONAL { ?painting wdt:P276 ?location .
    ?location rdfs:label ?locationLabel .
  }
  OPTIONAL { ?painting wdt:P180 ?depicts .
    ?depicts rdfs:label ?depictsLabel .
  }
  FILTER (LANG(?paintingLabel) = "en" )
} LIMIT 1000"#;

pub fn painter_preset() -> Preset {
    Preset {
        name: "painters",
        query: PAINTER_QUERY,
        mapping: TripleMapping {
            rules: vec![
                rule("painter", RDFS_LABEL, "painterLabel"),
                rule("painter", &format!("{WDT}P19"), "birthPlace"),
                rule("birthPlace", RDFS_LABEL, "birthPlaceLabel"),
                rule("painter", &format!("{WDT}P20"), "deathPlace"),
                rule("deathPlace", RDFS_LABEL, "deathPlaceLabel"),
                rule("painter", WDT_OCCUPATION, "occupation"),
                rule("occupation", RDFS_LABEL, "occupationLabel"),
            ],
        },
    }
}

pub fn painting_preset() -> Preset {
    Preset {
        name: "paintings",
        query: PAINTING_QUERY,
        mapping: TripleMapping {
            rules: vec![
                rule("painting", RDFS_LABEL, "paintingLabel"),
                rule("painting", &format!("{WDT}P170"), "creator"),
                rule("creator", RDFS_LABEL, "creatorLabel"),
                rule("painting", &format!("{WDT}P276"), "location"),
                rule("location", RDFS_LABEL, "locationLabel"),
                rule("painting", &format!("{WDT}P180"), "depicts"),
                rule("depicts", RDFS_LABEL, "depictsLabel"),
                MappingRule {
                    subject: "painting".into(),
                    predicate: Iri::new(WDT_INSTANCE_OF).expect("preset predicate"),
                    object: ObjectSpec::Const(Term::iri(
                        Iri::new("http://www.wikidata.org/entity/Q3305213").expect("iri"),
                    )),
                },
            ],
        },
    }
}

pub fn preset(name: &str) -> Option<Preset> {
    match name {
        "painters" => Some(painter_preset()),
        "paintings" => Some(painting_preset()),
        _ => None,
    }
}
