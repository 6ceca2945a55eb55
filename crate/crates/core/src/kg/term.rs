use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::KgError;

/// An absolute or compact identifier for an entity or predicate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Iri(String);

impl Iri {
    pub fn new(value: impl Into<String>) -> Result<Self, KgError> {
        let value = value.into();
        if value.is_empty() {
            return Err(KgError::InvalidIri { value, reason: "empty" });
        }
        if value.chars().any(|c| c.is_whitespace() || c == '<' || c == '>') {
            return Err(KgError::InvalidIri { value, reason: "contains whitespace or angle brackets" });
        }
        Ok(Iri(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The trailing segment after the last `/`, `#` or `:`.
    pub fn local_name(&self) -> &str {
        let cut = self.0.rfind(['/', '#', ':']).map_or(0, |i| i + 1);
        let local = &self.0[cut..];
        if local.is_empty() {
            &self.0
        } else {
            local
        }
    }

    /// Serialized form, `<value>`.
    pub fn canonical(&self) -> String {
        format!("<{}>", self.0)
    }
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.0)
    }
}

/// Accepts the bare value or the bracketed `<value>` form.
impl std::str::FromStr for Iri {
    type Err = KgError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Iri::new(s.strip_prefix('<').and_then(|r| r.strip_suffix('>')).unwrap_or(s))
    }
}

impl TryFrom<String> for Iri {
    type Error = KgError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Iri::new(value)
    }
}

impl From<Iri> for String {
    fn from(iri: Iri) -> Self {
        iri.0
    }
}

impl PartialOrd for Iri {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Ordered as serialized text, so "<a-b>" sorts before "<a>".
impl Ord for Iri {
    fn cmp(&self, other: &Self) -> Ordering {
        let a = self.0.bytes().chain(std::iter::once(b'>'));
        let b = other.0.bytes().chain(std::iter::once(b'>'));
        a.cmp(b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub lexical: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub datatype: Option<Iri>,
}

impl Literal {
    pub fn plain(lexical: impl Into<String>) -> Self {
        Literal { lexical: lexical.into(), lang: None, datatype: None }
    }

    pub fn lang(lexical: impl Into<String>, lang: impl Into<String>) -> Result<Self, KgError> {
        let lang = lang.into();
        if !is_valid_lang(&lang) {
            return Err(KgError::InvalidLiteral(format!("bad language tag {lang:?}")));
        }
        Ok(Literal { lexical: lexical.into(), lang: Some(lang), datatype: None })
    }

    pub fn typed(lexical: impl Into<String>, datatype: Iri) -> Self {
        Literal { lexical: lexical.into(), lang: None, datatype: Some(datatype) }
    }

    pub fn canonical(&self) -> String {
        let mut out = String::with_capacity(self.lexical.len() + 2);
        out.push('"');
        escape_into(&self.lexical, &mut out);
        out.push('"');
        if let Some(lang) = &self.lang {
            out.push('@');
            out.push_str(lang);
        } else if let Some(dt) = &self.datatype {
            out.push_str("^^");
            out.push_str(&dt.canonical());
        }
        out
    }
}

pub(crate) fn is_valid_lang(tag: &str) -> bool {
    let mut parts = tag.split('-');
    let Some(first) = parts.next() else { return false };
    if first.is_empty() || !first.chars().all(|c| c.is_ascii_alphabetic()) {
        return false;
    }
    parts.all(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_alphanumeric()))
}

pub(crate) fn escape_into(raw: &str, out: &mut String) {
    for c in raw.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
}

/// Object position of a triple: an entity or a literal value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Term {
    Iri { value: Iri },
    Literal { value: Literal },
}

impl Term {
    pub fn iri(iri: Iri) -> Self {
        Term::Iri { value: iri }
    }

    pub fn literal(lit: Literal) -> Self {
        Term::Literal { value: lit }
    }

    pub fn as_iri(&self) -> Option<&Iri> {
        match self {
            Term::Iri { value } => Some(value),
            Term::Literal { .. } => None,
        }
    }

    pub fn as_literal(&self) -> Option<&Literal> {
        match self {
            Term::Literal { value } => Some(value),
            Term::Iri { .. } => None,
        }
    }

    pub fn canonical(&self) -> String {
        match self {
            Term::Iri { value } => value.canonical(),
            Term::Literal { value } => value.canonical(),
        }
    }

    /// Parse a single serialized term (`<iri>` or a quoted literal).
    pub fn parse(text: &str) -> Result<Self, KgError> {
        super::ntriples::parse_term(text.trim())
    }
}

impl From<Iri> for Term {
    fn from(iri: Iri) -> Self {
        Term::iri(iri)
    }
}

impl From<Literal> for Term {
    fn from(lit: Literal) -> Self {
        Term::literal(lit)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Term {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Term::Iri { value: a }, Term::Iri { value: b }) => a.cmp(b),
            _ => self.canonical().cmp(&other.canonical()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub subject: Iri,
    pub predicate: Iri,
    pub object: Term,
}

impl Triple {
    pub fn new(subject: Iri, predicate: Iri, object: impl Into<Term>) -> Self {
        Triple { subject, predicate, object: object.into() }
    }

    /// One N-Triples statement, without the trailing newline.
    pub fn canonical(&self) -> String {
        format!("{} {} {} .", self.subject.canonical(), self.predicate.canonical(), self.object.canonical())
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

impl PartialOrd for Triple {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Triple {
    fn cmp(&self, other: &Self) -> Ordering {
        self.subject
            .cmp(&other.subject)
            .then_with(|| self.predicate.cmp(&other.predicate))
            .then_with(|| self.object.cmp(&other.object))
    }
}
