use std::collections::HashSet;

use super::{LangFilter, PatternError, PatternQuery, PatternTerm, TriplePattern};
use crate::kg::ntriples::unescape;
use crate::kg::{Iri, Literal};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Var(String),
    Iri(String),
    Str { lexical: String, lang: Option<String>, datatype: Option<String> },
    LParen,
    RParen,
    Comma,
    Eq,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("'{w}'"),
            Tok::Var(v) => format!("'?{v}'"),
            Tok::Iri(i) => format!("'<{i}>'"),
            Tok::Str { lexical, .. } => format!("string {lexical:?}"),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Comma => "','".into(),
            Tok::Eq => "'='".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

pub(crate) fn is_var_name(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(is_ident_start) && chars.all(is_ident_char)
}

fn lex(source: &str) -> Result<Vec<Spanned>, PatternError> {
    let mut out = Vec::new();
    for (line_idx, line) in source.lines().enumerate() {
        let line_no = line_idx + 1;
        let chars: Vec<(usize, char)> = line.char_indices().collect();
        let mut i = 0;
        let col = |i: usize| i + 1;
        let err = |i: usize, message: String| PatternError::Syntax { line: line_no, column: col(i), message };
        while i < chars.len() {
            let (_, c) = chars[i];
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c == '#' {
                break;
            }
            let start = i;
            let tok = match c {
                '(' => {
                    i += 1;
                    Tok::LParen
                }
                ')' => {
                    i += 1;
                    Tok::RParen
                }
                ',' => {
                    i += 1;
                    Tok::Comma
                }
                '=' => {
                    i += 1;
                    Tok::Eq
                }
                '?' => {
                    i += 1;
                    let s = i;
                    while i < chars.len() && is_ident_char(chars[i].1) {
                        i += 1;
                    }
                    let name: String = chars[s..i].iter().map(|&(_, c)| c).collect();
                    if !is_var_name(&name) {
                        return Err(err(start, "expected a variable name after '?'".into()));
                    }
                    Tok::Var(name)
                }
                '<' => {
                    i += 1;
                    let s = i;
                    while i < chars.len() && chars[i].1 != '>' {
                        if chars[i].1.is_whitespace() || chars[i].1 == '<' {
                            return Err(err(i, "invalid character inside IRI".into()));
                        }
                        i += 1;
                    }
                    if i >= chars.len() {
                        return Err(err(start, "unterminated IRI".into()));
                    }
                    let value: String = chars[s..i].iter().map(|&(_, c)| c).collect();
                    i += 1;
                    if value.is_empty() {
                        return Err(err(start, "empty IRI".into()));
                    }
                    Tok::Iri(value)
                }
                '"' => {
                    i += 1;
                    let s = i;
                    loop {
                        if i >= chars.len() {
                            return Err(err(start, "unterminated string".into()));
                        }
                        match chars[i].1 {
                            '\\' => i += 2,
                            '"' => break,
                            _ => i += 1,
                        }
                    }
                    let raw: String = chars[s..i].iter().map(|&(_, c)| c).collect();
                    i += 1;
                    let lexical = unescape(&raw).ok_or_else(|| err(start, "invalid escape in string".into()))?;
                    let mut lang = None;
                    let mut datatype = None;
                    if i < chars.len() && chars[i].1 == '@' {
                        i += 1;
                        let s = i;
                        while i < chars.len() && (chars[i].1.is_ascii_alphanumeric() || chars[i].1 == '-') {
                            i += 1;
                        }
                        let tag: String = chars[s..i].iter().map(|&(_, c)| c).collect();
                        if !crate::kg::Literal::lang("", tag.as_str()).is_ok() {
                            return Err(err(s, "invalid language tag".into()));
                        }
                        lang = Some(tag);
                    } else if i + 1 < chars.len() && chars[i].1 == '^' && chars[i + 1].1 == '^' {
                        i += 2;
                        if i >= chars.len() || chars[i].1 != '<' {
                            return Err(err(i, "expected '<iri>' after '^^'".into()));
                        }
                        let s = i + 1;
                        while i < chars.len() && chars[i].1 != '>' {
                            i += 1;
                        }
                        if i >= chars.len() {
                            return Err(err(s - 1, "unterminated IRI".into()));
                        }
                        datatype = Some(chars[s..i].iter().map(|&(_, c)| c).collect());
                        i += 1;
                    }
                    Tok::Str { lexical, lang, datatype }
                }
                c if is_ident_start(c) => {
                    while i < chars.len() && (is_ident_char(chars[i].1) || chars[i].1 == '-') {
                        i += 1;
                    }
                    Tok::Word(chars[start..i].iter().map(|&(_, c)| c).collect())
                }
                other => return Err(err(i, format!("unexpected character {other:?}"))),
            };
            out.push(Spanned { tok, line: line_no, column: col(start) });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn here(&self) -> (usize, usize) {
        self.peek().map_or(self.end, |s| (s.line, s.column))
    }

    fn syntax(&self, message: impl Into<String>) -> PatternError {
        let (line, column) = self.here();
        let found = self.peek().map_or_else(|| "end of input".to_string(), |s| s.tok.describe());
        PatternError::Syntax { line, column, message: format!("{}, found {found}", message.into()) }
    }

    fn next(&mut self) -> Option<Spanned> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Spanned { tok: Tok::Word(w), .. }) if w.eq_ignore_ascii_case(kw))
    }

    fn keyword(&mut self, kw: &str) -> Result<(), PatternError> {
        if self.at_keyword(kw) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.syntax(format!("expected {kw}")))
        }
    }

    fn punct(&mut self, want: Tok, what: &str) -> Result<(), PatternError> {
        match self.peek() {
            Some(s) if s.tok == want => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.syntax(format!("expected {what}"))),
        }
    }

    fn var(&mut self) -> Result<(String, (usize, usize)), PatternError> {
        match self.peek() {
            Some(Spanned { tok: Tok::Var(v), line, column }) => {
                let out = (v.clone(), (*line, *column));
                self.pos += 1;
                Ok(out)
            }
            _ => Err(self.syntax("expected a variable")),
        }
    }

    fn string(&mut self) -> Result<String, PatternError> {
        match self.peek() {
            Some(Spanned { tok: Tok::Str { lexical, lang: None, datatype: None }, .. }) => {
                let s = lexical.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.syntax("expected a quoted string")),
        }
    }

    fn term(&mut self) -> Result<PatternTerm, PatternError> {
        let here = self.here();
        let Some(sp) = self.next() else {
            return Err(self.syntax("expected a term"));
        };
        let bad = |message: String| PatternError::Syntax { line: here.0, column: here.1, message };
        match sp.tok {
            Tok::Var(v) => Ok(PatternTerm::Var(v)),
            Tok::Iri(i) => Iri::new(i).map(PatternTerm::Iri).map_err(|e| bad(e.to_string())),
            Tok::Str { lexical, lang, datatype } => {
                let lit = match (lang, datatype) {
                    (Some(l), _) => Literal::lang(lexical, l).map_err(|e| bad(e.to_string()))?,
                    (None, Some(d)) => Literal::typed(lexical, Iri::new(d).map_err(|e| bad(e.to_string()))?),
                    (None, None) => Literal::plain(lexical),
                };
                Ok(PatternTerm::Literal(lit))
            }
            other => {
                self.pos -= 1;
                Err(self
                    .syntax(format!("expected a term (?var, <iri> or \"literal\") instead of {}", other.describe())))
            }
        }
    }

    fn triple(&mut self) -> Result<TriplePattern, PatternError> {
        self.punct(Tok::LParen, "'('")?;
        let subject = self.term()?;
        let predicate = self.term()?;
        let object = self.term()?;
        self.punct(Tok::RParen, "')'")?;
        Ok(TriplePattern { subject, predicate, object })
    }

    fn block(&mut self) -> Result<PatternQuery, PatternError> {
        let start = self.here();
        self.keyword("CONNECTION")?;
        let name = match self.peek() {
            Some(Spanned { tok: Tok::Word(w), .. }) if !is_keyword(w) => {
                let w = w.clone();
                self.pos += 1;
                w
            }
            _ => return Err(self.syntax("expected a connection name")),
        };
        self.keyword("TYPE")?;
        let relationship_type = self.string()?;
        self.keyword("MATCH")?;
        let mut patterns = vec![self.triple()?];
        while matches!(self.peek(), Some(Spanned { tok: Tok::Comma, .. })) {
            self.pos += 1;
            patterns.push(self.triple()?);
        }
        let mut lang_filters = Vec::new();
        let mut filter_pos = Vec::new();
        while self.at_keyword("FILTER") {
            self.pos += 1;
            self.keyword("LANG")?;
            self.punct(Tok::LParen, "'('")?;
            let (var, at) = self.var()?;
            self.punct(Tok::RParen, "')'")?;
            self.punct(Tok::Eq, "'='")?;
            let tag = self.string()?;
            lang_filters.push(LangFilter { var, tag });
            filter_pos.push(at);
        }
        self.keyword("ENTITIES")?;
        let (entity1_var, e1_at) = self.var()?;
        let (entity2_var, e2_at) = self.var()?;
        let mut metadata_vars = Vec::new();
        let mut meta_pos = Vec::new();
        if self.at_keyword("META") {
            self.pos += 1;
            while matches!(self.peek(), Some(Spanned { tok: Tok::Var(_), .. })) {
                let (v, at) = self.var()?;
                metadata_vars.push(v);
                meta_pos.push(at);
            }
            if metadata_vars.is_empty() {
                return Err(self.syntax("expected at least one variable after META"));
            }
        }
        self.keyword("LABEL")?;
        let label_at = self.here();
        let label_template = self.string()?;

        let query = PatternQuery {
            name,
            relationship_type,
            patterns,
            lang_filters,
            entity1_var,
            entity2_var,
            metadata_vars,
            label_template,
        };
        validate(&query, start, &[e1_at, e2_at], &meta_pos, &filter_pos, label_at)?;
        Ok(query)
    }
}

fn is_keyword(w: &str) -> bool {
    ["CONNECTION", "TYPE", "MATCH", "FILTER", "LANG", "ENTITIES", "META", "LABEL"]
        .iter()
        .any(|k| k.eq_ignore_ascii_case(w))
}

pub(crate) fn template_placeholders(template: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        let Some(close) = after.find('}') else {
            return Err("unclosed '{' in template".into());
        };
        let name = &after[..close];
        if !is_var_name(name) {
            return Err(format!("invalid placeholder {{{name}}}"));
        }
        out.push(name.to_string());
        rest = &after[close + 1..];
    }
    Ok(out)
}

fn validate(
    q: &PatternQuery,
    start: (usize, usize),
    entity_pos: &[(usize, usize)],
    meta_pos: &[(usize, usize)],
    filter_pos: &[(usize, usize)],
    label_at: (usize, usize),
) -> Result<(), PatternError> {
    let vars: HashSet<String> = q.variables().into_iter().collect();
    let fail = |at: (usize, usize), message: String| PatternError::Semantic {
        query: q.name.clone(),
        line: at.0,
        column: at.1,
        message,
    };
    for p in &q.patterns {
        if matches!(p.subject, PatternTerm::Literal(_)) || matches!(p.predicate, PatternTerm::Literal(_)) {
            return Err(fail(start, "literals are only allowed in object position".into()));
        }
    }
    for (v, at) in [&q.entity1_var, &q.entity2_var].into_iter().zip(entity_pos) {
        if !vars.contains(v.as_str()) {
            return Err(fail(*at, format!("entity variable ?{v} does not occur in any pattern")));
        }
    }
    if q.entity1_var == q.entity2_var {
        return Err(fail(entity_pos[1], "ENTITIES must name two distinct variables".into()));
    }
    for (v, at) in q.metadata_vars.iter().zip(meta_pos) {
        if !vars.contains(v.as_str()) {
            return Err(fail(*at, format!("metadata variable ?{v} does not occur in any pattern")));
        }
    }
    for (f, at) in q.lang_filters.iter().zip(filter_pos) {
        if !vars.contains(f.var.as_str()) {
            return Err(fail(*at, format!("filtered variable ?{} does not occur in any pattern", f.var)));
        }
    }
    if q.label_template.trim().is_empty() {
        return Err(fail(label_at, "LABEL template is empty".into()));
    }
    let placeholders = template_placeholders(&q.label_template).map_err(|m| fail(label_at, m))?;
    for name in placeholders {
        if !vars.contains(name.as_str()) {
            return Err(fail(label_at, format!("placeholder {{{name}}} has no matching ?{name} in any pattern")));
        }
    }
    if q.relationship_type.trim().is_empty() {
        return Err(fail(start, "TYPE must not be empty".into()));
    }
    Ok(())
}

fn parser_for(source: &str) -> Result<Parser, PatternError> {
    let toks = lex(source)?;
    let lines = source.lines().count().max(1);
    let last_len = source.lines().last().map_or(0, |l| l.chars().count());
    Ok(Parser { toks, pos: 0, end: (lines, last_len + 1) })
}

/// Parse a program holding exactly one `CONNECTION` block.
pub fn parse_pattern(source: &str) -> Result<PatternQuery, PatternError> {
    let mut p = parser_for(source)?;
    let q = p.block()?;
    if p.peek().is_some() {
        return Err(p.syntax("expected end of input after LABEL"));
    }
    Ok(q)
}

/// Parse a query-set file: zero or more blocks with unique names.
pub fn parse_query_set(source: &str) -> Result<Vec<PatternQuery>, PatternError> {
    let mut p = parser_for(source)?;
    let mut out: Vec<PatternQuery> = Vec::new();
    while p.peek().is_some() {
        let at = p.here();
        let q = p.block()?;
        if out.iter().any(|o| o.name == q.name) {
            return Err(PatternError::Semantic {
                query: q.name.clone(),
                line: at.0,
                column: at.1,
                message: "duplicate CONNECTION name".into(),
            });
        }
        out.push(q);
    }
    Ok(out)
}
