//! Line-oriented N-Triples subset.
//!
//! Grammar, one statement per line:
//! `<iri> <iri> (<iri> | "lexical"(@lang | ^^<iri>)?) .`
//! Literal escapes are `\"`, `\\`, `\n`, `\t` and `\r`. Lines starting with
//! `#` and blank lines are skipped. Blank nodes are rejected.

use std::io::{BufRead, Write};

use super::term::{escape_into, is_valid_lang, Iri, Literal, Term, Triple};
use super::KgError;

/// Parse every statement in `source`, in input order (duplicates retained).
pub fn parse_ntriples<R: BufRead>(source: R) -> Result<Vec<Triple>, KgError> {
    let mut out = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        if let Some(triple) = parse_line(&line, idx + 1)? {
            out.push(triple);
        }
    }
    Ok(out)
}

pub fn parse_ntriples_str(source: &str) -> Result<Vec<Triple>, KgError> {
    parse_ntriples(source.as_bytes())
}

/// Parse one line; `Ok(None)` for comments and blank lines.
pub fn parse_line(line: &str, line_no: usize) -> Result<Option<Triple>, KgError> {
    let trimmed = line.trim();
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Ok(None);
    }
    let mut cur = Cursor { text: trimmed, pos: 0, line: line_no };
    let subject = cur.iri()?;
    cur.skip_ws();
    let predicate = cur.iri()?;
    cur.skip_ws();
    let object = cur.term()?;
    cur.skip_ws();
    if !cur.eat('.') {
        return Err(cur.error("expected '.' to end the statement"));
    }
    cur.skip_ws();
    if !cur.rest().is_empty() && !cur.rest().starts_with('#') {
        return Err(cur.error("unexpected content after '.'"));
    }
    Ok(Some(Triple { subject, predicate, object }))
}

pub(crate) fn parse_term(text: &str) -> Result<Term, KgError> {
    let mut cur = Cursor { text, pos: 0, line: 1 };
    let term = cur.term()?;
    if !cur.rest().is_empty() {
        return Err(cur.error("trailing characters after term"));
    }
    Ok(term)
}

/// Write triples in the subset grammar, one per line. Returns the line count.
pub fn write_ntriples<'a, W, I>(sink: &mut W, triples: I) -> Result<usize, KgError>
where
    W: Write,
    I: IntoIterator<Item = &'a Triple>,
{
    let mut n = 0;
    for t in triples {
        writeln!(sink, "{}", t.canonical())?;
        n += 1;
    }
    sink.flush()?;
    Ok(n)
}

pub fn to_ntriples_string<'a, I: IntoIterator<Item = &'a Triple>>(triples: I) -> String {
    let mut out = String::new();
    for t in triples {
        out.push_str(&t.canonical());
        out.push('\n');
    }
    out
}

/// Inverse of the literal escaping applied by the serializer.
pub fn unescape(raw: &str) -> Option<String> {
    let mut out = String::with_capacity(raw.len());
    let mut chars = raw.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next()? {
            '"' => out.push('"'),
            '\\' => out.push('\\'),
            'n' => out.push('\n'),
            't' => out.push('\t'),
            'r' => out.push('\r'),
            _ => return None,
        }
    }
    Some(out)
}

pub fn escape(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    escape_into(raw, &mut out);
    out
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn skip_ws(&mut self) {
        let rest = self.rest();
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn offending_token(&self) -> String {
        let rest = self.rest();
        let token: String = rest.split_whitespace().next().unwrap_or("").chars().take(40).collect();
        if token.is_empty() {
            "<end of line>".to_string()
        } else {
            token
        }
    }

    fn error(&self, message: &str) -> KgError {
        KgError::Parse { line: self.line, token: self.offending_token(), message: message.to_string() }
    }

    fn iri(&mut self) -> Result<Iri, KgError> {
        match self.peek() {
            Some('<') => {}
            Some('_') if self.rest().starts_with("_:") => {
                return Err(self.error("blank nodes are not supported"));
            }
            _ => return Err(self.error("expected '<iri>'")),
        }
        let rest = self.rest();
        let Some(end) = rest.find('>') else {
            return Err(self.error("unterminated IRI"));
        };
        let value = &rest[1..end];
        let iri = Iri::new(value).map_err(|_| self.error("invalid IRI"))?;
        self.pos += end + 1;
        Ok(iri)
    }

    fn term(&mut self) -> Result<Term, KgError> {
        match self.peek() {
            Some('"') => self.literal().map(Term::literal),
            _ => self.iri().map(Term::iri),
        }
    }

    fn literal(&mut self) -> Result<Literal, KgError> {
        let start = self.pos;
        let rest = self.rest();
        let bytes = rest.as_bytes();
        let mut i = 1;
        let mut closed = None;
        while i < bytes.len() {
            match bytes[i] {
                b'\\' => i += 2,
                b'"' => {
                    closed = Some(i);
                    break;
                }
                _ => i += 1,
            }
        }
        let Some(close) = closed else {
            return Err(self.error("unterminated literal"));
        };
        let lexical = unescape(&rest[1..close]).ok_or_else(|| self.error("invalid escape sequence in literal"))?;
        self.pos = start + close + 1;
        if self.eat('@') {
            let rest = self.rest();
            let end = rest.find(|c: char| c.is_whitespace() || c == '.').unwrap_or(rest.len());
            // A trailing '.' glued to the tag terminates the statement.
            let tag = &rest[..end];
            if !is_valid_lang(tag) {
                return Err(self.error("invalid language tag"));
            }
            self.pos += end;
            Ok(Literal { lexical, lang: Some(tag.to_string()), datatype: None })
        } else if self.rest().starts_with("^^") {
            self.pos += 2;
            let dt = self.iri()?;
            Ok(Literal { lexical, lang: None, datatype: Some(dt) })
        } else {
            Ok(Literal { lexical, lang: None, datatype: None })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_line() {
        let ts = parse_ntriples_str("<a> <p> <b> .\n").unwrap();
        assert_eq!(ts.len(), 1);
        assert_eq!(ts[0].canonical(), "<a> <p> <b> .");
    }

    #[test]
    fn skips_comments_and_blank_lines() {
        let src = "# header\n\n   \n<a> <p> \"x\"@en .\n# trailing\n";
        assert_eq!(parse_ntriples_str(src).unwrap().len(), 1);
    }

    #[test]
    fn literal_forms() {
        let ts = parse_ntriples_str(
            "<a> <p> \"x\" .\n<a> <p> \"x\"@en-GB .\n<a> <p> \"1\"^^<http://www.w3.org/2001/XMLSchema#integer> .\n<a> <p> \"q\\\"\\\\\\n\\t\" .",
        )
        .unwrap();
        assert_eq!(ts[0].object.as_literal().unwrap().lang, None);
        assert_eq!(ts[1].object.as_literal().unwrap().lang.as_deref(), Some("en-GB"));
        assert!(ts[2].object.as_literal().unwrap().datatype.is_some());
        assert_eq!(ts[3].object.as_literal().unwrap().lexical, "q\"\\\n\t");
    }

    #[test]
    fn no_space_before_dot() {
        let ts = parse_ntriples_str("<a> <p> \"x\"@en.\n<a> <p> <b>.").unwrap();
        assert_eq!(ts.len(), 2);
    }

    #[test]
    fn errors_report_line_and_token() {
        let err = parse_ntriples_str("<a> <p> <b> .\n<a> <p> _:b0 .\n").unwrap_err();
        match err {
            KgError::Parse { line, token, .. } => {
                assert_eq!(line, 2);
                assert_eq!(token, "_:b0");
            }
            other => panic!("unexpected {other:?}"),
        }
        let err = parse_ntriples_str("<a> <p> <b>\n").unwrap_err();
        assert!(matches!(err, KgError::Parse { line: 1, .. }));
        let err = parse_ntriples_str("<a> <p> \"open .\n").unwrap_err();
        assert!(matches!(err, KgError::Parse { line: 1, .. }));
        let err = parse_ntriples_str("<a> <p> \"bad\\q\" .\n").unwrap_err();
        assert!(matches!(err, KgError::Parse { line: 1, .. }));
        let err = parse_ntriples_str("<a> <p> <b> . <c>\n").unwrap_err();
        assert!(matches!(err, KgError::Parse { line: 1, .. }));
    }

    #[test]
    fn escape_round_trip() {
        let raw = "tab\there \"quoted\" back\\slash\r\n";
        assert_eq!(unescape(&escape(raw)).unwrap(), raw);
    }
}
