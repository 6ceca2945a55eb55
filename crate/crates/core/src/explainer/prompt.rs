use serde::{Deserialize, Serialize};

use super::ExplainError;

pub(crate) const PREFIX: &str = "Generate a natural language explanation that connects ";
const TYPE_MARK: &str = ".\nThe relationship type is ";
const SCORE_MARK: &str = ".\nThe interestingness score is: ";
const CONTEXT_MARK: &str = ".\nThe user context is: ";
const SUFFIX: &str = ".\nExplain this relationship in a way that reflects its interestingness, and the user context. Be specific, and avoid generic statements that could apply to other entities.";

/// Stands in for the user context in prompts when the context is empty.
pub const EMPTY_CONTEXT: &str = "a general audience";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptInput {
    pub entity1_description: String,
    pub entity2_description: String,
    pub relationship_type: String,
    pub interestingness_score: f64,
    pub user_context_description: String,
}

pub fn format_score(score: f64) -> String {
    // Avoid "-0.0000" for tiny negative values.
    let s = format!("{score:.4}");
    if s == "-0.0000" {
        "0.0000".to_string()
    } else {
        s
    }
}

pub fn build_prompt(p: &PromptInput) -> String {
    let context =
        if p.user_context_description.trim().is_empty() { EMPTY_CONTEXT } else { p.user_context_description.as_str() };
    format!(
        "{PREFIX}{} and {}{TYPE_MARK}{}{SCORE_MARK}{}{CONTEXT_MARK}{}{SUFFIX}",
        p.entity1_description,
        p.entity2_description,
        p.relationship_type,
        format_score(p.interestingness_score),
        context,
    )
}

/// Fields recovered from a prompt built by [`build_prompt`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedPrompt {
    pub entity1_description: String,
    pub entity2_description: String,
    pub relationship_type: String,
    pub score_text: String,
    pub user_context_description: String,
}

fn balanced(s: &str) -> bool {
    let mut depth = 0i32;
    for c in s.chars() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return false;
                }
            }
            _ => {}
        }
    }
    depth == 0
}

/// Split "A and B". Descriptions look like "Label (type, occupation)", so a
/// split right after a closing parenthesis with balanced halves wins, then
/// any balanced split, then the first occurrence.
fn split_pair(pair: &str) -> Option<(String, String)> {
    let splits: Vec<usize> = pair.match_indices(" and ").map(|(i, _)| i).collect();
    let is_balanced = |i: usize| balanced(&pair[..i]) && balanced(&pair[i + 5..]);
    let pick = splits
        .iter()
        .copied()
        .find(|&i| is_balanced(i) && pair[..i].ends_with(')'))
        .or_else(|| splits.iter().copied().find(|&i| is_balanced(i)))
        .or_else(|| splits.first().copied())?;
    Some((pair[..pick].to_string(), pair[pick + 5..].to_string()))
}

pub fn parse_prompt(prompt: &str) -> Result<ParsedPrompt, ExplainError> {
    let bad = |what: &str| ExplainError::PromptMismatch(what.to_string());
    let body = prompt.strip_prefix(PREFIX).ok_or_else(|| bad("missing opening instruction"))?;
    let body = body.strip_suffix(SUFFIX).ok_or_else(|| bad("missing closing instruction"))?;
    let (pair, rest) = body.split_once(TYPE_MARK).ok_or_else(|| bad("missing relationship type line"))?;
    let (relationship_type, rest) = rest.split_once(SCORE_MARK).ok_or_else(|| bad("missing score line"))?;
    let (score_text, context) = rest.split_once(CONTEXT_MARK).ok_or_else(|| bad("missing user context line"))?;
    let (e1, e2) = split_pair(pair).ok_or_else(|| bad("entities are not joined by ' and '"))?;
    if score_text.parse::<f64>().is_err() {
        return Err(bad("score is not a number"));
    }
    Ok(ParsedPrompt {
        entity1_description: e1,
        entity2_description: e2,
        relationship_type: relationship_type.to_string(),
        score_text: score_text.to_string(),
        user_context_description: context.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input() -> PromptInput {
        PromptInput {
            entity1_description: "Vincent van Gogh (human, painter)".into(),
            entity2_description: "Zundert (municipality)".into(),
            relationship_type: "born_in".into(),
            interestingness_score: 0.5,
            user_context_description: "dutch painters".into(),
        }
    }

    #[test]
    fn full_prompt_text() {
        let expected = "Generate a natural language explanation that connects Vincent van Gogh (human, painter) and Zundert (municipality).\n\
The relationship type is born_in.\n\
The interestingness score is: 0.5000.\n\
The user context is: dutch painters.\n\
Explain this relationship in a way that reflects its interestingness, and the user context. Be specific, and avoid generic statements that could apply to other entities.";
        assert_eq!(build_prompt(&input()), expected);
    }

    #[test]
    fn score_rendering() {
        assert_eq!(format_score(0.5), "0.5000");
        assert_eq!(format_score(-0.123456), "-0.1235");
        assert_eq!(format_score(-0.00001), "0.0000");
    }

    #[test]
    fn parse_round_trip() {
        let parsed = parse_prompt(&build_prompt(&input())).unwrap();
        assert_eq!(parsed.entity1_description, "Vincent van Gogh (human, painter)");
        assert_eq!(parsed.entity2_description, "Zundert (municipality)");
        assert_eq!(parsed.relationship_type, "born_in");
        assert_eq!(parsed.score_text, "0.5000");
        assert_eq!(parsed.user_context_description, "dutch painters");
    }

    #[test]
    fn and_inside_description() {
        let mut p = input();
        p.entity1_description = "Peter and Paul Fortress (fortress, museum and landmark)".into();
        let parsed = parse_prompt(&build_prompt(&p)).unwrap();
        assert_eq!(parsed.entity1_description, p.entity1_description);
        assert_eq!(parsed.entity2_description, p.entity2_description);
    }

    #[test]
    fn multi_line_context() {
        let mut p = input();
        p.user_context_description = "starry night\nart history student".into();
        let parsed = parse_prompt(&build_prompt(&p)).unwrap();
        assert_eq!(parsed.user_context_description, "starry night\nart history student");
    }

    #[test]
    fn rejects_foreign_prompts() {
        assert!(parse_prompt("Tell me a joke").is_err());
    }
}
