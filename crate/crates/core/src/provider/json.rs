//! Pulls a JSON document out of chatty model output.

use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no JSON value found in model output ({excerpt:?})")]
pub struct NoJsonFound {
    pub excerpt: String,
}

/// Finds and parses the first JSON object or array in `raw`.
///
/// Handles Markdown code fences, prose before and after the document, and
/// trailing commas. Candidates are tried in order of appearance: fenced
/// blocks first, then every balanced `{...}` / `[...]` span.
pub fn extract_json(raw: &str) -> Result<Value, NoJsonFound> {
    let trimmed = raw.trim().trim_start_matches('\u{feff}');
    if let Some(v) = parse_lenient(trimmed) {
        if v.is_object() || v.is_array() {
            return Ok(v);
        }
    }
    for block in fenced_blocks(trimmed) {
        if let Some(v) = first_balanced(block) {
            return Ok(v);
        }
    }
    first_balanced(trimmed).ok_or_else(|| NoJsonFound {
        excerpt: trimmed.chars().take(60).collect(),
    })
}

fn parse_lenient(text: &str) -> Option<Value> {
    serde_json::from_str(text)
        .ok()
        .or_else(|| serde_json::from_str(&strip_trailing_commas(text)).ok())
}

/// Bodies of ``` fenced blocks; an unterminated fence runs to the end.
fn fenced_blocks(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        // Skip the info string (e.g. `json`) on the opening line.
        let body_start = after.find('\n').map_or(after.len(), |i| i + 1);
        let body = &after[body_start..];
        match body.find("```") {
            Some(close) => {
                out.push(&body[..close]);
                rest = &body[close + 3..];
            }
            None => {
                out.push(body);
                break;
            }
        }
    }
    out
}

fn first_balanced(text: &str) -> Option<Value> {
    let bytes = text.as_bytes();
    for (start, &b) in bytes.iter().enumerate() {
        if b != b'{' && b != b'[' {
            continue;
        }
        if let Some(end) = balanced_end(&bytes[start..]) {
            if let Some(v) = parse_lenient(&text[start..start + end]) {
                return Some(v);
            }
        }
    }
    None
}

/// Length of the bracketed span starting at `bytes[0]`, honoring strings.
fn balanced_end(bytes: &[u8]) -> Option<usize> {
    let mut stack = Vec::new();
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate() {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => stack.push(b'}'),
            b'[' => stack.push(b']'),
            b'}' | b']' => {
                if stack.pop() != Some(b) {
                    return None;
                }
                if stack.is_empty() {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

fn strip_trailing_commas(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut in_string = false;
    let mut escaped = false;
    for (i, &c) in chars.iter().enumerate() {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            out.push(c);
            continue;
        }
        if c == '"' {
            in_string = true;
        }
        if c == ',' {
            let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
            if matches!(next, Some('}') | Some(']')) {
                continue;
            }
        }
        out.push(c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn fences() {
        assert_eq!(extract_json("```json\n{\"a\":1}\n```").unwrap(), json!({"a": 1}));
    }

    #[test]
    fn prose_prefix() {
        assert_eq!(
            extract_json("Sure! Here is the plan: [{\"name\":\"Dana\"}]").unwrap(),
            json!([{"name": "Dana"}])
        );
    }

    #[test]
    fn negative() {
        assert!(extract_json("no json here").is_err());
    }

    #[test]
    fn trailing_commas_outside_strings_only() {
        assert_eq!(
            extract_json("{\"a\": \"x,}\", \"b\": [1, 2,],}").unwrap(),
            json!({"a": "x,}", "b": [1, 2]})
        );
    }

    #[test]
    fn braces_in_strings_do_not_unbalance() {
        assert_eq!(
            extract_json("ok: {\"c\": \"}{\\\"\"} done").unwrap(),
            json!({"c": "}{\""})
        );
    }

    #[test]
    fn skips_unparseable_bracket_noise() {
        assert_eq!(
            extract_json("see [note here] then {\"k\": true}").unwrap(),
            json!({"k": true})
        );
    }
}
