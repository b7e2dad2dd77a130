//! Chat-completion boundary.
//!
//! [`ChatProvider`] is the only way the crew talks to a model. Two
//! implementations ship: [`HttpProvider`] for an OpenAI-style endpoint and
//! [`ReplayProvider`], which serves a recorded `transcript.jsonl` and has no
//! transport at all. Both append every call to a shared [`Transcript`].

mod http;
mod json;
mod replay;

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use http::HttpProvider;
pub use json::{extract_json, NoJsonFound};
pub use replay::ReplayProvider;

pub const DEFAULT_MODEL: &str = "gpt-4o-2024-05-13";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";
pub const DEFAULT_API_KEY_ENV: &str = "FILMCREW_API_KEY";
pub const DEFAULT_TEMPERATURE: f64 = 0.2;
pub const DEFAULT_JSON_ATTEMPTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderCallRecord {
    pub call_index: u64,
    pub agent_tag: String,
    pub request: Vec<ChatMessage>,
    pub response: String,
    /// Seconds.
    pub latency: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub base_url: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub timeout_seconds: f64,
    pub api_key_env_var: String,
    /// First backoff delay; doubles on each retry.
    pub backoff_ms: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            base_url: DEFAULT_BASE_URL.into(),
            model_name: DEFAULT_MODEL.into(),
            temperature: DEFAULT_TEMPERATURE,
            max_retries: 3,
            timeout_seconds: 120.0,
            api_key_env_var: DEFAULT_API_KEY_ENV.into(),
            backoff_ms: 500,
        }
    }
}

impl ProviderConfig {
    pub fn check(&self) -> Result<(), ProviderError> {
        if self.timeout_seconds.is_nan() || self.timeout_seconds <= 0.0 {
            return Err(ProviderError::Config("timeout must be positive".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ProviderError::Config(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProviderError {
    #[error("request has no messages")]
    EmptyRequest,
    #[error("message {index} has empty content")]
    EmptyMessage { index: usize },
    #[error("transport failed after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("provider returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("replay fixture has no more responses for agent {agent_tag:?}")]
    ReplayExhausted { agent_tag: String },
    #[error("recorded call for {agent_tag:?} failed: {message}")]
    Replayed { agent_tag: String, message: String },
    #[error("no usable JSON after {attempts} attempts: {last_error}")]
    SchemaRetriesExhausted {
        attempts: usize,
        last_error: String,
        last_raw: String,
    },
    #[error("invalid provider config: {0}")]
    Config(String),
    #[error("transcript {path}: {message}")]
    Transcript { path: PathBuf, message: String },
}

fn check_messages(messages: &[ChatMessage]) -> Result<(), ProviderError> {
    if messages.is_empty() {
        return Err(ProviderError::EmptyRequest);
    }
    if let Some(index) = messages.iter().position(|m| m.content.trim().is_empty()) {
        return Err(ProviderError::EmptyMessage { index });
    }
    Ok(())
}

struct TranscriptInner {
    records: Vec<ProviderCallRecord>,
    sink: Option<(PathBuf, File)>,
}

/// Append-only call log shared by a provider and its callers.
///
/// Cloning is cheap and every clone appends to the same log. When attached
/// to a file each record is written as one JSON line as soon as it lands.
#[derive(Clone)]
pub struct Transcript {
    inner: Arc<Mutex<TranscriptInner>>,
}

impl Default for Transcript {
    fn default() -> Self {
        Transcript::in_memory()
    }
}

impl Transcript {
    pub fn in_memory() -> Self {
        Transcript {
            inner: Arc::new(Mutex::new(TranscriptInner {
                records: Vec::new(),
                sink: None,
            })),
        }
    }

    /// Appends to `path`, keeping any records already in it so a resumed
    /// run continues the numbering.
    pub fn open(path: &Path) -> Result<Self, ProviderError> {
        let records = if path.exists() {
            read_records(path)?
        } else {
            Vec::new()
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| ProviderError::Transcript {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        Ok(Transcript {
            inner: Arc::new(Mutex::new(TranscriptInner {
                records,
                sink: Some((path.to_path_buf(), file)),
            })),
        })
    }

    /// Appends a record, assigning the next call index.
    pub fn append(
        &self,
        agent_tag: &str,
        request: &[ChatMessage],
        response: &str,
        latency: f64,
        error: Option<String>,
    ) -> Result<u64, ProviderError> {
        let mut inner = self.inner.lock().expect("transcript lock poisoned");
        let record = ProviderCallRecord {
            call_index: inner.records.len() as u64,
            agent_tag: agent_tag.to_string(),
            request: request.to_vec(),
            response: response.to_string(),
            latency,
            error,
        };
        if let Some((path, file)) = inner.sink.as_mut() {
            let line = serde_json::to_string(&record).expect("record serializes");
            writeln!(file, "{line}")
                .and_then(|_| file.flush())
                .map_err(|e| ProviderError::Transcript {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
        }
        let index = record.call_index;
        inner.records.push(record);
        Ok(index)
    }

    pub fn records(&self) -> Vec<ProviderCallRecord> {
        self.inner.lock().expect("transcript lock poisoned").records.clone()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("transcript lock poisoned").records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of recorded calls per agent tag.
    pub fn counts(&self) -> std::collections::BTreeMap<String, usize> {
        let mut out = std::collections::BTreeMap::new();
        for r in &self.inner.lock().expect("transcript lock poisoned").records {
            *out.entry(r.agent_tag.clone()).or_insert(0) += 1;
        }
        out
    }
}

/// Reads a `transcript.jsonl` file. Blank lines are skipped.
pub fn read_records(path: &Path) -> Result<Vec<ProviderCallRecord>, ProviderError> {
    let err = |message: String| ProviderError::Transcript {
        path: path.to_path_buf(),
        message,
    };
    let file = File::open(path).map_err(|e| err(e.to_string()))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ProviderCallRecord =
            serde_json::from_str(&line).map_err(|e| err(format!("line {}: {e}", n + 1)))?;
        out.push(record);
    }
    Ok(out)
}

pub trait ChatProvider: Send + Sync {
    /// Sends one chat request on behalf of `agent_tag` and returns the
    /// assistant text.
    fn complete(&self, agent_tag: &str, messages: &[ChatMessage]) -> Result<String, ProviderError>;

    fn model_name(&self) -> &str;

    fn transcript(&self) -> &Transcript;
}

/// Calls the provider until the reply contains JSON that passes `check`.
///
/// A failed attempt is echoed back to the model as a user message so it
/// can correct itself. Every attempt is a separate provider call.
pub fn complete_json(
    provider: &dyn ChatProvider,
    agent_tag: &str,
    messages: &[ChatMessage],
    check: &dyn Fn(&Value) -> Result<(), String>,
    attempts: usize,
) -> Result<Value, ProviderError> {
    let attempts = attempts.max(1);
    let mut conversation = messages.to_vec();
    let mut last_error = String::new();
    let mut last_raw = String::new();
    for attempt in 1..=attempts {
        let raw = provider.complete(agent_tag, &conversation)?;
        let problem = match extract_json(&raw) {
            Ok(doc) => match check(&doc) {
                Ok(()) => return Ok(doc),
                Err(e) => e,
            },
            Err(e) => e.to_string(),
        };
        tracing::warn!(agent = agent_tag, attempt, "unusable reply: {problem}");
        if attempt < attempts {
            conversation.push(ChatMessage::assistant(if raw.trim().is_empty() {
                "(empty reply)".to_string()
            } else {
                raw.clone()
            }));
            conversation.push(ChatMessage::user(format!(
                "Your previous reply could not be used: {problem}. Reply again with only the JSON content in the required format."
            )));
        }
        last_error = problem;
        last_raw = raw;
    }
    Err(ProviderError::SchemaRetriesExhausted {
        attempts,
        last_error,
        last_raw,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scripted(responses: &[&str]) -> ReplayProvider {
        ReplayProvider::from_records(
            responses
                .iter()
                .enumerate()
                .map(|(i, r)| ProviderCallRecord {
                    call_index: i as u64,
                    agent_tag: "director".into(),
                    request: vec![ChatMessage::user("q")],
                    response: r.to_string(),
                    latency: 0.0,
                    error: None,
                })
                .collect(),
        )
    }

    fn has_a(v: &Value) -> Result<(), String> {
        v.get("a").map(|_| ()).ok_or_else(|| "missing key \"a\"".into())
    }

    #[test]
    fn first_valid_reply_is_one_call() {
        let p = scripted(&[r#"{"a": 1}"#]);
        let v = complete_json(&p, "director", &[ChatMessage::user("go")], &has_a, 3).unwrap();
        assert_eq!(v["a"], 1);
        assert_eq!(p.transcript().len(), 1);
    }

    #[test]
    fn fenced_reply_is_absorbed() {
        let p = scripted(&["```json\n{\"a\": 2}\n```"]);
        let v = complete_json(&p, "director", &[ChatMessage::user("go")], &has_a, 3).unwrap();
        assert_eq!(v["a"], 2);
        assert_eq!(p.transcript().len(), 1);
    }

    #[test]
    fn third_attempt_wins_and_errors_are_echoed() {
        let p = scripted(&["no json", r#"{"b": 1}"#, r#"{"a": 3}"#]);
        let v = complete_json(&p, "director", &[ChatMessage::user("go")], &has_a, 3).unwrap();
        assert_eq!(v["a"], 3);
        let records = p.transcript().records();
        assert_eq!(records.len(), 3);
        assert_eq!(records[2].request.len(), 5);
        assert!(records[2].request[4].content.contains("missing key"));
    }

    #[test]
    fn exhausted_attempts_carry_the_last_raw_text() {
        let p = scripted(&["nope", "still nope"]);
        match complete_json(&p, "director", &[ChatMessage::user("go")], &has_a, 2) {
            Err(ProviderError::SchemaRetriesExhausted { last_raw, attempts, .. }) => {
                assert_eq!(last_raw, "still nope");
                assert_eq!(attempts, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_request_is_rejected() {
        let p = scripted(&["x"]);
        assert!(matches!(p.complete("director", &[]), Err(ProviderError::EmptyRequest)));
    }

    #[test]
    fn file_transcript_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("transcript.jsonl");
        let t = Transcript::open(&path).unwrap();
        t.append("a", &[ChatMessage::user("hi")], "yo", 0.5, None).unwrap();
        t.append("b", &[ChatMessage::user("hi")], "", 0.1, Some("boom".into())).unwrap();
        let back = read_records(&path).unwrap();
        assert_eq!(back, t.records());
        let reopened = Transcript::open(&path).unwrap();
        assert_eq!(reopened.append("a", &[ChatMessage::user("x")], "z", 0.0, None).unwrap(), 2);
    }
}
