use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::{check_messages, ChatMessage, ChatProvider, ProviderConfig, ProviderError, Transcript};

const BODY_EXCERPT: usize = 300;

/// OpenAI-style `/chat/completions` client.
pub struct HttpProvider {
    config: ProviderConfig,
    api_key: String,
    agent: ureq::Agent,
    transcript: Transcript,
}

enum Attempt {
    Done(String),
    Retry(String),
    Fatal(ProviderError),
}

impl HttpProvider {
    /// Reads the API key from the configured environment variable.
    pub fn new(config: ProviderConfig, transcript: Transcript) -> Result<Self, ProviderError> {
        let key = std::env::var(&config.api_key_env_var).unwrap_or_default();
        if key.trim().is_empty() {
            return Err(ProviderError::Auth(format!(
                "environment variable {} is not set",
                config.api_key_env_var
            )));
        }
        Self::with_api_key(config, key, transcript)
    }

    pub fn with_api_key(
        config: ProviderConfig,
        api_key: String,
        transcript: Transcript,
    ) -> Result<Self, ProviderError> {
        config.check()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_seconds)))
            .build()
            .into();
        Ok(HttpProvider {
            config,
            api_key,
            agent,
            transcript,
        })
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn attempt(&self, body: &Value) -> Attempt {
        let response = self
            .agent
            .post(&self.endpoint())
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body);
        let mut response = match response {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = response.status().as_u16();
        let text = match response.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let excerpt: String = text.chars().take(BODY_EXCERPT).collect();
        match status {
            200..=299 => match parse_completion(&text) {
                Ok(content) => Attempt::Done(content),
                Err(e) => Attempt::Fatal(e),
            },
            401 | 403 => Attempt::Fatal(ProviderError::Auth(format!("status {status}: {excerpt}"))),
            429 | 500..=599 => Attempt::Retry(format!("status {status}: {excerpt}")),
            _ => Attempt::Fatal(ProviderError::Status {
                status,
                body: excerpt,
            }),
        }
    }
}

fn parse_completion(text: &str) -> Result<String, ProviderError> {
    let v: Value = serde_json::from_str(text).map_err(|e| ProviderError::Malformed(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| ProviderError::Malformed("no choices[0].message.content".into()))
}

impl ChatProvider for HttpProvider {
    fn complete(&self, agent_tag: &str, messages: &[ChatMessage]) -> Result<String, ProviderError> {
        check_messages(messages)?;
        let body = json!({
            "model": self.config.model_name,
            "temperature": self.config.temperature,
            "messages": messages,
        });
        let start = Instant::now();
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut attempts = 0;
        let outcome = loop {
            attempts += 1;
            match self.attempt(&body) {
                Attempt::Done(text) => break Ok(text),
                Attempt::Fatal(e) => break Err(e),
                Attempt::Retry(message) if attempts > self.config.max_retries => {
                    break Err(ProviderError::Transport { attempts, message })
                }
                Attempt::Retry(message) => {
                    tracing::warn!(agent = agent_tag, attempts, "retrying: {message}");
                    std::thread::sleep(delay);
                    delay *= 2;
                }
            }
        };
        let latency = start.elapsed().as_secs_f64();
        match &outcome {
            Ok(text) => self.transcript.append(agent_tag, messages, text, latency, None)?,
            Err(e) => self
                .transcript
                .append(agent_tag, messages, "", latency, Some(e.to_string()))?,
        };
        outcome
    }

    fn model_name(&self) -> &str {
        &self.config.model_name
    }

    fn transcript(&self) -> &Transcript {
        &self.transcript
    }
}
