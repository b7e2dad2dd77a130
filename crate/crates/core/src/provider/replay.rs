use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::Path;
use std::sync::Mutex;

use super::{
    check_messages, read_records, ChatMessage, ChatProvider, ProviderCallRecord, ProviderError,
    Transcript,
};

/// Serves recorded responses, one queue per agent tag.
///
/// Calls are matched by `agent_tag` and per-tag order only, so agents that
/// run concurrently still get their own responses back. The request text is
/// not compared; a fixture keeps working when a prompt template is edited.
pub struct ReplayProvider {
    queues: Mutex<HashMap<String, VecDeque<ProviderCallRecord>>>,
    model_name: String,
    transcript: Transcript,
}

impl ReplayProvider {
    pub fn from_records(records: Vec<ProviderCallRecord>) -> Self {
        let mut queues: HashMap<String, VecDeque<ProviderCallRecord>> = HashMap::new();
        let mut records = records;
        records.sort_by_key(|r| r.call_index);
        for r in records {
            queues.entry(r.agent_tag.clone()).or_default().push_back(r);
        }
        ReplayProvider {
            queues: Mutex::new(queues),
            model_name: "replay".into(),
            transcript: Transcript::in_memory(),
        }
    }

    /// Loads a `transcript.jsonl` file, or a directory containing one.
    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let file = if path.is_dir() {
            path.join("transcript.jsonl")
        } else {
            path.to_path_buf()
        };
        Ok(Self::from_records(read_records(&file)?))
    }

    pub fn with_transcript(mut self, transcript: Transcript) -> Self {
        self.transcript = transcript;
        self
    }

    pub fn with_model_name(mut self, name: impl Into<String>) -> Self {
        self.model_name = name.into();
        self
    }

    /// Drops responses that an earlier, interrupted run already consumed.
    pub fn skip(&self, consumed: &BTreeMap<String, usize>) {
        let mut queues = self.queues.lock().expect("replay lock poisoned");
        for (tag, n) in consumed {
            if let Some(q) = queues.get_mut(tag) {
                for _ in 0..(*n).min(q.len()) {
                    q.pop_front();
                }
            }
        }
    }

    /// Responses left per tag.
    pub fn remaining(&self) -> BTreeMap<String, usize> {
        self.queues
            .lock()
            .expect("replay lock poisoned")
            .iter()
            .filter(|(_, q)| !q.is_empty())
            .map(|(t, q)| (t.clone(), q.len()))
            .collect()
    }
}

impl ChatProvider for ReplayProvider {
    fn complete(&self, agent_tag: &str, messages: &[ChatMessage]) -> Result<String, ProviderError> {
        check_messages(messages)?;
        let next = self
            .queues
            .lock()
            .expect("replay lock poisoned")
            .get_mut(agent_tag)
            .and_then(VecDeque::pop_front);
        let Some(record) = next else {
            return Err(ProviderError::ReplayExhausted {
                agent_tag: agent_tag.to_string(),
            });
        };
        self.transcript.append(
            agent_tag,
            messages,
            &record.response,
            record.latency,
            record.error.clone(),
        )?;
        match record.error {
            Some(message) => Err(ProviderError::Replayed {
                agent_tag: agent_tag.to_string(),
                message,
            }),
            None => Ok(record.response),
        }
    }

    fn model_name(&self) -> &str {
        &self.model_name
    }

    fn transcript(&self) -> &Transcript {
        &self.transcript
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(i: u64, tag: &str, response: &str) -> ProviderCallRecord {
        ProviderCallRecord {
            call_index: i,
            agent_tag: tag.into(),
            request: vec![ChatMessage::user("q")],
            response: response.into(),
            latency: 0.25,
            error: None,
        }
    }

    #[test]
    fn single_record_replays_at_index_zero() {
        let p = ReplayProvider::from_records(vec![record(0, "director", "hello")]);
        assert_eq!(p.complete("director", &[ChatMessage::user("x")]).unwrap(), "hello");
        let r = p.transcript().records();
        assert_eq!(r[0].call_index, 0);
        assert_eq!(r[0].latency, 0.25);
    }

    #[test]
    fn exhaustion_names_the_tag() {
        let p = ReplayProvider::from_records(vec![record(0, "director", "hello")]);
        p.complete("director", &[ChatMessage::user("x")]).unwrap();
        match p.complete("director", &[ChatMessage::user("x")]) {
            Err(ProviderError::ReplayExhausted { agent_tag }) => assert_eq!(agent_tag, "director"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            p.complete("actor-Mia", &[ChatMessage::user("x")]),
            Err(ProviderError::ReplayExhausted { .. })
        ));
    }

    #[test]
    fn tags_are_served_independently() {
        let p = ReplayProvider::from_records(vec![
            record(0, "cinematographer-1", "one-a"),
            record(1, "cinematographer-2", "two-a"),
            record(2, "cinematographer-1", "one-b"),
        ]);
        let m = [ChatMessage::user("x")];
        assert_eq!(p.complete("cinematographer-2", &m).unwrap(), "two-a");
        assert_eq!(p.complete("cinematographer-1", &m).unwrap(), "one-a");
        assert_eq!(p.complete("cinematographer-1", &m).unwrap(), "one-b");
    }

    #[test]
    fn skip_advances_cursors() {
        let p = ReplayProvider::from_records(vec![record(0, "a", "1"), record(1, "a", "2")]);
        p.skip(&BTreeMap::from([("a".to_string(), 1)]));
        assert_eq!(p.complete("a", &[ChatMessage::user("x")]).unwrap(), "2");
        assert!(p.remaining().is_empty());
    }
}
