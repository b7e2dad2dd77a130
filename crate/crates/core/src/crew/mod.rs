//! The film crew: director, screenwriter, actors and cinematographers as
//! prompt-templated wrappers over a [`ChatProvider`].

mod templates;

use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::provider::{complete_json, ChatMessage, ChatProvider, ProviderError, DEFAULT_JSON_ATTEMPTS};
use crate::script::CharacterProfile;

pub use templates::{
    default_templates_dir, placeholders, PromptTemplate, TemplateError, TemplateSet, FRAGMENTS,
    TEMPLATE_IDS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Director,
    Screenwriter,
    Actor,
    Cinematographer,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Director => "director",
            Role::Screenwriter => "screenwriter",
            Role::Actor => "actor",
            Role::Cinematographer => "cinematographer",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleAgent {
    pub role: Role,
    /// Unique per run; also the replay key.
    pub tag: String,
    /// The character an actor plays. Always `None` for other roles.
    pub character: Option<CharacterProfile>,
}

impl RoleAgent {
    pub fn director() -> Self {
        RoleAgent {
            role: Role::Director,
            tag: "director".into(),
            character: None,
        }
    }

    pub fn screenwriter() -> Self {
        RoleAgent {
            role: Role::Screenwriter,
            tag: "screenwriter".into(),
            character: None,
        }
    }

    pub fn actor(profile: CharacterProfile) -> Self {
        RoleAgent {
            role: Role::Actor,
            tag: format!("actor-{}", profile.name),
            character: Some(profile),
        }
    }

    /// `n` is 1 or 2.
    pub fn cinematographer(n: usize) -> Self {
        RoleAgent {
            role: Role::Cinematographer,
            tag: format!("cinematographer-{n}"),
            character: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CrewErrorKind {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("constraint violated at {field}: {message}")]
    Constraint { field: String, message: String },
}

#[derive(Debug, thiserror::Error)]
#[error("{role} {tag:?} with template {template}: {kind}")]
pub struct CrewError {
    pub role: Role,
    pub tag: String,
    pub template: String,
    #[source]
    pub kind: CrewErrorKind,
}

/// A semantic check failure: which field, and why.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

pub type Vars = BTreeMap<String, Value>;

/// Builds a variable map from `(name, value)` pairs.
pub fn vars<const N: usize>(pairs: [(&str, Value); N]) -> Vars {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Provider plus prompt templates; agents themselves are stateless.
#[derive(Clone)]
pub struct Crew {
    provider: Arc<dyn ChatProvider>,
    templates: Arc<TemplateSet>,
    json_attempts: usize,
}

impl Crew {
    pub fn new(provider: Arc<dyn ChatProvider>, templates: Arc<TemplateSet>) -> Self {
        Crew {
            provider,
            templates,
            json_attempts: DEFAULT_JSON_ATTEMPTS,
        }
    }

    pub fn with_json_attempts(mut self, attempts: usize) -> Self {
        self.json_attempts = attempts.max(1);
        self
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    pub fn provider(&self) -> &dyn ChatProvider {
        self.provider.as_ref()
    }

    /// Renders a template, asks the model, and returns the reply once it
    /// passes the template's response schema.
    pub fn invoke(&self, agent: &RoleAgent, template_id: &str, vars: &Vars) -> Result<Value, CrewError> {
        self.invoke_checked(agent, template_id, vars, &|_| Ok(()), 0)
    }

    /// Like [`Crew::invoke`], with an extra semantic check. A reply that is
    /// well-formed but fails `semantic` is sent back up to `semantic_retries`
    /// times; after that the failure is a `Constraint` error.
    pub fn invoke_checked(
        &self,
        agent: &RoleAgent,
        template_id: &str,
        vars: &Vars,
        semantic: &dyn Fn(&Value) -> Result<(), Violation>,
        semantic_retries: usize,
    ) -> Result<Value, CrewError> {
        let wrap = |kind: CrewErrorKind| CrewError {
            role: agent.role,
            tag: agent.tag.clone(),
            template: template_id.to_string(),
            kind,
        };
        let template = self.templates.get(template_id).map_err(|e| wrap(e.into()))?;
        let prompt = template.render(vars).map_err(|e| wrap(e.into()))?;
        let semantic_failures = Cell::new(0);
        let check = |doc: &Value| -> Result<(), String> {
            template.check(doc)?;
            if let Err(v) = semantic(doc) {
                if semantic_failures.get() < semantic_retries {
                    semantic_failures.set(semantic_failures.get() + 1);
                    return Err(v.to_string());
                }
            }
            Ok(())
        };
        let doc = complete_json(
            self.provider.as_ref(),
            &agent.tag,
            &[ChatMessage::user(prompt)],
            &check,
            self.json_attempts,
        )
        .map_err(|e| wrap(e.into()))?;
        semantic(&doc).map_err(|v| {
            wrap(CrewErrorKind::Constraint {
                field: v.field,
                message: v.message,
            })
        })?;
        Ok(doc)
    }
}

/// Reads a `"True"` / `"False"` flag (or a JSON boolean).
pub fn truthy(v: Option<&Value>) -> bool {
    match v {
        Some(Value::Bool(b)) => *b,
        Some(Value::String(s)) => s.trim().eq_ignore_ascii_case("true"),
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActorNote {
    pub speaker: String,
    pub content: String,
    pub feedback: String,
}

/// Keeps an actor's notes that are about their own lines, i.e. whose
/// speaker is the actor and whose content matches one of their lines.
pub fn own_lines_only(
    character: &str,
    notes: &Value,
    lines_by_speaker: &BTreeMap<String, BTreeSet<String>>,
) -> Vec<ActorNote> {
    let notes: Vec<ActorNote> = serde_json::from_value(notes.clone()).unwrap_or_default();
    let own = lines_by_speaker.get(character);
    notes
        .into_iter()
        .filter(|n| {
            let keep = n.speaker == character
                && own.is_some_and(|lines| lines.contains(n.content.trim()));
            if !keep {
                tracing::warn!(actor = character, speaker = %n.speaker, "dropping feedback on a line the actor does not speak");
            }
            keep
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::{ProviderCallRecord, ReplayProvider};
    use serde_json::json;

    fn crew(responses: &[(&str, &str)]) -> Crew {
        let records = responses
            .iter()
            .enumerate()
            .map(|(i, (tag, r))| ProviderCallRecord {
                call_index: i as u64,
                agent_tag: tag.to_string(),
                request: vec![],
                response: r.to_string(),
                latency: 0.0,
                error: None,
            })
            .collect();
        Crew::new(
            Arc::new(ReplayProvider::from_records(records)),
            Arc::new(TemplateSet::load(&default_templates_dir()).unwrap()),
        )
    }

    #[test]
    fn director_profiles_are_schema_checked() {
        let c = crew(&[
            ("director", "[{\"name\": \"Mia\"}]"),
            (
                "director",
                r#"[{"name": "Mia", "age": "28", "gender": "female", "occupation": "nurse",
                     "personality traits": "direct", "speaking style": "blunt"}]"#,
            ),
        ]);
        let v = c
            .invoke(&RoleAgent::director(), "plan_1", &vars([("topic", json!("t"))]))
            .unwrap();
        assert_eq!(v[0]["name"], "Mia");
        assert_eq!(c.provider().transcript().len(), 2);
    }

    #[test]
    fn semantic_violation_gets_exactly_one_retry() {
        let bad = r#"{"better": "1"}"#;
        let c = crew(&[("director", bad), ("director", bad), ("director", bad)]);
        let never = |_: &Value| -> Result<(), Violation> {
            Err(Violation {
                field: "better".into(),
                message: "no".into(),
            })
        };
        let vars = vars([
            ("final_script", json!("s")),
            ("peer_annotation_1", json!("a")),
            ("peer_annotation_2", json!("b")),
            ("shot_list", json!("l")),
            ("shot_annotation_requirements", json!("r")),
        ]);
        let err = c
            .invoke_checked(&RoleAgent::director(), "judge", &vars, &never, 1)
            .unwrap_err();
        assert!(matches!(err.kind, CrewErrorKind::Constraint { .. }));
        assert_eq!(c.provider().transcript().len(), 2);
    }

    #[test]
    fn missing_variable_is_tagged() {
        let c = crew(&[]);
        let err = c.invoke(&RoleAgent::director(), "plan_1", &Vars::new()).unwrap_err();
        assert_eq!(err.template, "plan_1");
        assert!(matches!(err.kind, CrewErrorKind::Template(TemplateError::MissingVariable(_))));
    }

    #[test]
    fn actor_notes_on_other_lines_are_dropped() {
        let lines = BTreeMap::from([
            ("Dana".to_string(), BTreeSet::from(["Oh, I see.".to_string()])),
            ("Mike".to_string(), BTreeSet::from(["It was hard.".to_string()])),
        ]);
        let notes = json!([
            {"speaker": "Dana", "content": "Oh, I see.", "feedback": "warmer"},
            {"speaker": "Mike", "content": "It was hard.", "feedback": "sadder"},
            {"speaker": "Dana", "content": "Not a line.", "feedback": "?"}
        ]);
        let kept = own_lines_only("Dana", &notes, &lines);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].feedback, "warmer");
    }

    #[test]
    fn flags() {
        assert!(truthy(Some(&json!("True"))));
        assert!(truthy(Some(&json!(true))));
        assert!(!truthy(Some(&json!("False"))));
        assert!(!truthy(None));
    }
}
