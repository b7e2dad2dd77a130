use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use regex::Regex;
use serde::Deserialize;
use serde_json::Value;

use super::Role;

/// Template ids in pipeline order.
pub const TEMPLATE_IDS: [&str; 15] = [
    "plan_1",
    "plan_2",
    "script_1",
    "script_2",
    "script_3",
    "script_4",
    "director_feedback",
    "writer_correct",
    "director_verify",
    "actor_feedback",
    "director_filter",
    "director_verify_2",
    "cinema",
    "debate",
    "judge",
];

/// Shared text blocks some templates reference by placeholder.
pub const FRAGMENTS: [&str; 3] = ["action_list", "shot_list", "shot_annotation_requirements"];

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([a-z_0-9]+)\}").expect("static regex"))
}

/// Placeholder names in `body`, sorted and deduplicated.
pub fn placeholders(body: &str) -> BTreeSet<String> {
    placeholder_re()
        .captures_iter(body)
        .map(|c| c[1].to_string())
        .collect()
}

#[derive(Debug, thiserror::Error)]
pub enum TemplateError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("template {id}: {message}")]
    Descriptor { id: String, message: String },
    #[error("template {id}: placeholders {body:?} do not match required_vars {declared:?}")]
    PlaceholderMismatch {
        id: String,
        body: BTreeSet<String>,
        declared: BTreeSet<String>,
    },
    #[error("unknown template {0:?}")]
    Unknown(String),
    #[error("missing variable {0:?}")]
    MissingVariable(String),
}

#[derive(Debug, Deserialize)]
struct Descriptor {
    id: String,
    source: String,
    role: Role,
    stage: String,
    description: String,
    required_vars: Vec<String>,
    response: Value,
}

#[derive(Debug)]
pub struct PromptTemplate {
    pub id: String,
    /// Label of the prompt this template was transcribed from.
    pub source: String,
    pub role: Role,
    pub stage: String,
    pub description: String,
    pub body: String,
    pub required_vars: Vec<String>,
    /// JSON Schema the reply must satisfy.
    pub response_schema: Value,
    validator: jsonschema::Validator,
}

impl PromptTemplate {
    pub fn new(
        id: &str,
        body: &str,
        required_vars: Vec<String>,
        response_schema: Value,
    ) -> Result<Self, TemplateError> {
        Self::build(Descriptor {
            id: id.into(),
            source: id.into(),
            role: Role::Director,
            stage: String::new(),
            description: String::new(),
            required_vars,
            response: response_schema,
        }, body.into())
    }

    fn build(d: Descriptor, body: String) -> Result<Self, TemplateError> {
        let found = placeholders(&body);
        let declared: BTreeSet<String> = d.required_vars.iter().cloned().collect();
        if found != declared || declared.len() != d.required_vars.len() {
            return Err(TemplateError::PlaceholderMismatch {
                id: d.id,
                body: found,
                declared,
            });
        }
        let validator = jsonschema::validator_for(&d.response).map_err(|e| TemplateError::Descriptor {
            id: d.id.clone(),
            message: format!("bad response schema: {e}"),
        })?;
        Ok(PromptTemplate {
            id: d.id,
            source: d.source,
            role: d.role,
            stage: d.stage,
            description: d.description,
            body,
            required_vars: d.required_vars,
            response_schema: d.response,
            validator,
        })
    }

    /// Substitutes every placeholder. String values go in verbatim; any
    /// other JSON value is pretty-printed.
    pub fn render(&self, vars: &BTreeMap<String, Value>) -> Result<String, TemplateError> {
        if let Some(missing) = self.required_vars.iter().find(|v| !vars.contains_key(*v)) {
            return Err(TemplateError::MissingVariable(missing.clone()));
        }
        Ok(placeholder_re()
            .replace_all(&self.body, |c: &regex::Captures| match &vars[&c[1]] {
                Value::String(s) => s.clone(),
                other => serde_json::to_string_pretty(other).expect("value serializes"),
            })
            .into_owned())
    }

    /// Structural check of a reply against the response schema.
    pub fn check(&self, doc: &Value) -> Result<(), String> {
        let errors: Vec<String> = self
            .validator
            .iter_errors(doc)
            .take(3)
            .map(|e| {
                let at = e.instance_path().to_string();
                if at.is_empty() {
                    e.to_string()
                } else {
                    format!("{e} at {at}")
                }
            })
            .collect();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors.join("; "))
        }
    }
}

/// The prompt directory: one `<id>.txt` body plus `<id>.schema.json`
/// descriptor per template, and `fragments/<name>.txt`.
#[derive(Debug)]
pub struct TemplateSet {
    templates: BTreeMap<String, PromptTemplate>,
    fragments: BTreeMap<String, String>,
}

fn read(path: &Path) -> Result<String, TemplateError> {
    fs::read_to_string(path).map_err(|e| TemplateError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

impl TemplateSet {
    /// Loads and checks every template in [`TEMPLATE_IDS`].
    pub fn load(dir: &Path) -> Result<Self, TemplateError> {
        let mut templates = BTreeMap::new();
        for id in TEMPLATE_IDS {
            let text = read(&dir.join(format!("{id}.schema.json")))?;
            let d: Descriptor = serde_json::from_str(&text).map_err(|e| TemplateError::Descriptor {
                id: id.into(),
                message: e.to_string(),
            })?;
            if d.id != id {
                return Err(TemplateError::Descriptor {
                    id: id.into(),
                    message: format!("descriptor names itself {:?}", d.id),
                });
            }
            let body = read(&dir.join(format!("{id}.txt")))?;
            templates.insert(id.to_string(), PromptTemplate::build(d, body)?);
        }
        let mut fragments = BTreeMap::new();
        for name in FRAGMENTS {
            let text = read(&dir.join("fragments").join(format!("{name}.txt")))?;
            fragments.insert(name.to_string(), text.trim_end().to_string());
        }
        Ok(TemplateSet {
            templates,
            fragments,
        })
    }

    pub fn get(&self, id: &str) -> Result<&PromptTemplate, TemplateError> {
        self.templates
            .get(id)
            .ok_or_else(|| TemplateError::Unknown(id.to_string()))
    }

    pub fn fragment(&self, name: &str) -> &str {
        self.fragments.get(name).map_or("", String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &PromptTemplate> {
        TEMPLATE_IDS.iter().filter_map(|id| self.templates.get(*id))
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }
}

pub fn default_templates_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("prompts")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn set() -> TemplateSet {
        TemplateSet::load(&default_templates_dir()).unwrap()
    }

    #[test]
    fn plan_1_takes_the_topic() {
        let s = set();
        let t = s.get("plan_1").unwrap();
        let vars = BTreeMap::from([("topic".to_string(), json!("a quarrel and breakup scene"))]);
        let out = t.render(&vars).unwrap();
        assert!(out.contains("### Film topic:\na quarrel and breakup scene\n"));
        assert_eq!(out, t.render(&vars).unwrap());
        assert!(placeholders(&out).is_empty());
    }

    #[test]
    fn missing_topic_is_named() {
        let s = set();
        match s.get("plan_1").unwrap().render(&BTreeMap::new()) {
            Err(TemplateError::MissingVariable(v)) => assert_eq!(v, "topic"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn json_values_are_pretty_printed() {
        let t = PromptTemplate::new("t", "x={v}", vec!["v".into()], json!({})).unwrap();
        let vars = BTreeMap::from([("v".to_string(), json!({"b": 1, "a": [1]}))]);
        assert_eq!(
            t.render(&vars).unwrap(),
            "x={\n  \"b\": 1,\n  \"a\": [\n    1\n  ]\n}"
        );
    }

    #[test]
    fn substituted_text_is_not_re_expanded() {
        let t = PromptTemplate::new("t", "{a} {b}", vec!["a".into(), "b".into()], json!({})).unwrap();
        let vars = BTreeMap::from([("a".into(), json!("{b}")), ("b".into(), json!("B"))]);
        assert_eq!(t.render(&vars).unwrap(), "{b} B");
    }

    #[test]
    fn undeclared_placeholder_is_rejected() {
        assert!(matches!(
            PromptTemplate::new("t", "{a} {b}", vec!["a".into()], json!({})),
            Err(TemplateError::PlaceholderMismatch { .. })
        ));
    }

    #[test]
    fn schema_check_reports_the_path() {
        let s = set();
        let t = s.get("plan_1").unwrap();
        let err = t.check(&json!([{"name": "Mia"}])).unwrap_err();
        assert!(err.contains("/0"), "{err}");
        let five = json!([{}, {}, {}, {}, {}]);
        assert!(t.check(&five).is_err());
    }

    #[test]
    fn movement_schema_accepts_none_and_requires_insertion() {
        let s = set();
        let t = s.get("script_4").unwrap();
        assert!(t.check(&json!({"reason": "r", "move": "None"})).is_ok());
        assert!(t
            .check(&json!({"move": {"character": "Mia", "destination": "Position A"}}))
            .is_err());
        assert!(t
            .check(&json!({"move": {"character": "Mia", "destination": "Position A"},
                           "insertion": {"insertion position": "0"}}))
            .is_ok());
    }
}
