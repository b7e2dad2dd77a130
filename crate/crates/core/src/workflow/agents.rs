//! Crew members adapted to the critique-correct-verify roles.

use std::cell::RefCell;

use serde_json::{json, Value};

use crate::collaboration::{ActionAgent, BoxError, Critic, DialogueHistory, Verdict};
use crate::crew::{truthy, vars, RoleAgent, Violation};
use crate::script::{scenes_from_value, serialize_scenes, AnnotatedScript};

use super::{script_positions_text, Pipeline};

const DIRECTOR: &str = "director";

/// The screenwriter. Round 1 hands back the script it was given; later
/// rounds rewrite it against the director's last critique.
pub(super) struct Writer<'p, 'e> {
    pipeline: &'p Pipeline<'e>,
    base: &'p AnnotatedScript,
    agent: RoleAgent,
}

impl<'p, 'e> Writer<'p, 'e> {
    pub fn new(pipeline: &'p Pipeline<'e>, base: &'p AnnotatedScript) -> Self {
        Writer {
            pipeline,
            base,
            agent: RoleAgent::screenwriter(),
        }
    }

    /// Parses a rewrite and checks it still fits the cast and the scene count.
    fn accept(&self, doc: &Value) -> Result<AnnotatedScript, Violation> {
        let scenes = scenes_from_value(doc).map_err(|e| Violation {
            field: e.field().unwrap_or("$").to_string(),
            message: e.to_string(),
        })?;
        if scenes.len() != self.base.scenes.len() {
            return Err(Violation {
                field: "$".into(),
                message: format!(
                    "the script has {} scenes; keep all {}",
                    scenes.len(),
                    self.base.scenes.len()
                ),
            });
        }
        let script = AnnotatedScript {
            scenes,
            ..self.base.clone()
        };
        script.check_schema().map_err(|e| Violation {
            field: e.field().unwrap_or("$").to_string(),
            message: e.to_string(),
        })?;
        Ok(script)
    }
}

impl ActionAgent for Writer<'_, '_> {
    fn tag(&self) -> &str {
        &self.agent.tag
    }

    fn act(&self, history: &DialogueHistory, round: usize) -> Result<String, BoxError> {
        if round == 1 {
            return Ok(serialize_scenes(&self.base.scenes));
        }
        let draft = history.last_from(&self.agent.tag).unwrap_or(history.context());
        let critique = history.last_from(DIRECTOR).unwrap_or_default();
        let draft_value: Value = serde_json::from_str(draft)?;
        let current = AnnotatedScript {
            scenes: scenes_from_value(&draft_value)?,
            ..self.base.clone()
        };
        let p = self.pipeline;
        let doc = p.crew.invoke_checked(
            &self.agent,
            "writer_correct",
            &vars([
                ("topic", json!(self.base.topic)),
                ("draft_script", draft_value),
                ("director_critique", json!(critique)),
                ("action_list", p.fragment("action_list")),
                ("initial_position", json!(script_positions_text(&current, p.env))),
            ]),
            &|d| self.accept(d).map(|_| ()),
            1,
        )?;
        let script = self.accept(&doc).map_err(|v| v.to_string())?;
        Ok(serialize_scenes(&script.scenes))
    }
}

fn verdict(doc: &Value) -> Verdict {
    Verdict {
        finalize: truthy(doc.get("finalize")),
        rationale: serde_json::to_string(doc).expect("value serializes"),
    }
}

/// The director reviewing a draft on its own merits.
pub(super) struct DirectorCritic<'p, 'e> {
    pub pipeline: &'p Pipeline<'e>,
    pub topic: &'p str,
}

impl Critic for DirectorCritic<'_, '_> {
    fn tag(&self) -> &str {
        DIRECTOR
    }

    fn critique(&self, _: &DialogueHistory, response: &str, _: usize) -> Result<String, BoxError> {
        let p = self.pipeline;
        let doc = p.crew.invoke(
            &RoleAgent::director(),
            "director_feedback",
            &vars([
                ("topic", json!(self.topic)),
                ("draft_script", serde_json::from_str(response)?),
                ("action_list", p.fragment("action_list")),
            ]),
        )?;
        Ok(serde_json::to_string(&doc)?)
    }

    fn verify(
        &self,
        _: &str,
        _: &str,
        response: &str,
        critique: &str,
        _: usize,
    ) -> Result<Verdict, BoxError> {
        let critique: Value = serde_json::from_str(critique).unwrap_or_else(|_| json!(critique));
        let doc = self.pipeline.crew.invoke(
            &RoleAgent::director(),
            "director_verify",
            &vars([
                ("director_critique", critique),
                ("updated_script", serde_json::from_str(response)?),
            ]),
        )?;
        Ok(verdict(&doc))
    }
}

/// The director passing on the actor suggestions it adopted. No further
/// model call is made for the critique itself; after a rejected revision
/// the reason for rejection is appended.
pub(super) struct FilteredCritic<'p, 'e> {
    pipeline: &'p Pipeline<'e>,
    adopted: Value,
    last_reason: RefCell<Option<Value>>,
}

impl<'p, 'e> FilteredCritic<'p, 'e> {
    pub fn new(pipeline: &'p Pipeline<'e>, adopted: Value) -> Self {
        FilteredCritic {
            pipeline,
            adopted,
            last_reason: RefCell::new(None),
        }
    }
}

impl Critic for FilteredCritic<'_, '_> {
    fn tag(&self) -> &str {
        DIRECTOR
    }

    fn critique(&self, _: &DialogueHistory, _: &str, _: usize) -> Result<String, BoxError> {
        let doc = match self.last_reason.borrow().as_ref() {
            None => json!({"adopted-suggestions": self.adopted}),
            Some(reason) => json!({
                "adopted-suggestions": self.adopted,
                "unresolved": reason,
            }),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    fn verify(
        &self,
        _: &str,
        _: &str,
        response: &str,
        critique: &str,
        _: usize,
    ) -> Result<Verdict, BoxError> {
        let doc = self.pipeline.crew.invoke(
            &RoleAgent::director(),
            "director_verify_2",
            &vars([
                ("filtered_critique", serde_json::from_str(critique)?),
                ("updated_script", serde_json::from_str(response)?),
            ]),
        )?;
        *self.last_reason.borrow_mut() = doc.get("reason").cloned();
        Ok(verdict(&doc))
    }
}
