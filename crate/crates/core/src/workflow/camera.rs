//! Camera annotation sets and the cinematographer debate.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::collaboration::{BoxError, DebatePeer, DialogueHistory, Judge, Judgment, Peer};
use crate::crew::{truthy, vars, Crew, RoleAgent, Violation};
use crate::script::{scenes_to_value, AnnotatedScript};

use super::WorkflowError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotChoice {
    pub shot: String,
    #[serde(default)]
    pub reasoning: String,
}

/// One cinematographer's shots, per scene, in event order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CameraAnnotationSet {
    pub author: String,
    pub scenes: Vec<Vec<ShotChoice>>,
}

/// Trailing number of a key such as `"scene 2"` or `"selected-shot-10"`.
fn key_number(key: &str) -> Option<usize> {
    let digits: String = key
        .chars()
        .rev()
        .skip_while(|c| !c.is_ascii_digit())
        .take_while(char::is_ascii_digit)
        .collect();
    digits.chars().rev().collect::<String>().parse().ok()
}

fn numbered<'a>(map: &'a Map<String, Value>, what: &str) -> Result<Vec<&'a Value>, Violation> {
    let mut items: Vec<(usize, &Value)> = Vec::new();
    for (k, v) in map {
        let n = key_number(k).ok_or_else(|| Violation {
            field: k.clone(),
            message: format!("{what} key has no number"),
        })?;
        items.push((n, v));
    }
    items.sort_by_key(|(n, _)| *n);
    for (i, (n, _)) in items.iter().enumerate() {
        if *n != i + 1 {
            return Err(Violation {
                field: what.into(),
                message: format!("{what} numbers are not 1..{}", items.len()),
            });
        }
    }
    Ok(items.into_iter().map(|(_, v)| v).collect())
}

impl CameraAnnotationSet {
    /// Parses the `{"scene N": {"selected-shot-K": {...}}}` reply shape.
    pub fn from_reply(author: &str, doc: &Value) -> Result<Self, Violation> {
        let top = doc.as_object().ok_or_else(|| Violation {
            field: "$".into(),
            message: "expected an object keyed by scene".into(),
        })?;
        let mut scenes = Vec::new();
        for scene in numbered(top, "scene")? {
            let shots = scene.as_object().ok_or_else(|| Violation {
                field: "scene".into(),
                message: "expected an object keyed by selected-shot".into(),
            })?;
            let mut choices = Vec::new();
            for choice in numbered(shots, "selected-shot")? {
                let shot = choice
                    .get("shot")
                    .and_then(Value::as_str)
                    .ok_or_else(|| Violation {
                        field: "shot".into(),
                        message: "missing shot name".into(),
                    })?;
                choices.push(ShotChoice {
                    shot: shot.trim().to_string(),
                    reasoning: choice
                        .get("reasoning")
                        .and_then(Value::as_str)
                        .unwrap_or_default()
                        .to_string(),
                });
            }
            scenes.push(choices);
        }
        Ok(CameraAnnotationSet {
            author: author.to_string(),
            scenes,
        })
    }

    /// Back to the reply shape, as shown to the other agents.
    pub fn to_reply(&self) -> Value {
        let mut top = Map::new();
        for (si, shots) in self.scenes.iter().enumerate() {
            let mut scene = Map::new();
            for (k, c) in shots.iter().enumerate() {
                scene.insert(
                    format!("selected-shot-{}", k + 1),
                    serde_json::json!({"reasoning": c.reasoning, "shot": c.shot}),
                );
            }
            top.insert(format!("scene {}", si + 1), Value::Object(scene));
        }
        Value::Object(top)
    }

    /// Applies review entries marked `"need update": "True"`.
    pub fn apply_review(&mut self, review: &Value) -> usize {
        let Some(top) = review.as_object() else { return 0 };
        let mut changed = 0;
        for (sk, scene) in top {
            let (Some(si), Some(shots)) = (key_number(sk), scene.as_object()) else {
                continue;
            };
            for (k, entry) in shots {
                let Some(ki) = key_number(k) else { continue };
                if !truthy(entry.get("need update")) {
                    continue;
                }
                let Some(updated) = entry.get("updated shot").and_then(Value::as_str) else {
                    continue;
                };
                if updated.trim().eq_ignore_ascii_case("none") || updated.trim().is_empty() {
                    continue;
                }
                if let Some(choice) = self
                    .scenes
                    .get_mut(si.wrapping_sub(1))
                    .and_then(|s| s.get_mut(ki.wrapping_sub(1)))
                {
                    if choice.shot != updated.trim() {
                        choice.shot = updated.trim().to_string();
                        choice.reasoning = entry
                            .get("reasoning")
                            .and_then(Value::as_str)
                            .unwrap_or_default()
                            .to_string();
                        changed += 1;
                    }
                }
            }
        }
        changed
    }
}

/// Writes the set's shots onto the script's events.
pub fn merge_shots(
    script: &AnnotatedScript,
    set: &CameraAnnotationSet,
) -> Result<AnnotatedScript, WorkflowError> {
    if set.scenes.len() != script.scenes.len() {
        return Err(WorkflowError::MergeArityMismatch {
            scene: None,
            expected: script.scenes.len(),
            found: set.scenes.len(),
        });
    }
    let mut out = script.clone();
    for (si, (scene, shots)) in out.scenes.iter_mut().zip(&set.scenes).enumerate() {
        if scene.events.len() != shots.len() {
            return Err(WorkflowError::MergeArityMismatch {
                scene: Some(si),
                expected: scene.events.len(),
                found: shots.len(),
            });
        }
        for (event, choice) in scene.events.iter_mut().zip(shots) {
            event.set_shot(Some(choice.shot.clone()));
        }
    }
    Ok(out)
}

/// Best-effort merge for showing a peer its own shots during the debate.
fn overlay(script: &AnnotatedScript, set: &CameraAnnotationSet) -> Value {
    let mut out = script.clone();
    for (scene, shots) in out.scenes.iter_mut().zip(&set.scenes) {
        for (event, choice) in scene.events.iter_mut().zip(shots) {
            event.set_shot(Some(choice.shot.clone()));
        }
    }
    scenes_to_value(&out.scenes)
}

pub(super) struct Cinematographer<'a> {
    pub crew: &'a Crew,
    pub agent: RoleAgent,
    pub script: &'a AnnotatedScript,
}

fn parse_set(author: &str, text: &str) -> Result<CameraAnnotationSet, BoxError> {
    let v: Value = serde_json::from_str(text)?;
    Ok(serde_json::from_value::<CameraAnnotationSet>(v).map(|mut s| {
        s.author = author.to_string();
        s
    })?)
}

impl DebatePeer for Cinematographer<'_> {
    fn tag(&self) -> &str {
        &self.agent.tag
    }

    fn respond(&self, _: &DialogueHistory) -> Result<String, BoxError> {
        let tag = self.agent.tag.clone();
        let doc = self.crew.invoke_checked(
            &self.agent,
            "cinema",
            &vars([("final_script", scenes_to_value(&self.script.scenes))]),
            &|d| CameraAnnotationSet::from_reply(&tag, d).map(|_| ()),
            1,
        )?;
        let set = CameraAnnotationSet::from_reply(&tag, &doc).map_err(|v| v.to_string())?;
        Ok(serde_json::to_string(&set)?)
    }

    fn feedback(
        &self,
        _: &DialogueHistory,
        own: &str,
        other: &str,
        _incoming: Option<&str>,
        _round: usize,
    ) -> Result<String, BoxError> {
        let own = parse_set(&self.agent.tag, own)?;
        let other: CameraAnnotationSet = serde_json::from_str(other)?;
        let doc = self.crew.invoke(
            &self.agent,
            "debate",
            &vars([
                ("final_script_with_own_annotation", overlay(self.script, &own)),
                ("peer_annotation", other.to_reply()),
                ("shot_list", Value::String(self.crew.templates().fragment("shot_list").into())),
            ]),
        )?;
        Ok(serde_json::to_string(&doc)?)
    }

    fn absorb(&self, own: &str, feedback: &str) -> Result<String, BoxError> {
        let mut set = parse_set(&self.agent.tag, own)?;
        let review: Value = serde_json::from_str(feedback)?;
        let changed = set.apply_review(&review);
        if changed > 0 {
            tracing::info!(peer = %self.agent.tag, changed, "applied reviewed shot updates");
        }
        Ok(serde_json::to_string(&set)?)
    }
}

pub(super) struct DirectorJudge<'a> {
    pub crew: &'a Crew,
    pub script: &'a AnnotatedScript,
}

impl Judge for DirectorJudge<'_> {
    fn tag(&self) -> &str {
        "director"
    }

    fn judge(
        &self,
        _: &DialogueHistory,
        response_p: &str,
        response_q: &str,
        _: &str,
        _: &str,
    ) -> Result<Judgment, BoxError> {
        let p: CameraAnnotationSet = serde_json::from_str(response_p)?;
        let q: CameraAnnotationSet = serde_json::from_str(response_q)?;
        let t = self.crew.templates();
        let doc = self.crew.invoke(
            &RoleAgent::director(),
            "judge",
            &vars([
                ("final_script", scenes_to_value(&self.script.scenes)),
                ("peer_annotation_1", p.to_reply()),
                ("peer_annotation_2", q.to_reply()),
                ("shot_list", Value::String(t.fragment("shot_list").into())),
                (
                    "shot_annotation_requirements",
                    Value::String(t.fragment("shot_annotation_requirements").into()),
                ),
            ]),
        )?;
        Ok(parse_judgment(&doc))
    }
}

/// `"better": "2"` picks the second cinematographer; anything else the first.
pub fn parse_judgment(doc: &Value) -> Judgment {
    let better = match doc.get("better") {
        Some(Value::String(s)) => s.trim().to_string(),
        Some(Value::Number(n)) => n.to_string(),
        _ => String::new(),
    };
    Judgment {
        winner: if better == "2" { Peer::Q } else { Peer::P },
        rationale: doc
            .get("reason")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn reply_round_trip_sorts_numerically() {
        let doc = json!({
            "scene 1": {
                "selected-shot-2": {"reasoning": "b", "shot": "Medium Shot"},
                "selected-shot-10": {"reasoning": "j", "shot": "Pan Shot"},
                "selected-shot-1": {"reasoning": "a", "shot": "Long Shot"},
                "selected-shot-3": {"shot": "x"}, "selected-shot-4": {"shot": "x"},
                "selected-shot-5": {"shot": "x"}, "selected-shot-6": {"shot": "x"},
                "selected-shot-7": {"shot": "x"}, "selected-shot-8": {"shot": "x"},
                "selected-shot-9": {"shot": "x"}
            }
        });
        let set = CameraAnnotationSet::from_reply("c1", &doc).unwrap();
        assert_eq!(set.scenes[0][0].shot, "Long Shot");
        assert_eq!(set.scenes[0][1].shot, "Medium Shot");
        assert_eq!(set.scenes[0][9].shot, "Pan Shot");
        assert_eq!(CameraAnnotationSet::from_reply("c1", &set.to_reply()).unwrap(), set);
    }

    #[test]
    fn gaps_in_numbering_are_rejected() {
        let doc = json!({"scene 1": {"selected-shot-1": {"shot": "a"}, "selected-shot-3": {"shot": "b"}}});
        assert!(CameraAnnotationSet::from_reply("c1", &doc).is_err());
    }

    #[test]
    fn only_marked_updates_apply() {
        let mut set = CameraAnnotationSet {
            author: "c2".into(),
            scenes: vec![vec![
                ShotChoice { shot: "Long Shot".into(), reasoning: String::new() },
                ShotChoice { shot: "Tracking Shot".into(), reasoning: String::new() },
            ]],
        };
        let review = json!({"scene 1": {
            "selected-shot-1": {"shot": "Long Shot", "need update": "False", "updated shot": "Medium Shot"},
            "selected-shot-2": {"shot": "Tracking Shot", "need update": "True", "updated shot": "Medium Shot", "reasoning": "not moving"}
        }});
        assert_eq!(set.apply_review(&review), 1);
        assert_eq!(set.scenes[0][0].shot, "Long Shot");
        assert_eq!(set.scenes[0][1].shot, "Medium Shot");
    }

    #[test]
    fn better_two_is_q() {
        assert_eq!(parse_judgment(&json!({"reason": "r", "better": "2"})).winner, Peer::Q);
        assert_eq!(parse_judgment(&json!({"better": 1})).winner, Peer::P);
    }
}
