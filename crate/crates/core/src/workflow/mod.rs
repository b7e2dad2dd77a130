//! The production pipeline: idea development, three scriptwriting stages,
//! cinematography, and assembly.
//!
//! Each stage is a method on [`Pipeline`] taking the previous stage's
//! artifact. [`Run`] strings them together over a run directory so a
//! crashed run can resume from the last completed stage.

mod agents;
mod assemble;
mod camera;
pub mod run;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::collaboration::{
    critique_correct_verify, debate_judge, AgentError, CcvOptions, CcvOutcome, DebateOptions,
    DebateOutcome,
};
use crate::crew::{vars, Crew, CrewError, CrewErrorKind, RoleAgent, Violation};
use crate::environment::{EnvironmentSpec, Posture};
use crate::provider::ProviderError;
use crate::script::{
    scenes_from_value, scenes_to_value, AnnotatedScript, CharacterProfile, DurationModel, Gender,
    MoveEvent, Placement, Scene, SceneEvent, SceneInfo, SceneOutline, ScriptError,
    MIN_SCENE_CHARACTERS,
};
use crate::validator::{
    apply_suggestions, derive_state_trace, validate_with, without_conflicts, Diagnostic, RuleId,
    Severity, TraceError, ValidateOptions,
};

pub use assemble::{refresh_snapshots, render_storyboard, Bundle};
pub use camera::{merge_shots, parse_judgment, CameraAnnotationSet, ShotChoice};
pub use run::{Run, RunError, RunState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Idea,
    Script1,
    Script2,
    Script3,
    Cinema,
    Assembled,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Idea,
        Stage::Script1,
        Stage::Script2,
        Stage::Script3,
        Stage::Cinema,
        Stage::Assembled,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Idea => "idea",
            Stage::Script1 => "script1",
            Stage::Script2 => "script2",
            Stage::Script3 => "script3",
            Stage::Cinema => "cinema",
            Stage::Assembled => "assembled",
        }
    }

    pub fn parse(s: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|st| st.as_str() == s)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkflowConfig {
    /// Response cap for the director-screenwriter loop.
    pub ccv_max: usize,
    /// Response cap for the actor-driven loop.
    pub actor_ccv_max: usize,
    pub debate_rounds: usize,
    pub compat_loop_guard: bool,
    /// Run actor feedback and first camera passes on threads. Transcript
    /// order is then not reproducible.
    pub parallel: bool,
    pub static_repeat_limit: usize,
    pub duration: DurationModel,
}

impl Default for WorkflowConfig {
    fn default() -> Self {
        WorkflowConfig {
            ccv_max: 3,
            actor_ccv_max: 3,
            debate_rounds: 2,
            compat_loop_guard: false,
            parallel: false,
            static_repeat_limit: 3,
            duration: DurationModel::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum WorkflowError {
    #[error(transparent)]
    Crew(#[from] CrewError),
    #[error(transparent)]
    Collaboration(#[from] AgentError),
    #[error("constraint violated at {field}: {message}")]
    ConstraintViolation { field: String, message: String },
    #[error("scene {scene}: insertion position {position} out of range (slots 0..{slots})")]
    InsertionOutOfRange {
        scene: usize,
        position: usize,
        slots: usize,
    },
    #[error("camera annotations do not match the script: expected {expected}, found {found}{}", scene.map(|s| format!(" in scene {}", s + 1)).unwrap_or_default())]
    MergeArityMismatch {
        scene: Option<usize>,
        expected: usize,
        found: usize,
    },
    #[error("validation gate failed with {} error(s): {}", diagnostics.len(), diagnostics.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    ValidationGateFailed { diagnostics: Vec<Diagnostic> },
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

impl WorkflowError {
    /// Lifts a crew constraint failure into a [`WorkflowError::ConstraintViolation`].
    fn from_crew(e: CrewError) -> Self {
        match e.kind {
            CrewErrorKind::Constraint { field, message } => {
                WorkflowError::ConstraintViolation { field, message }
            }
            _ => WorkflowError::Crew(e),
        }
    }

    /// True for errors that come from the provider's side (auth, transport).
    pub fn provider_error(&self) -> Option<&ProviderError> {
        match self {
            WorkflowError::Crew(CrewError {
                kind: CrewErrorKind::Provider(p),
                ..
            }) => Some(p),
            _ => None,
        }
    }
}

/// What a stage noticed without failing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageNotes {
    pub warnings: Vec<String>,
    /// Free-form stage record (CCV rounds, debate log, applied fixes).
    pub record: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Idea {
    pub profiles: Vec<CharacterProfile>,
    pub outlines: Vec<SceneOutline>,
}

#[derive(Debug, Clone)]
pub struct CinemaResult {
    pub script: AnnotatedScript,
    pub sets: [CameraAnnotationSet; 2],
    pub debate: DebateOutcome,
    pub fixes: Vec<Diagnostic>,
}

pub struct Pipeline<'a> {
    pub env: &'a EnvironmentSpec,
    pub crew: Crew,
    pub config: WorkflowConfig,
}

fn names_of(profiles: &[CharacterProfile], gender: Gender) -> String {
    let names: Vec<&str> = profiles
        .iter()
        .filter(|p| p.gender == gender)
        .map(|p| p.name.as_str())
        .collect();
    if names.is_empty() {
        "None".into()
    } else {
        names.join(", ")
    }
}

fn violation(field: &str, message: impl Into<String>) -> Violation {
    Violation {
        field: field.into(),
        message: message.into(),
    }
}

fn parse_list<T>(
    doc: &Value,
    parse: impl Fn(&Value) -> Result<T, ScriptError>,
) -> Result<Vec<T>, Violation> {
    doc.as_array()
        .ok_or_else(|| violation("$", "expected a list"))?
        .iter()
        .enumerate()
        .map(|(i, v)| parse(v).map_err(|e| violation(&format!("[{i}]"), e.to_string())))
        .collect()
}

/// `Name: Position X, sittable, standing` per character, as the prompts show it.
pub fn initial_position_text(scene: &Scene, env: &EnvironmentSpec) -> String {
    let location = env.location(&scene.info.location);
    let trace = derive_state_trace(scene, env).ok();
    scene
        .initial_position
        .iter()
        .map(|p| {
            let sittable = location
                .and_then(|l| l.position(&p.position))
                .map_or("unknown position", |s| if s.sittable { "sittable" } else { "not sittable" });
            let posture = trace
                .as_ref()
                .and_then(|t| t.initial().get(&p.character))
                .map_or(Posture::Standing, |s| s.posture);
            format!("{}: {}, {sittable}, {posture}", p.character, p.position)
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn script_positions_text(script: &AnnotatedScript, env: &EnvironmentSpec) -> String {
    script
        .scenes
        .iter()
        .enumerate()
        .map(|(i, s)| format!("Scene {} ({}): {}", i + 1, s.info.location, initial_position_text(s, env)))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Position list of each named location, as the prompts show it.
pub fn position_description(env: &EnvironmentSpec, locations: &[&str]) -> String {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for name in locations {
        let Some(loc) = env.location(name) else { continue };
        if !seen.insert(loc.name.as_str()) {
            continue;
        }
        out.push(format!("{}:", loc.name));
        for p in &loc.positions {
            out.push(format!("- {}: {}", p.id, p.description));
        }
    }
    out.join("\n")
}

/// Lines of a scene interleaved with `<Insertion Position k>` markers, one
/// before each line.
pub fn dialogue_with_insertion(scene: &Scene) -> Value {
    let mut out = Vec::new();
    for (k, line) in scene.lines().enumerate() {
        out.push(Value::String(format!("<Insertion Position {k}>")));
        out.push(json!({"speaker": line.speaker, "content": line.content}));
    }
    Value::Array(out)
}

fn insertion_index(v: &Value) -> Option<usize> {
    match v {
        Value::Number(n) => n.as_u64().map(|n| n as usize),
        Value::String(s) => {
            let digits: String = s.chars().filter(char::is_ascii_digit).collect();
            digits.parse().ok()
        }
        _ => None,
    }
}

impl<'a> Pipeline<'a> {
    pub fn new(env: &'a EnvironmentSpec, crew: Crew, config: WorkflowConfig) -> Self {
        Pipeline { env, crew, config }
    }

    fn validate_options(&self, require_shots: bool) -> ValidateOptions {
        ValidateOptions {
            static_repeat_limit: self.config.static_repeat_limit,
            require_shots,
        }
    }

    fn fragment(&self, name: &str) -> Value {
        Value::String(self.crew.templates().fragment(name).to_string())
    }

    // -- idea -------------------------------------------------------------

    pub fn develop_idea(&self, topic: &str) -> Result<(Idea, StageNotes), WorkflowError> {
        let director = RoleAgent::director();
        let doc = self
            .crew
            .invoke_checked(
                &director,
                "plan_1",
                &vars([("topic", json!(topic))]),
                &|d| {
                    let profiles = parse_list(d, CharacterProfile::from_value)?;
                    let names: BTreeSet<&str> = profiles.iter().map(|p| p.name.as_str()).collect();
                    if names.len() != profiles.len() {
                        return Err(violation("name", "character names must be distinct"));
                    }
                    Ok(())
                },
                1,
            )
            .map_err(WorkflowError::from_crew)?;
        let profiles = parse_list(&doc, CharacterProfile::from_value).expect("checked above");

        let doc = self
            .crew
            .invoke_checked(
                &director,
                "plan_2",
                &vars([
                    ("topic", json!(topic)),
                    ("male_characters", json!(names_of(&profiles, Gender::Male))),
                    ("female_characters", json!(names_of(&profiles, Gender::Female))),
                ]),
                &|d| self.check_outlines(d, &profiles),
                1,
            )
            .map_err(WorkflowError::from_crew)?;
        let outlines = parse_list(&doc, SceneOutline::from_value).expect("checked above");

        let mut notes = StageNotes::default();
        let used: BTreeSet<&str> = outlines
            .iter()
            .flat_map(|o| o.selected_characters.iter().map(String::as_str))
            .collect();
        let unused: Vec<&str> = profiles
            .iter()
            .map(|p| p.name.as_str())
            .filter(|n| !used.contains(n))
            .collect();
        let mut profiles = profiles.clone();
        if !unused.is_empty() {
            notes.warnings.push(format!(
                "profiles not cast in any scene, dropped: {}",
                unused.join(", ")
            ));
            profiles.retain(|p| used.contains(p.name.as_str()));
        }
        Ok((Idea { profiles, outlines }, notes))
    }

    fn check_outlines(&self, doc: &Value, profiles: &[CharacterProfile]) -> Result<(), Violation> {
        let outlines = parse_list(doc, SceneOutline::from_value)?;
        let names: BTreeSet<&str> = profiles.iter().map(|p| p.name.as_str()).collect();
        for (i, o) in outlines.iter().enumerate() {
            let at = |f: &str| format!("[{i}].{f}");
            let Some(loc) = self.env.location(&o.selected_location) else {
                return Err(violation(
                    &at("selected-location"),
                    format!("{:?} is not a known location", o.selected_location),
                ));
            };
            let cast: BTreeSet<&str> = o.selected_characters.iter().map(String::as_str).collect();
            if cast.len() != o.selected_characters.len() {
                return Err(violation(&at("selected-characters"), "lists a character twice"));
            }
            if cast.len() < MIN_SCENE_CHARACTERS {
                return Err(violation(
                    &at("selected-characters"),
                    format!("has {} character(s); at least {MIN_SCENE_CHARACTERS} needed", cast.len()),
                ));
            }
            if cast.len() > loc.capacity {
                return Err(violation(
                    &at("selected-characters"),
                    format!("has {} characters but {} holds {}", cast.len(), loc.name, loc.capacity),
                ));
            }
            if let Some(stranger) = cast.iter().find(|c| !names.contains(*c)) {
                return Err(violation(
                    &at("selected-characters"),
                    format!("{stranger:?} has no profile"),
                ));
            }
        }
        Ok(())
    }

    // -- scriptwriting stage 1 --------------------------------------------

    pub fn draft_script(
        &self,
        topic: &str,
        idea: &Idea,
    ) -> Result<(AnnotatedScript, StageNotes), WorkflowError> {
        let writer = RoleAgent::screenwriter();
        let outline_value = Value::Array(idea.outlines.iter().map(SceneOutline::to_value).collect());
        let n = idea.outlines.len();

        // Dialogue.
        let doc = self
            .crew
            .invoke_checked(
                &writer,
                "script_1",
                &vars([("scene_outline", outline_value.clone())]),
                &|d| {
                    let scenes = d.as_array().map_or(0, Vec::len);
                    if scenes != n {
                        return Err(violation("$", format!("expected {n} scenes, got {scenes}")));
                    }
                    for (i, (s, o)) in d.as_array().unwrap().iter().zip(&idea.outlines).enumerate() {
                        for line in s["scene-dialogue"].as_array().into_iter().flatten() {
                            let speaker = line["speaker"].as_str().unwrap_or_default();
                            if !o.selected_characters.iter().any(|c| c == speaker) {
                                return Err(violation(
                                    &format!("[{i}].scene-dialogue"),
                                    format!("{speaker:?} is not cast in this scene"),
                                ));
                            }
                        }
                    }
                    Ok(())
                },
                1,
            )
            .map_err(WorkflowError::from_crew)?;
        let dialogues: Vec<Vec<Value>> = doc
            .as_array()
            .unwrap()
            .iter()
            .map(|s| s["scene-dialogue"].as_array().cloned().unwrap_or_default())
            .collect();

        // Positions.
        let locations: Vec<&str> = idea.outlines.iter().map(|o| o.selected_location.as_str()).collect();
        let doc = self
            .crew
            .invoke_checked(
                &writer,
                "script_2",
                &vars([
                    ("scene_outline", outline_value),
                    ("position_description", json!(position_description(self.env, &locations))),
                ]),
                &|d| self.check_positions(d, &idea.outlines),
                1,
            )
            .map_err(WorkflowError::from_crew)?;
        let placements: Vec<Vec<Placement>> = doc
            .as_array()
            .unwrap()
            .iter()
            .map(|s| {
                s["scene-position"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|p| {
                        Placement::new(
                            p["character"].as_str().unwrap(),
                            p["position"].as_str().unwrap(),
                        )
                    })
                    .collect()
            })
            .collect();

        let mut scenes = Vec::with_capacity(n);
        let mut notes = StageNotes::default();
        for (si, outline) in idea.outlines.iter().enumerate() {
            let skeleton = Scene {
                info: SceneInfo {
                    who: outline.selected_characters.clone(),
                    location: outline.selected_location.clone(),
                    what: outline.story_plot.clone(),
                    ..Default::default()
                },
                initial_position: placements[si].clone(),
                ..Default::default()
            };
            let scene = self.annotate_actions(si, outline, &skeleton, &dialogues[si])?;
            let scene = self.add_movement(si, outline, scene, &mut notes)?;
            scenes.push(scene);
        }
        let script = AnnotatedScript {
            topic: topic.to_string(),
            profiles: idea.profiles.clone(),
            scenes,
            ..Default::default()
        };
        script.check_schema()?;
        Ok((refresh_snapshots(&script, self.env)?, notes))
    }

    fn check_positions(&self, doc: &Value, outlines: &[SceneOutline]) -> Result<(), Violation> {
        let scenes = doc.as_array().ok_or_else(|| violation("$", "expected a list"))?;
        if scenes.len() != outlines.len() {
            return Err(violation(
                "$",
                format!("expected {} scenes, got {}", outlines.len(), scenes.len()),
            ));
        }
        for (i, (s, o)) in scenes.iter().zip(outlines).enumerate() {
            let field = format!("[{i}].scene-position");
            let loc = self.env.location(&o.selected_location).expect("outline checked");
            let mut taken = BTreeSet::new();
            let mut placed = BTreeSet::new();
            for p in s["scene-position"].as_array().into_iter().flatten() {
                let who = p["character"].as_str().unwrap_or_default();
                let at = p["position"].as_str().unwrap_or_default();
                if loc.position(at).is_none() {
                    return Err(violation(&field, format!("{at:?} is not a position in {}", loc.name)));
                }
                if !taken.insert(at) {
                    return Err(violation(&field, format!("{at} is assigned twice")));
                }
                if !placed.insert(who) {
                    return Err(violation(&field, format!("{who} is placed twice")));
                }
            }
            let cast: BTreeSet<&str> = o.selected_characters.iter().map(String::as_str).collect();
            if placed != cast {
                return Err(violation(&field, "must place exactly the scene's characters"));
            }
        }
        Ok(())
    }

    fn annotate_actions(
        &self,
        si: usize,
        outline: &SceneOutline,
        skeleton: &Scene,
        dialogue: &[Value],
    ) -> Result<Scene, WorkflowError> {
        let build = |lines: &Value| -> Result<Scene, Violation> {
            let mut v = scenes_to_value(std::slice::from_ref(skeleton));
            v[0]["scene"] = lines.clone();
            let scene = scenes_from_value(&v)
                .map_err(|e| violation("$", e.to_string()))?
                .remove(0);
            let got = scene.events.len();
            if got != dialogue.len() {
                return Err(violation("$", format!("expected {} lines, got {got}", dialogue.len())));
            }
            for (k, (event, drafted)) in scene.events.iter().zip(dialogue).enumerate() {
                let line = event.as_line().expect("lines only");
                if line.speaker != drafted["speaker"].as_str().unwrap_or_default() {
                    return Err(violation(&format!("[{k}].speaker"), "does not match the drafted dialogue"));
                }
                if line.actions.is_empty() {
                    return Err(violation(&format!("[{k}].actions"), "every line needs an action"));
                }
                if let Some(a) = line.actions.iter().find(|a| !skeleton.info.who.contains(&a.character)) {
                    return Err(violation(
                        &format!("[{k}].actions"),
                        format!("{:?} is not in the scene", a.character),
                    ));
                }
            }
            Ok(scene)
        };
        let doc = self
            .crew
            .invoke_checked(
                &RoleAgent::screenwriter(),
                "script_3",
                &vars([
                    ("scene_outline", outline.to_value()),
                    ("dialogue_draft", Value::Array(dialogue.to_vec())),
                    ("initial_position", json!(initial_position_text(skeleton, self.env))),
                ]),
                &|d| build(d).map(|_| ()),
                1,
            )
            .map_err(|e| match WorkflowError::from_crew(e) {
                WorkflowError::ConstraintViolation { field, message } => WorkflowError::ConstraintViolation {
                    field: format!("scene {} {field}", si + 1),
                    message,
                },
                other => other,
            })?;
        Ok(build(&doc).expect("checked above"))
    }

    fn add_movement(
        &self,
        si: usize,
        outline: &SceneOutline,
        mut scene: Scene,
        notes: &mut StageNotes,
    ) -> Result<Scene, WorkflowError> {
        let loc = self.env.location(&scene.info.location).expect("outline checked");
        let standing: Vec<String> = derive_state_trace(&scene, self.env)?
            .initial()
            .iter()
            .filter(|(_, s)| s.posture == Posture::Standing)
            .map(|(n, _)| n.clone())
            .collect();
        let standing_ref = &standing;
        let doc = self
            .crew
            .invoke_checked(
                &RoleAgent::screenwriter(),
                "script_4",
                &vars([
                    ("characters_in_standing_state", json!(standing.join(", "))),
                    ("position_description", json!(position_description(self.env, &[loc.name.as_str()]))),
                    ("scene_outline", outline.to_value()),
                    ("dialogue_with_insertion", dialogue_with_insertion(&scene)),
                    ("initial_position", json!(initial_position_text(&scene, self.env))),
                ]),
                &|d| {
                    let Some(mv) = d["move"].as_object() else { return Ok(()) };
                    let who = mv.get("character").and_then(Value::as_str).unwrap_or_default();
                    let to = mv.get("destination").and_then(Value::as_str).unwrap_or_default();
                    if !standing_ref.iter().any(|s| s == who) {
                        return Err(violation("move.character", format!("{who:?} is not a movable character")));
                    }
                    if loc.position(to).is_none() {
                        return Err(violation("move.destination", format!("{to:?} is not a position in {}", loc.name)));
                    }
                    if insertion_index(&d["insertion"]["insertion position"]).is_none() {
                        return Err(violation("insertion position", "must be a number"));
                    }
                    Ok(())
                },
                1,
            )
            .map_err(WorkflowError::from_crew)?;
        let Some(mv) = doc["move"].as_object() else {
            return Ok(scene);
        };
        let slots = scene.events.len();
        let position = insertion_index(&doc["insertion"]["insertion position"]).expect("checked");
        if position >= slots {
            return Err(WorkflowError::InsertionOutOfRange {
                scene: si,
                position,
                slots,
            });
        }
        let mut move_extra = crate::script::Extra::new();
        if let Some(reason) = mv.get("reason") {
            move_extra.insert("reason".into(), reason.clone());
        }
        let event = MoveEvent {
            character: mv["character"].as_str().unwrap().to_string(),
            destination: mv["destination"].as_str().unwrap().to_string(),
            move_extra,
            ..Default::default()
        };
        notes.warnings.extend(
            derive_state_trace(&scene, self.env)?
                .before(position)
                .iter()
                .filter(|(n, s)| {
                    *n != &event.character && s.position.as_deref() == Some(event.destination.as_str())
                })
                .map(|(n, _)| format!("scene {}: movement target {} is occupied by {n}", si + 1, event.destination)),
        );
        scene.events.insert(position, SceneEvent::Move(event));
        Ok(scene)
    }

    // -- scriptwriting stage 2 --------------------------------------------

    pub fn revise_with_director(
        &self,
        script: &AnnotatedScript,
    ) -> Result<(AnnotatedScript, StageNotes), WorkflowError> {
        let writer = agents::Writer::new(self, script);
        let critic = agents::DirectorCritic { pipeline: self, topic: &script.topic };
        let outcome = critique_correct_verify(
            &writer,
            &critic,
            &crate::script::serialize_scenes(&script.scenes),
            &script.topic,
            CcvOptions {
                max_rounds: self.config.ccv_max,
                compat_loop_guard: self.config.compat_loop_guard,
            },
        )?;
        self.finish_ccv(script, outcome)
    }

    fn finish_ccv(
        &self,
        base: &AnnotatedScript,
        outcome: CcvOutcome,
    ) -> Result<(AnnotatedScript, StageNotes), WorkflowError> {
        let scenes = scenes_from_value(&serde_json::from_str(&outcome.response).expect("writer output is JSON"))?;
        let script = AnnotatedScript {
            scenes,
            ..base.clone()
        };
        script.check_schema()?;
        let mut notes = StageNotes {
            record: serde_json::to_value(&outcome.rounds).expect("rounds serialize"),
            ..Default::default()
        };
        if !outcome.finalized && outcome.rounds.len() > 1 {
            notes
                .warnings
                .push(format!("unverified: no approval after {} rounds", outcome.rounds.len()));
        }
        Ok((refresh_snapshots(&script, self.env)?, notes))
    }

    // -- scriptwriting stage 3 --------------------------------------------

    pub fn revise_with_actors(
        &self,
        script: &AnnotatedScript,
    ) -> Result<(AnnotatedScript, StageNotes), WorkflowError> {
        let mut lines: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for line in script.scenes.iter().flat_map(Scene::lines) {
            lines
                .entry(line.speaker.clone())
                .or_default()
                .insert(line.content.trim().to_string());
        }
        let script_value = scenes_to_value(&script.scenes);
        let ask = |profile: &CharacterProfile| -> Result<Vec<crate::crew::ActorNote>, WorkflowError> {
            let doc = self.crew.invoke(
                &RoleAgent::actor(profile.clone()),
                "actor_feedback",
                &vars([
                    ("character", json!(profile.name)),
                    ("character_profile", profile.to_value()),
                    ("draft_script", script_value.clone()),
                ]),
            )?;
            Ok(crate::crew::own_lines_only(&profile.name, &doc, &lines))
        };
        let feedback: Vec<Result<Vec<crate::crew::ActorNote>, WorkflowError>> = if self.config.parallel {
            std::thread::scope(|s| {
                let handles: Vec<_> = script.profiles.iter().map(|p| s.spawn(move || ask(p))).collect();
                handles.into_iter().map(|h| h.join().expect("actor thread panicked")).collect()
            })
        } else {
            script.profiles.iter().map(ask).collect()
        };
        let mut notes_all = Vec::new();
        for f in feedback {
            notes_all.extend(f?);
        }

        let doc = self.crew.invoke(
            &RoleAgent::director(),
            "director_filter",
            &vars([
                (
                    "character_profiles",
                    Value::Array(script.profiles.iter().map(CharacterProfile::to_value).collect()),
                ),
                ("draft_script", script_value.clone()),
                ("actor_critique", serde_json::to_value(&notes_all).expect("notes serialize")),
            ]),
        )?;
        let adopted = doc["adopted-suggestions"].clone();
        if !adopted.is_array() || adopted.as_array().is_some_and(Vec::is_empty) {
            return Ok((
                script.clone(),
                StageNotes {
                    warnings: vec![],
                    record: json!({"actor_feedback": notes_all, "filter": doc, "adopted": false}),
                },
            ));
        }

        let writer = agents::Writer::new(self, script);
        let critic = agents::FilteredCritic::new(self, adopted.clone());
        let outcome = critique_correct_verify(
            &writer,
            &critic,
            &crate::script::serialize_scenes(&script.scenes),
            &script.topic,
            CcvOptions {
                max_rounds: self.config.actor_ccv_max,
                compat_loop_guard: self.config.compat_loop_guard,
            },
        )?;
        let (revised, mut notes) = self.finish_ccv(script, outcome)?;
        notes.record = json!({
            "actor_feedback": notes_all,
            "filter": doc,
            "adopted": true,
            "rounds": notes.record,
        });
        Ok((revised, notes))
    }

    // -- cinematography ---------------------------------------------------

    pub fn annotate_cameras(
        &self,
        script: &AnnotatedScript,
    ) -> Result<(CinemaResult, StageNotes), WorkflowError> {
        let mut bare = script.clone();
        for event in bare.scenes.iter_mut().flat_map(|s| s.events.iter_mut()) {
            event.set_shot(None);
        }
        let p = camera::Cinematographer { crew: &self.crew, agent: RoleAgent::cinematographer(1), script: &bare };
        let q = camera::Cinematographer { crew: &self.crew, agent: RoleAgent::cinematographer(2), script: &bare };
        let judge = camera::DirectorJudge { crew: &self.crew, script: &bare };
        let debate = debate_judge(
            &p,
            &q,
            &judge,
            &crate::script::serialize_scenes(&bare.scenes),
            "annotate camera shots",
            DebateOptions {
                rounds: self.config.debate_rounds,
                concurrent_respond: self.config.parallel,
            },
        )?;
        let set_p: CameraAnnotationSet = serde_json::from_str(&debate.final_p).expect("peer output");
        let set_q: CameraAnnotationSet = serde_json::from_str(&debate.final_q).expect("peer output");
        let winner: CameraAnnotationSet = serde_json::from_str(debate.winning_response()).expect("peer output");
        let merged = merge_shots(&bare, &winner)?;

        // One mechanical fix pass over shot findings, then the gate.
        let options = self.validate_options(true);
        let findings = validate_with(&merged, self.env, &options);
        let fixable: Vec<Diagnostic> = findings
            .iter()
            .filter(|d| {
                d.rule.is_shot_rule()
                    && (d.severity == Severity::Error
                        || (d.severity == Severity::Info && d.rule == RuleId::UnknownShot))
            })
            .cloned()
            .collect();
        let fixes = without_conflicts(&fixable);
        let fixed = apply_suggestions(&merged, &fixes).expect("conflicts removed");
        let residual: Vec<Diagnostic> = validate_with(&fixed, self.env, &options)
            .into_iter()
            .filter(Diagnostic::is_error)
            .collect();
        if !residual.is_empty() {
            return Err(WorkflowError::ValidationGateFailed { diagnostics: residual });
        }
        let notes = StageNotes {
            warnings: vec![],
            record: json!({
                "judgment": debate.judgment,
                "log": debate.log,
                "fixes": fixes,
            }),
        };
        Ok((
            CinemaResult {
                script: refresh_snapshots(&fixed, self.env)?,
                sets: [set_p, set_q],
                debate,
                fixes,
            },
            notes,
        ))
    }

    pub fn assemble(&self, script: &AnnotatedScript) -> Result<Bundle, WorkflowError> {
        assemble::assemble(script, self.env, &self.config, self.validate_options(true))
    }
}
