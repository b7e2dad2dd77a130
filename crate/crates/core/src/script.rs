//! Screenplay data model: character profiles, scene outlines and the
//! annotated script, plus its JSON encoding.
//!
//! The on-disk script is a JSON array of scenes using the keys
//! `scene information`, `initial position`, `scene`, `move`, `speaker`,
//! `actions`, `content`, `shot` and `current position`. A script that
//! also carries a topic or character profiles is wrapped as
//! `{"topic": .., "profiles": [..], "scenes": [..]}`. Keys the model does
//! not know about are kept in `extra` maps and written back unchanged.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::environment::Posture;

pub const MAX_SCENES: usize = 3;
pub const MAX_PROFILES: usize = 4;
pub const MIN_SCENE_CHARACTERS: usize = 2;

pub type Extra = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScriptError {
    #[error("parse error at {locus}: {message}")]
    Parse { locus: String, message: String },
    #[error("schema error at {locus}: field {field:?} {message}")]
    Schema {
        field: String,
        locus: String,
        message: String,
    },
}

impl ScriptError {
    pub fn field(&self) -> Option<&str> {
        match self {
            ScriptError::Schema { field, .. } => Some(field),
            ScriptError::Parse { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharacterProfile {
    pub name: String,
    pub age: String,
    pub gender: Gender,
    pub occupation: String,
    pub personality_traits: String,
    pub speaking_style: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SceneOutline {
    pub sub_topic: String,
    pub selected_characters: Vec<String>,
    pub selected_location: String,
    pub story_plot: String,
    pub dialogue_goal: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Placement {
    pub character: String,
    pub position: String,
    pub extra: Extra,
}

impl Placement {
    pub fn new(character: impl Into<String>, position: impl Into<String>) -> Self {
        Placement {
            character: character.into(),
            position: position.into(),
            extra: Extra::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ActionEntry {
    pub character: String,
    /// Posture before the action, as written by the author. Derived state
    /// is authoritative; this is only compared against it.
    pub state: Option<Posture>,
    pub action: String,
    pub extra: Extra,
}

impl ActionEntry {
    pub fn new(character: impl Into<String>, state: Option<Posture>, action: impl Into<String>) -> Self {
        ActionEntry {
            character: character.into(),
            state,
            action: action.into(),
            extra: Extra::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MoveEvent {
    pub character: String,
    pub destination: String,
    pub shot: Option<String>,
    pub current_position: Option<Vec<Placement>>,
    /// Unknown keys inside the `move` object (e.g. `reason`).
    pub move_extra: Extra,
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LineEvent {
    pub speaker: String,
    pub content: String,
    pub actions: Vec<ActionEntry>,
    pub shot: Option<String>,
    pub current_position: Option<Vec<Placement>>,
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SceneEvent {
    Move(MoveEvent),
    Line(LineEvent),
}

impl SceneEvent {
    pub fn shot(&self) -> Option<&str> {
        match self {
            SceneEvent::Move(m) => m.shot.as_deref(),
            SceneEvent::Line(l) => l.shot.as_deref(),
        }
    }

    pub fn set_shot(&mut self, shot: Option<String>) {
        match self {
            SceneEvent::Move(m) => m.shot = shot,
            SceneEvent::Line(l) => l.shot = shot,
        }
    }

    pub fn current_position(&self) -> Option<&[Placement]> {
        match self {
            SceneEvent::Move(m) => m.current_position.as_deref(),
            SceneEvent::Line(l) => l.current_position.as_deref(),
        }
    }

    pub fn set_current_position(&mut self, snapshot: Option<Vec<Placement>>) {
        match self {
            SceneEvent::Move(m) => m.current_position = snapshot,
            SceneEvent::Line(l) => l.current_position = snapshot,
        }
    }

    /// The character a shot of this event is framed on.
    pub fn subject(&self) -> &str {
        match self {
            SceneEvent::Move(m) => &m.character,
            SceneEvent::Line(l) => &l.speaker,
        }
    }

    pub fn is_move(&self) -> bool {
        matches!(self, SceneEvent::Move(_))
    }

    pub fn as_line(&self) -> Option<&LineEvent> {
        match self {
            SceneEvent::Line(l) => Some(l),
            SceneEvent::Move(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SceneInfo {
    pub who: Vec<String>,
    pub location: String,
    pub what: String,
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Scene {
    pub info: SceneInfo,
    pub initial_position: Vec<Placement>,
    pub events: Vec<SceneEvent>,
    pub extra: Extra,
}

impl Scene {
    pub fn lines(&self) -> impl Iterator<Item = &LineEvent> {
        self.events.iter().filter_map(SceneEvent::as_line)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnnotatedScript {
    pub topic: String,
    pub profiles: Vec<CharacterProfile>,
    pub scenes: Vec<Scene>,
    pub extra: Extra,
}

impl AnnotatedScript {
    pub fn from_scenes(scenes: Vec<Scene>) -> Self {
        AnnotatedScript {
            scenes,
            ..Default::default()
        }
    }

    pub fn profile(&self, name: &str) -> Option<&CharacterProfile> {
        self.profiles.iter().find(|p| p.name == name)
    }

    /// Checks the structural invariants that every constructed script
    /// must satisfy.
    pub fn check_schema(&self) -> Result<(), ScriptError> {
        let schema = |field: &str, locus: String, message: String| {
            Err(ScriptError::Schema {
                field: field.to_string(),
                locus,
                message,
            })
        };
        if self.scenes.is_empty() {
            return schema("scenes", "$".into(), "must not be empty".into());
        }
        if self.scenes.len() > MAX_SCENES {
            return schema(
                "scenes",
                "$".into(),
                format!("has {} scenes (at most {MAX_SCENES})", self.scenes.len()),
            );
        }
        if self.profiles.len() > MAX_PROFILES {
            return schema(
                "profiles",
                "$".into(),
                format!("has {} profiles (at most {MAX_PROFILES})", self.profiles.len()),
            );
        }
        for (i, p) in self.profiles.iter().enumerate() {
            p.check().map_err(|(field, message)| ScriptError::Schema {
                field: field.to_string(),
                locus: format!("profiles[{i}]"),
                message,
            })?;
        }
        for (si, scene) in self.scenes.iter().enumerate() {
            for (pi, p) in scene.initial_position.iter().enumerate() {
                if !scene.info.who.contains(&p.character) {
                    return schema(
                        "initial position",
                        format!("[{si}].initial position[{pi}]"),
                        format!("places {:?}, who is not in the scene", p.character),
                    );
                }
            }
        }
        if !self.profiles.is_empty() {
            let names: BTreeSet<&str> = self.profiles.iter().map(|p| p.name.as_str()).collect();
            let mut used = BTreeSet::new();
            for (si, scene) in self.scenes.iter().enumerate() {
                for who in &scene.info.who {
                    if !names.contains(who.as_str()) {
                        return schema(
                            "who",
                            format!("[{si}].scene information.who"),
                            format!("names {who:?}, who has no profile"),
                        );
                    }
                    used.insert(who.as_str());
                }
            }
            if let Some(unused) = names.difference(&used).next() {
                return schema(
                    "profiles",
                    "$".into(),
                    format!("profile {unused:?} appears in no scene"),
                );
            }
        }
        Ok(())
    }
}

impl CharacterProfile {
    fn check(&self) -> Result<(), (&'static str, String)> {
        if self.name.is_empty() || self.name.chars().any(char::is_whitespace) {
            return Err(("name", format!("{:?} must be a single word", self.name)));
        }
        let fields = [
            ("age", &self.age),
            ("occupation", &self.occupation),
            ("personality traits", &self.personality_traits),
            ("speaking style", &self.speaking_style),
        ];
        for (field, value) in fields {
            if value.trim().is_empty() {
                return Err((field, "must not be empty".into()));
            }
        }
        Ok(())
    }

    pub fn from_value(v: &Value) -> Result<Self, ScriptError> {
        let node = Node::root(v);
        let profile = node.profile()?;
        profile.check().map_err(|(field, message)| ScriptError::Schema {
            field: field.into(),
            locus: "$".into(),
            message,
        })?;
        Ok(profile)
    }

    pub fn to_value(&self) -> Value {
        let mut m = Map::new();
        m.insert("name".into(), self.name.clone().into());
        m.insert("age".into(), self.age.clone().into());
        m.insert("gender".into(), self.gender.as_str().into());
        m.insert("occupation".into(), self.occupation.clone().into());
        m.insert("personality traits".into(), self.personality_traits.clone().into());
        m.insert("speaking style".into(), self.speaking_style.clone().into());
        Value::Object(m)
    }
}

impl SceneOutline {
    pub fn from_value(v: &Value) -> Result<Self, ScriptError> {
        Node::root(v).outline()
    }

    pub fn to_value(&self) -> Value {
        let mut m = Map::new();
        m.insert("sub-topic".into(), self.sub_topic.clone().into());
        m.insert(
            "selected-characters".into(),
            Value::Array(
                self.selected_characters
                    .iter()
                    .cloned()
                    .map(Value::String)
                    .collect(),
            ),
        );
        m.insert("selected-location".into(), self.selected_location.clone().into());
        m.insert("story-plot".into(), self.story_plot.clone().into());
        m.insert("dialogue-goal".into(), self.dialogue_goal.clone().into());
        Value::Object(m)
    }
}

// ---------------------------------------------------------------------------
// Parsing

/// Parses a script document (bare scene array or wrapped object).
pub fn parse_script(text: &str) -> Result<AnnotatedScript, ScriptError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ScriptError::Parse {
        locus: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    script_from_value(&value)
}

pub fn script_from_value(value: &Value) -> Result<AnnotatedScript, ScriptError> {
    let root = Node::root(value);
    let script = match value {
        Value::Array(_) => AnnotatedScript::from_scenes(root.scenes()?),
        Value::Object(map) => {
            let mut extra = Extra::new();
            for (k, v) in map {
                if !matches!(k.as_str(), "scenes" | "profiles" | "topic") {
                    extra.insert(k.clone(), v.clone());
                }
            }
            let scenes = root.req("scenes", &[])?.scenes()?;
            let profiles = match root.opt("profiles", &[])? {
                Some(p) => p.items()?.iter().map(Node::profile).collect::<Result<_, _>>()?,
                None => Vec::new(),
            };
            let topic = match root.opt("topic", &[])? {
                Some(t) => t.string()?,
                None => String::new(),
            };
            AnnotatedScript {
                topic,
                profiles,
                scenes,
                extra,
            }
        }
        _ => {
            return Err(ScriptError::Parse {
                locus: "$".into(),
                message: "expected a scene array or an object with \"scenes\"".into(),
            })
        }
    };
    script.check_schema()?;
    Ok(script)
}

/// Parses a bare sequence of scene objects without the script-level
/// cardinality checks. Used for intermediate agent output.
pub fn scenes_from_value(value: &Value) -> Result<Vec<Scene>, ScriptError> {
    Node::root(value).scenes()
}

struct Node<'a> {
    value: &'a Value,
    path: String,
}

impl<'a> Node<'a> {
    fn root(value: &'a Value) -> Self {
        Node {
            value,
            path: String::new(),
        }
    }

    fn locus(&self) -> String {
        if self.path.is_empty() {
            "$".into()
        } else {
            self.path.clone()
        }
    }

    fn child(&self, key: &str, value: &'a Value) -> Node<'a> {
        let path = if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        };
        Node { value, path }
    }

    fn index(&self, i: usize, value: &'a Value) -> Node<'a> {
        Node {
            value,
            path: format!("{}[{i}]", self.path),
        }
    }

    fn type_error(&self, expected: &str) -> ScriptError {
        ScriptError::Parse {
            locus: self.locus(),
            message: format!("expected {expected}, found {}", type_name(self.value)),
        }
    }

    fn object(&self) -> Result<&'a Map<String, Value>, ScriptError> {
        self.value.as_object().ok_or_else(|| self.type_error("an object"))
    }

    fn items(&self) -> Result<Vec<Node<'a>>, ScriptError> {
        let arr = self.value.as_array().ok_or_else(|| self.type_error("an array"))?;
        Ok(arr.iter().enumerate().map(|(i, v)| self.index(i, v)).collect())
    }

    fn lookup(&self, key: &str, aliases: &[&str]) -> Result<Option<Node<'a>>, ScriptError> {
        let map = self.object()?;
        for k in std::iter::once(&key).chain(aliases) {
            if let Some(v) = map.get(*k) {
                return Ok(Some(self.child(k, v)));
            }
        }
        Ok(None)
    }

    fn opt(&self, key: &str, aliases: &[&str]) -> Result<Option<Node<'a>>, ScriptError> {
        Ok(self.lookup(key, aliases)?.filter(|n| !n.value.is_null()))
    }

    fn req(&self, key: &str, aliases: &[&str]) -> Result<Node<'a>, ScriptError> {
        self.opt(key, aliases)?.ok_or_else(|| ScriptError::Schema {
            field: key.to_string(),
            locus: self.locus(),
            message: "is required".into(),
        })
    }

    fn extras(&self, known: &[&str]) -> Result<Extra, ScriptError> {
        Ok(self
            .object()?
            .iter()
            .filter(|(k, _)| !known.contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect())
    }

    fn string(&self) -> Result<String, ScriptError> {
        match self.value {
            Value::String(s) => Ok(s.clone()),
            Value::Number(n) => Ok(n.to_string()),
            _ => Err(self.type_error("a string")),
        }
    }

    fn string_list(&self) -> Result<Vec<String>, ScriptError> {
        match self.value {
            // Agents sometimes write `"who": "Alex, Mia"`.
            Value::String(s) => Ok(s
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect()),
            Value::Array(_) => self.items()?.iter().map(Node::string).collect(),
            _ => Err(self.type_error("a list of names")),
        }
    }

    fn posture(&self) -> Result<Posture, ScriptError> {
        let s = self.string()?;
        match s.trim().to_lowercase().as_str() {
            "standing" => Ok(Posture::Standing),
            "sitting" => Ok(Posture::Sitting),
            _ => Err(ScriptError::Parse {
                locus: self.locus(),
                message: format!("state must be \"standing\" or \"sitting\", found {s:?}"),
            }),
        }
    }

    fn placements(&self) -> Result<Vec<Placement>, ScriptError> {
        self.items()?
            .iter()
            .map(|n| {
                Ok(Placement {
                    character: n.req("character", &[])?.string()?,
                    position: n.req("position", &[])?.string()?,
                    extra: n.extras(&["character", "position"])?,
                })
            })
            .collect()
    }

    fn scenes(&self) -> Result<Vec<Scene>, ScriptError> {
        let items = self.items()?;
        if items.is_empty() {
            return Err(ScriptError::Schema {
                field: "scenes".into(),
                locus: self.locus(),
                message: "must not be empty".into(),
            });
        }
        items.iter().map(Node::scene).collect()
    }

    fn scene(&self) -> Result<Scene, ScriptError> {
        const INFO: [&str; 2] = ["scene information", "scene_information"];
        const INITIAL: [&str; 2] = ["initial position", "initial_position"];
        const EVENTS: [&str; 2] = ["scene", "dialogues"];
        let info_node = self.req(INFO[0], &INFO[1..])?;
        let info = SceneInfo {
            who: info_node.req("who", &[])?.string_list()?,
            location: info_node.req("where", &[])?.string()?,
            what: match info_node.opt("what", &[])? {
                Some(n) => n.string()?,
                None => String::new(),
            },
            extra: info_node.extras(&["who", "where", "what"])?,
        };
        let initial_position = match self.opt(INITIAL[0], &INITIAL[1..])? {
            Some(n) => n.placements()?,
            None => Vec::new(),
        };
        let events = self
            .req(EVENTS[0], &EVENTS[1..])?
            .items()?
            .iter()
            .map(Node::event)
            .collect::<Result<_, _>>()?;
        let known: Vec<&str> = INFO.iter().chain(&INITIAL).chain(&EVENTS).copied().collect();
        Ok(Scene {
            info,
            initial_position,
            events,
            extra: self.extras(&known)?,
        })
    }

    fn event(&self) -> Result<SceneEvent, ScriptError> {
        const SNAPSHOT: [&str; 2] = ["current position", "current_position"];
        let shot = match self.opt("shot", &[])? {
            Some(n) => Some(n.string()?),
            None => None,
        };
        let current_position = match self.opt(SNAPSHOT[0], &SNAPSHOT[1..])? {
            Some(n) => Some(n.placements()?),
            None => None,
        };
        if let Some(mv) = self.opt("move", &[])? {
            if self.lookup("speaker", &[])?.is_some() {
                return Err(ScriptError::Parse {
                    locus: self.locus(),
                    message: "event has both \"move\" and \"speaker\"".into(),
                });
            }
            return Ok(SceneEvent::Move(MoveEvent {
                character: mv.req("character", &[])?.string()?,
                destination: mv.req("destination", &[])?.string()?,
                shot,
                current_position,
                move_extra: mv.extras(&["character", "destination"])?,
                extra: self.extras(&["move", "shot", SNAPSHOT[0], SNAPSHOT[1]])?,
            }));
        }
        let actions = match self.opt("actions", &[])? {
            Some(n) => n.items()?.iter().map(Node::action).collect::<Result<_, _>>()?,
            None => Vec::new(),
        };
        Ok(SceneEvent::Line(LineEvent {
            speaker: self.req("speaker", &[])?.string()?,
            content: self.req("content", &[])?.string()?,
            actions,
            shot,
            current_position,
            extra: self.extras(&["speaker", "actions", "content", "shot", SNAPSHOT[0], SNAPSHOT[1]])?,
        }))
    }

    fn action(&self) -> Result<ActionEntry, ScriptError> {
        Ok(ActionEntry {
            character: self.req("character", &[])?.string()?,
            state: match self.opt("state", &[])? {
                Some(n) => Some(n.posture()?),
                None => None,
            },
            action: self.req("action", &[])?.string()?,
            extra: self.extras(&["character", "state", "action"])?,
        })
    }

    fn profile(&self) -> Result<CharacterProfile, ScriptError> {
        let gender_node = self.req("gender", &[])?;
        let gender = match gender_node.string()?.trim().to_lowercase().as_str() {
            "male" => Gender::Male,
            "female" => Gender::Female,
            other => {
                return Err(ScriptError::Parse {
                    locus: gender_node.locus(),
                    message: format!("gender must be male or female, found {other:?}"),
                })
            }
        };
        Ok(CharacterProfile {
            name: self.req("name", &[])?.string()?,
            age: self.req("age", &[])?.string()?,
            gender,
            occupation: self.req("occupation", &[])?.string()?,
            personality_traits: self
                .req("personality traits", &["personality_traits"])?
                .string()?,
            speaking_style: self.req("speaking style", &["speaking_style"])?.string()?,
        })
    }

    fn outline(&self) -> Result<SceneOutline, ScriptError> {
        Ok(SceneOutline {
            sub_topic: self.req("sub-topic", &["sub_topic"])?.string()?,
            selected_characters: self
                .req("selected-characters", &["selected_characters"])?
                .string_list()?,
            selected_location: self
                .req("selected-location", &["selected_location"])?
                .string()?,
            story_plot: self.req("story-plot", &["story_plot"])?.string()?,
            dialogue_goal: self.req("dialogue-goal", &["dialogue_goal"])?.string()?,
        })
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

// ---------------------------------------------------------------------------
// Serialization

fn push_extra(map: &mut Map<String, Value>, extra: &Extra) {
    for (k, v) in extra {
        map.insert(k.clone(), v.clone());
    }
}

fn placements_value(ps: &[Placement]) -> Value {
    Value::Array(
        ps.iter()
            .map(|p| {
                let mut m = Map::new();
                m.insert("character".into(), p.character.clone().into());
                m.insert("position".into(), p.position.clone().into());
                push_extra(&mut m, &p.extra);
                Value::Object(m)
            })
            .collect(),
    )
}

pub fn event_to_value(event: &SceneEvent) -> Value {
    let mut m = Map::new();
    let (shot, snapshot, extra) = match event {
        SceneEvent::Move(mv) => {
            let mut inner = Map::new();
            inner.insert("character".into(), mv.character.clone().into());
            inner.insert("destination".into(), mv.destination.clone().into());
            push_extra(&mut inner, &mv.move_extra);
            m.insert("move".into(), Value::Object(inner));
            (&mv.shot, &mv.current_position, &mv.extra)
        }
        SceneEvent::Line(line) => {
            m.insert("speaker".into(), line.speaker.clone().into());
            let actions = line
                .actions
                .iter()
                .map(|a| {
                    let mut am = Map::new();
                    am.insert("character".into(), a.character.clone().into());
                    if let Some(state) = a.state {
                        am.insert("state".into(), state.as_str().into());
                    }
                    am.insert("action".into(), a.action.clone().into());
                    push_extra(&mut am, &a.extra);
                    Value::Object(am)
                })
                .collect();
            m.insert("actions".into(), Value::Array(actions));
            m.insert("content".into(), line.content.clone().into());
            (&line.shot, &line.current_position, &line.extra)
        }
    };
    if let Some(shot) = shot {
        m.insert("shot".into(), shot.clone().into());
    }
    if let Some(snapshot) = snapshot {
        m.insert("current position".into(), placements_value(snapshot));
    }
    push_extra(&mut m, extra);
    Value::Object(m)
}

pub fn scene_to_value(scene: &Scene) -> Value {
    let mut info = Map::new();
    info.insert(
        "who".into(),
        Value::Array(scene.info.who.iter().cloned().map(Value::String).collect()),
    );
    info.insert("where".into(), scene.info.location.clone().into());
    info.insert("what".into(), scene.info.what.clone().into());
    push_extra(&mut info, &scene.info.extra);

    let mut m = Map::new();
    m.insert("scene information".into(), Value::Object(info));
    m.insert("initial position".into(), placements_value(&scene.initial_position));
    m.insert(
        "scene".into(),
        Value::Array(scene.events.iter().map(event_to_value).collect()),
    );
    push_extra(&mut m, &scene.extra);
    Value::Object(m)
}

pub fn scenes_to_value(scenes: &[Scene]) -> Value {
    Value::Array(scenes.iter().map(scene_to_value).collect())
}

pub fn script_to_value(script: &AnnotatedScript) -> Value {
    let scenes = scenes_to_value(&script.scenes);
    if script.topic.is_empty() && script.profiles.is_empty() && script.extra.is_empty() {
        return scenes;
    }
    let mut m = Map::new();
    m.insert("topic".into(), script.topic.clone().into());
    m.insert(
        "profiles".into(),
        Value::Array(script.profiles.iter().map(CharacterProfile::to_value).collect()),
    );
    m.insert("scenes".into(), scenes);
    push_extra(&mut m, &script.extra);
    Value::Object(m)
}

/// Pretty-prints with four-space indentation and a trailing newline.
pub fn to_pretty_json(value: &Value) -> String {
    let mut buf = Vec::new();
    let formatter = serde_json::ser::PrettyFormatter::with_indent(b"    ");
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, formatter);
    value
        .serialize(&mut ser)
        .expect("serializing a JSON value cannot fail");
    let mut text = String::from_utf8(buf).expect("serde_json emits UTF-8");
    text.push('\n');
    text
}

pub fn serialize_script(script: &AnnotatedScript) -> String {
    to_pretty_json(&script_to_value(script))
}

/// Serializes just the scene array, the exact shape consumed by a renderer.
pub fn serialize_scenes(scenes: &[Scene]) -> String {
    to_pretty_json(&scenes_to_value(scenes))
}

// ---------------------------------------------------------------------------
// Timing

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationModel {
    pub words_per_second: f64,
    pub floor_seconds: f64,
    pub move_seconds: f64,
}

impl Default for DurationModel {
    fn default() -> Self {
        DurationModel {
            words_per_second: 2.5,
            floor_seconds: 1.5,
            move_seconds: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid duration model: {0}")]
pub struct InvalidDurationModel(String);

impl DurationModel {
    pub fn new(
        words_per_second: f64,
        floor_seconds: f64,
        move_seconds: f64,
    ) -> Result<Self, InvalidDurationModel> {
        for (name, v) in [
            ("words per second", words_per_second),
            ("floor", floor_seconds),
            ("move duration", move_seconds),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(InvalidDurationModel(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(DurationModel {
            words_per_second,
            floor_seconds,
            move_seconds,
        })
    }

    pub fn line_seconds(&self, content: &str) -> f64 {
        let words = content.split_whitespace().count() as f64;
        (words / self.words_per_second).max(self.floor_seconds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineTiming {
    pub scene_index: usize,
    pub event_index: usize,
    pub duration: f64,
}

pub fn estimate_durations(script: &AnnotatedScript, model: &DurationModel) -> Vec<LineTiming> {
    script
        .scenes
        .iter()
        .enumerate()
        .flat_map(|(si, scene)| {
            scene.events.iter().enumerate().map(move |(ei, event)| LineTiming {
                scene_index: si,
                event_index: ei,
                duration: match event {
                    SceneEvent::Move(_) => model.move_seconds,
                    SceneEvent::Line(l) => model.line_seconds(&l.content),
                },
            })
        })
        .collect()
}
