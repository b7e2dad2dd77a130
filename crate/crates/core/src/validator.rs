//! Rule engine that lints an [`AnnotatedScript`] against an
//! [`EnvironmentSpec`].
//!
//! Three families of rules are checked:
//!
//! - the posture state machine (only `Sit Down` / `Stand Up` change
//!   posture, actions must match the current posture, one action per
//!   character per line, sitting only at sittable positions);
//! - occupancy (known positions, no two characters on one spot, scene size
//!   within the location's capacity, `current position` snapshots agreeing
//!   with the replayed state);
//! - the shot grammar (scene openers, Zoom after Long, Truck only as
//!   opener, Tracking only on movement, Pan in runs during dialogue, Curve
//!   Surround only on a first appearance, no long runs of one static shot).
//!
//! Findings are data: [`validate`] never fails. Output order is
//! deterministic, sorted by scene, event and rule.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::environment::{
    EnvironmentSpec, LocationSpec, Posture, ShotKind, ShotSpec, StateEffect,
};
use crate::script::{AnnotatedScript, Placement, Scene, SceneEvent};

pub const LONG_SHOT: &str = "Long Shot";
pub const MEDIUM_SHOT: &str = "Medium Shot";
pub const CLOSE_UP_SHOT: &str = "Close-up Shot";
pub const PAN_SHOT: &str = "Pan Shot";
pub const ARC_SHOT: &str = "360-Degree Arc Shot";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RuleId {
    /// Action name is not in the catalog.
    UnknownAction,
    /// Shot name is not in the catalog (info level for non-canonical
    /// spellings that do resolve).
    UnknownShot,
    /// Standing-only action while sitting, or the reverse.
    StateMismatch,
    /// More than one action for a character on one line.
    DoubleAction,
    /// `Sit Down` at a position that is not sittable.
    SitUnsittable,
    /// Annotated `state` contradicts the replayed posture, i.e. the posture
    /// changed without `Sit Down` / `Stand Up`.
    IllegalStateChange,
    /// Two characters on one position at the same time.
    PositionCollision,
    /// More characters than the location holds.
    CapacityExceeded,
    /// Position (or location) not defined in the environment.
    UnknownPosition,
    /// A scene that starts with dialogue must open on a Truck or Long Shot.
    OpeningShotRule,
    /// Zoom Shot must be preceded by a Long Shot.
    ZoomNeedsLong,
    /// Truck Shot is only allowed as the first shot of a scene.
    TruckOnlyOpening,
    /// Tracking Shot only on an event where the subject moves.
    TrackingNeedsMotion,
    /// A Pan Shot during dialogue should be part of a run.
    PanRunRule,
    /// Curve Surround Shot only on the subject's first appearance.
    CurveSurroundFirstAppearance,
    /// Too many identical static shots in a row.
    ConsecutiveStaticRepeat,
    /// `current position` in the file disagrees with the replayed state.
    PositionSnapshotMismatch,
}

impl RuleId {
    pub const ALL: [RuleId; 17] = [
        RuleId::UnknownAction,
        RuleId::UnknownShot,
        RuleId::StateMismatch,
        RuleId::DoubleAction,
        RuleId::SitUnsittable,
        RuleId::IllegalStateChange,
        RuleId::PositionCollision,
        RuleId::CapacityExceeded,
        RuleId::UnknownPosition,
        RuleId::OpeningShotRule,
        RuleId::ZoomNeedsLong,
        RuleId::TruckOnlyOpening,
        RuleId::TrackingNeedsMotion,
        RuleId::PanRunRule,
        RuleId::CurveSurroundFirstAppearance,
        RuleId::ConsecutiveStaticRepeat,
        RuleId::PositionSnapshotMismatch,
    ];

    pub fn severity(self) -> Severity {
        match self {
            RuleId::PanRunRule
            | RuleId::ConsecutiveStaticRepeat
            | RuleId::PositionSnapshotMismatch => Severity::Warning,
            _ => Severity::Error,
        }
    }

    /// Rules about camera choice, as opposed to staging.
    pub fn is_shot_rule(self) -> bool {
        matches!(
            self,
            RuleId::UnknownShot
                | RuleId::OpeningShotRule
                | RuleId::ZoomNeedsLong
                | RuleId::TruckOnlyOpening
                | RuleId::TrackingNeedsMotion
                | RuleId::PanRunRule
                | RuleId::CurveSurroundFirstAppearance
                | RuleId::ConsecutiveStaticRepeat
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::UnknownAction => "UnknownAction",
            RuleId::UnknownShot => "UnknownShot",
            RuleId::StateMismatch => "StateMismatch",
            RuleId::DoubleAction => "DoubleAction",
            RuleId::SitUnsittable => "SitUnsittable",
            RuleId::IllegalStateChange => "IllegalStateChange",
            RuleId::PositionCollision => "PositionCollision",
            RuleId::CapacityExceeded => "CapacityExceeded",
            RuleId::UnknownPosition => "UnknownPosition",
            RuleId::OpeningShotRule => "OpeningShotRule",
            RuleId::ZoomNeedsLong => "ZoomNeedsLong",
            RuleId::TruckOnlyOpening => "TruckOnlyOpening",
            RuleId::TrackingNeedsMotion => "TrackingNeedsMotion",
            RuleId::PanRunRule => "PanRunRule",
            RuleId::CurveSurroundFirstAppearance => "CurveSurroundFirstAppearance",
            RuleId::ConsecutiveStaticRepeat => "ConsecutiveStaticRepeat",
            RuleId::PositionSnapshotMismatch => "PositionSnapshotMismatch",
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

/// Which field of an event an [`Edit`] replaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Shot,
    /// The `action` of the n-th entry in a line's `actions`.
    Action(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    pub scene_index: usize,
    pub event_index: usize,
    pub field: Field,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    /// The primary replacement value.
    pub value: String,
    /// Field edits that realize the fix; the first one carries `value`.
    pub edits: Vec<Edit>,
}

impl Suggestion {
    fn single(scene_index: usize, event_index: usize, field: Field, value: &str) -> Self {
        Suggestion {
            value: value.to_string(),
            edits: vec![Edit {
                scene_index,
                event_index,
                field,
                value: value.to_string(),
            }],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub rule: RuleId,
    pub severity: Severity,
    pub scene_index: usize,
    /// `None` for scene-level findings (capacity, initial placement).
    pub event_index: Option<usize>,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggestion: Option<Suggestion>,
}

impl Diagnostic {
    fn new(rule: RuleId, scene_index: usize, event_index: Option<usize>, message: String) -> Self {
        Diagnostic {
            rule,
            severity: rule.severity(),
            scene_index,
            event_index,
            message,
            suggestion: None,
        }
    }

    fn info(mut self) -> Self {
        self.severity = Severity::Info;
        self
    }

    fn with(mut self, suggestion: Option<Suggestion>) -> Self {
        self.suggestion = suggestion;
        self
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    /// One line-delimited record, as printed by the `validate` command.
    pub fn to_record(&self) -> serde_json::Value {
        serde_json::json!({
            "rule": self.rule,
            "severity": self.severity,
            "scene": self.scene_index,
            "event": self.event_index,
            "message": self.message,
            "suggestion": self.suggestion.as_ref().map(|s| s.value.clone()),
            "edits": self.suggestion.as_ref().map(|s| s.edits.clone()).unwrap_or_default(),
        })
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Info => "info",
        };
        write!(f, "{sev}[{}] scene {}", self.rule, self.scene_index + 1)?;
        if let Some(e) = self.event_index {
            write!(f, " event {}", e + 1)?;
        }
        write!(f, ": {}", self.message)?;
        if let Some(s) = &self.suggestion {
            write!(f, " (suggest {:?})", s.value)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ValidateOptions {
    /// Longest allowed run of one static shot.
    pub static_repeat_limit: usize,
    /// Report events without a shot (after cinematography).
    pub require_shots: bool,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions {
            static_repeat_limit: 3,
            require_shots: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharacterState {
    pub position: Option<String>,
    pub posture: Posture,
}

/// Replayed positions and postures of a scene's characters.
///
/// `snapshots[k]` is the state just before event `k`; the last entry is the
/// state after the final event, so there are `events + 1` snapshots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateTrace {
    pub snapshots: Vec<BTreeMap<String, CharacterState>>,
}

impl StateTrace {
    pub fn initial(&self) -> &BTreeMap<String, CharacterState> {
        &self.snapshots[0]
    }

    pub fn final_state(&self) -> &BTreeMap<String, CharacterState> {
        self.snapshots.last().expect("trace has at least one snapshot")
    }

    pub fn before(&self, event_index: usize) -> &BTreeMap<String, CharacterState> {
        &self.snapshots[event_index]
    }

    /// The sequence of states one character passes through.
    pub fn sequence(&self, character: &str) -> Vec<&CharacterState> {
        self.snapshots
            .iter()
            .filter_map(|s| s.get(character))
            .collect()
    }

    /// `current position` snapshot for an event, in placement order.
    pub fn placements_before(&self, event_index: usize, order: &[Placement]) -> Vec<Placement> {
        let state = self.before(event_index);
        let mut out: Vec<Placement> = order
            .iter()
            .filter_map(|p| {
                state
                    .get(&p.character)
                    .and_then(|s| s.position.clone())
                    .map(|pos| Placement::new(&p.character, pos))
            })
            .collect();
        for (name, s) in state {
            if !order.iter().any(|p| &p.character == name) {
                if let Some(pos) = &s.position {
                    out.push(Placement::new(name, pos));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("unknown location {0:?}")]
    UnknownLocation(String),
    #[error("unknown position: {0}")]
    UnknownPosition(String),
}

/// Replays a scene's moves and posture changes.
pub fn derive_state_trace(scene: &Scene, env: &EnvironmentSpec) -> Result<StateTrace, TraceError> {
    let location = env
        .location(&scene.info.location)
        .ok_or_else(|| TraceError::UnknownLocation(scene.info.location.clone()))?;
    let mut sink = Vec::new();
    let trace = walk_scene(0, scene, Some(location), env, &mut sink);
    match sink.into_iter().find(|d| d.rule == RuleId::UnknownPosition) {
        Some(d) => Err(TraceError::UnknownPosition(d.message)),
        None => Ok(trace),
    }
}

/// Posture a character starts a scene in: standing unless their first
/// annotated `state` says sitting.
fn initial_posture(scene: &Scene, character: &str) -> Posture {
    scene
        .lines()
        .flat_map(|l| &l.actions)
        .filter(|a| a.character == character)
        .find_map(|a| a.state)
        .unwrap_or(Posture::Standing)
}

fn walk_scene(
    si: usize,
    scene: &Scene,
    location: Option<&LocationSpec>,
    env: &EnvironmentSpec,
    out: &mut Vec<Diagnostic>,
) -> StateTrace {
    let mut state: BTreeMap<String, CharacterState> = BTreeMap::new();
    let names: BTreeSet<&str> = scene
        .info
        .who
        .iter()
        .map(String::as_str)
        .chain(scene.initial_position.iter().map(|p| p.character.as_str()))
        .collect();
    for name in names {
        state.insert(
            name.to_string(),
            CharacterState {
                position: None,
                posture: initial_posture(scene, name),
            },
        );
    }

    let mut occupied: HashMap<&str, &str> = HashMap::new();
    for p in &scene.initial_position {
        if let Some(loc) = location {
            if loc.position(&p.position).is_none() {
                out.push(Diagnostic::new(
                    RuleId::UnknownPosition,
                    si,
                    None,
                    format!(
                        "{} starts at {:?}, which is not a position in {}",
                        p.character, p.position, loc.name
                    ),
                ));
                continue;
            }
        }
        if let Some(other) = occupied.insert(p.position.as_str(), p.character.as_str()) {
            out.push(Diagnostic::new(
                RuleId::PositionCollision,
                si,
                None,
                format!("{} and {} both start at {}", other, p.character, p.position),
            ));
        }
        if let Some(s) = state.get_mut(&p.character) {
            s.position = Some(p.position.clone());
        }
    }

    let mut snapshots = Vec::with_capacity(scene.events.len() + 1);
    for (ei, event) in scene.events.iter().enumerate() {
        snapshots.push(state.clone());
        match event {
            SceneEvent::Move(mv) => {
                let Some(current) = state.get(&mv.character).cloned() else {
                    continue;
                };
                if current.posture == Posture::Sitting {
                    out.push(Diagnostic::new(
                        RuleId::StateMismatch,
                        si,
                        Some(ei),
                        format!("{} moves while sitting", mv.character),
                    ));
                }
                if let Some(loc) = location {
                    if loc.position(&mv.destination).is_none() {
                        out.push(Diagnostic::new(
                            RuleId::UnknownPosition,
                            si,
                            Some(ei),
                            format!(
                                "{} moves to {:?}, which is not a position in {}",
                                mv.character, mv.destination, loc.name
                            ),
                        ));
                        continue;
                    }
                }
                if let Some((other, _)) = state.iter().find(|(name, s)| {
                    *name != &mv.character && s.position.as_deref() == Some(mv.destination.as_str())
                }) {
                    out.push(Diagnostic::new(
                        RuleId::PositionCollision,
                        si,
                        Some(ei),
                        format!(
                            "{} moves to {}, already occupied by {}",
                            mv.character, mv.destination, other
                        ),
                    ));
                }
                if let Some(s) = state.get_mut(&mv.character) {
                    s.position = Some(mv.destination.clone());
                }
            }
            SceneEvent::Line(line) => {
                let mut acted: BTreeSet<&str> = BTreeSet::new();
                for (ai, entry) in line.actions.iter().enumerate() {
                    if !acted.insert(entry.character.as_str()) {
                        out.push(Diagnostic::new(
                            RuleId::DoubleAction,
                            si,
                            Some(ei),
                            format!("{} has more than one action on this line", entry.character),
                        ));
                    }
                    let spec = match env.resolve_action(&entry.action) {
                        Ok(spec) => spec,
                        Err(_) => {
                            let suggestion = env
                                .suggest_action(&entry.action)
                                .map(|v| Suggestion::single(si, ei, Field::Action(ai), &v));
                            out.push(
                                Diagnostic::new(
                                    RuleId::UnknownAction,
                                    si,
                                    Some(ei),
                                    format!("{:?} is not in the action catalog", entry.action),
                                )
                                .with(suggestion),
                            );
                            continue;
                        }
                    };
                    if spec.canonical_name != entry.action {
                        out.push(
                            Diagnostic::new(
                                RuleId::UnknownAction,
                                si,
                                Some(ei),
                                format!(
                                    "{:?} is a non-canonical spelling of {:?}",
                                    entry.action, spec.canonical_name
                                ),
                            )
                            .info()
                            .with(Some(Suggestion::single(
                                si,
                                ei,
                                Field::Action(ai),
                                &spec.canonical_name,
                            ))),
                        );
                    }
                    let current = state
                        .entry(entry.character.clone())
                        .or_insert(CharacterState {
                            position: None,
                            posture: Posture::Standing,
                        });
                    if let Some(annotated) = entry.state {
                        if annotated != current.posture {
                            out.push(Diagnostic::new(
                                RuleId::IllegalStateChange,
                                si,
                                Some(ei),
                                format!(
                                    "{} is annotated {annotated} but is {} (posture changes need Sit Down or Stand Up)",
                                    entry.character, current.posture
                                ),
                            ));
                        }
                    }
                    if spec.required_state != current.posture {
                        out.push(Diagnostic::new(
                            RuleId::StateMismatch,
                            si,
                            Some(ei),
                            format!(
                                "{} performs {:?}, which needs {}, while {}",
                                entry.character,
                                spec.canonical_name,
                                spec.required_state,
                                current.posture
                            ),
                        ));
                        continue;
                    }
                    match spec.state_effect {
                        StateEffect::None => {}
                        StateEffect::ToSitting => {
                            let seat = current
                                .position
                                .as_deref()
                                .and_then(|p| location.and_then(|l| l.position(p)));
                            match seat {
                                Some(seat) if !seat.sittable => {
                                    out.push(Diagnostic::new(
                                        RuleId::SitUnsittable,
                                        si,
                                        Some(ei),
                                        format!(
                                            "{} sits down at {}, which is not sittable",
                                            entry.character, seat.id
                                        ),
                                    ));
                                }
                                _ => current.posture = Posture::Sitting,
                            }
                        }
                        StateEffect::ToStanding => current.posture = Posture::Standing,
                    }
                }
            }
        }
    }
    snapshots.push(state);
    StateTrace { snapshots }
}

fn check_snapshots(si: usize, scene: &Scene, trace: &StateTrace, out: &mut Vec<Diagnostic>) {
    for (ei, event) in scene.events.iter().enumerate() {
        let Some(snapshot) = event.current_position() else {
            continue;
        };
        let derived: BTreeMap<&str, &str> = trace
            .before(ei)
            .iter()
            .filter_map(|(n, s)| s.position.as_deref().map(|p| (n.as_str(), p)))
            .collect();
        let written: BTreeMap<&str, &str> = snapshot
            .iter()
            .map(|p| (p.character.as_str(), p.position.as_str()))
            .collect();
        if derived != written {
            let diff: Vec<String> = written
                .iter()
                .filter(|(n, p)| derived.get(*n) != Some(*p))
                .map(|(n, p)| format!("{n} at {p} (derived {})", derived.get(n).unwrap_or(&"none")))
                .chain(
                    derived
                        .keys()
                        .filter(|n| !written.contains_key(*n))
                        .map(|n| format!("{n} missing")),
                )
                .collect();
            out.push(Diagnostic::new(
                RuleId::PositionSnapshotMismatch,
                si,
                Some(ei),
                format!("current position disagrees with replayed state: {}", diff.join("; ")),
            ));
        }
    }
}

fn tighter_static(canonical: &str) -> &'static str {
    match canonical {
        LONG_SHOT => MEDIUM_SHOT,
        MEDIUM_SHOT => CLOSE_UP_SHOT,
        _ => MEDIUM_SHOT,
    }
}

fn check_shots<'e>(
    si: usize,
    scene: &Scene,
    env: &'e EnvironmentSpec,
    options: &ValidateOptions,
    seen: &mut BTreeSet<String>,
    out: &mut Vec<Diagnostic>,
) {
    let suggest = |event: usize, value: &str| -> Option<Suggestion> {
        env.shot(value)
            .map(|_| Suggestion::single(si, event, Field::Shot, value))
    };

    let mut shots: Vec<Option<&'e ShotSpec>> = Vec::with_capacity(scene.events.len());
    for (ei, event) in scene.events.iter().enumerate() {
        let resolved = match event.shot() {
            None => {
                if options.require_shots {
                    out.push(Diagnostic::new(
                        RuleId::UnknownShot,
                        si,
                        Some(ei),
                        "event has no shot".into(),
                    ));
                }
                None
            }
            Some(name) => match env.resolve_shot(name) {
                Ok(spec) => {
                    if spec.canonical_name != name {
                        out.push(
                            Diagnostic::new(
                                RuleId::UnknownShot,
                                si,
                                Some(ei),
                                format!(
                                    "{name:?} is a non-canonical spelling of {:?}",
                                    spec.canonical_name
                                ),
                            )
                            .info()
                            .with(suggest(ei, &spec.canonical_name)),
                        );
                    }
                    Some(spec)
                }
                Err(_) => {
                    let suggestion = env
                        .suggest_shot(name)
                        .and_then(|v| suggest(ei, &v));
                    out.push(
                        Diagnostic::new(
                            RuleId::UnknownShot,
                            si,
                            Some(ei),
                            format!("{name:?} is not in the shot catalog"),
                        )
                        .with(suggestion),
                    );
                    None
                }
            },
        };
        shots.push(resolved);
    }

    for (ei, event) in scene.events.iter().enumerate() {
        let Some(shot) = shots[ei] else {
            if !event.subject().is_empty() {
                seen.insert(event.subject().to_string());
            }
            continue;
        };
        let name = shot.canonical_name.as_str();

        if ei == 0 && !event.is_move() && !shot.has_rule(RuleId::OpeningShotRule) {
            out.push(
                Diagnostic::new(
                    RuleId::OpeningShotRule,
                    si,
                    Some(ei),
                    format!("scene opens its dialogue on {name}; use a Truck Shot or Long Shot"),
                )
                .with(suggest(ei, LONG_SHOT)),
            );
        }
        if ei > 0 && shot.has_rule(RuleId::TruckOnlyOpening) {
            out.push(
                Diagnostic::new(
                    RuleId::TruckOnlyOpening,
                    si,
                    Some(ei),
                    format!("{name} is only allowed as the first shot of a scene"),
                )
                .with(suggest(ei, LONG_SHOT)),
            );
        }
        if shot.has_rule(RuleId::ZoomNeedsLong) {
            let previous = ei.checked_sub(1).and_then(|p| shots[p]);
            if previous.map(|p| p.canonical_name.as_str()) != Some(LONG_SHOT) {
                let (target, what) = match ei.checked_sub(1) {
                    Some(p) => (p, "replace the preceding shot with a Long Shot"),
                    None => (ei, "a scene cannot open on a Zoom Shot"),
                };
                out.push(
                    Diagnostic::new(
                        RuleId::ZoomNeedsLong,
                        si,
                        Some(ei),
                        format!(
                            "{name} follows {}; {what}",
                            previous.map_or("nothing", |p| p.canonical_name.as_str())
                        ),
                    )
                    .with(suggest(target, LONG_SHOT)),
                );
            }
        }
        if shot.has_rule(RuleId::TrackingNeedsMotion) && !event.is_move() {
            out.push(
                Diagnostic::new(
                    RuleId::TrackingNeedsMotion,
                    si,
                    Some(ei),
                    format!("{name} is not applicable as {} is not moving", event.subject()),
                )
                .with(suggest(ei, MEDIUM_SHOT)),
            );
        }
        if shot.has_rule(RuleId::CurveSurroundFirstAppearance) && seen.contains(event.subject()) {
            out.push(
                Diagnostic::new(
                    RuleId::CurveSurroundFirstAppearance,
                    si,
                    Some(ei),
                    format!("{name} on {}, who has already appeared", event.subject()),
                )
                .with(suggest(ei, ARC_SHOT)),
            );
        }
        seen.insert(event.subject().to_string());
    }

    // Pan runs during dialogue.
    let is_pan = |i: usize| shots[i].is_some_and(|s| s.has_rule(RuleId::PanRunRule));
    for ei in 0..scene.events.len() {
        if !is_pan(ei) || scene.events[ei].is_move() {
            continue;
        }
        let before = ei > 0 && is_pan(ei - 1);
        let after = ei + 1 < scene.events.len() && is_pan(ei + 1);
        if !before && !after {
            out.push(Diagnostic::new(
                RuleId::PanRunRule,
                si,
                Some(ei),
                "a single Pan Shot during dialogue; use it several times in a row".into(),
            ));
        }
    }

    // Runs of one static shot.
    let limit = options.static_repeat_limit;
    let mut run_start = 0;
    for ei in 0..scene.events.len() {
        let same = ei > 0
            && matches!((shots[ei], shots[ei - 1]), (Some(a), Some(b))
                if a.kind == ShotKind::Static && a.canonical_name == b.canonical_name);
        if !same {
            run_start = ei;
            continue;
        }
        if ei - run_start != limit {
            continue;
        }
        let Some(shot) = shots[ei] else { continue };
        let name = shot.canonical_name.as_str();
        let contrast = tighter_static(name);
        let mut edits = Vec::new();
        if limit >= 3 && env.shot(PAN_SHOT).is_some() {
            for target in [ei - 2, ei - 1] {
                edits.push(Edit {
                    scene_index: si,
                    event_index: target,
                    field: Field::Shot,
                    value: PAN_SHOT.into(),
                });
            }
        }
        let suggestion = env.shot(contrast).map(|_| {
            edits.insert(
                0,
                Edit {
                    scene_index: si,
                    event_index: ei,
                    field: Field::Shot,
                    value: contrast.into(),
                },
            );
            Suggestion {
                value: contrast.into(),
                edits,
            }
        });
        out.push(
            Diagnostic::new(
                RuleId::ConsecutiveStaticRepeat,
                si,
                Some(ei),
                format!(
                    "{} consecutive {name}s make the scene feel static; break the run with dynamic shots",
                    limit + 1
                ),
            )
            .with(suggestion),
        );
    }
}

pub fn validate(script: &AnnotatedScript, env: &EnvironmentSpec) -> Vec<Diagnostic> {
    validate_with(script, env, &ValidateOptions::default())
}

pub fn validate_with(
    script: &AnnotatedScript,
    env: &EnvironmentSpec,
    options: &ValidateOptions,
) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (si, scene) in script.scenes.iter().enumerate() {
        let location = env.location(&scene.info.location);
        match location {
            None => out.push(Diagnostic::new(
                RuleId::UnknownPosition,
                si,
                None,
                format!("unknown location {:?}", scene.info.location),
            )),
            Some(loc) if scene.info.who.len() > loc.capacity => out.push(Diagnostic::new(
                RuleId::CapacityExceeded,
                si,
                None,
                format!(
                    "{} characters in {}, which holds {}",
                    scene.info.who.len(),
                    loc.name,
                    loc.capacity
                ),
            )),
            Some(_) => {}
        }
        let trace = walk_scene(si, scene, location, env, &mut out);
        check_snapshots(si, scene, &trace, &mut out);
        check_shots(si, scene, env, options, &mut seen, &mut out);
    }
    out.sort_by_key(|d| (d.scene_index, d.event_index, d.rule));
    out
}

pub fn error_count(diagnostics: &[Diagnostic]) -> usize {
    diagnostics.iter().filter(|d| d.is_error()).count()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ApplyError {
    #[error("conflicting suggestions for scene {scene} event {event} {field:?}: {first:?} vs {second:?}")]
    ConflictingSuggestions {
        scene: usize,
        event: usize,
        field: Field,
        first: String,
        second: String,
    },
    #[error("suggestion targets a field that does not exist: scene {scene} event {event} {field:?}")]
    InvalidTarget {
        scene: usize,
        event: usize,
        field: Field,
    },
}

/// Substitutes every suggested value into a copy of `script`.
/// Diagnostics without a suggestion are ignored.
pub fn apply_suggestions(
    script: &AnnotatedScript,
    diagnostics: &[Diagnostic],
) -> Result<AnnotatedScript, ApplyError> {
    let mut planned: BTreeMap<(usize, usize, Field), String> = BTreeMap::new();
    for edit in diagnostics
        .iter()
        .filter_map(|d| d.suggestion.as_ref())
        .flat_map(|s| &s.edits)
    {
        let key = (edit.scene_index, edit.event_index, edit.field);
        match planned.get(&key) {
            Some(existing) if existing != &edit.value => {
                return Err(ApplyError::ConflictingSuggestions {
                    scene: key.0,
                    event: key.1,
                    field: key.2,
                    first: existing.clone(),
                    second: edit.value.clone(),
                })
            }
            _ => {
                planned.insert(key, edit.value.clone());
            }
        }
    }

    let mut fixed = script.clone();
    for ((scene, event, field), value) in planned {
        let invalid = ApplyError::InvalidTarget { scene, event, field };
        let target = fixed
            .scenes
            .get_mut(scene)
            .and_then(|s| s.events.get_mut(event))
            .ok_or(invalid.clone())?;
        match field {
            Field::Shot => target.set_shot(Some(value)),
            Field::Action(i) => match target {
                SceneEvent::Line(line) if i < line.actions.len() => line.actions[i].action = value,
                _ => return Err(invalid),
            },
        }
    }
    Ok(fixed)
}

/// Keeps only the first suggestion touching each field, dropping later
/// ones that would conflict. Input order decides precedence.
pub fn without_conflicts(diagnostics: &[Diagnostic]) -> Vec<Diagnostic> {
    let mut claimed: BTreeSet<(usize, usize, Field)> = BTreeSet::new();
    let mut kept = Vec::new();
    for d in diagnostics.iter().filter(|d| d.suggestion.is_some()) {
        let edits = &d.suggestion.as_ref().unwrap().edits;
        if edits
            .iter()
            .any(|e| claimed.contains(&(e.scene_index, e.event_index, e.field)))
        {
            continue;
        }
        claimed.extend(edits.iter().map(|e| (e.scene_index, e.event_index, e.field)));
        kept.push(d.clone());
    }
    kept
}
