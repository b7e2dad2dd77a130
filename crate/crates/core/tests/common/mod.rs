#![allow(dead_code)]

use std::cell::Cell;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use filmcrew::collaboration::{ActionAgent, BoxError, Critic, DebatePeer, DialogueHistory, Judge, Judgment, Peer, Verdict};
use filmcrew::crew::{default_templates_dir, Crew, TemplateSet};
use filmcrew::environment::{EnvironmentSpec, LoadOptions, Posture, StateEffect};
use filmcrew::provider::{ProviderCallRecord, ReplayProvider};
use filmcrew::script::{ActionEntry, AnnotatedScript, LineEvent, MoveEvent, Placement, Scene, SceneEvent, SceneInfo};
use filmcrew::workflow::{Pipeline, WorkflowConfig};
use proptest::prelude::*;
use serde::Deserialize;
use serde_json::Value;

pub const BIN: &str = env!("CARGO_BIN_EXE_filmcrew");

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

pub fn full_env_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("environment/full.json")
}

pub fn full_env() -> EnvironmentSpec {
    let text = std::fs::read_to_string(full_env_path()).unwrap();
    EnvironmentSpec::from_json_str(&text, LoadOptions { strict_counts: true }).unwrap()
}

pub fn read_json(rel: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(fixture(rel)).unwrap()).unwrap()
}

/// Location capacities in catalog order, as listed for the shipped world.
pub const CAPACITIES: [(&str, usize); 15] = [
    ("Apartment living room", 5),
    ("Apartment kitchen", 5),
    ("Roadside", 2),
    ("Gaming room", 4),
    ("Meeting room", 7),
    ("Storehouse", 3),
    ("Relaxing room", 5),
    ("Reception room", 5),
    ("Sofa corner", 5),
    ("Large kitchen", 5),
    ("Beverage room", 3),
    ("Office", 3),
    ("Dining room", 4),
    ("Billiard room", 4),
    ("Work room", 5),
];

// -- mutation suite ----------------------------------------------------------

#[derive(Debug, Clone, Deserialize)]
pub struct Mutation {
    pub rule: String,
    pub scene: usize,
    pub event: Option<usize>,
    pub pointer: String,
    pub value: Value,
    pub note: String,
}

pub fn mutations() -> Vec<Mutation> {
    serde_json::from_value(read_json("scripts/mutations.json")).unwrap()
}

pub fn mutate(golden: &Value, m: &Mutation) -> Value {
    let mut doc = golden.clone();
    let slot = doc
        .pointer_mut(&m.pointer)
        .unwrap_or_else(|| panic!("pointer {} missing from the golden script", m.pointer));
    *slot = m.value.clone();
    doc
}

// -- scripted providers -------------------------------------------------------

pub fn records(calls: &[(&str, Value)]) -> Vec<ProviderCallRecord> {
    calls
        .iter()
        .enumerate()
        .map(|(i, (tag, response))| ProviderCallRecord {
            call_index: i as u64,
            agent_tag: tag.to_string(),
            request: vec![],
            response: match response {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            },
            latency: 0.0,
            error: None,
        })
        .collect()
}

pub fn replay_pipeline<'e>(env: &'e EnvironmentSpec, calls: &[(&str, Value)], config: WorkflowConfig) -> (Pipeline<'e>, Arc<ReplayProvider>) {
    let provider = Arc::new(ReplayProvider::from_records(records(calls)));
    let templates = Arc::new(TemplateSet::load(&default_templates_dir()).unwrap());
    let crew = Crew::new(provider.clone(), templates);
    (Pipeline::new(env, crew, config), provider)
}

// -- counting agents for the collaboration contracts ----------------------------

#[derive(Default)]
pub struct Counts {
    pub act: Cell<usize>,
    pub critique: Cell<usize>,
    pub verify: Cell<usize>,
}

fn bump(c: &Cell<usize>) -> usize {
    c.set(c.get() + 1);
    c.get()
}

pub struct CountingWriter<'a>(pub &'a Counts);

impl ActionAgent for CountingWriter<'_> {
    fn tag(&self) -> &str {
        "writer"
    }
    fn act(&self, _: &DialogueHistory, round: usize) -> Result<String, BoxError> {
        bump(&self.0.act);
        Ok(format!("draft {round}"))
    }
}

/// Approves at the verify of `approve_at`, or never when `None`.
pub struct CountingCritic<'a> {
    pub counts: &'a Counts,
    pub approve_at: Option<usize>,
}

impl Critic for CountingCritic<'_> {
    fn tag(&self) -> &str {
        "critic"
    }
    fn critique(&self, _: &DialogueHistory, response: &str, _: usize) -> Result<String, BoxError> {
        bump(&self.counts.critique);
        Ok(format!("fix {response}"))
    }
    fn verify(&self, _: &str, _: &str, _: &str, _: &str, round: usize) -> Result<Verdict, BoxError> {
        bump(&self.counts.verify);
        Ok(Verdict {
            finalize: self.approve_at == Some(round),
            rationale: String::new(),
        })
    }
}

pub struct CountingPeer<'a> {
    pub name: &'static str,
    pub calls: &'a std::sync::atomic::AtomicUsize,
}

impl DebatePeer for CountingPeer<'_> {
    fn tag(&self) -> &str {
        self.name
    }
    fn respond(&self, _: &DialogueHistory) -> Result<String, BoxError> {
        self.calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        Ok(format!("{} answer", self.name))
    }
    fn feedback(&self, _: &DialogueHistory, _: &str, other: &str, _: Option<&str>, round: usize) -> Result<String, BoxError> {
        self.calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        Ok(format!("{} on {other}, round {round}", self.name))
    }
}

pub struct CountingJudge<'a>(pub &'a std::sync::atomic::AtomicUsize);

impl Judge for CountingJudge<'_> {
    fn tag(&self) -> &str {
        "judge"
    }
    fn judge(&self, _: &DialogueHistory, _: &str, _: &str, _: &str, _: &str) -> Result<Judgment, BoxError> {
        self.0.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        Ok(Judgment {
            winner: Peer::Q,
            rationale: String::new(),
        })
    }
}

// -- random valid scripts --------------------------------------------------------

const NAMES: [&str; 4] = ["Mia", "Alex", "Emma", "Sam"];

/// Raw choices; [`build_script`] turns them into a valid scene.
#[derive(Debug, Clone)]
pub struct ScenePlan {
    pub location: usize,
    pub cast: usize,
    pub seats: Vec<usize>,
    pub steps: Vec<(usize, u8, usize)>,
}

pub fn scene_plan() -> impl Strategy<Value = ScenePlan> {
    (
        0usize..64,
        2usize..=4,
        prop::collection::vec(0usize..64, 4),
        prop::collection::vec((0usize..4, 0u8..3, 0usize..64), 1..40),
    )
        .prop_map(|(location, cast, seats, steps)| ScenePlan { location, cast, seats, steps })
}

/// Scripts of one to three scenes.
pub fn script_plan() -> impl Strategy<Value = Vec<ScenePlan>> {
    prop::collection::vec(scene_plan(), 1..=3)
}

/// Builds a script that only moves standing characters to free positions
/// and only picks actions whose required posture matches.
pub fn build_script(env: &EnvironmentSpec, plans: &[ScenePlan]) -> AnnotatedScript {
    let scenes = plans.iter().map(|p| build_scene(env, p)).collect();
    AnnotatedScript::from_scenes(scenes)
}

fn build_scene(env: &EnvironmentSpec, plan: &ScenePlan) -> Scene {
    let locations: Vec<_> = env.locations.iter().filter(|l| l.capacity >= 2).collect();
    let loc = locations[plan.location % locations.len()];
    let n = plan.cast.min(loc.capacity).min(loc.positions.len());
    let cast: Vec<String> = NAMES[..n].iter().map(|s| s.to_string()).collect();

    let mut free: Vec<String> = loc.positions.iter().map(|p| p.id.clone()).collect();
    let mut at: BTreeMap<String, String> = BTreeMap::new();
    let mut initial = Vec::new();
    for (i, name) in cast.iter().enumerate() {
        let pos = free.remove(plan.seats[i] % free.len());
        at.insert(name.clone(), pos.clone());
        initial.push(Placement::new(name, pos));
    }
    let mut posture: BTreeMap<String, Posture> = cast.iter().map(|c| (c.clone(), Posture::Standing)).collect();

    let neutral = |p: Posture| -> Vec<&str> {
        env.actions
            .iter()
            .filter(|a| a.required_state == p && a.state_effect == StateEffect::None)
            .map(|a| a.canonical_name.as_str())
            .collect()
    };
    let change = |p: Posture| -> &str {
        let effect = if p == Posture::Standing { StateEffect::ToSitting } else { StateEffect::ToStanding };
        env.actions
            .iter()
            .find(|a| a.required_state == p && a.state_effect == effect)
            .map(|a| a.canonical_name.as_str())
            .expect("catalog has Sit Down and Stand Up")
    };
    let sittable = |pos: &str| loc.position(pos).is_some_and(|p| p.sittable);

    let mut events = Vec::new();
    for (k, &(who, kind, pick)) in plan.steps.iter().enumerate() {
        let name = cast[who % n].clone();
        let p = posture[&name];
        let line = |action: &str| {
            SceneEvent::Line(LineEvent {
                speaker: name.clone(),
                content: format!("Line number {k}."),
                actions: vec![ActionEntry::new(&name, Some(p), action)],
                ..Default::default()
            })
        };
        let event = match kind {
            0 if p == Posture::Standing && !free.is_empty() => {
                let dest = free.remove(pick % free.len());
                let old = at.insert(name.clone(), dest.clone()).unwrap();
                free.push(old);
                SceneEvent::Move(MoveEvent {
                    character: name.clone(),
                    destination: dest,
                    ..Default::default()
                })
            }
            1 if p == Posture::Sitting || sittable(&at[&name]) => {
                let action = change(p);
                posture.insert(name.clone(), if p == Posture::Standing { Posture::Sitting } else { Posture::Standing });
                line(action)
            }
            _ => {
                let options = neutral(p);
                line(options[pick % options.len()])
            }
        };
        events.push(event);
    }

    Scene {
        info: SceneInfo {
            who: cast,
            location: loc.name.clone(),
            what: "generated".into(),
            ..Default::default()
        },
        initial_position: initial,
        events,
        ..Default::default()
    }
}

/// Standing, then flipped by every posture-changing action in the scene.
pub fn expected_final_postures(env: &EnvironmentSpec, scene: &Scene) -> BTreeMap<String, Posture> {
    let mut out: BTreeMap<String, Posture> = scene.info.who.iter().map(|c| (c.clone(), Posture::Standing)).collect();
    for line in scene.lines() {
        for a in &line.actions {
            let effect = env.resolve_action(&a.action).unwrap().state_effect;
            match effect {
                StateEffect::ToSitting => {
                    out.insert(a.character.clone(), Posture::Sitting);
                }
                StateEffect::ToStanding => {
                    out.insert(a.character.clone(), Posture::Standing);
                }
                StateEffect::None => {}
            }
        }
    }
    out
}

/// Checks one generated script; returns a description of the first violation.
pub fn conservation_violation(env: &EnvironmentSpec, script: &AnnotatedScript) -> Option<String> {
    let errors: Vec<String> = filmcrew::validator::validate(script, env)
        .into_iter()
        .filter(|d| d.is_error())
        .map(|d| d.to_string())
        .collect();
    if !errors.is_empty() {
        return Some(format!("generator produced an invalid script: {errors:?}"));
    }
    for (si, scene) in script.scenes.iter().enumerate() {
        let trace = match filmcrew::validator::derive_state_trace(scene, env) {
            Ok(t) => t,
            Err(e) => return Some(format!("scene {si}: {e}")),
        };
        let expected = expected_final_postures(env, scene);
        for (name, posture) in &expected {
            let got = trace.final_state().get(name).map(|s| s.posture);
            if got != Some(*posture) {
                return Some(format!("scene {si}: {name} ends {got:?}, expected {posture:?}"));
            }
        }
        for (k, snap) in trace.snapshots.iter().enumerate() {
            let mut seen: BTreeMap<&str, &str> = BTreeMap::new();
            for (name, state) in snap {
                if let Some(pos) = &state.position {
                    if let Some(other) = seen.insert(pos, name) {
                        return Some(format!("scene {si} snapshot {k}: {other} and {name} share {pos}"));
                    }
                }
            }
        }
    }
    None
}

pub fn run_bin(args: &[&str], cwd: &Path) -> std::process::Output {
    std::process::Command::new(BIN)
        .args(args)
        .current_dir(cwd)
        .env_remove("FILMCREW_API_KEY")
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

pub fn script_value(script: &AnnotatedScript) -> Value {
    filmcrew::script::script_to_value(script)
}
