//! Final bundle: refreshed snapshots, timings, storyboard.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde_json::{json, Value};

use crate::environment::EnvironmentSpec;
use crate::script::{
    estimate_durations, serialize_scenes, AnnotatedScript, DurationModel, LineTiming, SceneEvent,
};
use crate::validator::{derive_state_trace, validate_with, Diagnostic, Severity, TraceError, ValidateOptions};

use super::{WorkflowConfig, WorkflowError};

/// Rewrites every event's `current position` from the derived state trace.
/// The snapshot shows positions before the event takes effect.
pub fn refresh_snapshots(
    script: &AnnotatedScript,
    env: &EnvironmentSpec,
) -> Result<AnnotatedScript, TraceError> {
    let mut out = script.clone();
    for scene in &mut out.scenes {
        let trace = derive_state_trace(scene, env)?;
        let order = scene.initial_position.clone();
        for (i, event) in scene.events.iter_mut().enumerate() {
            event.set_current_position(Some(trace.placements_before(i, &order)));
        }
    }
    Ok(out)
}

fn event_text(event: &SceneEvent, env: &EnvironmentSpec) -> String {
    match event {
        SceneEvent::Move(m) => format!("{} moves to {}", m.character, m.destination),
        SceneEvent::Line(l) => {
            let mut s = format!("{}: '{}'", l.speaker, l.content);
            if !l.actions.is_empty() {
                let actions: Vec<String> = l
                    .actions
                    .iter()
                    .map(|a| {
                        let name = env.resolve_action(&a.action).map_or(a.action.as_str(), |s| &s.canonical_name);
                        format!("{}: {name}", a.character)
                    })
                    .collect();
                write!(s, " — {}", actions.join("; ")).unwrap();
            }
            s
        }
    }
}

/// One header per scene, then one timed line per event giving start,
/// duration, shot and what happens. Times restart at zero in each scene. Shot and action names
/// are shown in canonical spelling.
pub fn render_storyboard(script: &AnnotatedScript, env: &EnvironmentSpec, model: &DurationModel) -> String {
    let timings = estimate_durations(script, model);
    let mut out = String::new();
    for (si, scene) in script.scenes.iter().enumerate() {
        if si > 0 {
            out.push('\n');
        }
        writeln!(
            out,
            "== Scene {} — {} — {}",
            si + 1,
            scene.info.location,
            scene.info.who.join(", ")
        )
        .unwrap();
        if !scene.info.what.is_empty() {
            writeln!(out, "   {}", scene.info.what).unwrap();
        }
        let mut t = 0.0;
        for (ei, event) in scene.events.iter().enumerate() {
            let d = timings
                .iter()
                .find(|l| l.scene_index == si && l.event_index == ei)
                .map_or(0.0, |l| l.duration);
            writeln!(
                out,
                "[t={t:.2}s +{d:.2}s] {} — {}",
                event
                    .shot()
                    .map_or("(no shot)", |s| env.resolve_shot(s).map_or(s, |spec| &spec.canonical_name)),
                event_text(event, env)
            )
            .unwrap();
            t += d;
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct Bundle {
    pub script: AnnotatedScript,
    /// `script_final.json`: the bare scene array.
    pub script_json: String,
    pub storyboard: String,
    pub timings: Vec<LineTiming>,
    /// Non-error findings that remained (warnings, notes).
    pub diagnostics: Vec<Diagnostic>,
}

impl Bundle {
    pub fn summary(&self) -> Value {
        let count = |s: Severity| self.diagnostics.iter().filter(|d| d.severity == s).count();
        json!({
            "errors": count(Severity::Error),
            "warnings": count(Severity::Warning),
            "info": count(Severity::Info),
        })
    }

    pub fn timings_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.timings).expect("timings serialize");
        s.push('\n');
        s
    }

    /// Writes `script_final.json`, `storyboard.txt` and `timings.json`.
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        fs::write(dir.join("script_final.json"), &self.script_json)?;
        fs::write(dir.join("storyboard.txt"), &self.storyboard)?;
        fs::write(dir.join("timings.json"), self.timings_json())
    }
}

pub(super) fn assemble(
    script: &AnnotatedScript,
    env: &EnvironmentSpec,
    config: &WorkflowConfig,
    options: ValidateOptions,
) -> Result<Bundle, WorkflowError> {
    let script = refresh_snapshots(script, env)?;
    let diagnostics = validate_with(&script, env, &options);
    if diagnostics.iter().any(Diagnostic::is_error) {
        return Err(WorkflowError::ValidationGateFailed {
            diagnostics: diagnostics.into_iter().filter(Diagnostic::is_error).collect(),
        });
    }
    let mut script_json = serialize_scenes(&script.scenes);
    if !script_json.ends_with('\n') {
        script_json.push('\n');
    }
    Ok(Bundle {
        storyboard: render_storyboard(&script, env, &config.duration),
        timings: estimate_durations(&script, &config.duration),
        script_json,
        script,
        diagnostics,
    })
}
