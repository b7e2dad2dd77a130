//! Run directories: stage artifacts, `run_state.json`, resume.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::provider::{read_records, ProviderCallRecord};
use crate::script::{
    parse_script, serialize_script, to_pretty_json, AnnotatedScript, CharacterProfile,
    SceneOutline,
};

use super::{Bundle, Idea, Pipeline, Stage, StageNotes, WorkflowConfig, WorkflowError};

pub const STATE_FILE: &str = "run_state.json";
pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: WorkflowError,
    },
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("invalid artifact {}: {message}", path.display())]
    InvalidArtifact { path: PathBuf, message: String },
    #[error("halted after stage {stage} as requested")]
    Halted { stage: Stage },
}

impl RunError {
    pub fn stage(&self) -> Option<Stage> {
        match self {
            RunError::Stage { stage, .. } | RunError::Halted { stage } => Some(*stage),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub run_id: String,
    pub topic: String,
    /// Completed stages, in order.
    pub completed: Vec<Stage>,
    pub artifacts: BTreeMap<Stage, Vec<String>>,
    /// Provider calls per agent tag, per completed stage.
    pub stage_calls: BTreeMap<Stage, BTreeMap<String, usize>>,
    pub config: WorkflowConfig,
    pub model: String,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl RunState {
    pub fn current(&self) -> Option<Stage> {
        self.completed.last().copied()
    }

    pub fn next(&self) -> Option<Stage> {
        match self.current() {
            None => Some(Stage::Idea),
            Some(s) => Stage::ALL.iter().position(|x| *x == s).and_then(|i| Stage::ALL.get(i + 1).copied()),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.current() == Some(Stage::Assembled)
    }

    /// Calls made by the completed stages, per agent tag. A replay
    /// provider resuming this run skips this many records per tag.
    pub fn consumed_calls(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for calls in self.stage_calls.values() {
            for (tag, n) in calls {
                *out.entry(tag.clone()).or_insert(0) += n;
            }
        }
        out
    }

    pub fn total_calls(&self) -> usize {
        self.stage_calls.values().flat_map(|c| c.values()).sum()
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> RunError + '_ {
    move |e| RunError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Write to a sibling temp file, then rename over the target.
fn write_atomic(path: &Path, contents: &str) -> Result<(), RunError> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(contents.as_bytes()).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn pretty(v: &Value) -> String {
    let mut s = to_pretty_json(v);
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

fn diff_counts(before: &BTreeMap<String, usize>, after: &BTreeMap<String, usize>) -> BTreeMap<String, usize> {
    after
        .iter()
        .filter_map(|(tag, n)| {
            let d = n - before.get(tag).copied().unwrap_or(0);
            (d > 0).then(|| (tag.clone(), d))
        })
        .collect()
}

/// Run id from the topic: lowercase words joined by dashes.
pub fn slug(topic: &str) -> String {
    let s: Vec<String> = topic
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect();
    if s.is_empty() {
        "run".into()
    } else {
        s.join("-")
    }
}

/// What the next stage needs from the completed ones.
enum Carry {
    Nothing,
    Idea(Idea),
    Script(AnnotatedScript),
}

pub struct Run {
    dir: PathBuf,
    state: RunState,
}

impl Run {
    /// Starts a fresh run in `dir`, which must not already hold one.
    pub fn create(
        dir: &Path,
        topic: &str,
        config: &WorkflowConfig,
        model: &str,
    ) -> Result<Run, RunError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let state_path = dir.join(STATE_FILE);
        if state_path.exists() {
            return Err(RunError::InvalidArtifact {
                path: state_path,
                message: "a run already exists here; use resume".into(),
            });
        }
        // A stale transcript from an aborted start would be appended to.
        let transcript = dir.join(TRANSCRIPT_FILE);
        if transcript.exists() {
            fs::remove_file(&transcript).map_err(io_err(&transcript))?;
        }
        let run_id = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| slug(topic));
        let run = Run {
            dir: dir.to_path_buf(),
            state: RunState {
                run_id,
                topic: topic.to_string(),
                completed: vec![],
                artifacts: BTreeMap::new(),
                stage_calls: BTreeMap::new(),
                config: config.clone(),
                model: model.to_string(),
                warnings: vec![],
            },
        };
        run.save_state()?;
        Ok(run)
    }

    /// Reopens a run. The transcript is cut back to the calls of completed
    /// stages so the unfinished stage starts clean.
    pub fn resume(dir: &Path) -> Result<Run, RunError> {
        let state_path = dir.join(STATE_FILE);
        let text = fs::read_to_string(&state_path).map_err(io_err(&state_path))?;
        let state: RunState = serde_json::from_str(&text).map_err(|e| RunError::InvalidArtifact {
            path: state_path.clone(),
            message: e.to_string(),
        })?;
        for (stage, files) in &state.artifacts {
            if !state.completed.contains(stage) {
                continue;
            }
            for f in files {
                let p = dir.join(f);
                if !p.exists() {
                    return Err(RunError::InvalidArtifact {
                        path: p,
                        message: format!("artifact of completed stage {stage} is missing"),
                    });
                }
            }
        }
        let run = Run {
            dir: dir.to_path_buf(),
            state,
        };
        run.truncate_transcript()?;
        Ok(run)
    }

    fn truncate_transcript(&self) -> Result<(), RunError> {
        let path = self.transcript_path();
        if !path.exists() {
            return Ok(());
        }
        let keep = self.state.total_calls();
        let records: Vec<ProviderCallRecord> = read_records(&path)
            .map_err(|e| RunError::InvalidArtifact {
                path: path.clone(),
                message: e.to_string(),
            })?
            .into_iter()
            .take(keep)
            .collect();
        let mut text = String::new();
        for r in &records {
            text.push_str(&serde_json::to_string(r).expect("record serializes"));
            text.push('\n');
        }
        write_atomic(&path, &text)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn state(&self) -> &RunState {
        &self.state
    }

    pub fn transcript_path(&self) -> PathBuf {
        self.dir.join(TRANSCRIPT_FILE)
    }

    fn save_state(&self) -> Result<(), RunError> {
        let v = serde_json::to_value(&self.state).expect("state serializes");
        write_atomic(&self.dir.join(STATE_FILE), &pretty(&v))
    }

    fn write(&self, name: &str, contents: &str) -> Result<String, RunError> {
        write_atomic(&self.dir.join(name), contents)?;
        Ok(name.to_string())
    }

    fn read_json(&self, name: &str) -> Result<Value, RunError> {
        let path = self.dir.join(name);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|e| RunError::InvalidArtifact {
            path,
            message: e.to_string(),
        })
    }

    fn read_script(&self, name: &str) -> Result<AnnotatedScript, RunError> {
        let path = self.dir.join(name);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        parse_script(&text).map_err(|e| RunError::InvalidArtifact {
            path,
            message: e.to_string(),
        })
    }

    fn load_carry(&self) -> Result<Carry, RunError> {
        let invalid = |name: &str, e: crate::script::ScriptError| RunError::InvalidArtifact {
            path: self.dir.join(name),
            message: e.to_string(),
        };
        Ok(match self.state.current() {
            None => Carry::Nothing,
            Some(Stage::Idea) => {
                let profiles = self
                    .read_json("profiles.json")?
                    .as_array()
                    .into_iter()
                    .flatten()
                    .map(CharacterProfile::from_value)
                    .collect::<Result<_, _>>()
                    .map_err(|e| invalid("profiles.json", e))?;
                let outlines = self
                    .read_json("outline.json")?
                    .as_array()
                    .into_iter()
                    .flatten()
                    .map(SceneOutline::from_value)
                    .collect::<Result<_, _>>()
                    .map_err(|e| invalid("outline.json", e))?;
                Carry::Idea(Idea { profiles, outlines })
            }
            Some(Stage::Script1) => Carry::Script(self.read_script("script_draft.json")?),
            Some(Stage::Script2) => Carry::Script(self.read_script("script_v2.json")?),
            Some(Stage::Script3) => Carry::Script(self.read_script("script_v3.json")?),
            Some(Stage::Cinema) | Some(Stage::Assembled) => Carry::Script(self.read_script("script_shots.json")?),
        })
    }

    fn complete(
        &mut self,
        stage: Stage,
        files: Vec<String>,
        calls: BTreeMap<String, usize>,
        notes: &StageNotes,
    ) -> Result<(), RunError> {
        for w in &notes.warnings {
            tracing::warn!(%stage, "{w}");
            self.state.warnings.push(format!("{stage}: {w}"));
        }
        self.state.artifacts.insert(stage, files);
        self.state.stage_calls.insert(stage, calls);
        self.state.completed.push(stage);
        self.save_state()
    }

    /// Runs every remaining stage. With `halt_after`, stops with
    /// [`RunError::Halted`] once that stage has been persisted.
    pub fn execute(&mut self, pipeline: &Pipeline, halt_after: Option<Stage>) -> Result<Option<Bundle>, RunError> {
        let transcript = pipeline.crew.provider().transcript();
        let mut carry = self.load_carry()?;
        while let Some(stage) = self.state.next() {
            let before = transcript.counts();
            tracing::info!(%stage, "stage started");
            let fail = |source| RunError::Stage { stage, source };
            let (files, notes, next) = match (stage, carry) {
                (Stage::Idea, _) => {
                    let (idea, notes) = pipeline.develop_idea(&self.state.topic).map_err(fail)?;
                    let profiles = Value::Array(idea.profiles.iter().map(CharacterProfile::to_value).collect());
                    let outlines = Value::Array(idea.outlines.iter().map(SceneOutline::to_value).collect());
                    let files = vec![
                        self.write("profiles.json", &pretty(&profiles))?,
                        self.write("outline.json", &pretty(&outlines))?,
                    ];
                    (files, notes, Carry::Idea(idea))
                }
                (Stage::Script1, Carry::Idea(idea)) => {
                    let (script, notes) = pipeline.draft_script(&self.state.topic, &idea).map_err(fail)?;
                    let files = vec![self.write("script_draft.json", &with_newline(serialize_script(&script)))?];
                    (files, notes, Carry::Script(script))
                }
                (Stage::Script2, Carry::Script(script)) => {
                    let (script, notes) = pipeline.revise_with_director(&script).map_err(fail)?;
                    let files = vec![
                        self.write("script_v2.json", &with_newline(serialize_script(&script)))?,
                        self.write("discussion_v2.json", &pretty(&notes.record))?,
                    ];
                    (files, notes, Carry::Script(script))
                }
                (Stage::Script3, Carry::Script(script)) => {
                    let (script, notes) = pipeline.revise_with_actors(&script).map_err(fail)?;
                    let files = vec![
                        self.write("script_v3.json", &with_newline(serialize_script(&script)))?,
                        self.write("discussion_v3.json", &pretty(&notes.record))?,
                    ];
                    (files, notes, Carry::Script(script))
                }
                (Stage::Cinema, Carry::Script(script)) => {
                    let (result, notes) = pipeline.annotate_cameras(&script).map_err(fail)?;
                    let set_value = |i: usize| serde_json::to_value(&result.sets[i]).expect("set serializes");
                    let files = vec![
                        self.write("camera_1.json", &pretty(&set_value(0)))?,
                        self.write("camera_2.json", &pretty(&set_value(1)))?,
                        self.write("cinema_debate.json", &pretty(&notes.record))?,
                        self.write("script_shots.json", &with_newline(serialize_script(&result.script)))?,
                    ];
                    (files, notes, Carry::Script(result.script))
                }
                (Stage::Assembled, Carry::Script(script)) => {
                    let bundle = pipeline.assemble(&script).map_err(fail)?;
                    bundle.write(&self.dir).map_err(io_err(&self.dir))?;
                    let calls = diff_counts(&before, &transcript.counts());
                    let files = vec![
                        "script_final.json".to_string(),
                        "storyboard.txt".to_string(),
                        "timings.json".to_string(),
                        MANIFEST_FILE.to_string(),
                    ];
                    self.state.stage_calls.insert(stage, calls.clone());
                    self.state.artifacts.insert(stage, files.clone());
                    let manifest = self.manifest(&bundle);
                    self.write(MANIFEST_FILE, &pretty(&manifest))?;
                    self.complete(stage, files, calls, &StageNotes::default())?;
                    tracing::info!(%stage, "stage completed");
                    return Ok(Some(bundle));
                }
                (stage, _) => {
                    return Err(RunError::InvalidArtifact {
                        path: self.dir.join(STATE_FILE),
                        message: format!("no input available for stage {stage}"),
                    })
                }
            };
            let calls = diff_counts(&before, &transcript.counts());
            self.complete(stage, files, calls, &notes)?;
            tracing::info!(%stage, "stage completed");
            carry = next;
            if halt_after == Some(stage) {
                return Err(RunError::Halted { stage });
            }
        }
        Ok(None)
    }

    fn manifest(&self, bundle: &Bundle) -> Value {
        let s = &self.state;
        json!({
            "run_id": s.run_id,
            "topic": s.topic,
            "model": s.model,
            "config": s.config,
            "stages": Stage::ALL.iter().map(|st| st.as_str()).collect::<Vec<_>>(),
            "artifacts": s.artifacts,
            "stage_calls": s.stage_calls,
            "total_calls": s.total_calls(),
            "validator": bundle.summary(),
            "warnings": s.warnings,
        })
    }
}

fn with_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}
