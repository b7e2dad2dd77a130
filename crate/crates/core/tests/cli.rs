mod common;

use std::fs;
use std::path::Path;

use common::*;
use serde_json::Value;

const TOPIC: &str = "a quarrel and breakup scenario";

fn stdout(out: &std::process::Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &std::process::Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let golden = fixture("scripts/golden.json");
    let script = fixture("cases/meeting_place.json");

    let ok = run_bin(&["validate", path(&golden)], dir.path());
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    assert!(stdout(&ok).trim().is_empty());

    let bad = run_bin(&["validate", path(&script)], dir.path());
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("UnknownAction"), "{}", stdout(&bad));
    assert!(stdout(&bad).contains("Standing Thinking"));

    let missing = run_bin(&["validate", "no-such-script.json"], dir.path());
    assert_eq!(missing.status.code(), Some(2));

    fs::write(dir.path().join("broken.json"), "[{\"scene information\": ").unwrap();
    let broken = run_bin(&["validate", "broken.json"], dir.path());
    assert_eq!(broken.status.code(), Some(2));
}

#[test]
fn validate_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_bin(&["--json", "validate", path(&fixture("cases/static_run.json"))], dir.path());
    // Warnings alone do not fail validation.
    assert_eq!(out.status.code(), Some(0));
    let records: Vec<Value> = stdout(&out).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0]["rule"], "ConsecutiveStaticRepeat");
    assert_eq!(records[0]["severity"], "warning");
    assert_eq!(records[0]["edits"].as_array().unwrap().len(), 3);
}

#[test]
fn validate_require_shots_flags_unshot_events() {
    let dir = tempfile::tempdir().unwrap();
    let script = fixture("cases/actor_voice.json");
    let plain = run_bin(&["validate", path(&script)], dir.path());
    assert_eq!(plain.status.code(), Some(0));
    let strict = run_bin(&["validate", "--require-shots", path(&script)], dir.path());
    assert_eq!(strict.status.code(), Some(1), "{}", stdout(&strict));
}

#[test]
fn render_uses_the_word_rate() {
    let dir = tempfile::tempdir().unwrap();
    let excerpt = fixture("scripts/confrontation.json");
    let default = run_bin(&["render", path(&excerpt), "--out", "-"], dir.path());
    assert_eq!(default.status.code(), Some(0), "{}", stderr(&default));
    let fast = run_bin(&["render", path(&excerpt), "--rate", "5", "--out", "-"], dir.path());
    assert_eq!(fast.status.code(), Some(0));

    // "Alex, what is this? I found messages between you and Lily." has 11 words.
    let second = |s: &str| s.lines().filter(|l| l.starts_with("[t=")).nth(1).unwrap().to_string();
    assert!(second(&stdout(&default)).starts_with("[t=3.00s +4.40s]"), "{}", second(&stdout(&default)));
    assert!(second(&stdout(&fast)).starts_with("[t=3.00s +2.20s]"), "{}", second(&stdout(&fast)));

    let to_file = run_bin(&["render", path(&excerpt)], dir.path());
    assert_eq!(to_file.status.code(), Some(0));
    assert_eq!(fs::read_to_string(dir.path().join("storyboard.txt")).unwrap(), stdout(&default));

    let bad_rate = run_bin(&["render", path(&excerpt), "--rate", "0", "--out", "-"], dir.path());
    assert_eq!(bad_rate.status.code(), Some(2));
}

#[test]
fn render_refuses_scripts_with_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_bin(&["render", path(&fixture("cases/tracking_still.json")), "--out", "-"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn env_commands() {
    let dir = tempfile::tempdir().unwrap();
    let stats = run_bin(&["env", "stats"], dir.path());
    assert_eq!(stats.status.code(), Some(0));
    let text = stdout(&stats);
    assert!(text.starts_with("15 locations, 65 positions (32 standing / 33 sitting), 21 actions, 9 shots"), "{text}");
    for (name, cap) in CAPACITIES {
        assert!(text.contains(&format!("  {name}: capacity {cap}, {cap} positions")), "{name}");
    }

    let list = run_bin(&["env", "list"], dir.path());
    assert_eq!(list.status.code(), Some(0));
    assert!(stdout(&list).contains("Roadside (capacity 2)"));
    assert!(stdout(&list).contains("360-Degree Arc Shot"));

    let missing = run_bin(&["--env", "missing.json", "env", "stats"], dir.path());
    assert_eq!(missing.status.code(), Some(2));

    let small = Path::new(env!("CARGO_MANIFEST_DIR")).join("environment/livingroom.json");
    let ok = run_bin(&["--env", path(&small), "env", "stats"], dir.path());
    assert_eq!(ok.status.code(), Some(0));
    let strict = run_bin(&["--env", path(&small), "--strict-counts", "env", "stats"], dir.path());
    assert_eq!(strict.status.code(), Some(2));
}

#[test]
fn produce_without_a_key_fails_before_creating_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_bin(&["produce", "--topic", TOPIC, "--run-dir", "run"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("FILMCREW_API_KEY"), "{}", stderr(&out));
    assert!(!dir.path().join("run").exists());
}

#[test]
fn produce_needs_a_topic() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_bin(&["produce"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

fn produce(dir: &Path, run: &str, replay: &Path) -> std::process::Output {
    run_bin(&["produce", "--topic", TOPIC, "--replay", path(replay), "--run-dir", run], dir)
}

#[test]
fn replay_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let fixture_dir = fixture("breakup");
    for run in ["a", "b"] {
        let out = produce(dir.path(), run, &fixture_dir);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    for file in ["script_final.json", "transcript.jsonl", "storyboard.txt", "timings.json"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert!(a == b, "{file} differs between runs");
    }
    let manifest: Value = serde_json::from_slice(&fs::read(dir.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["total_calls"], 25);
    assert_eq!(manifest["validator"]["errors"], 0);

    let check = run_bin(&["validate", "--require-shots", "a/script_final.json"], dir.path());
    assert_eq!(check.status.code(), Some(0), "{}", stdout(&check));
}

#[test]
fn record_copies_the_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_bin(
        &["produce", "--topic", TOPIC, "--replay", path(&fixture("breakup")), "--run-dir", "run", "--record", "rec"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let recorded = fs::read(dir.path().join("rec/transcript.jsonl")).unwrap();
    assert_eq!(recorded, fs::read(dir.path().join("run/transcript.jsonl")).unwrap());

    // The recording replays to the same script.
    let again = produce(dir.path(), "again", &dir.path().join("rec"));
    assert_eq!(again.status.code(), Some(0), "{}", stderr(&again));
    assert_eq!(
        fs::read(dir.path().join("run/script_final.json")).unwrap(),
        fs::read(dir.path().join("again/script_final.json")).unwrap()
    );
}

#[test]
fn interrupted_run_resumes_to_the_same_result() {
    let dir = tempfile::tempdir().unwrap();
    let full = fixture("breakup");
    let reference = produce(dir.path(), "reference", &full);
    assert_eq!(reference.status.code(), Some(0));

    // Drop the stage-3 rewrite and everything after it.
    let text = fs::read_to_string(full.join("transcript.jsonl")).unwrap();
    let cut: String = text.lines().take(14).map(|l| format!("{l}\n")).collect();
    fs::create_dir(dir.path().join("short")).unwrap();
    fs::write(dir.path().join("short/transcript.jsonl"), cut).unwrap();

    let failed = produce(dir.path(), "run", &dir.path().join("short"));
    assert_eq!(failed.status.code(), Some(1));
    let message = stderr(&failed);
    assert!(message.contains("stage: script3"), "{message}");
    let state: Value = serde_json::from_slice(&fs::read(dir.path().join("run/run_state.json")).unwrap()).unwrap();
    assert_eq!(state["completed"], serde_json::json!(["idea", "script1", "script2"]));

    let resumed = run_bin(&["produce", "--resume", "run", "--replay", path(&full)], dir.path());
    assert_eq!(resumed.status.code(), Some(0), "{}", stderr(&resumed));
    for file in ["script_final.json", "storyboard.txt", "transcript.jsonl", "manifest.json"] {
        let a = fs::read(dir.path().join("reference").join(file)).unwrap();
        let b = fs::read(dir.path().join("run").join(file)).unwrap();
        if file == "manifest.json" {
            let mut a: Value = serde_json::from_slice(&a).unwrap();
            let mut b: Value = serde_json::from_slice(&b).unwrap();
            a["run_id"] = Value::Null;
            b["run_id"] = Value::Null;
            assert_eq!(a, b);
        } else {
            assert!(a == b, "{file} differs after resume");
        }
    }
}

#[test]
fn creating_over_an_existing_run_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(produce(dir.path(), "run", &fixture("breakup")).status.code(), Some(0));
    let again = produce(dir.path(), "run", &fixture("breakup"));
    assert_ne!(again.status.code(), Some(0));
    assert!(stderr(&again).contains("resume"), "{}", stderr(&again));
}
