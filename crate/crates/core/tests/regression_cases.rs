mod common;

use common::*;
use filmcrew::script::{script_from_value, scenes_to_value, AnnotatedScript, SceneEvent};
use filmcrew::validator::{apply_suggestions, validate, RuleId};
use filmcrew::workflow::WorkflowConfig;
use serde_json::{json, Value};

fn load(rel: &str) -> AnnotatedScript {
    script_from_value(&read_json(rel)).unwrap()
}

fn line(script: &AnnotatedScript, scene: usize, event: usize) -> &filmcrew::script::LineEvent {
    script.scenes[scene].events[event].as_line().expect("a line")
}

fn shots(script: &AnnotatedScript, scene: usize) -> Vec<&str> {
    script.scenes[scene].events.iter().filter_map(SceneEvent::shot).collect()
}

#[test]
fn unknown_action_is_flagged_with_standing_thinking() {
    let env = full_env();
    let before = load("cases/meeting_place.json");
    let diagnostics = validate(&before, &env);
    assert_eq!(diagnostics.len(), 1, "{diagnostics:#?}");
    let d = &diagnostics[0];
    assert_eq!(d.rule, RuleId::UnknownAction);
    assert_eq!((d.scene_index, d.event_index), (0, Some(1)));
    assert_eq!(d.suggestion.as_ref().unwrap().value, "Standing Thinking");

    let after = apply_suggestions(&before, &diagnostics).unwrap();
    assert_eq!(line(&after, 0, 1).actions[0].action, "Standing Thinking");
    assert!(validate(&after, &env).is_empty());
}

#[test]
fn tracking_on_a_still_speaker_becomes_medium() {
    let env = full_env();
    let before = load("cases/tracking_still.json");
    let diagnostics = validate(&before, &env);
    assert_eq!(diagnostics.len(), 1, "{diagnostics:#?}");
    assert_eq!(diagnostics[0].rule, RuleId::TrackingNeedsMotion);
    assert!(diagnostics[0].message.contains("Alex is not moving"));

    let after = apply_suggestions(&before, &diagnostics).unwrap();
    assert_eq!(after.scenes[1].events[1].shot(), Some("Medium Shot"));
    // The move into the room keeps its tracking shot.
    assert_eq!(after.scenes[1].events[0].shot(), Some("Tracking Shot"));
    assert!(validate(&after, &env).is_empty());
}

#[test]
fn medium_run_becomes_medium_pan_pan_closeup() {
    let env = full_env();
    let before = load("cases/static_run.json");
    let lines = |s: &AnnotatedScript| shots(s, 0)[1..].iter().map(|s| s.to_string()).collect::<Vec<_>>();
    assert_eq!(lines(&before), ["Medium Shot"; 4]);

    let diagnostics = validate(&before, &env);
    assert_eq!(diagnostics.len(), 1, "{diagnostics:#?}");
    assert_eq!(diagnostics[0].rule, RuleId::ConsecutiveStaticRepeat);

    let after = apply_suggestions(&before, &diagnostics).unwrap();
    assert_eq!(lines(&after), ["Medium Shot", "Pan Shot", "Pan Shot", "Close-up Shot"]);
    assert!(validate(&after, &env).is_empty());
}

fn director_critique() -> Value {
    json!({
        "action-reasonableness": [{
            "dialogue": "There's a cafe just around the corner from here. How about tomorrow at 3?",
            "correct_action": "Standing suggest",
            "suggested_revision": "Standing thinking"
        }],
        "theme-consistency": "None",
        "script-fluency": "The dialogue in Scene 1 mentions meeting up in cafe, but Scene 2 shows them at Alex's house instead. Consider changing Alex's dialogue to mention catching up at his place to make Scene 2 more natural."
    })
}

#[test]
fn director_loop_rewrites_the_meeting_place() {
    let env = full_env();
    let before = load("cases/meeting_place.json");
    let mut rewrite = scenes_to_value(&before.scenes);
    rewrite[0]["scene"][1]["content"] = json!("How about at my place? Tomorrow at 3?");
    rewrite[0]["scene"][1]["actions"][0]["action"] = json!("Standing Thinking");

    let (pipeline, provider) = replay_pipeline(
        &env,
        &[
            ("director", director_critique()),
            ("screenwriter", rewrite),
            ("director", json!({"finalize": "True", "reason": "Scene 1 now leads into Scene 2."})),
        ],
        WorkflowConfig::default(),
    );
    let (after, notes) = pipeline.revise_with_director(&before).unwrap();
    assert!(provider.remaining().is_empty());
    assert!(notes.warnings.is_empty(), "{:?}", notes.warnings);

    let alex = line(&after, 0, 1);
    assert_eq!(alex.content, "How about at my place? Tomorrow at 3?");
    assert_eq!(alex.actions[0].action, "Standing Thinking");
    // Untouched lines stay as they were.
    assert_eq!(line(&after, 0, 2).content, line(&before, 0, 2).content);
    assert_eq!(line(&after, 1, 0).content, "Welcome to my humble abode! Make yourself comfortable.");
    assert!(validate(&after, &env).is_empty());
}

#[test]
fn actor_feedback_reaches_the_script() {
    let env = full_env();
    let before = load("cases/actor_voice.json");
    assert_eq!(before.profile("Dana").unwrap().speaking_style, "soothing, deliberate, therapeutic");

    let dana_before = line(&before, 0, 1).content.clone();
    let dana_after = "That must have been really tough for you. There was a time I felt overlooked too, but talking about it openly could help us all.";
    let note = json!({
        "speaker": "Dana",
        "content": dana_before,
        "feedback": "It would be more effective to say \"That must have been really tough for you.\" This reinforces my empathetic and patient traits."
    });
    let mut rewrite = scenes_to_value(&before.scenes);
    rewrite[0]["scene"][1]["content"] = json!(dana_after);

    let (pipeline, provider) = replay_pipeline(
        &env,
        &[
            ("actor-Brooke", json!([])),
            ("actor-Dana", json!([note])),
            ("director", json!({"adopted-suggestions": [note]})),
            ("screenwriter", rewrite),
            ("director", json!({"reason": "Dana's line now matches her profile.", "finalize": true})),
        ],
        WorkflowConfig::default(),
    );
    let (after, notes) = pipeline.revise_with_actors(&before).unwrap();
    assert!(provider.remaining().is_empty());
    assert_eq!(notes.record["adopted"], json!(true));
    assert_eq!(line(&after, 0, 0).content, "Alex said I was always overreacting. It really hurt me.");
    assert_eq!(line(&after, 0, 1).content, dana_after);
}

#[test]
fn nothing_adopted_leaves_the_script_alone() {
    let env = full_env();
    let before = load("cases/actor_voice.json");
    let (pipeline, _) = replay_pipeline(
        &env,
        &[
            ("actor-Brooke", json!([])),
            ("actor-Dana", json!([])),
            ("director", json!({"adopted-suggestions": "None"})),
        ],
        WorkflowConfig::default(),
    );
    let (after, notes) = pipeline.revise_with_actors(&before).unwrap();
    assert_eq!(notes.record["adopted"], json!(false));
    assert_eq!(after.scenes, before.scenes);
}
