//! Lint a script and apply the validator's fixes.
//!
//! cargo run --example validate [-- path/to/script.json]

use filmcrew::environment::load_environment;
use filmcrew::script::parse_script;
use filmcrew::validator::{apply_suggestions, validate, without_conflicts};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let env = load_environment(concat!(env!("CARGO_MANIFEST_DIR"), "/environment/full.json"))?;
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/cases/static_run.json").into());
    let script = parse_script(&std::fs::read_to_string(&path)?)?;

    let found = validate(&script, &env);
    if found.is_empty() {
        println!("{path}: clean");
        return Ok(());
    }
    for d in &found {
        println!("{d}");
    }

    let fixed = apply_suggestions(&script, &without_conflicts(&found))?;
    println!("after applying suggestions:");
    for (si, scene) in fixed.scenes.iter().enumerate() {
        for (ei, event) in scene.events.iter().enumerate() {
            println!("  scene {} event {}: {} [{}]", si + 1, ei + 1, event.subject(), event.shot().unwrap_or("-"));
        }
    }
    let left = validate(&fixed, &env);
    println!("{} finding(s) left", left.len());
    Ok(())
}
