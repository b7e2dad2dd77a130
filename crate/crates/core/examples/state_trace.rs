//! Replay a scene's movements and posture changes.
//!
//! cargo run --example state_trace

use filmcrew::environment::load_environment;
use filmcrew::script::parse_script;
use filmcrew::validator::derive_state_trace;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let env = load_environment(concat!(env!("CARGO_MANIFEST_DIR"), "/environment/full.json"))?;
    let script = parse_script(include_str!("../fixtures/scripts/golden.json"))?;
    let scene = &script.scenes[0];
    let trace = derive_state_trace(scene, &env)?;

    for (k, event) in scene.events.iter().enumerate() {
        let state: Vec<String> = trace
            .before(k)
            .iter()
            .map(|(who, s)| format!("{who}@{}/{}", s.position.as_deref().unwrap_or("?"), s.posture))
            .collect();
        println!("{:>2} {:<5} {}", k + 1, event.subject(), state.join("  "));
    }
    for (who, s) in trace.final_state() {
        println!("{who} ends {} at {}", s.posture, s.position.as_deref().unwrap_or("?"));
    }
    Ok(())
}
