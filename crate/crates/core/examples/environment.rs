//! Load the built-in world and look things up in it.
//!
//! cargo run --example environment

use filmcrew::environment::{load_environment, Posture};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let env = load_environment(concat!(env!("CARGO_MANIFEST_DIR"), "/environment/full.json"))?;
    println!("{}", env.stats());

    let room = env.location("Apartment living room").expect("shipped location");
    for p in &room.positions {
        println!("  {} {:<9} {}", p.id, if p.sittable { "sittable" } else { "standing" }, p.description);
    }

    let sit = env.resolve_action("sit down")?;
    println!("'sit down' -> {} (needs {})", sit.canonical_name, sit.required_state);
    assert_eq!(sit.required_state, Posture::Standing);

    println!("'Track Shot' -> {}", env.resolve_shot("Track Shot")?.canonical_name);
    println!("'Standing suggest' is unknown; nearest: {:?}", env.suggest_action("Standing suggest"));
    println!("closest shots to 'dolly': {:?}", env.nearest_shots("dolly", 3));
    Ok(())
}
