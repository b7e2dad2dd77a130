//! Estimate line durations and print a storyboard.
//!
//! cargo run --example storyboard

use filmcrew::environment::load_environment;
use filmcrew::script::{estimate_durations, parse_script, DurationModel};
use filmcrew::workflow::render_storyboard;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let env = load_environment(concat!(env!("CARGO_MANIFEST_DIR"), "/environment/full.json"))?;
    let script = parse_script(include_str!("../fixtures/scripts/confrontation.json"))?;

    // A slower speaker than the default 2.5 words per second.
    let model = DurationModel::new(2.0, 1.5, 3.0)?;
    let total: f64 = estimate_durations(&script, &model).iter().map(|t| t.duration).sum();
    print!("{}", render_storyboard(&script, &env, &model));
    println!("\ntotal: {total:.1} s");
    Ok(())
}
