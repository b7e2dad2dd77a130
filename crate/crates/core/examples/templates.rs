//! Render a prompt template and check a reply against its schema.
//!
//! cargo run --example templates

use filmcrew::crew::{default_templates_dir, vars, TemplateSet};
use serde_json::json;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let set = TemplateSet::load(&default_templates_dir())?;
    for t in set.iter() {
        println!("{:<18} {:<8} needs {}", t.id, t.stage, t.required_vars.join(", "));
    }

    let verify = set.get("director_verify")?;
    let prompt = verify.render(&vars([
        ("director_critique", json!({"script-fluency": "Mention his place."})),
        ("updated_script", json!([{"speaker": "Alex", "content": "How about at my place?"}])),
    ]))?;
    println!("\n{prompt}\n");

    println!("{{\"finalize\": \"True\"}} -> {:?}", verify.check(&json!({"finalize": "True"})));
    println!("{{}} -> {:?}", verify.check(&json!({})));
    Ok(())
}
