//! Recover JSON from chatty model replies.
//!
//! cargo run --example extract_json

use filmcrew::provider::extract_json;

fn main() {
    let replies = [
        "```json\n{\"finalize\": \"True\"}\n```",
        "Sure! Here is the plan: [{\"name\":\"Dana\"}]",
        "{\"who\": [\"Alex\", \"Mia\",],}",
        "I will think about it.",
    ];
    for raw in replies {
        match extract_json(raw) {
            Ok(doc) => println!("{doc}"),
            Err(e) => println!("error: {e}"),
        }
    }
}
