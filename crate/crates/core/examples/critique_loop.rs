//! Critique-correct-verify between a writer and a reviewer.
//!
//! cargo run --example critique_loop

use filmcrew::collaboration::{critique_correct_verify, ActionAgent, BoxError, CcvOptions, Critic, DialogueHistory, Verdict};

struct Writer;

impl ActionAgent for Writer {
    fn tag(&self) -> &str {
        "screenwriter"
    }

    fn act(&self, history: &DialogueHistory, round: usize) -> Result<String, BoxError> {
        Ok(match history.last_from("director") {
            None => "Alex: There's a cafe around the corner. Tomorrow at 3?".into(),
            Some(_) => format!("Alex: How about at my place? Tomorrow at 3? (rev {round})"),
        })
    }
}

struct Director;

impl Critic for Director {
    fn tag(&self) -> &str {
        "director"
    }

    fn critique(&self, _: &DialogueHistory, response: &str, _: usize) -> Result<String, BoxError> {
        Ok(format!("Scene 2 is at Alex's home, so '{response}' should point there."))
    }

    fn verify(&self, _: &str, _: &str, response: &str, _: &str, _: usize) -> Result<Verdict, BoxError> {
        let finalize = response.contains("my place");
        Ok(Verdict { finalize, rationale: if finalize { "fixed" } else { "still the cafe" }.into() })
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = critique_correct_verify(&Writer, &Director, "a first date", "write the line", CcvOptions::new(3))?;
    for r in &out.rounds {
        println!("round {}: {}", r.round, r.response);
        if let Some(v) = &r.verdict {
            println!("  verify: {} ({})", v.finalize, v.rationale);
        }
        if let Some(c) = &r.critique {
            println!("  critique: {}", c.content);
        }
    }
    println!("finalized: {}", out.finalized);
    Ok(())
}
