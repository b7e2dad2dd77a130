//! Two cinematographers debate a shot and a judge decides.
//!
//! cargo run --example debate

use filmcrew::collaboration::{debate_judge, BoxError, DebateOptions, DebatePeer, DialogueHistory, Judge, Judgment, Peer};

struct Cinematographer {
    tag: &'static str,
    shot: &'static str,
}

impl DebatePeer for Cinematographer {
    fn tag(&self) -> &str {
        self.tag
    }

    fn respond(&self, _: &DialogueHistory) -> Result<String, BoxError> {
        Ok(self.shot.into())
    }

    fn feedback(&self, _: &DialogueHistory, own: &str, other: &str, incoming: Option<&str>, round: usize) -> Result<String, BoxError> {
        let reply = if incoming.is_some() { ", and I have read your notes" } else { "" };
        Ok(format!("round {round}: {own} suits this line better than {other}{reply}"))
    }
}

struct Director;

impl Judge for Director {
    fn tag(&self) -> &str {
        "director"
    }

    fn judge(&self, _: &DialogueHistory, p: &str, _q: &str, _: &str, _: &str) -> Result<Judgment, BoxError> {
        // Alex is not moving, so a tracking shot loses.
        let winner = if p.contains("Tracking") { Peer::Q } else { Peer::P };
        Ok(Judgment { winner, rationale: "the speaker stands still".into() })
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = Cinematographer { tag: "cinematographer-1", shot: "Tracking Shot" };
    let q = Cinematographer { tag: "cinematographer-2", shot: "Medium Shot" };
    let out = debate_judge(&p, &q, &Director, "Alex greets Emma", "pick a shot", DebateOptions::new(2))?;
    for e in &out.log {
        println!("[{} {}] {}: {}", e.phase, e.round, e.author, e.text);
    }
    println!("winner: {:?} -> {}", out.judgment.winner, out.winning_response());
    Ok(())
}
