//! Agent-agnostic collaboration loops: Critique-Correct-Verify between an
//! action agent and a critic, and Debate-Judge between two peers and a
//! judge. Both have fixed, input-independent call budgets.

use std::fmt;

use serde::{Deserialize, Serialize};

pub type BoxError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "tag")]
pub enum Source {
    Context,
    Instruction,
    Agent(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub source: Source,
    pub content: String,
}

/// The shared conversation `H`, seeded with the context and instruction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueHistory {
    entries: Vec<HistoryEntry>,
}

impl DialogueHistory {
    pub fn new(context: impl Into<String>, instruction: impl Into<String>) -> Self {
        DialogueHistory {
            entries: vec![
                HistoryEntry {
                    source: Source::Context,
                    content: context.into(),
                },
                HistoryEntry {
                    source: Source::Instruction,
                    content: instruction.into(),
                },
            ],
        }
    }

    pub fn push(&mut self, author: &str, content: impl Into<String>) {
        self.entries.push(HistoryEntry {
            source: Source::Agent(author.to_string()),
            content: content.into(),
        });
    }

    pub fn context(&self) -> &str {
        &self.entries[0].content
    }

    pub fn instruction(&self) -> &str {
        &self.entries[1].content
    }

    pub fn entries(&self) -> &[HistoryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Most recent entry written by `author`.
    pub fn last_from(&self, author: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|e| matches!(&e.source, Source::Agent(a) if a == author))
            .map(|e| e.content.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Critique {
    pub author: String,
    pub content: String,
    pub round: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub finalize: bool,
    pub rationale: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Peer {
    P,
    Q,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub winner: Peer,
    pub rationale: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Act,
    Critique,
    Verify,
    Respond,
    Feedback,
    Debate,
    Judge,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Phase::Act => "act",
            Phase::Critique => "critique",
            Phase::Verify => "verify",
            Phase::Respond => "respond",
            Phase::Feedback => "feedback",
            Phase::Debate => "debate",
            Phase::Judge => "judge",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{agent} failed during {phase} (round {round}): {source}")]
pub struct AgentError {
    pub agent: String,
    pub phase: Phase,
    pub round: usize,
    #[source]
    pub source: BoxError,
}

/// The content author in Critique-Correct-Verify.
pub trait ActionAgent {
    fn tag(&self) -> &str;

    /// Produces (round 1) or corrects (later rounds) the response.
    fn act(&self, history: &DialogueHistory, round: usize) -> Result<String, BoxError>;
}

/// The reviewer in Critique-Correct-Verify.
pub trait Critic {
    fn tag(&self) -> &str;

    fn critique(
        &self,
        history: &DialogueHistory,
        response: &str,
        round: usize,
    ) -> Result<String, BoxError>;

    /// Decides whether `response` has addressed `critique`.
    fn verify(
        &self,
        context: &str,
        instruction: &str,
        response: &str,
        critique: &str,
        round: usize,
    ) -> Result<Verdict, BoxError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CcvOptions {
    /// Cap on action-agent responses.
    pub max_rounds: usize,
    /// Run the loop body `max_rounds + 1` times, as the guard
    /// `while m <= M` does when read literally.
    pub compat_loop_guard: bool,
}

impl CcvOptions {
    pub fn new(max_rounds: usize) -> Self {
        CcvOptions {
            max_rounds,
            compat_loop_guard: false,
        }
    }

    pub fn rounds(&self) -> usize {
        if self.compat_loop_guard {
            self.max_rounds + 1
        } else {
            self.max_rounds
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CcvRound {
    pub round: usize,
    pub response: String,
    pub verdict: Option<Verdict>,
    pub critique: Option<Critique>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CcvOutcome {
    /// Verbatim the action agent's last output.
    pub response: String,
    /// True when the critic approved; false when the cap was hit.
    pub finalized: bool,
    pub rounds: Vec<CcvRound>,
    pub history: DialogueHistory,
}

pub fn critique_correct_verify(
    action: &dyn ActionAgent,
    critic: &dyn Critic,
    context: &str,
    instruction: &str,
    options: CcvOptions,
) -> Result<CcvOutcome, AgentError> {
    assert!(options.max_rounds >= 1, "CCV needs at least one round");
    let mut history = DialogueHistory::new(context, instruction);
    let mut rounds: Vec<CcvRound> = Vec::new();
    let mut last_critique = String::new();
    let mut finalized = false;
    let err = |agent: &str, phase, round| {
        let agent = agent.to_string();
        move |source| AgentError {
            agent,
            phase,
            round,
            source,
        }
    };

    for m in 1..=options.rounds() {
        let response = action
            .act(&history, m)
            .map_err(err(action.tag(), Phase::Act, m))?;
        let mut entry = CcvRound {
            round: m,
            response: response.clone(),
            verdict: None,
            critique: None,
        };
        if m > 1 {
            let verdict = critic
                .verify(context, instruction, &response, &last_critique, m)
                .map_err(err(critic.tag(), Phase::Verify, m))?;
            let done = verdict.finalize;
            entry.verdict = Some(verdict);
            if done {
                history.push(action.tag(), response);
                rounds.push(entry);
                finalized = true;
                break;
            }
        }
        let critique = critic
            .critique(&history, &response, m)
            .map_err(err(critic.tag(), Phase::Critique, m))?;
        history.push(action.tag(), response);
        history.push(critic.tag(), critique.clone());
        last_critique = critique.clone();
        entry.critique = Some(Critique {
            author: critic.tag().to_string(),
            content: critique,
            round: m,
        });
        rounds.push(entry);
    }

    let response = rounds
        .last()
        .map(|r| r.response.clone())
        .expect("at least one round ran");
    Ok(CcvOutcome {
        response,
        finalized,
        rounds,
        history,
    })
}

/// One of the two debaters.
pub trait DebatePeer: Sync {
    fn tag(&self) -> &str;

    /// Independent first answer.
    fn respond(&self, history: &DialogueHistory) -> Result<String, BoxError>;

    /// Feedback on the other peer's current answer. `incoming` is the
    /// other peer's latest feedback on this peer's answer, if any yet.
    fn feedback(
        &self,
        history: &DialogueHistory,
        own: &str,
        other: &str,
        incoming: Option<&str>,
        round: usize,
    ) -> Result<String, BoxError>;

    /// Folds feedback about this peer's answer into it. No model call; the
    /// default keeps the answer unchanged.
    fn absorb(&self, own: &str, feedback: &str) -> Result<String, BoxError> {
        let _ = feedback;
        Ok(own.to_string())
    }
}

pub trait Judge {
    fn tag(&self) -> &str;

    fn judge(
        &self,
        history: &DialogueHistory,
        response_p: &str,
        response_q: &str,
        feedback_p: &str,
        feedback_q: &str,
    ) -> Result<Judgment, BoxError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DebateEntry {
    pub author: String,
    /// Whose answer the text is about; `None` for answers and the verdict.
    pub target: Option<String>,
    pub phase: Phase,
    pub round: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DebateOutcome {
    pub judgment: Judgment,
    /// P's answer after all feedback was absorbed.
    pub final_p: String,
    pub final_q: String,
    pub log: Vec<DebateEntry>,
}

impl DebateOutcome {
    pub fn winning_response(&self) -> &str {
        match self.judgment.winner {
            Peer::P => &self.final_p,
            Peer::Q => &self.final_q,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DebateOptions {
    pub rounds: usize,
    /// Let the two peers produce their first answers on separate threads.
    pub concurrent_respond: bool,
}

impl DebateOptions {
    pub fn new(rounds: usize) -> Self {
        DebateOptions {
            rounds,
            concurrent_respond: false,
        }
    }
}

/// Feedback from P is about Q's answer (`F_Q`) and vice versa.
pub fn debate_judge(
    p: &dyn DebatePeer,
    q: &dyn DebatePeer,
    judge: &dyn Judge,
    context: &str,
    instruction: &str,
    options: DebateOptions,
) -> Result<DebateOutcome, AgentError> {
    let history = DialogueHistory::new(context, instruction);
    let mut log = Vec::new();
    let wrap = |agent: &str, phase, round| {
        let agent = agent.to_string();
        move |source| AgentError {
            agent,
            phase,
            round,
            source,
        }
    };

    let (r_p, r_q) = if options.concurrent_respond {
        std::thread::scope(|s| {
            let hp = s.spawn(|| p.respond(&history));
            let rq = q.respond(&history);
            let rp = hp.join().expect("peer thread panicked");
            (rp, rq)
        })
    } else {
        (p.respond(&history), q.respond(&history))
    };
    let mut r_p = r_p.map_err(wrap(p.tag(), Phase::Respond, 0))?;
    let mut r_q = r_q.map_err(wrap(q.tag(), Phase::Respond, 0))?;
    for (peer, text) in [(p, &r_p), (q, &r_q)] {
        log.push(DebateEntry {
            author: peer.tag().into(),
            target: None,
            phase: Phase::Respond,
            round: 0,
            text: text.clone(),
        });
    }

    let mut f_p: Option<String> = None;
    let mut f_q: Option<String> = None;
    for m in 0..=options.rounds {
        let phase = if m == 0 { Phase::Feedback } else { Phase::Debate };
        let new_f_q = p
            .feedback(&history, &r_p, &r_q, f_p.as_deref(), m)
            .map_err(wrap(p.tag(), phase, m))?;
        let new_f_p = q
            .feedback(&history, &r_q, &r_p, (m > 0).then_some(new_f_q.as_str()), m)
            .map_err(wrap(q.tag(), phase, m))?;
        log.push(DebateEntry {
            author: p.tag().into(),
            target: Some(q.tag().into()),
            phase,
            round: m,
            text: new_f_q.clone(),
        });
        log.push(DebateEntry {
            author: q.tag().into(),
            target: Some(p.tag().into()),
            phase,
            round: m,
            text: new_f_p.clone(),
        });
        r_q = q.absorb(&r_q, &new_f_q).map_err(wrap(q.tag(), phase, m))?;
        r_p = p.absorb(&r_p, &new_f_p).map_err(wrap(p.tag(), phase, m))?;
        f_q = Some(new_f_q);
        f_p = Some(new_f_p);
    }

    let judgment = judge
        .judge(
            &history,
            &r_p,
            &r_q,
            f_p.as_deref().unwrap_or_default(),
            f_q.as_deref().unwrap_or_default(),
        )
        .map_err(wrap(judge.tag(), Phase::Judge, options.rounds + 1))?;
    log.push(DebateEntry {
        author: judge.tag().into(),
        target: None,
        phase: Phase::Judge,
        round: options.rounds + 1,
        text: judgment.rationale.clone(),
    });
    Ok(DebateOutcome {
        judgment,
        final_p: r_p,
        final_q: r_q,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    struct Writer {
        calls: Cell<usize>,
    }

    impl ActionAgent for Writer {
        fn tag(&self) -> &str {
            "writer"
        }
        fn act(&self, history: &DialogueHistory, round: usize) -> Result<String, BoxError> {
            self.calls.set(self.calls.get() + 1);
            Ok(format!("draft {round} after {} entries", history.len()))
        }
    }

    struct Reviewer {
        approve_at: Option<usize>,
        critiques: Cell<usize>,
        verifies: Cell<usize>,
    }

    impl Critic for Reviewer {
        fn tag(&self) -> &str {
            "director"
        }
        fn critique(&self, _: &DialogueHistory, r: &str, round: usize) -> Result<String, BoxError> {
            self.critiques.set(self.critiques.get() + 1);
            Ok(format!("fix {r} ({round})"))
        }
        fn verify(&self, _: &str, _: &str, _: &str, _: &str, round: usize) -> Result<Verdict, BoxError> {
            self.verifies.set(self.verifies.get() + 1);
            Ok(Verdict {
                finalize: self.approve_at == Some(round),
                rationale: String::new(),
            })
        }
    }

    fn run(m: usize, approve_at: Option<usize>, compat: bool) -> (CcvOutcome, usize, usize, usize) {
        let w = Writer { calls: Cell::new(0) };
        let c = Reviewer {
            approve_at,
            critiques: Cell::new(0),
            verifies: Cell::new(0),
        };
        let out = critique_correct_verify(
            &w,
            &c,
            "ctx",
            "inst",
            CcvOptions {
                max_rounds: m,
                compat_loop_guard: compat,
            },
        )
        .unwrap();
        (out, w.calls.get(), c.critiques.get(), c.verifies.get())
    }

    #[test]
    fn never_finalizing_critic() {
        let (out, p, f, d) = run(3, None, false);
        assert_eq!((p, f, d), (3, 3, 2));
        assert!(!out.finalized);
        assert!(out.response.starts_with("draft 3"));
    }

    #[test]
    fn approval_at_round_two() {
        let (out, p, f, d) = run(3, Some(2), false);
        assert_eq!((p, f, d), (2, 1, 1));
        assert!(out.finalized);
        assert!(out.response.starts_with("draft 2"));
    }

    #[test]
    fn single_round() {
        let (_, p, f, d) = run(1, None, false);
        assert_eq!((p, f, d), (1, 1, 0));
    }

    #[test]
    fn literal_guard_runs_one_extra_round() {
        let (_, p, f, d) = run(3, None, true);
        assert_eq!((p, f, d), (4, 4, 3));
    }

    #[test]
    fn history_only_grows() {
        let (out, ..) = run(3, None, false);
        assert_eq!(out.history.len(), 2 + 2 * 3);
        assert_eq!(out.history.context(), "ctx");
    }

    struct Cam {
        tag: &'static str,
        calls: std::sync::atomic::AtomicUsize,
    }

    impl DebatePeer for Cam {
        fn tag(&self) -> &str {
            self.tag
        }
        fn respond(&self, _: &DialogueHistory) -> Result<String, BoxError> {
            self.calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            Ok(format!("{} shots", self.tag))
        }
        fn feedback(
            &self,
            _: &DialogueHistory,
            _: &str,
            other: &str,
            _: Option<&str>,
            round: usize,
        ) -> Result<String, BoxError> {
            self.calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            Ok(format!("{round}: review of {other}"))
        }
    }

    struct Director {
        better: Peer,
        calls: Cell<usize>,
    }

    impl Judge for Director {
        fn tag(&self) -> &str {
            "director"
        }
        fn judge(&self, _: &DialogueHistory, _: &str, _: &str, _: &str, _: &str) -> Result<Judgment, BoxError> {
            self.calls.set(self.calls.get() + 1);
            Ok(Judgment {
                winner: self.better,
                rationale: "ok".into(),
            })
        }
    }

    fn debate(m: usize, concurrent: bool) -> (DebateOutcome, usize) {
        let p = Cam { tag: "cinematographer-1", calls: Default::default() };
        let q = Cam { tag: "cinematographer-2", calls: Default::default() };
        let j = Director { better: Peer::Q, calls: Cell::new(0) };
        let out = debate_judge(
            &p,
            &q,
            &j,
            "script",
            "annotate",
            DebateOptions {
                rounds: m,
                concurrent_respond: concurrent,
            },
        )
        .unwrap();
        let total = p.calls.into_inner() + q.calls.into_inner() + j.calls.get();
        (out, total)
    }

    #[test]
    fn debate_call_counts() {
        assert_eq!(debate(2, false).1, 9);
        assert_eq!(debate(0, false).1, 5);
        assert_eq!(debate(2, true).1, 9);
    }

    #[test]
    fn judge_picks_the_second_peer() {
        let (out, _) = debate(1, false);
        assert_eq!(out.judgment.winner, Peer::Q);
        assert_eq!(out.winning_response(), "cinematographer-2 shots");
        let fb: Vec<_> = out.log.iter().filter(|e| e.target.is_some()).collect();
        assert_eq!(fb[0].author, "cinematographer-1");
        assert_eq!(fb[0].target.as_deref(), Some("cinematographer-2"));
    }
}
