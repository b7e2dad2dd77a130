mod common;

use std::sync::atomic::{AtomicUsize, Ordering};

use common::*;
use filmcrew::collaboration::{critique_correct_verify, debate_judge, CcvOptions, DebateOptions, Peer};

fn ccv(max_rounds: usize, approve_at: Option<usize>, compat: bool) -> (usize, usize, usize, bool) {
    let counts = Counts::default();
    let critic = CountingCritic { counts: &counts, approve_at };
    let options = CcvOptions { max_rounds, compat_loop_guard: compat };
    let out = critique_correct_verify(&CountingWriter(&counts), &critic, "ctx", "write", options).unwrap();
    (counts.act.get(), counts.critique.get(), counts.verify.get(), out.finalized)
}

#[test]
fn never_satisfied_critic_stops_at_the_cap() {
    assert_eq!(ccv(3, None, false), (3, 3, 2, false));
}

#[test]
fn approval_at_round_two_takes_two_responses() {
    let (act, critique, verify, finalized) = ccv(3, Some(2), false);
    assert_eq!((act, critique, verify), (2, 1, 1));
    assert!(finalized);
}

#[test]
fn single_round_makes_no_verification() {
    assert_eq!(ccv(1, None, false), (1, 1, 0, false));
}

#[test]
fn literal_loop_guard_runs_one_extra_round() {
    assert_eq!(ccv(3, None, true), (4, 4, 3, false));
}

fn debate_calls(rounds: usize) -> usize {
    let calls = AtomicUsize::new(0);
    let p = CountingPeer { name: "p", calls: &calls };
    let q = CountingPeer { name: "q", calls: &calls };
    let out = debate_judge(&p, &q, &CountingJudge(&calls), "ctx", "shoot", DebateOptions::new(rounds)).unwrap();
    assert_eq!(out.judgment.winner, Peer::Q);
    assert_eq!(out.winning_response(), "q answer");
    calls.load(Ordering::SeqCst)
}

#[test]
fn debate_call_counts_follow_five_plus_two_m() {
    assert_eq!(debate_calls(2), 9);
    assert_eq!(debate_calls(0), 5);
    for m in 0..6 {
        assert_eq!(debate_calls(m), 5 + 2 * m);
    }
}
