mod common;

use common::*;
use filmcrew::script::{estimate_durations, parse_script, serialize_script, DurationModel};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn posture_is_conserved_and_positions_never_shared(plan in script_plan()) {
        let env = full_env();
        let script = build_script(&env, &plan);
        if let Some(v) = conservation_violation(&env, &script) {
            prop_assert!(false, "{}", v);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn generated_scripts_round_trip(plan in script_plan()) {
        let env = full_env();
        let script = build_script(&env, &plan);
        let text = serialize_script(&script);
        let back = parse_script(&text).unwrap();
        prop_assert_eq!(&back, &script);
        prop_assert_eq!(serialize_script(&back), text);
    }

    #[test]
    fn more_words_never_shorten_a_line(words in 0usize..60, extra in 1usize..20, rate in 0.5f64..5.0, floor in 0.1f64..4.0) {
        let model = DurationModel::new(rate, floor, 3.0).unwrap();
        let short = vec!["word"; words].join(" ");
        let long = vec!["word"; words + extra].join(" ");
        prop_assert!(model.line_seconds(&long) >= model.line_seconds(&short));
    }
}

#[test]
fn durations_match_the_word_rate_arithmetic() {
    let model = DurationModel::new(2.5, 1.5, 3.0).unwrap();
    assert_eq!(model.line_seconds("one two three four five six seven eight nine ten"), 10.0 / 2.5);
    assert_eq!(model.line_seconds("hello"), 1.5);
    let env = full_env();
    let script = build_script(&env, &[ScenePlan { location: 0, cast: 2, seats: vec![0, 1, 2, 3], steps: vec![(0, 0, 0), (1, 2, 0)] }]);
    let timings = estimate_durations(&script, &model);
    assert_eq!(timings.len(), 2);
    assert!(timings.iter().all(|t| t.duration > 0.0));
}
