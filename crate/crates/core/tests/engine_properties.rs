use botshape_core::engine::{check_invariants, LETS_CHAT, MAX_QUICK_REPLIES};
use botshape_core::persistence::to_document_json;
use botshape_core::replay::{apply_action, random_actions, run_script, ScriptAction};
use botshape_core::{AttributeId, Author, Engine, Mode, Phase};
use chrono::{DateTime, Utc};
use proptest::prelude::*;

const UTTERANCES: &[&str] = &[
    "hi",
    "Jane",
    "zombie",
    "Can you give me a suggestion?",
    "What does that mean?",
    "yes",
    "no",
    "skip",
    "Let's chat",
    "What else could we describe?",
    "What is your favourite meal?",
    "Do you have a job?",
    "Your age is 30",
    "Your hair colour is red.",
    "blue",
    "hmm",
];

fn action() -> impl Strategy<Value = ScriptAction> {
    prop_oneof![
        10 => prop::sample::select(UTTERANCES).prop_map(|u| ScriptAction::User(u.to_string())),
        3 => (0usize..5).prop_map(ScriptAction::Choose),
        1 => prop::sample::select(vec!["name", "age", "hair", "biggest_fear", "hobby", "occupation"])
            .prop_map(|a| ScriptAction::Delete(AttributeId::new(a).unwrap())),
        1 => (0u64..80).prop_map(ScriptAction::Pin),
    ]
}

proptest! {
    // 100 cases x 100 actions = 10k engine steps
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn invariants_hold_after_every_step(seed in any::<u64>(), actions in prop::collection::vec(action(), 100)) {
        let engine = Engine::offline();
        let (mut s, opening) = engine.start_session(seed, "prop", DateTime::<Utc>::UNIX_EPOCH);
        prop_assert!(!opening.quick_replies.contains(&LETS_CHAT.to_string()));
        let mut hint_turns = 0;
        let mut reached_threshold = false;

        for a in &actions {
            let before_len = s.transcript.len();
            let before_count = s.engine_state.guided_defined_count;
            let pending = match &s.engine_state.phase {
                Phase::CandidatesOffered { candidates } => Some(candidates.clone()),
                _ => None,
            };
            let result = apply_action(&engine, &mut s, a);
            if let Err(e) = check_invariants(&s, engine.registry()) {
                prop_assert!(false, "after {a}: {e}");
            }
            let Ok(turn) = result else { continue };

            prop_assert!(turn.quick_replies.len() <= MAX_QUICK_REPLIES);
            if turn.candidates.is_some() {
                prop_assert_eq!(s.engine_state.mode, Mode::Open);
            }
            if s.engine_state.mode == Mode::Open {
                prop_assert!(turn.quick_replies.iter().any(|q| q == "What else could we describe?"));
            }

            if let ScriptAction::Choose(i) = a {
                // only the chosen reply reaches the transcript
                let offered = pending.expect("choice succeeded without an offer");
                prop_assert_eq!(s.transcript.len(), before_len + 1);
                let last = s.transcript.last().unwrap();
                prop_assert_eq!(last.author, Author::Bot);
                prop_assert_eq!(&last.text, &offered[*i].text);
            }

            let shows_hint = turn.quick_replies.iter().any(|q| q == LETS_CHAT);
            let crossed = before_count < 3 && s.engine_state.guided_defined_count >= 3;
            if shows_hint {
                hint_turns += 1;
                prop_assert!(crossed && !reached_threshold, "hint off the threshold turn");
            }
            if crossed && !reached_threshold && matches!(a, ScriptAction::User(_)) {
                reached_threshold = true;
                prop_assert!(shows_hint, "threshold crossed without the hint");
            }
        }
        prop_assert!(hint_turns <= 1);
    }

    #[test]
    fn same_script_same_bytes(seed in any::<u64>(), actions in prop::collection::vec(action(), 40)) {
        let engine = Engine::offline();
        let a = run_script(&engine, &actions, seed);
        let b = run_script(&engine, &actions, seed);
        prop_assert_eq!(&a.log, &b.log);
        prop_assert_eq!(to_document_json(&a.session), to_document_json(&b.session));
    }
}

#[test]
fn long_random_script_is_reproducible() {
    let engine = Engine::offline();
    let actions = random_actions(2024, 1000, engine.registry());
    let a = run_script(&engine, &actions, 2024);
    let b = run_script(&engine, &actions, 2024);
    assert_eq!(to_document_json(&a.session), to_document_json(&b.session));
    assert_eq!(a.log, b.log);
    check_invariants(&a.session, engine.registry()).unwrap();
}

#[test]
fn different_seeds_draw_differently() {
    let engine = Engine::offline();
    let script = vec![ScriptAction::User("Jane".into())];
    let prompts: std::collections::BTreeSet<String> = (0..20)
        .map(|seed| {
            run_script(&engine, &script, seed)
                .session
                .transcript
                .last()
                .unwrap()
                .text
                .clone()
        })
        .collect();
    assert!(prompts.len() > 5, "only {} distinct prompts", prompts.len());
}
