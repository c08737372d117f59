//! Suggestions never repeat a rejected value or the value already held.

use std::collections::BTreeSet;

use botshape_core::concept::ConceptClient;
use botshape_core::domain::{AttributeValue, ValueSource};
use botshape_core::{Character, Engine, Phase, SeededRng, Session};
use chrono::{DateTime, Utc};

fn say(engine: &Engine, s: &mut Session, text: &str) {
    engine.handle_user_message(s, text).unwrap();
}

fn offered(s: &Session) -> Option<(String, String)> {
    match &s.engine_state.phase {
        Phase::SuggestionOffered {
            attribute,
            candidate,
        } => Some((attribute.to_string(), candidate.clone())),
        _ => None,
    }
}

#[test]
fn reject_loops_never_repeat_over_100_seeds() {
    let engine = Engine::offline();
    let mut offers = 0;
    for seed in 0..100u64 {
        let (mut s, _) =
            engine.start_session(seed, format!("hyg-{seed}"), DateTime::<Utc>::UNIX_EPOCH);
        say(&engine, &mut s, "Jane");
        for round in 0..12 {
            let Phase::AwaitingValue { attribute } = s.engine_state.phase.clone() else {
                break;
            };
            if !engine.registry().get(&attribute).unwrap().suggestible() {
                say(&engine, &mut s, "skip");
                continue;
            }
            say(&engine, &mut s, "Can you give me a suggestion?");
            let mut seen = BTreeSet::new();
            while let Some((attr, value)) = offered(&s) {
                offers += 1;
                let id = &attribute;
                assert_eq!(attr, id.as_str());
                assert!(
                    !s.character.rejected(id).is_some_and(|r| r.contains(&value)),
                    "seed {seed}: rejected {value:?} offered again for {id}"
                );
                assert!(
                    s.character.get(id).is_none_or(|v| v.value != value),
                    "seed {seed}: current value {value:?} offered for {id}"
                );
                assert!(
                    seen.insert(value.clone()),
                    "seed {seed}: {value:?} repeated"
                );
                // accept the third offer on even rounds, otherwise keep rejecting
                if round % 2 == 0 && seen.len() == 3 {
                    say(&engine, &mut s, "yes");
                } else {
                    say(&engine, &mut s, "no");
                }
            }
            // the bot gave up suggesting and asks for a typed value
            if s.engine_state.phase
                == (Phase::AwaitingValue {
                    attribute: attribute.clone(),
                })
            {
                say(&engine, &mut s, "something of my own");
            }
        }
    }
    assert!(offers > 300, "only {offers} suggestions were exercised");
}

#[test]
fn current_and_rejected_values_are_excluded() {
    let engine = Engine::offline();
    let client = ConceptClient::snapshot();
    for def in engine
        .registry()
        .entries()
        .iter()
        .filter(|d| d.suggestible())
    {
        let all: Vec<String> = client
            .fetch_instances(def.concept_node.as_deref().unwrap(), 10)
            .unwrap()
            .into_iter()
            .map(|e| e.start_label)
            .collect();
        for seed in 0..100u64 {
            let mut character = Character::default();
            let mut rng = SeededRng::new(seed);
            // hold the seed-picked label as current value and reject another
            let current = &all[seed as usize % all.len()];
            character
                .set_attribute(
                    AttributeValue::new(def.id.clone(), current, ValueSource::UserTyped, 1)
                        .unwrap(),
                )
                .unwrap();
            let rejected = &all[(seed as usize + 1) % all.len()];
            character.reject_value(&def.id, rejected);
            let mut given = BTreeSet::new();
            while let Ok(v) = client.suggest_value(def, &character, &mut rng) {
                assert!(!v.eq_ignore_ascii_case(current), "{}: current {v}", def.id);
                assert!(
                    !character
                        .rejected(&def.id)
                        .unwrap()
                        .iter()
                        .any(|r| r.eq_ignore_ascii_case(&v)),
                    "{}: rejected {v}",
                    def.id
                );
                assert!(given.insert(v.clone()));
                character.reject_value(&def.id, &v);
            }
        }
    }
}
