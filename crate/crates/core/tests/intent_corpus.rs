use botshape_core::intent::{parse_corpus, recognize, RecognizerContext, INTENT_CORPUS};
use botshape_core::AttributeRegistry;

#[test]
fn corpus_classifies_as_labelled() {
    let registry = AttributeRegistry::builtin();
    let entries = parse_corpus(INTENT_CORPUS).expect("corpus parses");
    assert!(entries.len() >= 40, "corpus has {} entries", entries.len());

    let failures: Vec<String> = entries
        .iter()
        .filter_map(|e| {
            let ctx = RecognizerContext {
                mode: e.mode,
                awaiting: &e.awaiting,
                registry: &registry,
            };
            let got = recognize(&e.utterance, &ctx).to_string();
            (got != e.expected).then(|| {
                format!(
                    "line {}: {:?} -> {got}, want {}",
                    e.line, e.utterance, e.expected
                )
            })
        })
        .collect();
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn corpus_covers_the_walkthrough_lines() {
    let entries = parse_corpus(INTENT_CORPUS).unwrap();
    for required in [
        "Your name is Jane.",
        "Let's chat",
        "What else could we describe?",
        "hi",
        "Can you give me a suggestion?",
        "What does that mean?",
        "zombie",
        "no",
        "yes",
        "What is your favourite meal?",
    ] {
        assert!(
            entries.iter().any(|e| e.utterance == required),
            "missing {required:?}"
        );
    }
}

#[test]
fn malformed_corpus_lines_are_reported() {
    assert!(parse_corpus("guided\tnone\thi\n")
        .unwrap_err()
        .contains("line 1"));
    assert!(parse_corpus("chatty\tnone\thi\tGreeting\n").is_err());
    assert!(parse_corpus("guided\tvalue_for:Bad\thi\tGreeting\n").is_err());
}
