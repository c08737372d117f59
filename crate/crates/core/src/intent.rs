//! Context-gated rule grammar for user utterances.
//!
//! Rules are tried in a fixed priority order, first match wins:
//!
//! 1. exact mode-switch phrases ("Let's chat", "What else could we describe?")
//! 2. the define pattern `your <attribute> is <value>`
//! 3. guided control words (suggestion, explanation, accept, reject, skip)
//! 4. a pending value prompt takes the whole utterance as the value
//! 5. anything in open mode is an open utterance
//! 6. greetings
//! 7. unrecognized
//!
//! Accept and reject words only count while a suggestion is on the table, so a
//! plain "no" typed as an answer to a prompt is still a value.

use std::fmt;

use crate::domain::{AttributeId, Mode};
use crate::registry::AttributeRegistry;

pub const SWITCH_TO_OPEN_PHRASES: &[&str] = &[
    "let's chat",
    "lets chat",
    "let us chat",
    "let's talk",
    "lets talk",
    "let us talk",
];

pub const SWITCH_TO_GUIDED_PHRASES: &[&str] = &[
    "what else could we describe",
    "what else can we describe",
    "what else should we describe",
    "let's describe more",
    "back to describing",
];

const ACCEPT_WORDS: &[&str] = &["yes", "ok", "okay", "sure", "accept", "yeah", "yep"];
const ACCEPT_PHRASES: &[&str] = &["i like it", "take it"];
const REJECT_WORDS: &[&str] = &["no", "nope", "nah", "reject"];
const REJECT_PHRASES: &[&str] = &["something else", "next suggestion", "another one"];
const SUGGESTION_WORDS: &[&str] = &["suggest", "suggestion", "suggestions", "idea", "ideas"];
const EXPLANATION_WORDS: &[&str] = &["explain", "explanation", "meaning"];
const EXPLANATION_PHRASES: &[&str] = &[
    "what does that mean",
    "what does it mean",
    "what do you mean",
];
const SKIP_WORDS: &[&str] = &["skip", "next", "pass"];
const SKIP_FILLER: &[&str] = &[
    "please",
    "this",
    "that",
    "one",
    "question",
    "attribute",
    "let's",
    "lets",
    "just",
    "it",
    "can",
    "we",
    "i",
    "want",
    "to",
    "another",
];
const GREETING_WORDS: &[&str] = &["hi", "hello", "hey", "hiya", "howdy", "greetings", "yo"];
const GREETING_PHRASES: &[&str] = &["good morning", "good afternoon", "good evening"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Intent {
    Greeting,
    DefineAttribute {
        attribute: AttributeId,
        value: String,
    },
    ProvideValue(String),
    RequestSuggestion,
    RequestExplanation,
    AcceptSuggestion,
    RejectSuggestion,
    SkipAttribute,
    SwitchToOpen,
    SwitchToGuided,
    OpenUtterance(String),
    Unrecognized(String),
}

impl Intent {
    pub fn name(&self) -> &'static str {
        match self {
            Intent::Greeting => "Greeting",
            Intent::DefineAttribute { .. } => "DefineAttribute",
            Intent::ProvideValue(_) => "ProvideValue",
            Intent::RequestSuggestion => "RequestSuggestion",
            Intent::RequestExplanation => "RequestExplanation",
            Intent::AcceptSuggestion => "AcceptSuggestion",
            Intent::RejectSuggestion => "RejectSuggestion",
            Intent::SkipAttribute => "SkipAttribute",
            Intent::SwitchToOpen => "SwitchToOpen",
            Intent::SwitchToGuided => "SwitchToGuided",
            Intent::OpenUtterance(_) => "OpenUtterance",
            Intent::Unrecognized(_) => "Unrecognized",
        }
    }
}

/// `Name`, `Name(text)` or `DefineAttribute(attr=value)`; the intent corpus uses this form.
impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Intent::DefineAttribute { attribute, value } => {
                write!(f, "DefineAttribute({attribute}={value})")
            }
            Intent::ProvideValue(t) | Intent::OpenUtterance(t) | Intent::Unrecognized(t) => {
                write!(f, "{}({t})", self.name())
            }
            other => f.write_str(other.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Awaiting {
    None,
    ValueFor(AttributeId),
    AcceptReject,
}

#[derive(Debug, Clone, Copy)]
pub struct RecognizerContext<'a> {
    pub mode: Mode,
    pub awaiting: &'a Awaiting,
    pub registry: &'a AttributeRegistry,
}

/// Lowercases, turns punctuation other than apostrophes into spaces and splits
/// on whitespace. Typographic apostrophes are folded to `'`.
pub fn normalize(utterance: &str) -> Vec<String> {
    let cleaned: String = utterance
        .chars()
        .map(|c| match c {
            '\u{2018}' | '\u{2019}' | '`' => '\'',
            c if c.is_alphanumeric() || c == '\'' => c,
            _ => ' ',
        })
        .collect::<String>()
        .to_lowercase();
    cleaned
        .split_whitespace()
        .map(|t| t.trim_matches('\'').to_string())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Position of `phrase` as a contiguous token run inside `tokens`.
pub fn find_phrase<S: AsRef<str>>(tokens: &[String], phrase: &[S]) -> Option<usize> {
    if phrase.is_empty() || phrase.len() > tokens.len() {
        return None;
    }
    tokens
        .windows(phrase.len())
        .position(|w| w.iter().zip(phrase).all(|(a, b)| a == b.as_ref()))
}

fn contains_phrase(tokens: &[String], phrase: &str) -> bool {
    let parts: Vec<&str> = phrase.split(' ').collect();
    find_phrase(tokens, &parts).is_some()
}

fn any_word(tokens: &[String], words: &[&str]) -> bool {
    tokens.iter().any(|t| words.contains(&t.as_str()))
}

fn first_word_in(tokens: &[String], words: &[&str]) -> bool {
    tokens.first().is_some_and(|t| words.contains(&t.as_str()))
}

pub fn recognize(utterance: &str, ctx: &RecognizerContext<'_>) -> Intent {
    let trimmed = utterance.trim();
    let tokens = normalize(trimmed);
    let joined = tokens.join(" ");

    if SWITCH_TO_OPEN_PHRASES.contains(&joined.as_str()) {
        return Intent::SwitchToOpen;
    }
    if SWITCH_TO_GUIDED_PHRASES.contains(&joined.as_str()) {
        return Intent::SwitchToGuided;
    }

    if let Some(intent) = match_define(trimmed, ctx.registry) {
        return intent;
    }

    if ctx.mode == Mode::Guided {
        if let Some(intent) = match_control(&tokens, ctx.awaiting) {
            return intent;
        }
    }

    if matches!(ctx.awaiting, Awaiting::ValueFor(_)) && !trimmed.is_empty() {
        return Intent::ProvideValue(trimmed.to_string());
    }

    if ctx.mode == Mode::Open && !trimmed.is_empty() {
        return Intent::OpenUtterance(trimmed.to_string());
    }

    if first_word_in(&tokens, GREETING_WORDS)
        || GREETING_PHRASES.iter().any(|p| contains_phrase(&tokens, p))
    {
        return Intent::Greeting;
    }

    Intent::Unrecognized(trimmed.to_string())
}

/// True for bare greetings such as "hi" or "hello there", which should not be
/// taken as an answer to the opening name prompt.
pub fn is_greeting_only(utterance: &str) -> bool {
    let tokens = normalize(utterance);
    let joined = tokens.join(" ");
    (first_word_in(&tokens, GREETING_WORDS) && tokens.len() <= 2)
        || GREETING_PHRASES.contains(&joined.as_str())
}

/// `your <attribute phrase> is|are <value>`. Every `is`/`are` split point is
/// tried from the left until the phrase names a registry attribute.
fn match_define(text: &str, registry: &AttributeRegistry) -> Option<Intent> {
    if text.ends_with('?') {
        return None;
    }
    // ASCII folding keeps byte offsets aligned with `text`
    let lower = text.to_ascii_lowercase();
    if !lower.starts_with("your ") {
        return None;
    }
    let rest = &text["your ".len()..];
    let rest_lower = &lower["your ".len()..];
    for verb in [" is ", " are "] {
        let mut from = 0;
        while let Some(pos) = rest_lower[from..].find(verb) {
            let at = from + pos;
            let phrase = &rest[..at];
            let value = rest[at + verb.len()..]
                .trim()
                .trim_end_matches(['.', '!'])
                .trim();
            if !value.is_empty() {
                if let Some(def) = registry.resolve_phrase(phrase) {
                    return Some(Intent::DefineAttribute {
                        attribute: def.id.clone(),
                        value: value.to_string(),
                    });
                }
            }
            from = at + 1;
        }
    }
    None
}

fn match_control(tokens: &[String], awaiting: &Awaiting) -> Option<Intent> {
    if tokens.is_empty() {
        return None;
    }
    if *awaiting == Awaiting::AcceptReject {
        if first_word_in(tokens, REJECT_WORDS)
            || REJECT_PHRASES.iter().any(|p| contains_phrase(tokens, p))
        {
            return Some(Intent::RejectSuggestion);
        }
        if first_word_in(tokens, ACCEPT_WORDS)
            || ACCEPT_PHRASES.iter().any(|p| contains_phrase(tokens, p))
        {
            return Some(Intent::AcceptSuggestion);
        }
    }
    if any_word(tokens, EXPLANATION_WORDS)
        || EXPLANATION_PHRASES
            .iter()
            .any(|p| contains_phrase(tokens, p))
    {
        return Some(Intent::RequestExplanation);
    }
    if any_word(tokens, SUGGESTION_WORDS) {
        return Some(Intent::RequestSuggestion);
    }
    if any_word(tokens, SKIP_WORDS)
        && tokens
            .iter()
            .all(|t| SKIP_WORDS.contains(&t.as_str()) || SKIP_FILLER.contains(&t.as_str()))
    {
        return Some(Intent::SkipAttribute);
    }
    None
}

/// Labelled utterances shipped with the crate: `mode, awaiting, utterance, expected_intent`.
pub const INTENT_CORPUS: &str = include_str!("../data/intent_corpus.tsv");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub line: usize,
    pub mode: Mode,
    pub awaiting: Awaiting,
    pub utterance: String,
    /// Display form of the expected intent, e.g. `DefineAttribute(name=Jane)`.
    pub expected: String,
}

pub fn parse_corpus(source: &str) -> Result<Vec<CorpusEntry>, String> {
    let mut entries = Vec::new();
    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').collect();
        if cols.len() != 4 {
            return Err(format!(
                "line {line}: expected 4 columns, got {}",
                cols.len()
            ));
        }
        let mode = match cols[0] {
            "guided" => Mode::Guided,
            "open" => Mode::Open,
            other => return Err(format!("line {line}: bad mode {other:?}")),
        };
        let awaiting = match cols[1] {
            "none" => Awaiting::None,
            "accept_reject" => Awaiting::AcceptReject,
            other => match other.strip_prefix("value_for:") {
                Some(id) => Awaiting::ValueFor(
                    AttributeId::new(id).map_err(|e| format!("line {line}: {e}"))?,
                ),
                None => return Err(format!("line {line}: bad awaiting {other:?}")),
            },
        };
        entries.push(CorpusEntry {
            line,
            mode,
            awaiting,
            utterance: cols[2].to_string(),
            expected: cols[3].to_string(),
        });
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg() -> AttributeRegistry {
        AttributeRegistry::builtin()
    }

    fn id(s: &str) -> AttributeId {
        AttributeId::new(s).unwrap()
    }

    fn rec(text: &str, mode: Mode, awaiting: Awaiting) -> Intent {
        let r = reg();
        recognize(
            text,
            &RecognizerContext {
                mode,
                awaiting: &awaiting,
                registry: &r,
            },
        )
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize("Let's chat!"), ["let's", "chat"]);
        assert_eq!(normalize("  HI  "), ["hi"]);
        assert!(normalize("").is_empty());
        assert_eq!(normalize("Let\u{2019}s chat"), ["let's", "chat"]);
        assert_eq!(normalize("hair-colour?"), ["hair", "colour"]);
        assert!(normalize("?!...").is_empty());
    }

    #[test]
    fn define_pattern() {
        assert_eq!(
            rec("Your name is Jane.", Mode::Guided, Awaiting::None),
            Intent::DefineAttribute {
                attribute: id("name"),
                value: "Jane".into()
            }
        );
        assert_eq!(
            rec(
                "your hair colour is dark purple",
                Mode::Open,
                Awaiting::None
            ),
            Intent::DefineAttribute {
                attribute: id("hair"),
                value: "dark purple".into()
            }
        );
        assert_eq!(
            rec(
                "Your eyes are violet!",
                Mode::Guided,
                Awaiting::ValueFor(id("age"))
            ),
            Intent::DefineAttribute {
                attribute: id("eye_color"),
                value: "violet".into()
            }
        );
        // the first split whose left side names an attribute wins
        assert_eq!(
            rec(
                "Your biggest fear is that the sea is rising",
                Mode::Guided,
                Awaiting::None
            ),
            Intent::DefineAttribute {
                attribute: id("biggest_fear"),
                value: "that the sea is rising".into()
            }
        );
    }

    #[test]
    fn define_with_unknown_attribute_falls_through() {
        assert_eq!(
            rec(
                "Your favourite meal is pizza.",
                Mode::Guided,
                Awaiting::None
            ),
            Intent::Unrecognized("Your favourite meal is pizza.".into())
        );
        assert_eq!(
            rec("Your dog is cute", Mode::Open, Awaiting::None),
            Intent::OpenUtterance("Your dog is cute".into())
        );
        // a question is not a definition
        assert_eq!(
            rec("Your name is Jane?", Mode::Open, Awaiting::None),
            Intent::OpenUtterance("Your name is Jane?".into())
        );
    }

    #[test]
    fn mode_switches_outrank_pending_values() {
        for awaiting in [
            Awaiting::None,
            Awaiting::ValueFor(id("family")),
            Awaiting::AcceptReject,
        ] {
            assert_eq!(
                rec("Let's chat", Mode::Guided, awaiting.clone()),
                Intent::SwitchToOpen
            );
            assert_eq!(
                rec("What else could we describe?", Mode::Guided, awaiting),
                Intent::SwitchToGuided
            );
        }
        assert_eq!(
            rec("What else could we describe?", Mode::Open, Awaiting::None),
            Intent::SwitchToGuided
        );
        assert_eq!(
            rec("let's chat!", Mode::Open, Awaiting::None),
            Intent::SwitchToOpen
        );
    }

    #[test]
    fn pending_value() {
        assert_eq!(
            rec(
                "zombie",
                Mode::Guided,
                Awaiting::ValueFor(id("biggest_fear"))
            ),
            Intent::ProvideValue("zombie".into())
        );
        assert_eq!(
            rec("  no  ", Mode::Guided, Awaiting::ValueFor(id("religion"))),
            Intent::ProvideValue("no".into())
        );
        assert_eq!(
            rec(
                "next door neighbour",
                Mode::Guided,
                Awaiting::ValueFor(id("community"))
            ),
            Intent::ProvideValue("next door neighbour".into())
        );
    }

    #[test]
    fn guided_control_words() {
        let v = || Awaiting::ValueFor(id("biggest_fear"));
        assert_eq!(
            rec("Can you give me a suggestion?", Mode::Guided, v()),
            Intent::RequestSuggestion
        );
        assert_eq!(
            rec("What does that mean?", Mode::Guided, v()),
            Intent::RequestExplanation
        );
        assert_eq!(
            rec("explain please", Mode::Guided, v()),
            Intent::RequestExplanation
        );
        assert_eq!(rec("Skip", Mode::Guided, v()), Intent::SkipAttribute);
        assert_eq!(
            rec("next one please", Mode::Guided, v()),
            Intent::SkipAttribute
        );
        assert_eq!(
            rec("yes", Mode::Guided, Awaiting::AcceptReject),
            Intent::AcceptSuggestion
        );
        assert_eq!(
            rec("I like it!", Mode::Guided, Awaiting::AcceptReject),
            Intent::AcceptSuggestion
        );
        assert_eq!(
            rec("No.", Mode::Guided, Awaiting::AcceptReject),
            Intent::RejectSuggestion
        );
        assert_eq!(
            rec("next suggestion", Mode::Guided, Awaiting::AcceptReject),
            Intent::RejectSuggestion
        );
        assert_eq!(
            rec("something else", Mode::Guided, Awaiting::AcceptReject),
            Intent::RejectSuggestion
        );
    }

    #[test]
    fn control_words_do_not_apply_in_open_mode() {
        assert_eq!(
            rec("Can you give me a suggestion?", Mode::Open, Awaiting::None),
            Intent::OpenUtterance("Can you give me a suggestion?".into())
        );
    }

    #[test]
    fn greeting_and_fallback() {
        assert_eq!(rec("hi", Mode::Guided, Awaiting::None), Intent::Greeting);
        assert_eq!(
            rec("Hello there!", Mode::Guided, Awaiting::None),
            Intent::Greeting
        );
        assert_eq!(
            rec("bananas", Mode::Guided, Awaiting::None),
            Intent::Unrecognized("bananas".into())
        );
        assert_eq!(
            rec("hi", Mode::Open, Awaiting::None),
            Intent::OpenUtterance("hi".into())
        );
    }

    #[test]
    fn greeting_only() {
        assert!(is_greeting_only("Hi"));
        assert!(is_greeting_only("hello there!"));
        assert!(is_greeting_only("Good morning"));
        assert!(!is_greeting_only("Hiro"));
        assert!(!is_greeting_only("hey you over there"));
    }

    #[test]
    fn display_form() {
        assert_eq!(
            Intent::DefineAttribute {
                attribute: id("name"),
                value: "Jane".into()
            }
            .to_string(),
            "DefineAttribute(name=Jane)"
        );
        assert_eq!(
            Intent::ProvideValue("zombie".into()).to_string(),
            "ProvideValue(zombie)"
        );
        assert_eq!(Intent::SwitchToOpen.to_string(), "SwitchToOpen");
    }

    #[test]
    fn phrase_search() {
        let toks = normalize("what is your eye color today");
        assert_eq!(find_phrase(&toks, &["eye", "color"]), Some(3));
        assert_eq!(find_phrase(&toks, &["color", "eye"]), None);
        assert_eq!(find_phrase::<&str>(&toks, &[]), None);
    }
}
