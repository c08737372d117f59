//! Headless replay of scripted conversations.
//!
//! Script lines:
//!
//! ```text
//! # comment
//! U <text>       user message
//! C <index>      choose candidate reply
//! D <attribute>  delete attribute
//! P <msg_id>     pin bot message
//! ```
//!
//! A replay produces a line-oriented log of every turn plus the final
//! character and pinboard. The log is what golden files hold.

use std::fmt::Write as _;

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::domain::{AttributeId, Author, ChatMessage};
use crate::engine::{CharacterDelta, Engine, EngineError, PinDelta, TurnOutput};
use crate::registry::{AttributeRegistry, SeededRng};
use crate::session::Session;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("script line {line}: {message}")]
    ScriptParse { line: usize, message: String },
    #[error("golden mismatch at line {line}")]
    ExpectationMismatch {
        line: usize,
        expected: Option<String>,
        actual: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptAction {
    User(String),
    Choose(usize),
    Delete(AttributeId),
    Pin(u64),
}

impl std::fmt::Display for ScriptAction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScriptAction::User(t) => write!(f, "U {t}"),
            ScriptAction::Choose(i) => write!(f, "C {i}"),
            ScriptAction::Delete(a) => write!(f, "D {a}"),
            ScriptAction::Pin(m) => write!(f, "P {m}"),
        }
    }
}

pub fn parse_script(source: &str) -> Result<Vec<ScriptAction>, ReplayError> {
    let mut actions = Vec::new();
    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let err = |message: String| ReplayError::ScriptParse { line, message };
        let text = raw.trim_end_matches('\r');
        if text.trim().is_empty() || text.trim_start().starts_with('#') {
            continue;
        }
        let (tag, arg) = text.split_once(' ').unwrap_or((text, ""));
        let arg = arg.trim();
        let action = match tag {
            "U" if !arg.is_empty() => ScriptAction::User(arg.to_string()),
            "U" => return Err(err("U needs message text".into())),
            "C" => ScriptAction::Choose(
                arg.parse()
                    .map_err(|_| err(format!("bad candidate index {arg:?}")))?,
            ),
            "D" => ScriptAction::Delete(AttributeId::new(arg).map_err(|e| err(e.to_string()))?),
            "P" => ScriptAction::Pin(
                arg.parse()
                    .map_err(|_| err(format!("bad message id {arg:?}")))?,
            ),
            other => return Err(err(format!("unknown action {other:?}"))),
        };
        actions.push(action);
    }
    Ok(actions)
}

pub struct ReplayOutcome {
    pub session: Session,
    pub log: String,
}

/// Session id used for replays; together with the fixed epoch timestamp it
/// makes replay documents byte-stable.
pub fn replay_session_id(seed: u64) -> String {
    format!("replay-{seed}")
}

/// Applies one action, returning the turn or the engine's refusal.
pub fn apply_action(
    engine: &Engine,
    session: &mut Session,
    action: &ScriptAction,
) -> Result<TurnOutput, EngineError> {
    match action {
        ScriptAction::User(text) => engine.handle_user_message(session, text),
        ScriptAction::Choose(i) => engine.handle_candidate_choice(session, *i),
        ScriptAction::Delete(id) => Ok(engine.handle_delete_attribute(session, id)),
        ScriptAction::Pin(m) => engine.handle_pin(session, *m),
    }
}

pub fn run_script(engine: &Engine, actions: &[ScriptAction], seed: u64) -> ReplayOutcome {
    let (mut session, opening) =
        engine.start_session(seed, replay_session_id(seed), DateTime::<Utc>::UNIX_EPOCH);
    let mut log = String::new();
    let _ = writeln!(log, "# replay seed={seed}");
    let _ = writeln!(log, "== start");
    log_turn(&mut log, &opening, &session);
    for action in actions {
        let _ = writeln!(log, "== {action}");
        match apply_action(engine, &mut session, action) {
            Ok(turn) => log_turn(&mut log, &turn, &session),
            Err(e) => {
                let _ = writeln!(log, "error: {} ({e})", e.code());
            }
        }
    }
    log_final(&mut log, &session);
    ReplayOutcome { session, log }
}

fn log_message(log: &mut String, m: &ChatMessage) {
    let who = match m.author {
        Author::User => "user",
        Author::Bot => "bot",
    };
    let _ = writeln!(
        log,
        "{who}#{} {}/{}: {}",
        m.id,
        m.mode.as_str(),
        m.kind.as_str(),
        m.text
    );
}

fn log_turn(log: &mut String, turn: &TurnOutput, session: &Session) {
    if let Some(m) = &turn.user_message {
        log_message(log, m);
    }
    match &turn.character_delta {
        Some(CharacterDelta::Set {
            attribute,
            value,
            source,
        }) => {
            let _ = writeln!(
                log,
                "delta: set {attribute} = {value:?} ({})",
                source.as_str()
            );
        }
        Some(CharacterDelta::Deleted {
            attribute,
            previous,
        }) => {
            let _ = writeln!(log, "delta: delete {attribute} (was {previous:?})");
        }
        None => {}
    }
    match &turn.pin_delta {
        Some(PinDelta::Pinned { message_id }) => {
            let _ = writeln!(log, "pin: +{message_id}");
        }
        Some(PinDelta::Unpinned { message_id }) => {
            let _ = writeln!(log, "pin: -{message_id}");
        }
        Some(PinDelta::Unchanged { message_id }) => {
            let _ = writeln!(log, "pin: ={message_id}");
        }
        None => {}
    }
    for m in &turn.bot_messages {
        log_message(log, m);
    }
    if let Some(cands) = &turn.candidates {
        let _ = writeln!(log, "candidates: {}", cands.len());
        for c in cands {
            let _ = writeln!(log, "  [{}] {}", c.index, c.text);
        }
    }
    if let Some(err) = &turn.error {
        let _ = writeln!(log, "error: {} ({})", err.error_code, err.message);
    }
    if !turn.quick_replies.is_empty() {
        let _ = writeln!(log, "quick: {}", turn.quick_replies.join(" | "));
    }
    let st = &session.engine_state;
    let _ = writeln!(log, "state: {}/{}", st.mode.as_str(), st.phase.name());
}

fn log_final(log: &mut String, session: &Session) {
    let _ = writeln!(log, "== final");
    let _ = writeln!(log, "character:");
    for a in &session.character.attributes {
        let _ = writeln!(
            log,
            "  {} = {:?} ({}, turn {})",
            a.attribute,
            a.value,
            a.source.as_str(),
            a.defined_at
        );
    }
    if !session.character.rejected_values.is_empty() {
        let _ = writeln!(log, "rejected:");
        for (id, values) in &session.character.rejected_values {
            let joined: Vec<&str> = values.iter().map(String::as_str).collect();
            let _ = writeln!(log, "  {id}: {}", joined.join(" | "));
        }
    }
    let _ = writeln!(log, "pins:");
    for m in session.pinned_messages() {
        let _ = writeln!(log, "  #{} {}", m.id, m.text);
    }
    let _ = writeln!(log, "messages: {}", session.transcript.len());
}

/// Compares line by line and reports the first divergence.
pub fn compare_golden(actual: &str, expected: &str) -> Result<(), ReplayError> {
    let mut a = actual.lines();
    let mut e = expected.lines();
    let mut line = 0;
    loop {
        line += 1;
        match (a.next(), e.next()) {
            (None, None) => return Ok(()),
            (x, y) if x == y => continue,
            (x, y) => {
                return Err(ReplayError::ExpectationMismatch {
                    line,
                    expected: y.map(str::to_string),
                    actual: x.map(str::to_string),
                })
            }
        }
    }
}

const RANDOM_UTTERANCES: &[&str] = &[
    "hi",
    "Jane",
    "zombie",
    "blue",
    "Can you give me a suggestion?",
    "What does that mean?",
    "yes",
    "no",
    "something else",
    "skip",
    "Let's chat",
    "What else could we describe?",
    "What is your favourite meal?",
    "What is your biggest fear?",
    "Tell me about your hair",
    "Your age is 30",
    "Your hobby is chess.",
    "I see",
];

/// A reproducible mixed action script for soak and determinism runs.
pub fn random_actions(seed: u64, steps: usize, registry: &AttributeRegistry) -> Vec<ScriptAction> {
    let mut rng = SeededRng::new(seed);
    let ids: Vec<&AttributeId> = registry.entries().iter().map(|d| &d.id).collect();
    let mut approx_messages = 3u64;
    (0..steps)
        .map(|_| match rng.index(20) {
            0..=13 => {
                approx_messages += 3;
                ScriptAction::User(
                    RANDOM_UTTERANCES[rng.index(RANDOM_UTTERANCES.len())].to_string(),
                )
            }
            14..=16 => ScriptAction::Choose(rng.index(4)),
            17 => ScriptAction::Delete(ids[rng.index(ids.len())].clone()),
            _ => ScriptAction::Pin(rng.next_u64() % approx_messages),
        })
        .collect()
}
