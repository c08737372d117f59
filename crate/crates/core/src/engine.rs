//! The botshaping state machine.
//!
//! A session alternates between two modes. In guided mode the bot prompts for
//! undefined attributes, offers concept-graph suggestions and explains
//! attributes on request. In open mode every user utterance yields a set of
//! candidate replies conditioned on the persona; only the chosen candidate
//! enters the transcript. Mode switches are explicit ("Let's chat" /
//! "What else could we describe?").
//!
//! All randomness comes from the [`SeededRng`] stored in [`EngineState`], so a
//! session is fully determined by its seed and the sequence of user actions.

use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concept::{ConceptClient, ConceptError};
use crate::dialogue::{
    build_persona, generate_candidates, window_history, DialogueError, GenerationBackend,
    GenerationCandidate, GenerationRequest, HistoryTurn, StubBackend, DEFAULT_CANDIDATES,
    DEFAULT_HISTORY_TURNS,
};
use crate::domain::{
    AttributeId, AttributeValue, Author, Character, ChatMessage, DomainError, MessageKind, Mode,
    ValueSource,
};
use crate::intent::{self, Awaiting, Intent, RecognizerContext};
use crate::registry::{AttributeDefinition, AttributeRegistry, SeededRng};
use crate::session::Session;

pub const LETS_CHAT: &str = "Let's chat";
pub const WHAT_ELSE: &str = "What else could we describe?";
pub const ASK_SUGGESTION: &str = "Can you give me a suggestion?";
pub const ASK_EXPLANATION: &str = "What does that mean?";
pub const SKIP: &str = "Skip";
pub const MAX_QUICK_REPLIES: usize = 4;

const NAME: &str = "name";
const GREETING: &str = "Hi! I'm a brand-new character and I don't know anything about myself yet. Help me find out who I am.";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineConfig {
    /// Candidate replies per open-mode turn.
    pub candidates: usize,
    pub history_turns: usize,
    /// Consecutive suggestions per attribute before the bot asks the user to type.
    pub max_suggestions: u32,
    /// Guided definitions after which "Let's chat" is offered once.
    pub switch_threshold: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            candidates: DEFAULT_CANDIDATES,
            history_turns: DEFAULT_HISTORY_TURNS,
            max_suggestions: 5,
            switch_threshold: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Phase {
    Greeting,
    AwaitingName,
    AwaitingValue {
        attribute: AttributeId,
    },
    SuggestionOffered {
        attribute: AttributeId,
        candidate: String,
    },
    /// Guided mode with nothing left to prompt for.
    GuidedIdle,
    OpenIdle,
    CandidatesOffered {
        candidates: Vec<GenerationCandidate>,
    },
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::Greeting => "greeting",
            Phase::AwaitingName => "awaiting_name",
            Phase::AwaitingValue { .. } => "awaiting_value",
            Phase::SuggestionOffered { .. } => "suggestion_offered",
            Phase::GuidedIdle => "guided_idle",
            Phase::OpenIdle => "open_idle",
            Phase::CandidatesOffered { .. } => "candidates_offered",
        }
    }

    fn mode(&self) -> Mode {
        match self {
            Phase::OpenIdle | Phase::CandidatesOffered { .. } => Mode::Open,
            _ => Mode::Guided,
        }
    }

    /// The attribute the bot is currently asking about.
    fn attribute(&self) -> Option<AttributeId> {
        match self {
            Phase::AwaitingName => Some(name_id()),
            Phase::AwaitingValue { attribute } | Phase::SuggestionOffered { attribute, .. } => {
                Some(attribute.clone())
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineState {
    pub mode: Mode,
    pub phase: Phase,
    pub guided_defined_count: usize,
    /// Attributes defined while in guided mode and not deleted since.
    pub guided_defined: Vec<AttributeId>,
    pub switch_hint_shown: bool,
    /// Suggestions offered in a row for the current attribute.
    pub suggestions_offered: u32,
    /// Number of user actions handled so far.
    pub turn: u64,
    pub rng: SeededRng,
}

impl EngineState {
    pub fn new(seed: u64) -> Self {
        EngineState {
            mode: Mode::Guided,
            phase: Phase::Greeting,
            guided_defined_count: 0,
            guided_defined: Vec::new(),
            switch_hint_shown: false,
            suggestions_offered: 0,
            turn: 0,
            rng: SeededRng::new(seed),
        }
    }

    fn awaiting(&self) -> Awaiting {
        match &self.phase {
            Phase::AwaitingName => Awaiting::ValueFor(name_id()),
            Phase::AwaitingValue { attribute } => Awaiting::ValueFor(attribute.clone()),
            Phase::SuggestionOffered { .. } => Awaiting::AcceptReject,
            _ => Awaiting::None,
        }
    }

    fn set_phase(&mut self, phase: Phase) {
        self.mode = phase.mode();
        self.phase = phase;
    }
}

fn name_id() -> AttributeId {
    AttributeId::new(NAME).expect("valid id")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum CharacterDelta {
    Set {
        attribute: AttributeId,
        value: String,
        source: ValueSource,
    },
    Deleted {
        attribute: AttributeId,
        previous: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum PinDelta {
    Pinned { message_id: u64 },
    Unpinned { message_id: u64 },
    Unchanged { message_id: u64 },
}

/// Machine-readable failure carried by an otherwise successful turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnError {
    pub error_code: String,
    pub message: String,
}

/// Everything the engine emits for one user action.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnOutput {
    pub user_message: Option<ChatMessage>,
    pub bot_messages: Vec<ChatMessage>,
    pub quick_replies: Vec<String>,
    pub candidates: Option<Vec<GenerationCandidate>>,
    pub character_delta: Option<CharacterDelta>,
    pub pin_delta: Option<PinDelta>,
    pub error: Option<TurnError>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("message text is empty")]
    EmptyText,
    #[error("no candidate replies are pending")]
    NoCandidatesPending,
    #[error("candidate index {index} out of range (0..{available})")]
    IndexOutOfRange { index: usize, available: usize },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

impl EngineError {
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::EmptyText => "EmptyText",
            EngineError::NoCandidatesPending => "NoCandidatesPending",
            EngineError::IndexOutOfRange { .. } => "IndexOutOfRange",
            EngineError::Domain(e) => e.code(),
        }
    }
}

pub struct Engine {
    registry: Arc<AttributeRegistry>,
    concepts: Arc<ConceptClient>,
    backend: Arc<dyn GenerationBackend>,
    config: EngineConfig,
}

impl Engine {
    pub fn new(
        registry: Arc<AttributeRegistry>,
        concepts: Arc<ConceptClient>,
        backend: Arc<dyn GenerationBackend>,
        config: EngineConfig,
    ) -> Self {
        Engine {
            registry,
            concepts,
            backend,
            config,
        }
    }

    /// Shipped registry, snapshot concepts and the stub generator.
    pub fn offline() -> Self {
        let registry = Arc::new(AttributeRegistry::builtin());
        let backend = Arc::new(StubBackend::new(registry.clone()));
        Engine::new(
            registry,
            Arc::new(ConceptClient::snapshot()),
            backend,
            EngineConfig::default(),
        )
    }

    pub fn registry(&self) -> &AttributeRegistry {
        &self.registry
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn start_session(
        &self,
        seed: u64,
        session_id: impl Into<String>,
        created_at: DateTime<Utc>,
    ) -> (Session, TurnOutput) {
        let mut s = Session {
            session_id: session_id.into(),
            seed,
            created_at,
            engine_state: EngineState::new(seed),
            character: Character::default(),
            transcript: Vec::new(),
            pins: Vec::new(),
        };
        let mut out = TurnOutput::default();
        say(&mut s, &mut out, GREETING, MessageKind::System);
        self.prompt_name(&mut s, &mut out);
        out.quick_replies = self.phase_quick_replies(&s);
        (s, out)
    }

    pub fn handle_user_message(
        &self,
        s: &mut Session,
        text: &str,
    ) -> Result<TurnOutput, EngineError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(EngineError::EmptyText);
        }
        let mut out = TurnOutput::default();
        let guided_before = s.engine_state.guided_defined_count;
        s.engine_state.turn += 1;
        let mode = s.engine_state.mode;
        out.user_message = Some(s.push_message(Author::User, text, mode, MessageKind::Utterance));

        let awaiting = s.engine_state.awaiting();
        let intent = intent::recognize(
            text,
            &RecognizerContext {
                mode,
                awaiting: &awaiting,
                registry: &self.registry,
            },
        );
        tracing::trace!(session = %s.session_id, %intent, "recognized");
        self.apply_intent(s, &mut out, intent);

        out.quick_replies = self.phase_quick_replies(s);
        let st = &mut s.engine_state;
        if st.mode == Mode::Guided
            && !st.switch_hint_shown
            && guided_before < self.config.switch_threshold
            && st.guided_defined_count >= self.config.switch_threshold
        {
            st.switch_hint_shown = true;
            out.quick_replies.push(LETS_CHAT.to_string());
        }
        debug_assert!(out.quick_replies.len() <= MAX_QUICK_REPLIES);
        Ok(out)
    }

    fn apply_intent(&self, s: &mut Session, out: &mut TurnOutput, intent: Intent) {
        match intent {
            Intent::ProvideValue(value) => {
                let Some(attr) = s.engine_state.phase.attribute() else {
                    return self.help(s, out);
                };
                if s.engine_state.phase == Phase::AwaitingName && intent::is_greeting_only(&value) {
                    say(s, out, "Hi! Nice to meet you.", MessageKind::System);
                    return self.prompt_name(s, out);
                }
                if self.define(s, out, &attr, &value, ValueSource::UserTyped) {
                    self.next_prompt(s, out, None);
                } else {
                    self.reprompt(s, out);
                }
            }
            Intent::DefineAttribute { attribute, value } => {
                if !self.define(s, out, &attribute, &value, ValueSource::UserTyped) {
                    return;
                }
                match s.engine_state.mode {
                    Mode::Open => s.engine_state.set_phase(Phase::OpenIdle),
                    Mode::Guided => match s.engine_state.phase.attribute() {
                        Some(current) if current == attribute => self.next_prompt(s, out, None),
                        Some(_) => self.reprompt(s, out),
                        None => {}
                    },
                }
            }
            Intent::RequestSuggestion => match self.current_definition(s) {
                Some(def) => self.offer_suggestion(s, out, &def),
                None => self.help(s, out),
            },
            Intent::AcceptSuggestion => {
                if let Phase::SuggestionOffered {
                    attribute,
                    candidate,
                } = s.engine_state.phase.clone()
                {
                    if self.define(
                        s,
                        out,
                        &attribute,
                        &candidate,
                        ValueSource::SuggestionAccepted,
                    ) {
                        self.next_prompt(s, out, None);
                    }
                } else {
                    self.help(s, out);
                }
            }
            Intent::RejectSuggestion => {
                if let Phase::SuggestionOffered {
                    attribute,
                    candidate,
                } = s.engine_state.phase.clone()
                {
                    s.character.reject_value(&attribute, &candidate);
                    say(s, out, "No problem.", MessageKind::System);
                    let def = self.definition(&attribute);
                    self.offer_suggestion(s, out, &def);
                } else {
                    self.help(s, out);
                }
            }
            Intent::RequestExplanation => match self.current_definition(s) {
                Some(def) => {
                    say(s, out, def.explanation.clone(), MessageKind::Explanation);
                    self.reprompt(s, out);
                }
                None => self.help(s, out),
            },
            Intent::SkipAttribute => {
                let skipped = s.engine_state.phase.attribute();
                say(s, out, "Okay, let's skip that one.", MessageKind::System);
                self.next_prompt(s, out, skipped);
            }
            Intent::SwitchToOpen => {
                if s.engine_state.mode == Mode::Open {
                    say(
                        s,
                        out,
                        "We're already chatting. Ask me anything!",
                        MessageKind::System,
                    );
                } else {
                    s.engine_state.set_phase(Phase::OpenIdle);
                    say(
                        s,
                        out,
                        "Sure, let's chat! Ask me anything.",
                        MessageKind::System,
                    );
                }
            }
            Intent::SwitchToGuided => {
                s.engine_state.set_phase(Phase::GuidedIdle);
                say(
                    s,
                    out,
                    "Okay, let's describe me some more.",
                    MessageKind::System,
                );
                self.next_prompt(s, out, None);
            }
            Intent::OpenUtterance(_) => self.offer_candidates(s, out),
            Intent::Greeting => {
                say(s, out, "Hi there!", MessageKind::System);
                if s.engine_state.phase.attribute().is_some() {
                    self.reprompt(s, out);
                } else {
                    self.help(s, out);
                }
            }
            Intent::Unrecognized(_) => self.help(s, out),
        }
    }

    pub fn handle_candidate_choice(
        &self,
        s: &mut Session,
        index: usize,
    ) -> Result<TurnOutput, EngineError> {
        let Phase::CandidatesOffered { candidates } = &s.engine_state.phase else {
            return Err(EngineError::NoCandidatesPending);
        };
        let chosen = candidates
            .get(index)
            .ok_or(EngineError::IndexOutOfRange {
                index,
                available: candidates.len(),
            })?
            .text
            .clone();
        s.engine_state.turn += 1;
        s.engine_state.set_phase(Phase::OpenIdle);
        let mut out = TurnOutput::default();
        say(s, &mut out, chosen, MessageKind::Utterance);
        out.quick_replies = self.phase_quick_replies(s);
        Ok(out)
    }

    pub fn handle_delete_attribute(&self, s: &mut Session, id: &AttributeId) -> TurnOutput {
        s.engine_state.turn += 1;
        let previous = s.character.delete_attribute(id).map(|v| v.value);
        let st = &mut s.engine_state;
        st.guided_defined.retain(|g| g != id);
        st.guided_defined_count = st.guided_defined.len();
        TurnOutput {
            character_delta: Some(CharacterDelta::Deleted {
                attribute: id.clone(),
                previous,
            }),
            quick_replies: self.phase_quick_replies(s),
            ..TurnOutput::default()
        }
    }

    pub fn handle_pin(&self, s: &mut Session, message_id: u64) -> Result<TurnOutput, EngineError> {
        let added = s.pin_message(message_id, s.engine_state.turn + 1)?;
        s.engine_state.turn += 1;
        Ok(TurnOutput {
            pin_delta: Some(if added {
                PinDelta::Pinned { message_id }
            } else {
                PinDelta::Unchanged { message_id }
            }),
            quick_replies: self.phase_quick_replies(s),
            ..TurnOutput::default()
        })
    }

    pub fn handle_unpin(&self, s: &mut Session, message_id: u64) -> TurnOutput {
        s.engine_state.turn += 1;
        let removed = s.unpin_message(message_id);
        TurnOutput {
            pin_delta: Some(if removed {
                PinDelta::Unpinned { message_id }
            } else {
                PinDelta::Unchanged { message_id }
            }),
            quick_replies: self.phase_quick_replies(s),
            ..TurnOutput::default()
        }
    }

    fn definition(&self, id: &AttributeId) -> AttributeDefinition {
        self.registry
            .get(id)
            .cloned()
            .expect("engine only tracks registry attributes")
    }

    fn current_definition(&self, s: &Session) -> Option<AttributeDefinition> {
        s.engine_state
            .phase
            .attribute()
            .map(|id| self.definition(&id))
    }

    /// Sets an attribute from user input; returns false (after apologizing)
    /// when the value is unusable.
    fn define(
        &self,
        s: &mut Session,
        out: &mut TurnOutput,
        attr: &AttributeId,
        value: &str,
        source: ValueSource,
    ) -> bool {
        let Some(def) = self.registry.get(attr).cloned() else {
            self.help(s, out);
            return false;
        };
        let turn = s.engine_state.turn;
        let value = match AttributeValue::new(attr.clone(), value, source, turn) {
            Ok(v) => v,
            Err(DomainError::ValueTooLong) => {
                say(
                    s,
                    out,
                    "That's a lot to remember! Could you say it in fewer words?",
                    MessageKind::System,
                );
                return false;
            }
            Err(_) => {
                say(s, out, "I didn't catch a value there.", MessageKind::System);
                return false;
            }
        };
        let sentence = def.render_persona(&value.value);
        out.character_delta = Some(CharacterDelta::Set {
            attribute: attr.clone(),
            value: value.value.clone(),
            source,
        });
        s.character
            .set_attribute(value)
            .expect("value validated above");
        let st = &mut s.engine_state;
        if st.mode == Mode::Guided && !st.guided_defined.contains(attr) {
            st.guided_defined.push(attr.clone());
            st.guided_defined_count = st.guided_defined.len();
        }
        say(s, out, format!("Great! {sentence}"), MessageKind::System);
        true
    }

    fn prompt_name(&self, s: &mut Session, out: &mut TurnOutput) {
        let def = self.definition(&name_id());
        s.engine_state.set_phase(Phase::AwaitingName);
        s.engine_state.suggestions_offered = 0;
        say(s, out, def.prompt, MessageKind::Prompt);
    }

    fn prompt_for(&self, s: &mut Session, out: &mut TurnOutput, def: &AttributeDefinition) {
        if def.id.as_str() == NAME {
            return self.prompt_name(s, out);
        }
        s.engine_state.set_phase(Phase::AwaitingValue {
            attribute: def.id.clone(),
        });
        s.engine_state.suggestions_offered = 0;
        say(s, out, def.prompt.clone(), MessageKind::Prompt);
    }

    /// Draws the next undefined attribute and asks for it. The name is never
    /// drawn at random; `skipped` is excluded from this draw only.
    fn next_prompt(&self, s: &mut Session, out: &mut TurnOutput, skipped: Option<AttributeId>) {
        let name = name_id();
        let mut excluded = vec![&name];
        if let Some(sk) = &skipped {
            excluded.push(sk);
        }
        let drawn = self
            .registry
            .draw_undefined_excluding(&s.character, &mut s.engine_state.rng, &excluded)
            .ok()
            .cloned();
        if let Some(def) = drawn {
            return self.prompt_for(s, out, &def);
        }
        if !s.character.is_defined(&name) && skipped.as_ref() != Some(&name) {
            return self.prompt_name(s, out);
        }
        if let Some(sk) = skipped.filter(|sk| !s.character.is_defined(sk)) {
            say(
                s,
                out,
                "That's the only thing left to describe, though.",
                MessageKind::System,
            );
            let def = self.definition(&sk);
            return self.prompt_for(s, out, &def);
        }
        s.engine_state.set_phase(Phase::GuidedIdle);
        say(
            s,
            out,
            "Wow, you've described everything about me! Say \"Let's chat\" and we can talk.",
            MessageKind::System,
        );
    }

    fn reprompt(&self, s: &mut Session, out: &mut TurnOutput) {
        match s.engine_state.phase.clone() {
            Phase::SuggestionOffered {
                attribute,
                candidate,
            } => {
                let def = self.definition(&attribute);
                let text = format!(
                    "So, should my {} be \"{candidate}\"?",
                    def.display_name.to_lowercase()
                );
                say(s, out, text, MessageKind::Suggestion);
            }
            Phase::AwaitingName | Phase::AwaitingValue { .. } => {
                let def = self.current_definition(s).expect("phase has an attribute");
                say(s, out, def.prompt, MessageKind::Prompt);
            }
            _ => {}
        }
    }

    fn offer_suggestion(&self, s: &mut Session, out: &mut TurnOutput, def: &AttributeDefinition) {
        let display = def.display_name.to_lowercase();
        let awaiting = if def.id.as_str() == NAME {
            Phase::AwaitingName
        } else {
            Phase::AwaitingValue {
                attribute: def.id.clone(),
            }
        };
        if s.engine_state.suggestions_offered >= self.config.max_suggestions {
            s.engine_state.set_phase(awaiting);
            let text =
                format!("I'm out of ideas. What would you like my {display} to be? Just type it.");
            say(s, out, text, MessageKind::System);
            return;
        }
        match self
            .concepts
            .suggest_value(def, &s.character, &mut s.engine_state.rng)
        {
            Ok(value) => {
                s.engine_state.suggestions_offered += 1;
                s.engine_state.set_phase(Phase::SuggestionOffered {
                    attribute: def.id.clone(),
                    candidate: value.clone(),
                });
                say(
                    s,
                    out,
                    format!("How about \"{value}\"?"),
                    MessageKind::Suggestion,
                );
            }
            Err(err) => {
                s.engine_state.set_phase(awaiting);
                let text = match &err {
                    ConceptError::NotSuggestible(_) => {
                        format!("I don't have any ideas for my {display}. You'll have to make something up!")
                    }
                    ConceptError::Exhausted(_) | ConceptError::NoEdges(_) => {
                        format!("I've run out of ideas for my {display}. What do you think it is?")
                    }
                    _ => {
                        out.error = Some(TurnError {
                            error_code: err.code().to_string(),
                            message: err.to_string(),
                        });
                        format!("Sorry, I can't reach my source of ideas right now. What do you think my {display} is?")
                    }
                };
                say(s, out, text, MessageKind::System);
            }
        }
    }

    fn offer_candidates(&self, s: &mut Session, out: &mut TurnOutput) {
        let result = build_persona(&s.character, &self.registry).and_then(|persona| {
            let history: Vec<HistoryTurn> = s
                .transcript
                .iter()
                .filter(|m| m.mode == Mode::Open && m.kind == MessageKind::Utterance)
                .map(|m| HistoryTurn {
                    role: m.author.into(),
                    text: m.text.clone(),
                })
                .collect();
            let req = GenerationRequest {
                persona: persona.into_iter().map(|p| p.text).collect(),
                history: window_history(&history, self.config.history_turns),
                n: self.config.candidates,
                seed: s.engine_state.rng.next_u64(),
            };
            generate_candidates(&req, self.backend.as_ref())
        });
        match result {
            Ok(candidates) => {
                out.candidates = Some(candidates.clone());
                s.engine_state
                    .set_phase(Phase::CandidatesOffered { candidates });
            }
            Err(err) => {
                s.engine_state.set_phase(Phase::OpenIdle);
                let code = match &err {
                    DialogueError::BackendUnavailable(_) | DialogueError::MalformedResponse(_) => {
                        "BackendUnavailable"
                    }
                    other => other.code(),
                };
                out.error = Some(TurnError {
                    error_code: code.to_string(),
                    message: err.to_string(),
                });
                say(
                    s,
                    out,
                    "Sorry, I'm lost for words right now. Could you try again?",
                    MessageKind::System,
                );
            }
        }
    }

    fn help(&self, s: &mut Session, out: &mut TurnOutput) {
        let text = match &s.engine_state.phase {
            Phase::SuggestionOffered {
                attribute,
                candidate,
            } => format!(
                "Should my {} be \"{candidate}\"? Say yes or no, or ask what it means.",
                self.definition(attribute).display_name.to_lowercase()
            ),
            _ => "Sorry, I didn't get that. You can tell me things like \"Your age is 32.\", \
                  ask \"What else could we describe?\" or say \"Let's chat\"."
                .to_string(),
        };
        say(s, out, text, MessageKind::System);
    }

    fn phase_quick_replies(&self, s: &Session) -> Vec<String> {
        let replies: &[&str] = match &s.engine_state.phase {
            Phase::AwaitingName => &[ASK_EXPLANATION, SKIP],
            Phase::AwaitingValue { attribute } => {
                if self
                    .registry
                    .get(attribute)
                    .is_some_and(|d| d.suggestible())
                {
                    &[ASK_SUGGESTION, ASK_EXPLANATION, SKIP]
                } else {
                    &[ASK_EXPLANATION, SKIP]
                }
            }
            Phase::SuggestionOffered { .. } => &["Yes", "No", ASK_EXPLANATION],
            Phase::OpenIdle | Phase::CandidatesOffered { .. } => &[WHAT_ELSE],
            Phase::Greeting | Phase::GuidedIdle => &[],
        };
        replies.iter().map(|r| r.to_string()).collect()
    }
}

fn say(s: &mut Session, out: &mut TurnOutput, text: impl Into<String>, kind: MessageKind) {
    let mode = s.engine_state.mode;
    let msg = s.push_message(Author::Bot, text, mode, kind);
    out.bot_messages.push(msg);
}

/// Checks the structural invariants of a session; returns the first violation.
pub fn check_invariants(s: &Session, registry: &AttributeRegistry) -> Result<(), String> {
    let st = &s.engine_state;
    if st.phase.mode() != st.mode {
        return Err(format!(
            "phase {} inconsistent with mode {:?}",
            st.phase.name(),
            st.mode
        ));
    }
    if st.guided_defined_count != st.guided_defined.len() {
        return Err("guided_defined_count out of sync".into());
    }
    if st.guided_defined_count > s.character.len() {
        return Err("guided_defined_count exceeds defined attributes".into());
    }
    if let Some(g) = st
        .guided_defined
        .iter()
        .find(|g| !s.character.is_defined(g))
    {
        return Err(format!("{g} counted as guided but not defined"));
    }
    if s.character.len() > registry.len() {
        return Err("more attributes than the registry holds".into());
    }
    for (i, a) in s.character.attributes.iter().enumerate() {
        if registry.get(&a.attribute).is_none() {
            return Err(format!("{} is not a registry attribute", a.attribute));
        }
        if s.character.attributes[..i]
            .iter()
            .any(|b| b.attribute == a.attribute)
        {
            return Err(format!("{} defined twice", a.attribute));
        }
        if i > 0 && s.character.attributes[i - 1].defined_at >= a.defined_at {
            return Err("defined_at not strictly increasing".into());
        }
        if s.character
            .rejected(&a.attribute)
            .is_some_and(|r| r.contains(&a.value))
        {
            return Err(format!("current value of {} is also rejected", a.attribute));
        }
    }
    for (i, m) in s.transcript.iter().enumerate() {
        if m.id != i as u64 {
            return Err(format!("message id {} at position {i}", m.id));
        }
        if m.text.is_empty() {
            return Err(format!("message {i} is empty"));
        }
    }
    for (i, p) in s.pins.iter().enumerate() {
        match s.message(p.message_id) {
            Some(m) if m.author == Author::Bot => {}
            _ => {
                return Err(format!(
                    "pin {} does not reference a bot message",
                    p.message_id
                ))
            }
        }
        if s.pins[..i].iter().any(|q| q.message_id == p.message_id) {
            return Err(format!("duplicate pin {}", p.message_id));
        }
    }
    if let Phase::CandidatesOffered { candidates } = &st.phase {
        if candidates.iter().enumerate().any(|(i, c)| c.index != i) {
            return Err("candidate indices not dense".into());
        }
    }
    Ok(())
}
