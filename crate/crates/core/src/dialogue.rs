//! Persona sentences, history windowing and candidate-reply generation.
//!
//! Two generators implement [`GenerationBackend`]:
//!
//! * [`StubBackend`] is a pure function of the request. It works on the last
//!   user message:
//!   1. if the message mentions an attribute (display name or synonym, longest
//!      match wins) whose persona sentence is in the request, candidate 0 is
//!      that sentence and candidate 1 is `"Well, "` followed by the sentence
//!      with a lowercased first letter;
//!   2. otherwise, if it asks about a "favourite X", candidate 1 proposes a
//!      new fact ("My favourite meal is pizza.");
//!   3. every remaining slot `i` holds `GENERIC[(h + i) mod 32]`, where `h` is
//!      the FNV-1a-64 hash of [`stub_hash_input`].
//! * [`RemoteBackend`] posts the request to an HTTP generation service.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{AttributeId, Author, Character};
use crate::intent::{find_phrase, normalize};
use crate::registry::{AttributeDefinition, AttributeRegistry};

pub const DEFAULT_CANDIDATES: usize = 3;
pub const DEFAULT_HISTORY_TURNS: usize = 10;
pub const REMOTE_PERSONA_BUDGET: usize = 20;
pub const GENERIC_REPLY_COUNT: usize = 32;

const GENERIC_REPLIES_FILE: &str = include_str!("../data/generic_replies.txt");
const REMOTE_TIMEOUT: Duration = Duration::from_secs(15);

const FAVOURITE_WORDS: &[&str] = &["favourite", "favorite", "fave"];
const FAVOURITE_VALUES: &[(&str, &str)] = &[
    ("meal", "pizza"),
    ("food", "pizza"),
    ("dish", "lasagna"),
    ("drink", "peppermint tea"),
    ("color", "green"),
    ("colour", "green"),
    ("animal", "the dolphin"),
    ("song", "an old sea shanty"),
    ("music", "jazz"),
    ("book", "a tattered book of fairy tales"),
    ("movie", "any horror movie"),
    ("film", "any horror movie"),
    ("season", "autumn"),
    ("place", "the beach at night"),
    ("game", "chess"),
];
const FAVOURITE_FALLBACKS: &[&str] = &[
    "a secret",
    "something quite unusual",
    "the one my mother loved",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DialogueError {
    #[error("attribute {0} is not in the registry")]
    UnknownAttribute(AttributeId),
    #[error("invalid generation request: {0}")]
    InvalidRequest(String),
    #[error("generation backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("malformed generation response: {0}")]
    MalformedResponse(String),
}

impl DialogueError {
    pub fn code(&self) -> &'static str {
        match self {
            DialogueError::UnknownAttribute(_) => "UnknownAttribute",
            DialogueError::InvalidRequest(_) => "InvalidRequest",
            DialogueError::BackendUnavailable(_) => "BackendUnavailable",
            DialogueError::MalformedResponse(_) => "MalformedResponse",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PersonaSentence {
    pub attribute: AttributeId,
    pub text: String,
}

/// One persona sentence per defined attribute, in definition order.
pub fn build_persona(
    character: &Character,
    registry: &AttributeRegistry,
) -> Result<Vec<PersonaSentence>, DialogueError> {
    character
        .attributes
        .iter()
        .map(|a| {
            let def = registry
                .get(&a.attribute)
                .ok_or_else(|| DialogueError::UnknownAttribute(a.attribute.clone()))?;
            Ok(PersonaSentence {
                attribute: a.attribute.clone(),
                text: def.render_persona(&a.value),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    User,
    Bot,
}

impl From<Author> for Role {
    fn from(a: Author) -> Self {
        match a {
            Author::User => Role::User,
            Author::Bot => Role::Bot,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryTurn {
    pub role: Role,
    pub text: String,
}

/// The last `max_turns` entries, order preserved.
pub fn window_history(history: &[HistoryTurn], max_turns: usize) -> Vec<HistoryTurn> {
    history[history.len().saturating_sub(max_turns)..].to_vec()
}

/// Body of `POST /generate`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub persona: Vec<String>,
    pub history: Vec<HistoryTurn>,
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationCandidate {
    pub text: String,
    pub index: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct GenerationResponse {
    candidates: Vec<String>,
}

pub trait GenerationBackend: Send + Sync {
    fn generate(&self, req: &GenerationRequest) -> Result<Vec<GenerationCandidate>, DialogueError>;
}

/// Validates the request, runs the backend and checks that exactly `n`
/// non-empty, densely indexed candidates came back.
pub fn generate_candidates(
    req: &GenerationRequest,
    backend: &dyn GenerationBackend,
) -> Result<Vec<GenerationCandidate>, DialogueError> {
    if req.n == 0 {
        return Err(DialogueError::InvalidRequest("n must be at least 1".into()));
    }
    let out = backend.generate(req)?;
    if out.len() != req.n {
        return Err(DialogueError::MalformedResponse(format!(
            "expected {} candidates, got {}",
            req.n,
            out.len()
        )));
    }
    for (i, c) in out.iter().enumerate() {
        if c.index != i || c.text.trim().is_empty() {
            return Err(DialogueError::MalformedResponse(format!(
                "bad candidate at {i}"
            )));
        }
    }
    Ok(out)
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Bytes hashed by the stub: each persona sentence as normalized tokens joined
/// by single spaces plus `\n`, then each history turn as `role:` plus its
/// normalized text plus `\n`, then the seed in decimal.
pub fn stub_hash_input(req: &GenerationRequest) -> String {
    let mut s = String::new();
    for p in &req.persona {
        s.push_str(&normalize(p).join(" "));
        s.push('\n');
    }
    for turn in &req.history {
        s.push_str(match turn.role {
            Role::User => "user:",
            Role::Bot => "bot:",
        });
        s.push_str(&normalize(&turn.text).join(" "));
        s.push('\n');
    }
    s.push_str(&req.seed.to_string());
    s
}

pub fn generic_replies() -> Vec<String> {
    GENERIC_REPLIES_FILE
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| l.trim().to_string())
        .collect()
}

/// Deterministic generator used offline and in tests.
pub struct StubBackend {
    registry: std::sync::Arc<AttributeRegistry>,
    replies: Vec<String>,
}

impl StubBackend {
    pub fn new(registry: std::sync::Arc<AttributeRegistry>) -> Self {
        let replies = generic_replies();
        assert_eq!(
            replies.len(),
            GENERIC_REPLY_COUNT,
            "generic reply table size"
        );
        StubBackend { registry, replies }
    }

    /// Attribute that owns a persona sentence: the one whose template has the
    /// longest literal text around the placeholder and still matches.
    fn owner_of(&self, sentence: &str) -> Option<&AttributeDefinition> {
        self.registry
            .entries()
            .iter()
            .filter(|d| {
                let (pre, post) = d.template_parts();
                sentence.len() > pre.len() + post.len()
                    && sentence.starts_with(pre)
                    && sentence.ends_with(post)
            })
            .max_by_key(|d| {
                let (pre, post) = d.template_parts();
                pre.len() + post.len()
            })
    }

    /// The persona sentence for the attribute the user mentions, if any.
    fn mentioned_fact<'r>(&self, tokens: &[String], persona: &'r [String]) -> Option<&'r str> {
        let owned: Vec<(&AttributeId, &str)> = persona
            .iter()
            .filter_map(|p| self.owner_of(p).map(|d| (&d.id, p.as_str())))
            .collect();
        let mut best: Option<(usize, usize, &str)> = None;
        for def in self.registry.entries() {
            let Some((_, sentence)) = owned.iter().rev().find(|(id, _)| **id == def.id) else {
                continue;
            };
            for syn in &def.synonyms {
                if let Some(pos) = find_phrase(tokens, syn) {
                    let better = match best {
                        None => true,
                        Some((len, p, _)) => syn.len() > len || (syn.len() == len && pos < p),
                    };
                    if better {
                        best = Some((syn.len(), pos, sentence));
                    }
                }
            }
        }
        best.map(|(_, _, s)| s)
    }
}

fn favourite_proposal(tokens: &[String], h: u64) -> Option<String> {
    let at = tokens
        .iter()
        .position(|t| FAVOURITE_WORDS.contains(&t.as_str()))?;
    let word = tokens[at].as_str();
    let subject = tokens.get(at + 1)?;
    let value = FAVOURITE_VALUES
        .iter()
        .find(|(k, _)| k == subject)
        .map(|(_, v)| *v)
        .unwrap_or(FAVOURITE_FALLBACKS[(h % FAVOURITE_FALLBACKS.len() as u64) as usize]);
    let word = if word == "fave" { "favourite" } else { word };
    Some(format!("My {word} {subject} is {value}."))
}

fn lower_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

impl GenerationBackend for StubBackend {
    fn generate(&self, req: &GenerationRequest) -> Result<Vec<GenerationCandidate>, DialogueError> {
        let h = fnv1a64(stub_hash_input(req).as_bytes());
        let table = self.replies.len() as u64;
        let mut slots: Vec<String> = (0..req.n)
            .map(|i| self.replies[((h % table + i as u64 % table) % table) as usize].clone())
            .collect();

        let last_user = req.history.iter().rev().find(|t| t.role == Role::User);
        let tokens = last_user.map(|t| normalize(&t.text)).unwrap_or_default();
        if let Some(fact) = self.mentioned_fact(&tokens, &req.persona) {
            slots[0] = fact.to_string();
            if req.n > 1 {
                slots[1] = format!("Well, {}", lower_first(fact));
            }
        } else if let Some(proposal) = favourite_proposal(&tokens, h) {
            let slot = if req.n > 1 { 1 } else { 0 };
            slots[slot] = proposal;
        }

        Ok(slots
            .into_iter()
            .enumerate()
            .map(|(index, text)| GenerationCandidate { text, index })
            .collect())
    }
}

/// HTTP client for `POST /generate`.
pub struct RemoteBackend {
    url: String,
    agent: ureq::Agent,
}

impl RemoteBackend {
    pub fn new(base_url: &str) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(REMOTE_TIMEOUT))
            .build()
            .into();
        RemoteBackend {
            url: format!("{}/generate", base_url.trim_end_matches('/')),
            agent,
        }
    }

    fn post(&self, body: &GenerationRequest) -> Result<GenerationResponse, Attempt> {
        let mut resp = match self.agent.post(&self.url).send_json(body) {
            Ok(r) => r,
            Err(ureq::Error::StatusCode(code)) if code < 500 => {
                return Err(Attempt::Fatal(DialogueError::MalformedResponse(format!(
                    "service answered HTTP {code}"
                ))))
            }
            Err(e) => return Err(Attempt::Retryable(e.to_string())),
        };
        resp.body_mut()
            .read_json::<GenerationResponse>()
            .map_err(|e| Attempt::Fatal(DialogueError::MalformedResponse(e.to_string())))
    }
}

enum Attempt {
    Retryable(String),
    Fatal(DialogueError),
}

impl GenerationBackend for RemoteBackend {
    fn generate(&self, req: &GenerationRequest) -> Result<Vec<GenerationCandidate>, DialogueError> {
        let mut body = req.clone();
        let excess = body.persona.len().saturating_sub(REMOTE_PERSONA_BUDGET);
        body.persona.drain(..excess);

        let resp = match self.post(&body) {
            Ok(r) => r,
            Err(Attempt::Fatal(e)) => return Err(e),
            Err(Attempt::Retryable(first)) => {
                tracing::debug!(error = %first, "generation request failed, retrying once");
                match self.post(&body) {
                    Ok(r) => r,
                    Err(Attempt::Fatal(e)) => return Err(e),
                    Err(Attempt::Retryable(e)) => return Err(DialogueError::BackendUnavailable(e)),
                }
            }
        };
        if resp.candidates.len() != req.n {
            return Err(DialogueError::MalformedResponse(format!(
                "expected {} candidates, got {}",
                req.n,
                resp.candidates.len()
            )));
        }
        resp.candidates
            .into_iter()
            .enumerate()
            .map(|(index, text)| {
                let text = text.trim().to_string();
                if text.is_empty() {
                    Err(DialogueError::MalformedResponse(format!(
                        "candidate {index} is empty"
                    )))
                } else {
                    Ok(GenerationCandidate { text, index })
                }
            })
            .collect()
    }
}
