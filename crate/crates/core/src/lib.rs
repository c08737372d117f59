//! Botshaping: shape a blank chatbot into a fictional character through conversation.
//!
//! The crate is organised bottom-up:
//!
//! - [`domain`]: characters, transcript messages, pins.
//! - [`registry`]: the attribute registry and the seeded draw of undefined attributes.
//! - [`intent`]: the context-gated rule grammar that turns utterances into intents.
//! - [`concept`]: is-a value suggestions from a concept graph (snapshot or live).
//! - [`dialogue`]: persona sentences and the candidate-reply generators.
//! - [`engine`]: the guided/open conversation state machine.
//! - [`persistence`]: versioned JSON session documents on disk.
//! - [`replay`] and [`stats`]: scripted headless runs and chat-log statistics.

pub mod concept;
pub mod dialogue;
pub mod domain;
pub mod engine;
pub mod intent;
pub mod persistence;
pub mod registry;
pub mod replay;
pub mod session;
pub mod stats;

pub use domain::{
    AttributeId, AttributeValue, Author, Character, ChatMessage, DomainError, MessageKind, Mode,
    PinnedStatement, ValueSource,
};
pub use engine::{Engine, EngineConfig, EngineError, EngineState, Phase, TurnOutput};
pub use registry::{AttributeDefinition, AttributeRegistry, Category, SeededRng};
pub use session::Session;
