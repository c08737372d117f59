use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::domain::{
    Author, Character, ChatMessage, DomainError, MessageKind, Mode, PinnedStatement,
};
use crate::engine::EngineState;

/// One character-shaping session: the character, the transcript, the pinboard
/// and the engine state needed to resume the conversation exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub seed: u64,
    pub created_at: DateTime<Utc>,
    pub engine_state: EngineState,
    pub character: Character,
    pub transcript: Vec<ChatMessage>,
    pub pins: Vec<PinnedStatement>,
}

/// Session ids double as file names, so they are restricted to `[A-Za-z0-9_-]{1,128}`.
pub fn is_valid_session_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl Session {
    pub fn message(&self, id: u64) -> Option<&ChatMessage> {
        // ids are dense from 0
        self.transcript
            .get(usize::try_from(id).ok()?)
            .filter(|m| m.id == id)
    }

    pub(crate) fn push_message(
        &mut self,
        author: Author,
        text: impl Into<String>,
        mode: Mode,
        kind: MessageKind,
    ) -> ChatMessage {
        let msg = ChatMessage {
            id: self.transcript.len() as u64,
            author,
            text: text.into(),
            mode,
            kind,
        };
        self.transcript.push(msg.clone());
        msg
    }

    /// Pins a bot message. Pinning an already pinned message is a no-op;
    /// returns whether a pin was added.
    pub fn pin_message(&mut self, message_id: u64, pinned_at: u64) -> Result<bool, DomainError> {
        let msg = self
            .message(message_id)
            .ok_or(DomainError::UnknownMessage(message_id))?;
        if msg.author != Author::Bot {
            return Err(DomainError::NotBotMessage(message_id));
        }
        if self.pins.iter().any(|p| p.message_id == message_id) {
            return Ok(false);
        }
        self.pins.push(PinnedStatement {
            message_id,
            pinned_at,
        });
        Ok(true)
    }

    /// Removes a pin; returns whether one was present.
    pub fn unpin_message(&mut self, message_id: u64) -> bool {
        let before = self.pins.len();
        self.pins.retain(|p| p.message_id != message_id);
        before != self.pins.len()
    }

    pub fn pinned_messages(&self) -> impl Iterator<Item = &ChatMessage> {
        self.pins.iter().filter_map(|p| self.message(p.message_id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::EngineState;

    fn session() -> Session {
        let mut s = Session {
            session_id: "t".into(),
            seed: 0,
            created_at: DateTime::<Utc>::UNIX_EPOCH,
            engine_state: EngineState::new(0),
            character: Character::default(),
            transcript: vec![],
            pins: vec![],
        };
        s.push_message(
            Author::User,
            "Do you like music?",
            Mode::Open,
            MessageKind::Utterance,
        );
        s.push_message(
            Author::Bot,
            "I like Jazz.",
            Mode::Open,
            MessageKind::Utterance,
        );
        s
    }

    #[test]
    fn pin_bot_line() {
        let mut s = session();
        assert_eq!(s.pin_message(1, 4), Ok(true));
        let texts: Vec<_> = s.pinned_messages().map(|m| m.text.as_str()).collect();
        assert_eq!(texts, ["I like Jazz."]);
    }

    #[test]
    fn pin_user_message_is_rejected() {
        let mut s = session();
        assert_eq!(s.pin_message(0, 4), Err(DomainError::NotBotMessage(0)));
        assert!(s.pins.is_empty());
    }

    #[test]
    fn pin_unknown_message() {
        let mut s = session();
        assert_eq!(s.pin_message(9, 4), Err(DomainError::UnknownMessage(9)));
    }

    #[test]
    fn pin_twice_keeps_one() {
        let mut s = session();
        s.pin_message(1, 4).unwrap();
        assert_eq!(s.pin_message(1, 5), Ok(false));
        assert_eq!(s.pins.len(), 1);
        assert_eq!(s.pins[0].pinned_at, 4);
    }

    #[test]
    fn unpin() {
        let mut s = session();
        s.pin_message(1, 4).unwrap();
        assert!(s.unpin_message(1));
        assert!(!s.unpin_message(1));
        assert!(s.pins.is_empty());
    }

    #[test]
    fn session_ids() {
        assert!(is_valid_session_id("replay-7"));
        assert!(is_valid_session_id("3f2a_B"));
        assert!(!is_valid_session_id(""));
        assert!(!is_valid_session_id("../etc"));
        assert!(!is_valid_session_id("a b"));
    }
}
