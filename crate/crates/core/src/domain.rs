//! Shared data model: characters, transcript messages and pins.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

/// Maximum length of an attribute value, in characters.
pub const MAX_VALUE_CHARS: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("invalid attribute id {0:?}: expected [a-z][a-z0-9_]*")]
    InvalidAttributeId(String),
    #[error("attribute value is empty")]
    EmptyValue,
    #[error("attribute value exceeds {MAX_VALUE_CHARS} characters")]
    ValueTooLong,
    #[error("message {0} is not a bot message")]
    NotBotMessage(u64),
    #[error("message {0} is not in the transcript")]
    UnknownMessage(u64),
}

impl DomainError {
    pub fn code(&self) -> &'static str {
        match self {
            DomainError::InvalidAttributeId(_) => "InvalidAttributeId",
            DomainError::EmptyValue => "EmptyValue",
            DomainError::ValueTooLong => "ValueTooLong",
            DomainError::NotBotMessage(_) => "NotBotMessage",
            DomainError::UnknownMessage(_) => "UnknownMessage",
        }
    }
}

/// Lowercase token naming one registry attribute, e.g. `biggest_fear`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct AttributeId(String);

impl AttributeId {
    pub fn new(id: impl Into<String>) -> Result<Self, DomainError> {
        let id = id.into();
        let mut chars = id.chars();
        let valid = matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
            && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
        if valid {
            Ok(AttributeId(id))
        } else {
            Err(DomainError::InvalidAttributeId(id))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AttributeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for AttributeId {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AttributeId::new(s)
    }
}

impl<'de> Deserialize<'de> for AttributeId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        AttributeId::new(raw).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueSource {
    UserTyped,
    SuggestionAccepted,
}

impl ValueSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ValueSource::UserTyped => "user_typed",
            ValueSource::SuggestionAccepted => "suggestion_accepted",
        }
    }
}

/// One defined attribute of a character.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeValue {
    pub attribute: AttributeId,
    pub value: String,
    pub source: ValueSource,
    pub defined_at: u64,
}

impl AttributeValue {
    /// Trims `value` and checks the 1..=200 character bound.
    pub fn new(
        attribute: AttributeId,
        value: &str,
        source: ValueSource,
        defined_at: u64,
    ) -> Result<Self, DomainError> {
        let value = value.trim();
        if value.is_empty() {
            return Err(DomainError::EmptyValue);
        }
        if value.chars().count() > MAX_VALUE_CHARS {
            return Err(DomainError::ValueTooLong);
        }
        Ok(AttributeValue {
            attribute,
            value: value.to_string(),
            source,
            defined_at,
        })
    }
}

/// The character being shaped.
///
/// `attributes` is kept in definition order: a redefinition moves the attribute
/// to the end, so `defined_at` is increasing along the list.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Character {
    pub attributes: Vec<AttributeValue>,
    pub rejected_values: BTreeMap<AttributeId, BTreeSet<String>>,
}

impl Character {
    pub fn get(&self, id: &AttributeId) -> Option<&AttributeValue> {
        self.attributes.iter().find(|a| &a.attribute == id)
    }

    pub fn is_defined(&self, id: &AttributeId) -> bool {
        self.get(id).is_some()
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn rejected(&self, id: &AttributeId) -> Option<&BTreeSet<String>> {
        self.rejected_values.get(id)
    }

    /// Defines or redefines an attribute. A replaced value is moved into
    /// `rejected_values` so it is never suggested again.
    pub fn set_attribute(&mut self, value: AttributeValue) -> Result<(), DomainError> {
        let value = AttributeValue::new(
            value.attribute,
            &value.value,
            value.source,
            value.defined_at,
        )?;
        let id = value.attribute.clone();
        if let Some(pos) = self.attributes.iter().position(|a| a.attribute == id) {
            let old = self.attributes.remove(pos);
            if old.value != value.value {
                self.rejected_values
                    .entry(id.clone())
                    .or_default()
                    .insert(old.value);
            }
        }
        if let Some(set) = self.rejected_values.get_mut(&id) {
            set.remove(&value.value);
            if set.is_empty() {
                self.rejected_values.remove(&id);
            }
        }
        self.attributes.push(value);
        Ok(())
    }

    /// Removes an attribute; a missing attribute is a no-op. Returns the removed value.
    pub fn delete_attribute(&mut self, id: &AttributeId) -> Option<AttributeValue> {
        let pos = self.attributes.iter().position(|a| &a.attribute == id)?;
        Some(self.attributes.remove(pos))
    }

    /// Records a rejected suggestion. The current value is never recorded.
    pub fn reject_value(&mut self, id: &AttributeId, value: &str) {
        if self.get(id).is_some_and(|a| a.value == value) {
            return;
        }
        self.rejected_values
            .entry(id.clone())
            .or_default()
            .insert(value.to_string());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Author {
    User,
    Bot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Guided,
    Open,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Guided => "guided",
            Mode::Open => "open",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Utterance,
    Prompt,
    Explanation,
    Suggestion,
    System,
}

impl MessageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::Utterance => "utterance",
            MessageKind::Prompt => "prompt",
            MessageKind::Explanation => "explanation",
            MessageKind::Suggestion => "suggestion",
            MessageKind::System => "system",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub id: u64,
    pub author: Author,
    pub text: String,
    pub mode: Mode,
    pub kind: MessageKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PinnedStatement {
    pub message_id: u64,
    pub pinned_at: u64,
}
