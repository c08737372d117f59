//! The attribute registry and the seeded draw of undefined attributes.
//!
//! Registry files are line-oriented UTF-8. Each non-comment line holds one
//! attribute as tab-separated fields:
//!
//! ```text
//! id  category  display_name  prompt  explanation  persona_template  concept_node|-  [synonyms]
//! ```
//!
//! The optional eighth column lists `|`-separated phrases that refer to the
//! attribute in user input ("hair colour" for `hair`). Lines starting with `#`
//! are comments.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{AttributeId, Character};
use crate::intent::normalize;

/// Number of entries in the shipped registry.
pub const DEFAULT_ATTRIBUTE_COUNT: usize = 31;

/// The shipped registry file.
pub const DEFAULT_REGISTRY: &str = include_str!("../data/attributes.tsv");

const PLACEHOLDER: &str = "{value}";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid registry: {0}")]
    Validation(String),
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("every attribute is already defined")]
    NoneRemaining,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Physiology,
    Psychology,
    Sociology,
}

impl Category {
    pub const ALL: [Category; 3] = [
        Category::Physiology,
        Category::Psychology,
        Category::Sociology,
    ];

    fn parse(s: &str) -> Option<Self> {
        match s {
            "physiology" => Some(Category::Physiology),
            "psychology" => Some(Category::Psychology),
            "sociology" => Some(Category::Sociology),
            _ => None,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Physiology => "physiology",
            Category::Psychology => "psychology",
            Category::Sociology => "sociology",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AttributeDefinition {
    pub id: AttributeId,
    pub display_name: String,
    pub category: Category,
    /// The bot's question, e.g. "What is my biggest fear?".
    pub prompt: String,
    pub explanation: String,
    /// First-person sentence with exactly one `{value}` placeholder.
    pub persona_template: String,
    pub concept_node: Option<String>,
    /// Normalized phrases (token lists) that refer to this attribute,
    /// including the display name and the id with underscores as spaces.
    #[serde(skip)]
    pub synonyms: Vec<Vec<String>>,
}

impl AttributeDefinition {
    pub fn suggestible(&self) -> bool {
        self.concept_node.is_some()
    }

    pub fn render_persona(&self, value: &str) -> String {
        self.persona_template.replacen(PLACEHOLDER, value, 1)
    }

    /// Splits the template around its placeholder.
    pub fn template_parts(&self) -> (&str, &str) {
        self.persona_template
            .split_once(PLACEHOLDER)
            .unwrap_or((self.persona_template.as_str(), ""))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeRegistry {
    entries: Vec<AttributeDefinition>,
}

impl AttributeRegistry {
    /// Parses and validates a registry file. With `strict`, the file must hold
    /// exactly [`DEFAULT_ATTRIBUTE_COUNT`] attributes.
    pub fn load(source: &str, strict: bool) -> Result<Self, RegistryError> {
        let mut entries = Vec::new();
        for (idx, raw) in source.lines().enumerate() {
            let line = idx + 1;
            let text = raw.trim_end_matches('\r');
            if text.trim().is_empty() || text.starts_with('#') {
                continue;
            }
            entries.push(parse_line(text, line)?);
        }
        let registry = AttributeRegistry { entries };
        registry.validate(strict)?;
        Ok(registry)
    }

    /// The shipped 31-attribute registry.
    pub fn builtin() -> Self {
        Self::load(DEFAULT_REGISTRY, true).expect("shipped registry is valid")
    }

    fn validate(&self, strict: bool) -> Result<(), RegistryError> {
        let mut seen = HashSet::new();
        for def in &self.entries {
            if !seen.insert(def.id.as_str()) {
                return Err(RegistryError::Validation(format!(
                    "duplicate id {:?}",
                    def.id.as_str()
                )));
            }
            if def.persona_template.matches(PLACEHOLDER).count() != 1 {
                return Err(RegistryError::Validation(format!(
                    "persona template of {:?} must contain {PLACEHOLDER} exactly once",
                    def.id.as_str()
                )));
            }
            if !def.prompt.ends_with('?') {
                return Err(RegistryError::Validation(format!(
                    "prompt of {:?} must end with '?'",
                    def.id.as_str()
                )));
            }
        }
        if strict {
            if self.entries.len() != DEFAULT_ATTRIBUTE_COUNT {
                return Err(RegistryError::Validation(format!(
                    "expected {DEFAULT_ATTRIBUTE_COUNT} attributes, found {}",
                    self.entries.len()
                )));
            }
            for cat in Category::ALL {
                if !self.entries.iter().any(|d| d.category == cat) {
                    return Err(RegistryError::Validation(format!(
                        "category {cat} is empty"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> &[AttributeDefinition] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &AttributeId) -> Option<&AttributeDefinition> {
        self.entries.iter().find(|d| &d.id == id)
    }

    pub fn get_str(&self, id: &str) -> Option<&AttributeDefinition> {
        self.entries.iter().find(|d| d.id.as_str() == id)
    }

    pub fn explanation_for(&self, id: &str) -> Result<&str, RegistryError> {
        self.get_str(id)
            .map(|d| d.explanation.as_str())
            .ok_or_else(|| RegistryError::UnknownAttribute(id.to_string()))
    }

    /// Looks up the attribute whose synonym list contains exactly this phrase.
    pub fn resolve_phrase(&self, phrase: &str) -> Option<&AttributeDefinition> {
        let tokens = normalize(phrase);
        if tokens.is_empty() {
            return None;
        }
        self.entries.iter().find(|d| d.synonyms.contains(&tokens))
    }

    /// Draws an undefined attribute: `undefined[rng.next() mod count]`, where
    /// `undefined` keeps registry order.
    pub fn draw_undefined(
        &self,
        character: &Character,
        rng: &mut SeededRng,
    ) -> Result<&AttributeDefinition, RegistryError> {
        self.draw_undefined_excluding(character, rng, &[])
    }

    /// Like [`draw_undefined`](Self::draw_undefined), but also skips `excluded` ids.
    /// The rng is only advanced when there is something to draw.
    pub fn draw_undefined_excluding(
        &self,
        character: &Character,
        rng: &mut SeededRng,
        excluded: &[&AttributeId],
    ) -> Result<&AttributeDefinition, RegistryError> {
        let pool: Vec<&AttributeDefinition> = self
            .entries
            .iter()
            .filter(|d| !character.is_defined(&d.id) && !excluded.contains(&&d.id))
            .collect();
        if pool.is_empty() {
            return Err(RegistryError::NoneRemaining);
        }
        Ok(pool[rng.index(pool.len())])
    }
}

fn parse_line(text: &str, line: usize) -> Result<AttributeDefinition, RegistryError> {
    let perr = |message: String| RegistryError::Parse { line, message };
    let fields: Vec<&str> = text.split('\t').collect();
    if !(7..=8).contains(&fields.len()) {
        return Err(perr(format!(
            "expected 7 or 8 tab-separated fields, found {}",
            fields.len()
        )));
    }
    let id = AttributeId::new(fields[0].trim()).map_err(|e| perr(e.to_string()))?;
    let category = Category::parse(fields[1].trim())
        .ok_or_else(|| perr(format!("unknown category {:?}", fields[1])))?;
    let non_empty = |idx: usize, name: &str| {
        let v = fields[idx].trim();
        if v.is_empty() {
            Err(perr(format!("empty {name}")))
        } else {
            Ok(v.to_string())
        }
    };
    let display_name = non_empty(2, "display_name")?;
    let prompt = non_empty(3, "prompt")?;
    let explanation = non_empty(4, "explanation")?;
    let persona_template = non_empty(5, "persona_template")?;
    let concept_node = match fields[6].trim() {
        "" => return Err(perr("empty concept_node (use \"-\")".into())),
        "-" => None,
        node => Some(node.to_string()),
    };

    let mut synonyms: Vec<Vec<String>> = Vec::new();
    let mut add = |phrase: &str| {
        let toks = normalize(phrase);
        if !toks.is_empty() && !synonyms.contains(&toks) {
            synonyms.push(toks);
        }
    };
    add(&display_name);
    add(&id.as_str().replace('_', " "));
    if let Some(extra) = fields.get(7) {
        extra.split('|').for_each(&mut add);
    }

    Ok(AttributeDefinition {
        id,
        display_name,
        category,
        prompt,
        explanation,
        persona_template,
        concept_node,
        synonyms,
    })
}

/// SplitMix64 generator. The sequence is fixed so that draws and golden
/// transcripts are reproducible everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SeededRng {
    state: u64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng { state: seed }
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform index as `next() mod n`.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index over an empty range");
        (self.next_u64() % n as u64) as usize
    }
}
