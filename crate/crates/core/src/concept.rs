//! Attribute value suggestions from is-a edges of a concept graph.
//!
//! Edges come either from an offline snapshot file or from a live
//! ConceptNet-style HTTP service. [`ConceptClient`] caches fetched edge lists
//! and can fall back to a snapshot when the live service is unreachable.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use crate::domain::{AttributeId, Character};
use crate::registry::{AttributeDefinition, SeededRng};

pub const DEFAULT_SNAPSHOT: &str = include_str!("../data/concepts.tsv");
pub const DEFAULT_CONCEPT_URL: &str = "https://api.conceptnet.io";
pub const IS_A: &str = "IsA";
pub const DEFAULT_FETCH_LIMIT: usize = 10;

const LIVE_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConceptError {
    #[error("concept node must be non-empty")]
    EmptyNode,
    #[error("concept source unavailable: {0}")]
    SourceUnavailable(String),
    #[error("no is-a edges end at {0:?}")]
    NoEdges(String),
    #[error("attribute {0} has no concept node")]
    NotSuggestible(AttributeId),
    #[error("every known value for {0} was already rejected")]
    Exhausted(AttributeId),
    #[error("snapshot line {line}: {message}")]
    Snapshot { line: usize, message: String },
}

impl ConceptError {
    pub fn code(&self) -> &'static str {
        match self {
            ConceptError::EmptyNode => "EmptyNode",
            ConceptError::SourceUnavailable(_) => "SourceUnavailable",
            ConceptError::NoEdges(_) => "NoEdges",
            ConceptError::NotSuggestible(_) => "NotSuggestible",
            ConceptError::Exhausted(_) => "Exhausted",
            ConceptError::Snapshot { .. } => "SnapshotError",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConceptEdge {
    pub start_label: String,
    pub relation: String,
    pub end_node: String,
    pub weight: f64,
}

/// Something that can list is-a edges ending at a node.
pub trait ConceptSource: Send + Sync {
    fn fetch(&self, node: &str, limit: usize) -> Result<Vec<ConceptEdge>, ConceptError>;
}

/// Offline edge set, grouped by end node in file order.
#[derive(Debug, Clone, Default)]
pub struct ConceptSnapshot {
    version: Option<String>,
    edges: BTreeMap<String, Vec<ConceptEdge>>,
}

impl ConceptSnapshot {
    /// Parses `end_node \t start_label \t weight` lines. A `# version: <tag>`
    /// comment sets the version tag. Lines must be sorted by end node, then by
    /// descending weight.
    pub fn parse(source: &str) -> Result<Self, ConceptError> {
        let mut snap = ConceptSnapshot::default();
        let mut last: Option<(String, f64)> = None;
        for (idx, raw) in source.lines().enumerate() {
            let line = idx + 1;
            let err = |message: String| ConceptError::Snapshot { line, message };
            let text = raw.trim_end_matches('\r');
            if let Some(comment) = text.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("version:") {
                    snap.version = Some(v.trim().to_string());
                }
                continue;
            }
            if text.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = text.split('\t').collect();
            let [node, label, weight] = fields[..] else {
                return Err(err(format!(
                    "expected 3 tab-separated fields, found {}",
                    fields.len()
                )));
            };
            let (node, label) = (node.trim(), label.trim());
            if node.is_empty() || label.is_empty() {
                return Err(err("empty node or label".into()));
            }
            let weight: f64 = weight
                .trim()
                .parse()
                .map_err(|_| err(format!("bad weight {weight:?}")))?;
            if !(weight >= 0.0 && weight.is_finite()) {
                return Err(err(format!("weight must be non-negative, got {weight}")));
            }
            if let Some((prev_node, prev_weight)) = &last {
                let ordered = match prev_node.as_str().cmp(node) {
                    std::cmp::Ordering::Less => true,
                    std::cmp::Ordering::Equal => *prev_weight >= weight,
                    std::cmp::Ordering::Greater => false,
                };
                if !ordered {
                    return Err(err(
                        "lines must be sorted by node, then descending weight".into()
                    ));
                }
            }
            last = Some((node.to_string(), weight));
            snap.edges
                .entry(node.to_string())
                .or_default()
                .push(ConceptEdge {
                    start_label: label.to_string(),
                    relation: IS_A.to_string(),
                    end_node: node.to_string(),
                    weight,
                });
        }
        Ok(snap)
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_SNAPSHOT).expect("shipped snapshot is valid")
    }

    pub fn version(&self) -> Option<&str> {
        self.version.as_deref()
    }

    pub fn contains_node(&self, node: &str) -> bool {
        self.edges.contains_key(node)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.edges.keys().map(String::as_str)
    }
}

impl ConceptSource for ConceptSnapshot {
    fn fetch(&self, node: &str, limit: usize) -> Result<Vec<ConceptEdge>, ConceptError> {
        Ok(self
            .edges
            .get(node)
            .map(|e| e.iter().take(limit).cloned().collect())
            .unwrap_or_default())
    }
}

/// Client for a ConceptNet-compatible `/query` endpoint.
pub struct LiveConceptSource {
    base_url: String,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct QueryResponse {
    #[serde(default)]
    edges: Vec<WireEdge>,
}

#[derive(Deserialize)]
struct WireEdge {
    start: WireNode,
    rel: Option<WireNode>,
    #[serde(default)]
    weight: f64,
}

#[derive(Deserialize)]
struct WireNode {
    #[serde(default)]
    label: String,
    language: Option<String>,
}

impl LiveConceptSource {
    pub fn new(base_url: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(LIVE_TIMEOUT))
            .build()
            .into();
        LiveConceptSource {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            agent,
        }
    }

    pub fn query_url(&self, node: &str, limit: usize) -> String {
        format!(
            "{}/query?end=/c/en/{node}&rel=/r/{IS_A}&limit={limit}",
            self.base_url
        )
    }

    fn fetch_once(&self, url: &str) -> Result<QueryResponse, String> {
        let mut resp = self.agent.get(url).call().map_err(|e| e.to_string())?;
        resp.body_mut()
            .read_json::<QueryResponse>()
            .map_err(|e| format!("bad response body: {e}"))
    }
}

impl ConceptSource for LiveConceptSource {
    fn fetch(&self, node: &str, limit: usize) -> Result<Vec<ConceptEdge>, ConceptError> {
        let url = self.query_url(node, limit);
        let body = match self.fetch_once(&url) {
            Ok(b) => b,
            Err(first) => {
                tracing::debug!(%url, error = %first, "concept query failed, retrying once");
                self.fetch_once(&url)
                    .map_err(ConceptError::SourceUnavailable)?
            }
        };
        Ok(body
            .edges
            .into_iter()
            .filter(|e| e.rel.as_ref().is_none_or(|r| r.label == IS_A))
            .filter(|e| e.start.language.as_deref().is_none_or(|l| l == "en"))
            .filter_map(|e| {
                let label = clean_label(&e.start.label);
                (!label.is_empty()).then(|| ConceptEdge {
                    start_label: label,
                    relation: IS_A.to_string(),
                    end_node: node.to_string(),
                    weight: e.weight.max(0.0),
                })
            })
            .take(limit)
            .collect())
    }
}

/// Underscores become spaces and a leading article is dropped.
pub fn clean_label(raw: &str) -> String {
    let spaced = raw.replace('_', " ");
    let mut words: Vec<&str> = spaced.split_whitespace().collect();
    if words.len() > 1 && matches!(words[0].to_lowercase().as_str(), "a" | "an" | "the") {
        words.remove(0);
    }
    words.join(" ")
}

type CacheKey = (String, usize);

/// Fetches and caches is-a edges and draws value suggestions.
pub struct ConceptClient {
    source: Box<dyn ConceptSource>,
    fallback: Option<ConceptSnapshot>,
    limit: usize,
    cache: Mutex<HashMap<CacheKey, Vec<ConceptEdge>>>,
}

impl ConceptClient {
    pub fn new(source: Box<dyn ConceptSource>) -> Self {
        ConceptClient {
            source,
            fallback: None,
            limit: DEFAULT_FETCH_LIMIT,
            cache: Mutex::new(HashMap::new()),
        }
    }

    /// Offline client over the shipped snapshot.
    pub fn snapshot() -> Self {
        Self::new(Box::new(ConceptSnapshot::builtin()))
    }

    /// Used when the primary source reports [`ConceptError::SourceUnavailable`].
    pub fn with_fallback(mut self, snapshot: ConceptSnapshot) -> Self {
        self.fallback = Some(snapshot);
        self
    }

    pub fn with_limit(mut self, limit: usize) -> Self {
        self.limit = limit.max(1);
        self
    }

    pub fn fetch_instances(
        &self,
        node: &str,
        limit: usize,
    ) -> Result<Vec<ConceptEdge>, ConceptError> {
        let node = node.trim();
        if node.is_empty() {
            return Err(ConceptError::EmptyNode);
        }
        let limit = limit.max(1);
        let key = (node.to_string(), limit);
        if let Some(hit) = self.cache.lock().expect("concept cache poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let edges = match self.source.fetch(node, limit) {
            Err(ConceptError::SourceUnavailable(msg)) => match &self.fallback {
                Some(snap) => {
                    tracing::warn!(node, error = %msg, "concept source unavailable, using snapshot");
                    snap.fetch(node, limit)?
                }
                None => return Err(ConceptError::SourceUnavailable(msg)),
            },
            other => other?,
        };
        if edges.is_empty() {
            return Err(ConceptError::NoEdges(node.to_string()));
        }
        self.cache
            .lock()
            .expect("concept cache poisoned")
            .insert(key, edges.clone());
        Ok(edges)
    }

    /// Draws one value for `def` that is neither rejected nor current.
    pub fn suggest_value(
        &self,
        def: &AttributeDefinition,
        character: &Character,
        rng: &mut SeededRng,
    ) -> Result<String, ConceptError> {
        let node = def
            .concept_node
            .as_deref()
            .ok_or_else(|| ConceptError::NotSuggestible(def.id.clone()))?;
        let edges = self.fetch_instances(node, self.limit)?;
        let rejected = character.rejected(&def.id);
        let current = character.get(&def.id).map(|v| v.value.as_str());
        let excluded = |label: &str| {
            current.is_some_and(|c| c.eq_ignore_ascii_case(label))
                || rejected.is_some_and(|r| r.iter().any(|x| x.eq_ignore_ascii_case(label)))
        };
        let mut candidates: Vec<&str> = Vec::new();
        for e in &edges {
            let label = e.start_label.as_str();
            if !excluded(label) && !candidates.iter().any(|c| c.eq_ignore_ascii_case(label)) {
                candidates.push(label);
            }
        }
        if candidates.is_empty() {
            return Err(ConceptError::Exhausted(def.id.clone()));
        }
        Ok(candidates[rng.index(candidates.len())].to_string())
    }
}
