//! Session documents on disk: one canonical JSON file per session.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{AttributeId, ChatMessage, PinnedStatement};
use crate::engine::EngineState;
use crate::session::{is_valid_session_id, Session};
use crate::{AttributeValue, Character};

pub const SCHEMA_VERSION: &str = "1";
const UNNAMED: &str = "(unnamed)";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("session store unavailable: {0}")]
    StoreUnavailable(String),
    #[error("session {0:?} not found")]
    NotFound(String),
    #[error("unsupported schema version {found:?} (expected {SCHEMA_VERSION:?})")]
    VersionMismatch { found: String },
    #[error("corrupt session document: {0}")]
    CorruptDocument(String),
}

impl StoreError {
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::StoreUnavailable(_) => "StoreUnavailable",
            StoreError::NotFound(_) => "NotFound",
            StoreError::VersionMismatch { .. } => "VersionMismatch",
            StoreError::CorruptDocument(_) => "CorruptDocument",
        }
    }
}

fn unavailable(path: &Path, e: std::io::Error) -> StoreError {
    StoreError::StoreUnavailable(format!("{}: {e}", path.display()))
}

/// Rejected values serialize as sorted lists keyed by attribute id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacterDocument {
    pub attributes: Vec<AttributeValue>,
    pub rejected_values: std::collections::BTreeMap<AttributeId, Vec<String>>,
}

/// The on-disk form of a [`Session`]. Field order is the serialization order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionDocument {
    pub schema_version: String,
    pub session_id: String,
    pub seed: u64,
    pub created_at: DateTime<Utc>,
    pub engine_state: EngineState,
    pub character: CharacterDocument,
    pub transcript: Vec<ChatMessage>,
    pub pins: Vec<PinnedStatement>,
}

impl From<&Character> for CharacterDocument {
    fn from(c: &Character) -> Self {
        CharacterDocument {
            attributes: c.attributes.clone(),
            rejected_values: c
                .rejected_values
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().cloned().collect()))
                .collect(),
        }
    }
}

impl From<&Session> for SessionDocument {
    fn from(s: &Session) -> Self {
        SessionDocument {
            schema_version: SCHEMA_VERSION.to_string(),
            session_id: s.session_id.clone(),
            seed: s.seed,
            created_at: s.created_at,
            engine_state: s.engine_state.clone(),
            character: CharacterDocument::from(&s.character),
            transcript: s.transcript.clone(),
            pins: s.pins.clone(),
        }
    }
}

impl From<Session> for SessionDocument {
    fn from(s: Session) -> Self {
        SessionDocument::from(&s)
    }
}

impl From<SessionDocument> for Session {
    fn from(d: SessionDocument) -> Self {
        Session {
            session_id: d.session_id,
            seed: d.seed,
            created_at: d.created_at,
            engine_state: d.engine_state,
            character: Character {
                attributes: d.character.attributes,
                rejected_values: d
                    .character
                    .rejected_values
                    .into_iter()
                    .map(|(k, v)| (k, v.into_iter().collect()))
                    .collect(),
            },
            transcript: d.transcript,
            pins: d.pins,
        }
    }
}

/// Canonical pretty JSON with a trailing newline.
pub fn to_document_json(session: &Session) -> String {
    let mut json = serde_json::to_string_pretty(&SessionDocument::from(session))
        .expect("session documents always serialize");
    json.push('\n');
    json
}

pub fn from_document_json(json: &str) -> Result<Session, StoreError> {
    let value: serde_json::Value =
        serde_json::from_str(json).map_err(|e| StoreError::CorruptDocument(e.to_string()))?;
    match value.get("schema_version").and_then(|v| v.as_str()) {
        Some(SCHEMA_VERSION) => {}
        Some(other) => {
            return Err(StoreError::VersionMismatch {
                found: other.to_string(),
            })
        }
        None => return Err(StoreError::CorruptDocument("missing schema_version".into())),
    }
    let doc: SessionDocument =
        serde_json::from_value(value).map_err(|e| StoreError::CorruptDocument(e.to_string()))?;
    Ok(doc.into())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub character_name: String,
    pub created_at: DateTime<Utc>,
    pub message_count: usize,
}

impl From<&Session> for SessionSummary {
    fn from(s: &Session) -> Self {
        let name = s
            .character
            .attributes
            .iter()
            .find(|a| a.attribute.as_str() == "name")
            .map(|a| a.value.clone())
            .unwrap_or_else(|| UNNAMED.to_string());
        SessionSummary {
            session_id: s.session_id.clone(),
            character_name: name,
            created_at: s.created_at,
            message_count: s.transcript.len(),
        }
    }
}

/// Directory of `<session_id>.json` documents.
#[derive(Debug, Clone)]
pub struct FileStore {
    dir: PathBuf,
}

impl FileStore {
    /// Opens the store, creating the directory if needed.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| unavailable(&dir, e))?;
        Ok(FileStore { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, id: &str) -> Result<PathBuf, StoreError> {
        if !is_valid_session_id(id) {
            return Err(StoreError::NotFound(id.to_string()));
        }
        Ok(self.dir.join(format!("{id}.json")))
    }

    /// Writes the document to a temporary file and renames it into place while
    /// holding an exclusive lock on `<id>.lock`.
    pub fn save(&self, session: &Session) -> Result<String, StoreError> {
        let id = &session.session_id;
        if !is_valid_session_id(id) {
            return Err(StoreError::StoreUnavailable(format!(
                "invalid session id {id:?}"
            )));
        }
        let target = self.dir.join(format!("{id}.json"));
        let lock_path = self.dir.join(format!("{id}.lock"));
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&lock_path)
            .map_err(|e| unavailable(&lock_path, e))?;
        lock.lock().map_err(|e| unavailable(&lock_path, e))?;

        let tmp = self.dir.join(format!(".{id}.json.tmp"));
        let result = (|| {
            let mut f = File::create(&tmp)?;
            f.write_all(to_document_json(session).as_bytes())?;
            f.sync_all()?;
            fs::rename(&tmp, &target)
        })();
        let _ = lock.unlock();
        result.map_err(|e| {
            let _ = fs::remove_file(&tmp);
            unavailable(&target, e)
        })?;
        Ok(id.clone())
    }

    pub fn load(&self, id: &str) -> Result<Session, StoreError> {
        let path = self.path_for(id)?;
        let json = match fs::read_to_string(&path) {
            Ok(j) => j,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(StoreError::NotFound(id.to_string()))
            }
            Err(e) => return Err(unavailable(&path, e)),
        };
        from_document_json(&json)
    }

    pub fn exists(&self, id: &str) -> bool {
        self.path_for(id).is_ok_and(|p| p.is_file())
    }

    /// All readable sessions, newest first. Unreadable documents are skipped.
    pub fn list(&self) -> Result<Vec<SessionSummary>, StoreError> {
        let mut out = Vec::new();
        for session in self.load_all()? {
            out.push(SessionSummary::from(&session));
        }
        out.sort_by(|a, b| {
            b.created_at
                .cmp(&a.created_at)
                .then_with(|| a.session_id.cmp(&b.session_id))
        });
        Ok(out)
    }

    pub fn load_all(&self) -> Result<Vec<Session>, StoreError> {
        let entries = fs::read_dir(&self.dir).map_err(|e| unavailable(&self.dir, e))?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension().is_some_and(|x| x == "json")
                    && !p
                        .file_name()
                        .is_some_and(|n| n.to_string_lossy().starts_with('.'))
            })
            .collect();
        paths.sort();
        let mut sessions = Vec::new();
        for path in paths {
            let loaded = fs::read_to_string(&path)
                .map_err(|e| unavailable(&path, e))
                .and_then(|j| from_document_json(&j));
            match loaded {
                Ok(s) => sessions.push(s),
                Err(e) => {
                    tracing::warn!(path = %path.display(), error = %e, "skipping session document")
                }
            }
        }
        Ok(sessions)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Engine;
    use chrono::TimeZone;

    fn sample(engine: &Engine, id: &str, minute: u32) -> Session {
        let created = Utc.with_ymd_and_hms(2024, 5, 1, 12, minute, 0).unwrap();
        let (mut s, _) = engine.start_session(5, id, created);
        engine.handle_user_message(&mut s, "Jane").unwrap();
        engine.handle_user_message(&mut s, "Let's chat").unwrap();
        engine
            .handle_user_message(&mut s, "Do you like music?")
            .unwrap();
        engine.handle_candidate_choice(&mut s, 0).unwrap();
        let last_bot = s.transcript.last().unwrap().id;
        engine.handle_pin(&mut s, last_bot).unwrap();
        s.character
            .reject_value(&AttributeId::new("hobby").unwrap(), "chess");
        s
    }

    #[test]
    fn roundtrip_and_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let store = FileStore::open(dir.path()).unwrap();
        let e = Engine::offline();
        let mut s = sample(&e, "a1", 0);
        store.save(&s).unwrap();
        assert_eq!(store.load("a1").unwrap(), s);

        e.handle_user_message(&mut s, "How are you?").unwrap();
        store.save(&s).unwrap();
        assert_eq!(store.load("a1").unwrap(), s);
        let docs = fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| {
                e.as_ref()
                    .unwrap()
                    .path()
                    .extension()
                    .is_some_and(|x| x == "json")
            })
            .count();
        assert_eq!(docs, 1);
    }

    #[test]
    fn pins_survive_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let store = FileStore::open(dir.path()).unwrap();
        let e = Engine::offline();
        let s = sample(&e, "p", 0);
        store.save(&s).unwrap();
        let loaded = store.load("p").unwrap();
        assert_eq!(loaded.pins.len(), 1);
        crate::engine::check_invariants(&loaded, e.registry()).unwrap();
    }

    #[test]
    fn missing_and_bad_documents() {
        let dir = tempfile::tempdir().unwrap();
        let store = FileStore::open(dir.path()).unwrap();
        assert!(matches!(store.load("nope"), Err(StoreError::NotFound(_))));
        assert!(matches!(store.load("../x"), Err(StoreError::NotFound(_))));

        let e = Engine::offline();
        let s = sample(&e, "v", 0);
        let future =
            to_document_json(&s).replace("\"schema_version\": \"1\"", "\"schema_version\": \"2\"");
        fs::write(dir.path().join("v.json"), future).unwrap();
        assert!(matches!(
            store.load("v"),
            Err(StoreError::VersionMismatch { found }) if found == "2"
        ));

        fs::write(dir.path().join("c.json"), "{ not json").unwrap();
        assert!(matches!(
            store.load("c"),
            Err(StoreError::CorruptDocument(_))
        ));
    }

    #[test]
    fn unwritable_store() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain-file");
        fs::write(&file, "x").unwrap();
        assert!(matches!(
            FileStore::open(file.join("sub")),
            Err(StoreError::StoreUnavailable(_))
        ));
        let store = FileStore {
            dir: file.join("sub"),
        };
        let e = Engine::offline();
        let s = sample(&e, "w", 0);
        assert!(matches!(
            store.save(&s),
            Err(StoreError::StoreUnavailable(_))
        ));
    }

    #[test]
    fn listing() {
        let dir = tempfile::tempdir().unwrap();
        let store = FileStore::open(dir.path()).unwrap();
        assert!(store.list().unwrap().is_empty());
        let e = Engine::offline();
        let older = sample(&e, "older", 1);
        let (newer, _) = e.start_session(
            1,
            "newer",
            Utc.with_ymd_and_hms(2024, 5, 2, 0, 0, 0).unwrap(),
        );
        store.save(&older).unwrap();
        store.save(&newer).unwrap();
        let list = store.list().unwrap();
        assert_eq!(list.len(), 2);
        assert_eq!(list[0].session_id, "newer");
        assert_eq!(list[0].character_name, "(unnamed)");
        assert_eq!(list[1].character_name, "Jane");
        assert_eq!(list[1].message_count, older.transcript.len());
    }

    #[test]
    fn document_field_order() {
        let e = Engine::offline();
        let s = sample(&e, "o", 0);
        let json = to_document_json(&s);
        let keys = [
            "\"schema_version\"",
            "\"session_id\"",
            "\"seed\"",
            "\"created_at\"",
            "\"engine_state\"",
            "\"character\"",
            "\"transcript\"",
            "\"pins\"",
        ];
        let positions: Vec<usize> = keys.iter().map(|k| json.find(k).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        assert!(json.contains("\"created_at\": \"2024-05-01T12:00:00Z\""));
    }
}
