use super::{BackendError, CriticBackend, CriticRequest, Message, Role};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const SESSION_VERSION: u32 = 1;

/// Content hash of a request: SHA-256 over the canonical JSON of its role
/// and messages.
pub fn request_key(request: &CriticRequest) -> String {
    let canonical = serde_json::json!({ "role": request.role, "messages": request.messages });
    hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordedExchange {
    pub key: String,
    pub role: Role,
    pub messages: Vec<Message>,
    pub response: String,
}

/// Ordered request/response pairs of one session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionStore {
    pub version: u32,
    pub exchanges: Vec<RecordedExchange>,
}

impl Default for SessionStore {
    fn default() -> Self {
        Self { version: SESSION_VERSION, exchanges: Vec::new() }
    }
}

impl SessionStore {
    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| BackendError::Store(format!("{}: {e}", path.display())))?;
        let store: SessionStore =
            serde_json::from_str(&text).map_err(|e| BackendError::Store(format!("{}: {e}", path.display())))?;
        if store.version != SESSION_VERSION {
            return Err(BackendError::Store(format!(
                "{}: session version {} is not supported (expected {SESSION_VERSION})",
                path.display(),
                store.version
            )));
        }
        Ok(store)
    }

    /// Writes through a temporary file and a rename.
    pub fn save(&self, path: &Path) -> Result<(), BackendError> {
        let err = |e: std::io::Error| BackendError::Store(format!("{}: {e}", path.display()));
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(err)?;
        }
        let tmp = path.with_extension("tmp");
        let text = serde_json::to_string_pretty(self).expect("session serializes");
        std::fs::write(&tmp, text + "\n").map_err(err)?;
        std::fs::rename(&tmp, path).map_err(err)
    }
}

/// Forwards to `inner` and appends every exchange to a session file, which is
/// rewritten after each call so an interrupted session keeps its prefix.
pub struct RecordingBackend<B> {
    inner: B,
    store: SessionStore,
    path: PathBuf,
}

impl<B: CriticBackend> RecordingBackend<B> {
    /// Continues the session at `path` when it exists, otherwise starts one.
    pub fn create(inner: B, path: PathBuf) -> Result<Self, BackendError> {
        let store = if path.exists() { SessionStore::load(&path)? } else { SessionStore::default() };
        Ok(Self { inner, store, path })
    }

    pub fn store(&self) -> &SessionStore {
        &self.store
    }
}

impl<B: CriticBackend> CriticBackend for RecordingBackend<B> {
    fn complete(&mut self, request: &CriticRequest) -> Result<String, BackendError> {
        let response = self.inner.complete(request)?;
        self.store.exchanges.push(RecordedExchange {
            key: request_key(request),
            role: request.role,
            messages: request.messages.clone(),
            response: response.clone(),
        });
        self.store.save(&self.path)?;
        Ok(response)
    }
}

/// Answers from a recorded session without any network access. Each request
/// consumes the earliest unused exchange with the same key.
pub struct ReplayBackend {
    store: SessionStore,
    used: Vec<bool>,
}

impl ReplayBackend {
    pub fn new(store: SessionStore) -> Self {
        let used = vec![false; store.exchanges.len()];
        Self { store, used }
    }

    pub fn open(path: &Path) -> Result<Self, BackendError> {
        Ok(Self::new(SessionStore::load(path)?))
    }

    pub fn remaining(&self) -> usize {
        self.used.iter().filter(|u| !**u).count()
    }
}

impl CriticBackend for ReplayBackend {
    fn complete(&mut self, request: &CriticRequest) -> Result<String, BackendError> {
        let key = request_key(request);
        let hit = self.store.exchanges.iter().enumerate().position(|(i, e)| !self.used[i] && e.key == key);
        match hit {
            Some(i) => {
                self.used[i] = true;
                Ok(self.store.exchanges[i].response.clone())
            }
            None => Err(BackendError::NotRecorded {
                role: request.role,
                key,
                index: self.used.iter().filter(|u| **u).count(),
            }),
        }
    }
}
