//! Session state, predictor dispatch, and per-session snapshot persistence.
//!
//! Sessions live behind a two-level lock: the map lock is held only to look
//! up or insert slots, while a per-session RwLock serializes mutations on one
//! session without blocking traffic to the others. Deletion marks the slot
//! tombstoned under its write lock, so a racing observe that already holds
//! the slot cannot resurrect the session file afterwards.

use chrono::{DateTime, Utc};
use memctl_core::predictor::{
    AppendOnlyPredictor, HeuristicConfig, HeuristicPredictor, PredictError, Predictor,
    PredictorKind, RemoteConfig, RemotePredictor,
};
use memctl_core::{CoreConfig, CoreError, Memory, Operation, Speaker, UserInfo};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("session not found")]
    SessionNotFound,
    #[error("info text is empty after trimming")]
    EmptyInfo,
    #[error("unknown or unavailable predictor: {0}")]
    UnknownPredictor(String),
    #[error("predictor failed: {0}")]
    Predict(#[from] PredictError),
    #[error("apply failed: {0}")]
    Apply(#[from] CoreError),
    #[error("corrupt session file {path}: {reason}")]
    CorruptSession { path: PathBuf, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub predictor: PredictorKind,
    pub memory: Memory,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    pub turn_counter: u64,
}

struct SessionSlot {
    session: Session,
    deleted: bool,
}

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    /// Snapshot directory; in-memory only when unset.
    pub persist_dir: Option<PathBuf>,
    /// Enables the `remote` predictor kind.
    pub remote: Option<RemoteConfig>,
    pub heuristic: HeuristicConfig,
    pub core: CoreConfig,
}

/// Shared application state: the session map plus one long-lived instance of
/// each predictor.
pub struct AppCore {
    sessions: RwLock<HashMap<String, Arc<RwLock<SessionSlot>>>>,
    heuristic: HeuristicPredictor,
    append_only: AppendOnlyPredictor,
    remote: Option<RemotePredictor>,
    persist_dir: Option<PathBuf>,
    core: CoreConfig,
}

/// Result of one observe call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observed {
    pub op: Operation,
    pub memory_size: usize,
}

impl AppCore {
    pub fn new(config: ServiceConfig) -> Result<Self, ServiceError> {
        if let Some(dir) = &config.persist_dir {
            std::fs::create_dir_all(dir)?;
        }
        let core = AppCore {
            sessions: RwLock::new(HashMap::new()),
            heuristic: HeuristicPredictor::new(config.heuristic),
            append_only: AppendOnlyPredictor,
            remote: config.remote.map(RemotePredictor::new),
            persist_dir: config.persist_dir,
            core: config.core,
        };
        core.load_persisted()?;
        Ok(core)
    }

    fn load_persisted(&self) -> Result<(), ServiceError> {
        let Some(dir) = &self.persist_dir else { return Ok(()) };
        let mut sessions = self.sessions.write().unwrap();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            let is_snapshot = path.extension().is_some_and(|e| e == "json")
                && path
                    .file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| !n.starts_with('.'));
            if !is_snapshot {
                continue;
            }
            let corrupt = |reason: String| ServiceError::CorruptSession {
                path: path.clone(),
                reason,
            };
            let bytes = std::fs::read(&path)?;
            let session: Session =
                serde_json::from_slice(&bytes).map_err(|e| corrupt(e.to_string()))?;
            session.memory.validate().map_err(corrupt)?;
            if session.session_id.is_empty() {
                return Err(corrupt("blank session_id".to_owned()));
            }
            sessions.insert(
                session.session_id.clone(),
                Arc::new(RwLock::new(SessionSlot { session, deleted: false })),
            );
        }
        Ok(())
    }

    fn snapshot_path(dir: &Path, session_id: &str) -> PathBuf {
        dir.join(format!("{session_id}.json"))
    }

    /// Write-temp-then-rename so a crash mid-write never leaves a torn file.
    fn persist(&self, session: &Session) -> Result<(), ServiceError> {
        let Some(dir) = &self.persist_dir else { return Ok(()) };
        let tmp = dir.join(format!(".{}.json.tmp", session.session_id));
        let bytes = serde_json::to_vec(session)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::Other, e))?;
        std::fs::write(&tmp, bytes)?;
        std::fs::rename(&tmp, Self::snapshot_path(dir, &session.session_id))?;
        Ok(())
    }

    fn predictor_for(&self, kind: PredictorKind) -> Result<&dyn Predictor, ServiceError> {
        match kind {
            PredictorKind::Heuristic => Ok(&self.heuristic),
            PredictorKind::AppendOnly => Ok(&self.append_only),
            PredictorKind::Remote => self
                .remote
                .as_ref()
                .map(|r| r as &dyn Predictor)
                .ok_or_else(|| ServiceError::UnknownPredictor("remote (no endpoint configured)".to_owned())),
            // gold labels do not exist for live traffic
            PredictorKind::Oracle => {
                Err(ServiceError::UnknownPredictor("oracle (evaluation only)".to_owned()))
            }
        }
    }

    pub fn create_session(&self, kind: PredictorKind) -> Result<String, ServiceError> {
        self.predictor_for(kind)?;
        let session_id = format!("{:032x}", rand::random::<u128>());
        let now = Utc::now();
        let session = Session {
            session_id: session_id.clone(),
            predictor: kind,
            memory: Memory::new(),
            created_at: now,
            updated_at: now,
            turn_counter: 0,
        };
        self.persist(&session)?;
        self.sessions.write().unwrap().insert(
            session_id.clone(),
            Arc::new(RwLock::new(SessionSlot { session, deleted: false })),
        );
        Ok(session_id)
    }

    fn slot(&self, session_id: &str) -> Result<Arc<RwLock<SessionSlot>>, ServiceError> {
        self.sessions
            .read()
            .unwrap()
            .get(session_id)
            .cloned()
            .ok_or(ServiceError::SessionNotFound)
    }

    pub fn observe(&self, session_id: &str, info_text: &str) -> Result<Observed, ServiceError> {
        if info_text.trim().is_empty() {
            return Err(ServiceError::EmptyInfo);
        }
        let slot = self.slot(session_id)?;
        let mut slot = slot.write().unwrap();
        if slot.deleted {
            return Err(ServiceError::SessionNotFound);
        }
        let predictor = self.predictor_for(slot.session.predictor)?;
        let turn = slot.session.turn_counter;
        let info = UserInfo::new(info_text.trim(), Speaker::User, Some(turn as u32));
        let op = predictor.predict(&slot.session.memory, &info)?;
        slot.session.memory.apply_in_place(&op, &info, turn as u32, &self.core)?;
        slot.session.turn_counter = turn + 1;
        slot.session.updated_at = Utc::now();
        self.persist(&slot.session)?;
        Ok(Observed { op, memory_size: slot.session.memory.len() })
    }

    pub fn memory(&self, session_id: &str) -> Result<Memory, ServiceError> {
        let slot = self.slot(session_id)?;
        let slot = slot.read().unwrap();
        if slot.deleted {
            return Err(ServiceError::SessionNotFound);
        }
        Ok(slot.session.memory.clone())
    }

    pub fn session(&self, session_id: &str) -> Result<Session, ServiceError> {
        let slot = self.slot(session_id)?;
        let slot = slot.read().unwrap();
        if slot.deleted {
            return Err(ServiceError::SessionNotFound);
        }
        Ok(slot.session.clone())
    }

    pub fn delete_session(&self, session_id: &str) -> Result<(), ServiceError> {
        let slot = {
            let mut sessions = self.sessions.write().unwrap();
            sessions.remove(session_id).ok_or(ServiceError::SessionNotFound)?
        };
        let mut slot = slot.write().unwrap();
        slot.deleted = true;
        if let Some(dir) = &self.persist_dir {
            let path = Self::snapshot_path(dir, session_id);
            match std::fs::remove_file(&path) {
                Ok(()) => {}
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(e) => return Err(e.into()),
            }
        }
        Ok(())
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().unwrap().keys().cloned().collect();
        ids.sort_unstable();
        ids
    }
}
