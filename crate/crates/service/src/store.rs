//! Append-only action logs, one JSON line per accepted action.

use crate::error::ApiError;
use crate::session::{ClearRequest, ModelRegistry, Session, SessionSpec, StateView};
use serde::{Deserialize, Serialize};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path} line {line}: {message}")]
    Corrupt { path: String, line: usize, message: String },
    #[error("{path}: replay failed: {source}")]
    Replay { path: String, source: ApiError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum LogEntry {
    Create {
        id: String,
        spec: Box<SessionSpec>,
        at_ms: u64,
    },
    /// `request.revision` is the revision the clear was applied to.
    Clear {
        request: ClearRequest,
        at_ms: u64,
    },
}

#[derive(Debug, Clone)]
pub struct ActionLog {
    dir: PathBuf,
}

impl ActionLog {
    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        fs::create_dir_all(dir).map_err(|source| StoreError::Io { path: dir.display().to_string(), source })?;
        Ok(ActionLog { dir: dir.to_path_buf() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn log_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.jsonl"))
    }

    pub fn append(&self, id: &str, entry: &LogEntry) -> Result<(), StoreError> {
        let path = self.log_path(id);
        let io = |source| StoreError::Io { path: path.display().to_string(), source };
        let mut line = serde_json::to_string(entry).expect("log entries serialize");
        line.push('\n');
        let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(io)?;
        f.write_all(line.as_bytes()).map_err(io)?;
        f.sync_data().map_err(io)
    }

    pub fn read(&self, id: &str) -> Result<Vec<LogEntry>, StoreError> {
        read_log(&self.log_path(id))
    }

    /// Ids of every logged session, sorted.
    pub fn session_ids(&self) -> Result<Vec<String>, StoreError> {
        let io = |source| StoreError::Io { path: self.dir.display().to_string(), source };
        let mut ids: Vec<String> = fs::read_dir(&self.dir)
            .map_err(io)?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                name.strip_suffix(".jsonl").map(str::to_string)
            })
            .collect();
        ids.sort();
        Ok(ids)
    }

    pub fn write_snapshot(&self, view: &StateView) -> Result<(), StoreError> {
        let path = self.dir.join(format!("{}.state.json", view.id));
        let text = minerisk_core::io::to_sorted_json(view).expect("state views serialize");
        fs::write(&path, text).map_err(|source| StoreError::Io { path: path.display().to_string(), source })
    }
}

pub fn read_log(path: &Path) -> Result<Vec<LogEntry>, StoreError> {
    let text =
        fs::read_to_string(path).map_err(|source| StoreError::Io { path: path.display().to_string(), source })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| StoreError::Corrupt {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Rebuild a session by re-applying its log.
pub fn replay(entries: &[LogEntry], models: &ModelRegistry) -> Result<Session, ApiError> {
    let mut iter = entries.iter();
    let mut session = match iter.next() {
        Some(LogEntry::Create { id, spec, at_ms }) => Session::create(id.clone(), (**spec).clone(), models, *at_ms)?,
        _ => return Err(ApiError::internal("log does not start with a create entry")),
    };
    for entry in iter {
        match entry {
            LogEntry::Clear { request, at_ms } => {
                session.clear(request, *at_ms)?;
            }
            LogEntry::Create { .. } => return Err(ApiError::internal("second create entry in log")),
        }
    }
    Ok(session)
}
