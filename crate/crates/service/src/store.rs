//! Append-only persistence of session logs.
//!
//! A session is stored as its header followed by every action record in
//! order. Nothing else is persisted about a session: its state is rebuilt by
//! replaying the records through the engine.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use transition_core::engine::ActionRecord;
use transition_core::metrics::ScoreCard;
use transition_core::ObjectiveFrame;
use uuid::Uuid;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("storage I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt record in {path} line {line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error("storage path {0} is not a directory")]
    NotADirectory(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Immutable facts fixed when a session is created.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionHeader {
    pub session_id: Uuid,
    pub survey_token: Option<String>,
    pub seed: u64,
    pub objective_frame: ObjectiveFrame,
    pub language: Option<String>,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LeaderboardEntry {
    pub session_id: Uuid,
    pub display_name: String,
    pub score_card: ScoreCard,
    pub completed_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredSession {
    pub header: SessionHeader,
    pub records: Vec<ActionRecord>,
}

/// Where session logs live. Implementations must make a write durable
/// before returning.
pub trait EventStore: Send + Sync {
    fn create(&self, header: &SessionHeader) -> Result<(), StoreError>;
    fn append(&self, session: Uuid, record: &ActionRecord) -> Result<(), StoreError>;
    fn add_leaderboard_entry(&self, entry: &LeaderboardEntry) -> Result<(), StoreError>;
    fn load_sessions(&self) -> Result<Vec<StoredSession>, StoreError>;
    fn load_leaderboard(&self) -> Result<Vec<LeaderboardEntry>, StoreError>;
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
enum Line {
    Header(SessionHeader),
    Action(ActionRecord),
}

/// One JSON-lines file per session plus one for the leaderboard.
#[derive(Debug)]
pub struct FileStore {
    root: PathBuf,
    // Serializes appends to the shared leaderboard file.
    leaderboard: Mutex<()>,
}

impl FileStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<FileStore, StoreError> {
        let root = root.into();
        if root.exists() && !root.is_dir() {
            return Err(StoreError::NotADirectory(root));
        }
        let sessions = root.join("sessions");
        fs::create_dir_all(&sessions).map_err(io_err(&sessions))?;
        // Probe writability now rather than on the first request.
        let probe = root.join(".probe");
        File::create(&probe).map_err(io_err(&probe))?;
        fs::remove_file(&probe).map_err(io_err(&probe))?;
        Ok(FileStore {
            root,
            leaderboard: Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn session_path(&self, id: Uuid) -> PathBuf {
        self.root.join("sessions").join(format!("{id}.jsonl"))
    }

    fn leaderboard_path(&self) -> PathBuf {
        self.root.join("leaderboard.jsonl")
    }

    fn append_line(path: &Path, json: &str, create_new: bool) -> Result<(), StoreError> {
        let mut file = OpenOptions::new()
            .append(true)
            .create(true)
            .create_new(create_new)
            .open(path)
            .map_err(io_err(path))?;
        let mut line = String::with_capacity(json.len() + 1);
        line.push_str(json);
        line.push('\n');
        file.write_all(line.as_bytes()).map_err(io_err(path))?;
        file.sync_data().map_err(io_err(path))
    }

    /// Reads a JSON-lines file. A final line cut short by a crash is
    /// dropped; damage anywhere else is an error.
    fn read_lines<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
        let file = File::open(path).map_err(io_err(path))?;
        let lines: Vec<String> = BufReader::new(file)
            .lines()
            .collect::<Result<_, _>>()
            .map_err(io_err(path))?;
        let mut out = Vec::with_capacity(lines.len());
        let last = lines.len().saturating_sub(1);
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(line) {
                Ok(v) => out.push(v),
                Err(_) if i == last => break,
                Err(e) => {
                    return Err(StoreError::Corrupt {
                        path: path.to_path_buf(),
                        line: i + 1,
                        message: e.to_string(),
                    })
                }
            }
        }
        Ok(out)
    }
}

impl EventStore for FileStore {
    fn create(&self, header: &SessionHeader) -> Result<(), StoreError> {
        let json = serde_json::to_string(&Line::Header(header.clone())).expect("header serializes");
        Self::append_line(&self.session_path(header.session_id), &json, true)?;
        let dir = self.root.join("sessions");
        // Make the new directory entry durable too.
        if let Ok(d) = File::open(&dir) {
            let _ = d.sync_all();
        }
        Ok(())
    }

    fn append(&self, session: Uuid, record: &ActionRecord) -> Result<(), StoreError> {
        let json = serde_json::to_string(&Line::Action(record.clone())).expect("record serializes");
        Self::append_line(&self.session_path(session), &json, false)
    }

    fn add_leaderboard_entry(&self, entry: &LeaderboardEntry) -> Result<(), StoreError> {
        let _guard = self.leaderboard.lock();
        let json = serde_json::to_string(entry).expect("entry serializes");
        Self::append_line(&self.leaderboard_path(), &json, false)
    }

    fn load_sessions(&self) -> Result<Vec<StoredSession>, StoreError> {
        let dir = self.root.join("sessions");
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(io_err(&dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        let mut sessions = Vec::new();
        for path in paths {
            let mut lines = Self::read_lines::<Line>(&path)?.into_iter();
            let Some(Line::Header(header)) = lines.next() else {
                // A crash between creating the file and writing the header
                // leaves an empty file: the session never existed.
                continue;
            };
            let mut records = Vec::new();
            for (i, line) in lines.enumerate() {
                match line {
                    Line::Action(r) => records.push(r),
                    Line::Header(_) => {
                        return Err(StoreError::Corrupt {
                            path,
                            line: i + 2,
                            message: "second header".into(),
                        })
                    }
                }
            }
            sessions.push(StoredSession { header, records });
        }
        Ok(sessions)
    }

    fn load_leaderboard(&self) -> Result<Vec<LeaderboardEntry>, StoreError> {
        let path = self.leaderboard_path();
        if !path.exists() {
            return Ok(Vec::new());
        }
        Self::read_lines(&path)
    }
}

/// Volatile store for tests and throwaway servers.
#[derive(Debug, Default)]
pub struct MemoryStore {
    sessions: Mutex<BTreeMap<Uuid, StoredSession>>,
    leaderboard: Mutex<Vec<LeaderboardEntry>>,
}

impl MemoryStore {
    pub fn new() -> MemoryStore {
        MemoryStore::default()
    }
}

impl EventStore for MemoryStore {
    fn create(&self, header: &SessionHeader) -> Result<(), StoreError> {
        self.sessions.lock().insert(
            header.session_id,
            StoredSession {
                header: header.clone(),
                records: Vec::new(),
            },
        );
        Ok(())
    }

    fn append(&self, session: Uuid, record: &ActionRecord) -> Result<(), StoreError> {
        if let Some(s) = self.sessions.lock().get_mut(&session) {
            s.records.push(record.clone());
        }
        Ok(())
    }

    fn add_leaderboard_entry(&self, entry: &LeaderboardEntry) -> Result<(), StoreError> {
        self.leaderboard.lock().push(entry.clone());
        Ok(())
    }

    fn load_sessions(&self) -> Result<Vec<StoredSession>, StoreError> {
        Ok(self.sessions.lock().values().cloned().collect())
    }

    fn load_leaderboard(&self) -> Result<Vec<LeaderboardEntry>, StoreError> {
        Ok(self.leaderboard.lock().clone())
    }
}
