//! Session state, per-session write serialization, and the append-only
//! persistence log.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use anyhow::{bail, Context};
use cotvis_core::cot::ReasoningTrace;
use cotvis_core::refine::{CorrectionRequest, TraceDiff};
use serde::{Deserialize, Serialize};

/// What produced a trace version.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Origin {
    Query { nl_query: String },
    Correction { request: CorrectionRequest },
    Promotion { alternative: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceVersion {
    pub version: u32,
    pub origin: Origin,
    pub trace: ReasoningTrace,
    /// Against the previous version, for corrections and promotions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diff: Option<TraceDiff>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub database: String,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub versions: Vec<TraceVersion>,
}

impl Session {
    pub fn latest(&self) -> Option<&TraceVersion> {
        self.versions.last()
    }

    pub fn version(&self, v: u32) -> Option<&TraceVersion> {
        self.versions.iter().find(|t| t.version == v)
    }
}

pub struct SessionCell {
    busy: AtomicBool,
    pub state: RwLock<Session>,
}

/// Held while a pipeline run or correction is in flight.
pub struct BusyGuard(Arc<SessionCell>);

impl Drop for BusyGuard {
    fn drop(&mut self) {
        self.0.busy.store(false, Ordering::Release);
    }
}

impl SessionCell {
    /// `None` if another mutation is running.
    pub fn try_begin(self: &Arc<Self>) -> Option<BusyGuard> {
        self.busy
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .ok()
            .map(|_| BusyGuard(self.clone()))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    Session { id: String, database: String, created_at: u64 },
    Version { session: String, version: TraceVersion },
}

#[derive(Default)]
pub struct SessionStore {
    sessions: RwLock<HashMap<String, Arc<SessionCell>>>,
    log: Option<Mutex<File>>,
}

impl SessionStore {
    pub fn in_memory() -> Self {
        SessionStore::default()
    }

    /// Replays `path` if it exists, then appends new events to it.
    pub fn persistent(path: &Path) -> anyhow::Result<Self> {
        let mut sessions: HashMap<String, Session> = HashMap::new();
        if path.exists() {
            let f = File::open(path).with_context(|| path.display().to_string())?;
            for (i, line) in BufReader::new(f).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let ev: Event = serde_json::from_str(&line)
                    .with_context(|| format!("{} line {}", path.display(), i + 1))?;
                match ev {
                    Event::Session { id, database, created_at } => {
                        sessions.insert(id.clone(), Session { id, database, created_at, versions: Vec::new() });
                    }
                    Event::Version { session, version } => {
                        let Some(s) = sessions.get_mut(&session) else {
                            bail!("{} line {}: version for unknown session {session}", path.display(), i + 1);
                        };
                        s.versions.push(version);
                    }
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path).with_context(|| path.display().to_string())?;
        let cells = sessions
            .into_iter()
            .map(|(id, s)| (id, Arc::new(SessionCell { busy: AtomicBool::new(false), state: RwLock::new(s) })))
            .collect();
        Ok(SessionStore { sessions: RwLock::new(cells), log: Some(Mutex::new(file)) })
    }

    fn append(&self, ev: &Event) -> anyhow::Result<()> {
        if let Some(log) = &self.log {
            let mut line = serde_json::to_string(ev)?;
            line.push('\n');
            let mut f = log.lock().expect("log lock");
            f.write_all(line.as_bytes())?;
            f.flush()?;
        }
        Ok(())
    }

    pub fn create(&self, database: &str) -> anyhow::Result<Session> {
        let created_at = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let s = Session {
            id: uuid::Uuid::new_v4().simple().to_string(),
            database: database.to_string(),
            created_at,
            versions: Vec::new(),
        };
        self.append(&Event::Session { id: s.id.clone(), database: s.database.clone(), created_at })?;
        let cell = Arc::new(SessionCell { busy: AtomicBool::new(false), state: RwLock::new(s.clone()) });
        self.sessions.write().expect("sessions lock").insert(s.id.clone(), cell);
        Ok(s)
    }

    pub fn get(&self, id: &str) -> Option<Arc<SessionCell>> {
        self.sessions.read().expect("sessions lock").get(id).cloned()
    }

    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().expect("sessions lock").keys().cloned().collect();
        ids.sort();
        ids
    }

    /// Appends the next version; the caller holds the session's busy guard.
    pub fn push_version(
        &self,
        cell: &SessionCell,
        origin: Origin,
        trace: ReasoningTrace,
        diff: Option<TraceDiff>,
    ) -> anyhow::Result<TraceVersion> {
        let mut s = cell.state.write().expect("session lock");
        let v = TraceVersion {
            version: s.versions.last().map_or(1, |t| t.version + 1),
            origin,
            trace,
            diff,
        };
        self.append(&Event::Version { session: s.id.clone(), version: v.clone() })?;
        s.versions.push(v.clone());
        Ok(v)
    }
}
