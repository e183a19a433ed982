//! The session database.
//!
//! All state lives in one [`Db`] value guarded by a mutex. A mutation runs
//! against a copy and replaces the live value only after the copy has been
//! written to disk, so readers always see a committed snapshot and a failed
//! operation leaves nothing behind. The on-disk form is a single JSON file
//! replaced atomically; the audit log is an append-only JSONL file beside it.

mod addresses;
mod interference;
mod listing;
mod registration;
mod requests;
mod sessions;

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

pub use addresses::{AddressError, AddressRegistry, ADDRESS_BASE, ADDRESS_STRIDE, DEFAULT_SLOT_COUNT};
pub use interference::{precedence, resolve_interference, DEFAULT_SETUP_S, DEFAULT_TEARDOWN_S};
pub use listing::{sessions_csv, SessionFilter, SessionKind, SessionRow, SESSION_CSV_HEADER};
pub use registration::{auto_register_comm_sessions, RegistrationOptions, RegistrationReport, UPSERT_WINDOW_S};
pub use requests::{
    confirm_request, create_request, expire_stale, release_addresses, ExpiryReport, PlanningContext,
    RequestOutcome, REQUEST_MAX_LEAD_S, REQUEST_MIN_LEAD_S,
};
pub use sessions::{set_enabled, set_priority, station_agenda, LOCK_LEAD_S};

use crate::astro::OrbitalElements;
use crate::error::{Coded, ErrorClass};
use crate::model::{
    AuditRecord, CaptureSession, CommSession, DownlinkRecord, JobRun, Location, LocationKind, Notification,
    RegisteredFile, Request, RequestTemplate, Satellite,
};
use crate::passes::PassError;
use crate::time::Epoch;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{kind} `{id}` not found")]
    NotFound { kind: &'static str, id: String },
    #[error("session {0} has already ended")]
    SessionInPast(String),
    #[error("session {0} starts within the lock-out period and can no longer be edited")]
    SessionLocked(String),
    #[error("request window must lie between 1 h and 12 h ahead of {now}; got {start} .. {end}")]
    WindowOutOfRange { now: Epoch, start: Epoch, end: Epoch },
    #[error("unknown request template `{0}`")]
    UnknownTemplate(String),
    #[error("no imaging opportunity satisfies the constraints for request {0}")]
    NoCandidates(String),
    #[error("candidate {0} is less than 1 h ahead and can no longer be confirmed")]
    CandidateExpired(String),
    #[error("request {0} is already confirmed")]
    AlreadyConfirmed(String),
    #[error("request {id} is {status}; expected {expected}")]
    InvalidTransition { id: String, status: String, expected: &'static str },
    #[error("candidate {candidate} does not belong to request {request}")]
    CandidateMismatch { request: String, candidate: String },
    #[error("satellite {satellite}: {source}")]
    Address { satellite: String, source: AddressError },
    #[error("downlink of {0} has not ended yet")]
    SyncBeforeLos(String),
    #[error("invalid record: {0}")]
    Invalid(String),
    #[error(transparent)]
    Pass(#[from] PassError),
    #[error("store is locked by another process ({0})")]
    Locked(String),
    #[error("store file {path}: {message}")]
    Io { path: String, message: String },
}

impl StoreError {
    pub fn not_found(kind: &'static str, id: impl Into<String>) -> Self {
        StoreError::NotFound { kind, id: id.into() }
    }

    fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        StoreError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}

impl Coded for StoreError {
    fn code(&self) -> &'static str {
        match self {
            StoreError::NotFound { .. } => "NOT_FOUND",
            StoreError::SessionInPast(_) => "SESSION_IN_PAST",
            StoreError::SessionLocked(_) => "SESSION_LOCKED",
            StoreError::WindowOutOfRange { .. } => "WINDOW_OUT_OF_RANGE",
            StoreError::UnknownTemplate(_) => "UNKNOWN_TEMPLATE",
            StoreError::NoCandidates(_) => "NO_CANDIDATES",
            StoreError::CandidateExpired(_) => "CANDIDATE_EXPIRED",
            StoreError::AlreadyConfirmed(_) => "ALREADY_CONFIRMED",
            StoreError::InvalidTransition { .. } => "INVALID_TRANSITION",
            StoreError::CandidateMismatch { .. } => "CANDIDATE_MISMATCH",
            StoreError::Address { source, .. } => match source {
                AddressError::NoFreeAddressSlots { .. } => "NO_FREE_ADDRESS_SLOTS",
                AddressError::SlotNotAllocated(_) => "SLOT_NOT_ALLOCATED",
                AddressError::UnknownAddress(_) => "UNKNOWN_ADDRESS",
            },
            StoreError::SyncBeforeLos(_) => "SYNC_BEFORE_LOS",
            StoreError::Invalid(_) => "INVALID_RECORD",
            StoreError::Pass(e) => e.code(),
            StoreError::Locked(_) => "STORE_LOCKED",
            StoreError::Io { .. } => "STORE_IO",
        }
    }

    fn class(&self) -> ErrorClass {
        match self {
            StoreError::NotFound { .. } => ErrorClass::NotFound,
            StoreError::WindowOutOfRange { .. }
            | StoreError::UnknownTemplate(_)
            | StoreError::Invalid(_)
            | StoreError::CandidateMismatch { .. } => ErrorClass::Validation,
            StoreError::NoCandidates(_) => ErrorClass::Unprocessable,
            StoreError::Address {
                source: AddressError::UnknownAddress(_),
                ..
            } => ErrorClass::Validation,
            StoreError::Pass(e) => e.class(),
            StoreError::Io { .. } => ErrorClass::Internal,
            _ => ErrorClass::Conflict,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Counters {
    pub comm: u64,
    pub capture: u64,
    pub request: u64,
    pub notification: u64,
}

/// Every table of the store.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Db {
    /// Keyed by satellite name.
    pub satellites: BTreeMap<String, Satellite>,
    /// Keyed by location id.
    pub locations: BTreeMap<String, Location>,
    pub comm_sessions: BTreeMap<String, CommSession>,
    pub capture_sessions: BTreeMap<String, CaptureSession>,
    pub requests: BTreeMap<String, Request>,
    pub templates: BTreeMap<String, RequestTemplate>,
    /// Keyed by satellite name.
    pub registries: BTreeMap<String, AddressRegistry>,
    pub downlinks: Vec<DownlinkRecord>,
    pub files: Vec<RegisteredFile>,
    pub notifications: Vec<Notification>,
    /// Job name to the last period key it completed.
    pub job_runs: BTreeMap<String, String>,
    pub job_history: Vec<JobRun>,
    pub counters: Counters,
    #[serde(skip)]
    pending_audit: Vec<AuditRecord>,
}

impl Db {
    pub fn satellite(&self, key: &str) -> Result<&Satellite, StoreError> {
        self.satellites
            .get(key)
            .or_else(|| self.satellites.values().find(|s| s.id == key))
            .ok_or_else(|| StoreError::not_found("satellite", key))
    }

    pub fn location(&self, key: &str) -> Result<&Location, StoreError> {
        self.locations
            .get(key)
            .or_else(|| self.locations.values().find(|l| l.name == key))
            .ok_or_else(|| StoreError::not_found("location", key))
    }

    pub fn stations(&self) -> impl Iterator<Item = &Location> {
        self.locations.values().filter(|l| l.kind == LocationKind::Station)
    }

    pub fn registry_mut(&mut self, sat_name: &str) -> &mut AddressRegistry {
        self.registries.entry(sat_name.to_string()).or_default()
    }

    pub fn next_comm_id(&mut self) -> String {
        self.counters.comm += 1;
        format!("COM-{:06}", self.counters.comm)
    }

    pub fn next_capture_id(&mut self) -> String {
        self.counters.capture += 1;
        format!("CAP-{:06}", self.counters.capture)
    }

    pub fn next_request_id(&mut self) -> String {
        self.counters.request += 1;
        format!("REQ-{:06}", self.counters.request)
    }

    pub fn notify(&mut self, created: Epoch, sat_name: &str, message: impl Into<String>) {
        self.counters.notification += 1;
        self.notifications.push(Notification {
            id: self.counters.notification,
            created,
            sat_name: sat_name.to_string(),
            message: message.into(),
        });
    }

    pub fn audit(&mut self, record: AuditRecord) {
        self.pending_audit.push(record);
    }

    pub fn upsert_satellite(&mut self, satellite: Satellite) -> Result<(), StoreError> {
        if satellite.links.is_empty() {
            return Err(StoreError::Invalid(format!("satellite {} has no links", satellite.name)));
        }
        for sensor in &satellite.sensors {
            sensor.validate().map_err(StoreError::Invalid)?;
        }
        if let Some(other) = self.satellites.values().find(|s| s.id == satellite.id && s.name != satellite.name) {
            return Err(StoreError::Invalid(format!("satellite id {} already used by {}", satellite.id, other.name)));
        }
        self.registries.entry(satellite.name.clone()).or_default();
        self.satellites.insert(satellite.name.clone(), satellite);
        Ok(())
    }

    pub fn upsert_location(&mut self, location: Location) -> Result<(), StoreError> {
        location.validate().map_err(StoreError::Invalid)?;
        self.locations.insert(location.id.clone(), location);
        Ok(())
    }

    pub fn upsert_template(&mut self, template: RequestTemplate) {
        self.templates.insert(template.id.clone(), template);
    }

    /// Replaces the element set of the satellite with the matching catalogue number.
    pub fn ingest_elements(&mut self, elements: OrbitalElements) -> Result<String, StoreError> {
        let sat = self
            .satellites
            .values_mut()
            .find(|s| s.norad_id == elements.norad_id)
            .ok_or_else(|| StoreError::not_found("satellite with catalogue number", elements.norad_id.to_string()))?;
        sat.tle = Some(elements);
        Ok(sat.name.clone())
    }

    /// Comm sessions at one station, in id order.
    pub fn comm_sessions_at<'a>(&'a self, station_name: &'a str) -> impl Iterator<Item = &'a CommSession> + 'a {
        self.comm_sessions.values().filter(move |s| s.station_name == station_name)
    }

    /// Re-runs conflict resolution for one station; returns how many flags flipped.
    pub fn resolve_station(&mut self, station_name: &str, setup_s: i64, teardown_s: i64) -> usize {
        let ids: Vec<String> = self.comm_sessions_at(station_name).map(|s| s.id.clone()).collect();
        let mut sessions: Vec<CommSession> = ids.iter().map(|id| self.comm_sessions[id].clone()).collect();
        let changed = resolve_interference(&mut sessions, setup_s, teardown_s);
        for s in sessions {
            self.comm_sessions.insert(s.id.clone(), s);
        }
        changed
    }
}

/// Removes the lock file when the owning store is dropped.
#[derive(Debug)]
struct WriteLock(PathBuf);

impl Drop for WriteLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

pub struct Store {
    path: Option<PathBuf>,
    db: Mutex<Db>,
    memory_audit: Mutex<Vec<AuditRecord>>,
    _lock: Option<WriteLock>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("path", &self.path).finish_non_exhaustive()
    }
}

fn lock_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".lock");
    path.with_file_name(name)
}

fn audit_path(path: &Path) -> PathBuf {
    path.with_extension("audit.jsonl")
}

impl Store {
    pub fn in_memory(db: Db) -> Self {
        Store {
            path: None,
            db: Mutex::new(db),
            memory_audit: Mutex::new(Vec::new()),
            _lock: None,
        }
    }

    /// Opens (or creates) a file-backed store; fails while a service holds the write lock.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref();
        let lock = lock_path(path);
        if lock.exists() {
            let holder = fs::read_to_string(&lock).unwrap_or_default();
            return Err(StoreError::Locked(format!("{}: {}", lock.display(), holder.trim())));
        }
        Self::load(path, None)
    }

    /// Opens a store and holds its write lock until dropped.
    pub fn open_exclusive(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref();
        let lock = lock_path(path);
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| StoreError::io(dir, e))?;
        }
        let mut file = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&lock)
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::AlreadyExists => {
                    StoreError::Locked(fs::read_to_string(&lock).unwrap_or_default().trim().to_string())
                }
                _ => StoreError::io(&lock, e),
            })?;
        let guard = WriteLock(lock.clone());
        writeln!(file, "pid {}", std::process::id()).map_err(|e| StoreError::io(&lock, e))?;
        Self::load(path, Some(guard))
    }

    fn load(path: &Path, lock: Option<WriteLock>) -> Result<Self, StoreError> {
        let db = match fs::read_to_string(path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| StoreError::io(path, e))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Db::default(),
            Err(e) => return Err(StoreError::io(path, e)),
        };
        Ok(Store {
            path: Some(path.to_path_buf()),
            db: Mutex::new(db),
            memory_audit: Mutex::new(Vec::new()),
            _lock: lock,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// A consistent copy of the committed state.
    pub fn snapshot(&self) -> Db {
        self.db.lock().expect("store mutex poisoned").clone()
    }

    pub fn read<T>(&self, f: impl FnOnce(&Db) -> T) -> T {
        f(&self.db.lock().expect("store mutex poisoned"))
    }

    /// Runs `f` on a working copy and commits it only if `f` succeeds.
    pub fn transaction<T, E>(&self, f: impl FnOnce(&mut Db) -> Result<T, E>) -> Result<T, E>
    where
        E: From<StoreError>,
    {
        let mut live = self.db.lock().expect("store mutex poisoned");
        let mut work = live.clone();
        let value = f(&mut work)?;
        let audit = std::mem::take(&mut work.pending_audit);
        if work != *live {
            self.persist(&work)?;
        }
        self.append_audit(&audit)?;
        *live = work;
        Ok(value)
    }

    fn persist(&self, db: &Db) -> Result<(), StoreError> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| StoreError::io(dir, e))?;
        }
        let tmp = path.with_extension("json.tmp");
        let body = serde_json::to_vec_pretty(db).map_err(|e| StoreError::io(path, e))?;
        {
            let mut file = File::create(&tmp).map_err(|e| StoreError::io(&tmp, e))?;
            file.write_all(&body).map_err(|e| StoreError::io(&tmp, e))?;
            file.sync_all().map_err(|e| StoreError::io(&tmp, e))?;
        }
        fs::rename(&tmp, path).map_err(|e| StoreError::io(path, e))
    }

    fn append_audit(&self, records: &[AuditRecord]) -> Result<(), StoreError> {
        if records.is_empty() {
            return Ok(());
        }
        let Some(path) = &self.path else {
            self.memory_audit.lock().expect("audit mutex poisoned").extend_from_slice(records);
            return Ok(());
        };
        let audit = audit_path(path);
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&audit)
            .map_err(|e| StoreError::io(&audit, e))?;
        for record in records {
            let line = serde_json::to_string(record).map_err(|e| StoreError::io(&audit, e))?;
            writeln!(file, "{line}").map_err(|e| StoreError::io(&audit, e))?;
        }
        Ok(())
    }

    pub fn audit_log(&self) -> Result<Vec<AuditRecord>, StoreError> {
        let Some(path) = &self.path else {
            return Ok(self.memory_audit.lock().expect("audit mutex poisoned").clone());
        };
        let audit = audit_path(path);
        let file = match File::open(&audit) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(StoreError::io(&audit, e)),
        };
        BufReader::new(file)
            .lines()
            .map(|line| {
                let line = line.map_err(|e| StoreError::io(&audit, e))?;
                serde_json::from_str(&line).map_err(|e| StoreError::io(&audit, e))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CommLink, LinkDirection};

    fn sat(name: &str) -> Satellite {
        Satellite {
            id: name.to_lowercase(),
            name: name.into(),
            norad_id: 90001,
            tle: None,
            links: vec![CommLink {
                name: "SCMD".into(),
                direction: LinkDirection::Up,
                rate_bps: 1000.0,
                band: "S".into(),
            }],
            sensors: vec![],
            priority_class: 1,
            active: true,
        }
    }

    #[test]
    fn failed_transaction_leaves_no_trace() {
        let store = Store::in_memory(Db::default());
        let result: Result<(), StoreError> = store.transaction(|db| {
            db.upsert_satellite(sat("RISESAT"))?;
            Err(StoreError::Invalid("abort".into()))
        });
        assert!(result.is_err());
        assert!(store.snapshot().satellites.is_empty());
    }

    #[test]
    fn reopen_sees_committed_state() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ops.json");
        {
            let store = Store::open(&path).unwrap();
            store
                .transaction(|db| {
                    db.upsert_satellite(sat("RISESAT"))?;
                    let id = db.next_comm_id();
                    db.audit(AuditRecord {
                        when: Epoch::ymd_hms(2021, 5, 11, 0, 0, 0),
                        actor: "op".into(),
                        session_id: id,
                        field: "enabled".into(),
                        old: "false".into(),
                        new: "true".into(),
                    });
                    Ok::<_, StoreError>(())
                })
                .unwrap();
        }
        let store = Store::open(&path).unwrap();
        let db = store.snapshot();
        assert!(db.satellites.contains_key("RISESAT"));
        assert_eq!(db.counters.comm, 1);
        assert_eq!(store.audit_log().unwrap().len(), 1);
    }

    #[test]
    fn exclusive_lock_blocks_other_openers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ops.json");
        let held = Store::open_exclusive(&path).unwrap();
        assert!(matches!(Store::open(&path), Err(StoreError::Locked(_))));
        assert!(matches!(Store::open_exclusive(&path), Err(StoreError::Locked(_))));
        drop(held);
        Store::open(&path).unwrap();
    }

    #[test]
    fn satellite_needs_a_link() {
        let mut db = Db::default();
        let mut s = sat("X");
        s.links.clear();
        assert!(matches!(db.upsert_satellite(s), Err(StoreError::Invalid(_))));
    }
}
