//! Simulated ground-station automation: antenna pointing, tracks, post-pass
//! file sync and downlink accounting.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::astro::{eci_to_ecef, OrbitalElements, PropagationError, Propagator, Sgp4Propagator};
use crate::error::{Coded, ErrorClass};
use crate::geometry::topocentric;
use crate::model::{CommSession, DownlinkRecord, LinkDirection, Location, ManifestEntry, RegisteredFile};
use crate::planner::{comm_template, plan_jobs, session_window, PlanError};
use crate::store::{station_agenda, Db, Store, StoreError};
use crate::template::{generate_cmd_file, TemplateSet};
use crate::time::Epoch;

pub const DEFAULT_EFFICIENCY: f64 = 0.8;
pub const DEFAULT_POLL_S: i64 = 60;

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("satellite {0} has no element set")]
    NoElements(String),
    #[error("satellite {sat} has no link {link}")]
    UnknownLink { sat: String, link: String },
    #[error("schedule step must be at least 1 s")]
    InvalidStep,
    #[error("efficiency must lie in [0, 1], got {0}")]
    InvalidEfficiency(f64),
}

impl Coded for AgentError {
    fn code(&self) -> &'static str {
        match self {
            AgentError::Store(e) => e.code(),
            AgentError::Propagation(PropagationError::StaleElements { .. }) => "STALE_ELEMENTS",
            AgentError::Propagation(_) => "PROPAGATION_FAILED",
            AgentError::Plan(e) => e.code(),
            AgentError::NoElements(_) => "NO_ELEMENTS",
            AgentError::UnknownLink { .. } => "UNKNOWN_LINK",
            AgentError::InvalidStep => "INVALID_STEP",
            AgentError::InvalidEfficiency(_) => "INVALID_EFFICIENCY",
        }
    }

    fn class(&self) -> ErrorClass {
        match self {
            AgentError::Store(e) => e.class(),
            AgentError::Plan(e) => e.class(),
            AgentError::InvalidStep | AgentError::InvalidEfficiency(_) => ErrorClass::Validation,
            _ => ErrorClass::Unprocessable,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AntennaSample {
    pub t: Epoch,
    /// Unwrapped: continuous through north, may leave [0, 360).
    pub az_deg: f64,
    pub el_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AntennaSchedule {
    pub session_id: String,
    pub step_s: u32,
    pub samples: Vec<AntennaSample>,
}

impl AntennaSchedule {
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(["t_utc", "az_deg", "el_deg"]).expect("in-memory write");
        for s in &self.samples {
            w.write_record([s.t.iso_millis(), format!("{:.6}", s.az_deg), format!("{:.6}", s.el_deg)])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii csv")
    }
}

/// Pointing from AOS to LOS inclusive at `step_s`, ending on LOS itself.
pub fn antenna_schedule(
    session: &CommSession,
    elements: &OrbitalElements,
    station: &Location,
    step_s: u32,
) -> Result<AntennaSchedule, AgentError> {
    if step_s == 0 {
        return Err(AgentError::InvalidStep);
    }
    let propagator = Sgp4Propagator::new(elements)?;
    let mut times = Vec::new();
    let mut t = session.t_aos;
    while t < session.t_los {
        times.push(t);
        t = t.add_millis(i64::from(step_s) * 1000);
    }
    times.push(session.t_los);

    let mut samples: Vec<AntennaSample> = Vec::with_capacity(times.len());
    for t in times {
        let look = topocentric(&station.point, eci_to_ecef(&propagator.propagate(t)?));
        let az = match samples.last() {
            Some(prev) => {
                let delta = (look.azimuth - prev.az_deg).rem_euclid(360.0);
                prev.az_deg + if delta > 180.0 { delta - 360.0 } else { delta }
            }
            None => look.azimuth,
        };
        samples.push(AntennaSample {
            t,
            az_deg: az,
            el_deg: look.elevation,
        });
    }
    Ok(AntennaSchedule {
        session_id: session.id.clone(),
        step_s,
        samples,
    })
}

/// Seconds the schedule spends at or above `mask`, crossing times interpolated.
pub fn seconds_above_mask(schedule: &AntennaSchedule, mask: f64) -> f64 {
    schedule
        .samples
        .windows(2)
        .map(|w| {
            let dt = w[1].t.seconds_since(w[0].t);
            let (a, b) = (w[0].el_deg - mask, w[1].el_deg - mask);
            match (a >= 0.0, b >= 0.0) {
                (true, true) => dt,
                (false, false) => 0.0,
                (true, false) => dt * a / (a - b),
                (false, true) => dt * b / (b - a),
            }
        })
        .sum()
}

/// Volume moved over a link: rate x seconds x efficiency / 8, whole bytes.
pub fn link_bytes(rate_bps: f64, seconds: f64, efficiency: f64) -> u64 {
    (rate_bps * seconds * efficiency / 8.0).floor() as u64
}

/// Simulates one track. Time below the mask moves no data. Downlink
/// sessions that play back images list the addresses the CMD file sends.
pub fn run_track(
    db: &Db,
    session: &CommSession,
    schedule: &AntennaSchedule,
    efficiency: f64,
) -> Result<DownlinkRecord, AgentError> {
    if !(0.0..=1.0).contains(&efficiency) {
        return Err(AgentError::InvalidEfficiency(efficiency));
    }
    let sat = db.satellite(&session.sat_name)?;
    let station = db.location(&session.station_name)?;
    let link = sat.link(&session.link_name).ok_or_else(|| AgentError::UnknownLink {
        sat: sat.name.clone(),
        link: session.link_name.clone(),
    })?;
    let seconds = seconds_above_mask(schedule, station.min_elevation_mask);
    let bytes = link_bytes(link.rate_bps, seconds, efficiency);
    let played_back = planned_playback(db, session)?;

    let stem = format!("{}_{}_{}", session.sat_name, session.station_name, session.id);
    let file_manifest = match (link.direction, played_back.len()) {
        (LinkDirection::Up, _) => vec![ManifestEntry {
            name: format!("{stem}_{}.cmdlog", link.name),
            bytes,
        }],
        (LinkDirection::Down, 0) => vec![ManifestEntry {
            name: format!("{stem}_{}.tlm", link.name),
            bytes,
        }],
        (LinkDirection::Down, n) => {
            let share = bytes / n as u64;
            played_back
                .iter()
                .enumerate()
                .map(|(i, addr)| ManifestEntry {
                    name: format!("{}_{addr}.img", session.sat_name),
                    // The first file carries the remainder.
                    bytes: if i == 0 { bytes - share * (n as u64 - 1) } else { share },
                })
                .collect()
        }
    };
    let (t_start, t_end) = match (schedule.samples.first(), schedule.samples.last()) {
        (Some(a), Some(b)) => (a.t, b.t),
        _ => (session.t_aos, session.t_aos),
    };
    Ok(DownlinkRecord {
        session_id: session.id.clone(),
        sat_name: session.sat_name.clone(),
        station_name: session.station_name.clone(),
        link_name: link.name.clone(),
        rate_bps: link.rate_bps,
        t_start,
        t_end,
        bytes,
        synced: false,
        file_manifest,
        played_back,
    })
}

/// Addresses the session's CMD section plays back, if it is an X-band download.
fn planned_playback(db: &Db, session: &CommSession) -> Result<Vec<String>, AgentError> {
    let (start, _) = session_window(comm_template(&session.link_name), session.t_mel);
    let (jobs, pool) = plan_jobs(db, &session.sat_name, start, start.add_millis(1))?;
    let Some(job) = jobs.into_iter().find(|j| j.session_id == session.id) else {
        return Ok(Vec::new());
    };
    if !job.draws_playback {
        return Ok(Vec::new());
    }
    let file = generate_cmd_file(std::slice::from_ref(&job), &TemplateSet::shipped(), &pool).map_err(PlanError::from)?;
    Ok(file.played_back().map(str::to_string).collect())
}

pub fn record_downlink(store: &Store, record: DownlinkRecord) -> Result<(), StoreError> {
    store.transaction(|db| {
        if db.downlinks.iter().any(|r| r.session_id == record.session_id) {
            return Err(StoreError::Invalid(format!("session {} was already tracked", record.session_id)));
        }
        db.downlinks.push(record);
        Ok(())
    })
}

fn unique_name(name: &str, session_id: &str, bytes: u64, taken: &BTreeSet<String>) -> String {
    if !taken.contains(name) {
        return name.to_string();
    }
    let digest = Sha256::digest(format!("{session_id}\n{name}\n{bytes}").as_bytes());
    let suffix: String = digest.iter().take(4).map(|b| format!("{b:02x}")).collect();
    match name.rsplit_once('.') {
        Some((stem, ext)) => format!("{stem}-{suffix}.{ext}"),
        None => format!("{name}-{suffix}"),
    }
}

/// Registers the files of a finished track and frees the played-back slots.
pub fn sync_after_los(store: &Store, session_id: &str, now: Epoch) -> Result<DownlinkRecord, StoreError> {
    store.transaction(|db| {
        let index = db
            .downlinks
            .iter()
            .position(|r| r.session_id == session_id)
            .ok_or_else(|| StoreError::not_found("downlink", session_id))?;
        let record = db.downlinks[index].clone();
        if record.t_end > now {
            return Err(StoreError::SyncBeforeLos(session_id.to_string()));
        }
        if record.synced {
            return Ok(record);
        }
        let mut taken: BTreeSet<String> = db.files.iter().map(|f| f.name.clone()).collect();
        let mut manifest = Vec::with_capacity(record.file_manifest.len());
        for entry in &record.file_manifest {
            let name = unique_name(&entry.name, session_id, entry.bytes, &taken);
            taken.insert(name.clone());
            db.files.push(RegisteredFile {
                name: name.clone(),
                bytes: entry.bytes,
                session_id: session_id.to_string(),
                registered_at: now,
            });
            manifest.push(ManifestEntry { name, bytes: entry.bytes });
        }
        if !record.played_back.is_empty() {
            let registry = db.registry_mut(&record.sat_name);
            let wrap = |source| StoreError::Address {
                satellite: record.sat_name.clone(),
                source,
            };
            registry.mark_downlinked(&record.played_back).map_err(wrap)?;
            registry.release(&record.played_back).map_err(wrap)?;
        }
        let updated = &mut db.downlinks[index];
        updated.file_manifest = manifest;
        updated.synced = true;
        Ok(updated.clone())
    })
}

/// Downlinked gigabytes per satellite and station.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumeReport {
    pub from: Epoch,
    pub to: Epoch,
    pub satellites: Vec<String>,
    pub stations: Vec<String>,
    /// bytes[sat][station]
    pub bytes: Vec<Vec<u64>>,
}

pub const BYTES_PER_GB: f64 = 1e9;

impl VolumeReport {
    pub fn satellite_total(&self, i: usize) -> u64 {
        self.bytes[i].iter().sum()
    }

    pub fn station_total(&self, j: usize) -> u64 {
        self.bytes.iter().map(|row| row[j]).sum()
    }

    pub fn total(&self) -> u64 {
        self.bytes.iter().flatten().sum()
    }

    /// Satellites as rows, stations as columns, margins in the last row and column.
    pub fn to_csv(&self) -> String {
        let gb = |b: u64| format!("{:.3}", b as f64 / BYTES_PER_GB);
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let mut header = vec!["GB".to_string()];
        header.extend(self.stations.iter().cloned());
        header.push("total(/sat)".into());
        w.write_record(&header).expect("in-memory write");
        for (i, sat) in self.satellites.iter().enumerate() {
            let mut row = vec![sat.clone()];
            row.extend(self.bytes[i].iter().map(|&b| gb(b)));
            row.push(gb(self.satellite_total(i)));
            w.write_record(&row).expect("in-memory write");
        }
        let mut row = vec!["total(/GRS)".to_string()];
        row.extend((0..self.stations.len()).map(|j| gb(self.station_total(j))));
        row.push(gb(self.total()));
        w.write_record(&row).expect("in-memory write");
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii csv")
    }
}

/// Sums downlinked bytes of tracks starting in `[from, to)`. Every known
/// satellite and station gets a row or column, even when empty.
pub fn volume_report(db: &Db, from: Epoch, to: Epoch) -> VolumeReport {
    let mut satellites: BTreeSet<String> = db.satellites.keys().cloned().collect();
    let mut stations: BTreeSet<String> = db.stations().map(|s| s.name.clone()).collect();
    let records: Vec<&DownlinkRecord> = db
        .downlinks
        .iter()
        .filter(|r| r.t_start >= from && r.t_start < to)
        .collect();
    for r in &records {
        satellites.insert(r.sat_name.clone());
        stations.insert(r.station_name.clone());
    }
    let satellites: Vec<String> = satellites.into_iter().collect();
    let stations: Vec<String> = stations.into_iter().collect();
    let mut cells: BTreeMap<(&str, &str), u64> = BTreeMap::new();
    for r in &records {
        *cells.entry((r.sat_name.as_str(), r.station_name.as_str())).or_default() += r.bytes;
    }
    let bytes = satellites
        .iter()
        .map(|sat| {
            stations
                .iter()
                .map(|st| cells.get(&(sat.as_str(), st.as_str())).copied().unwrap_or(0))
                .collect()
        })
        .collect();
    VolumeReport {
        from,
        to,
        satellites,
        stations,
        bytes,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AgentOptions {
    pub step_s: u32,
    pub efficiency: f64,
    pub poll_s: i64,
}

impl Default for AgentOptions {
    fn default() -> Self {
        Self {
            step_s: 1,
            efficiency: DEFAULT_EFFICIENCY,
            poll_s: DEFAULT_POLL_S,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct AgentRunReport {
    pub station: String,
    pub tracks: Vec<DownlinkRecord>,
    pub polls: u64,
    pub errors: Vec<(String, String)>,
}

/// Runs one station's agent over a simulated clock. The agenda is re-read
/// at every poll; each session is tracked at most once and synced after LOS.
pub fn run_agent(
    store: &Store,
    station: &str,
    from: Epoch,
    to: Epoch,
    options: &AgentOptions,
) -> Result<AgentRunReport, AgentError> {
    let station_name = store.read(|db| db.location(station).map(|l| l.name.clone()))?;
    let mut report = AgentRunReport {
        station: station_name.clone(),
        ..Default::default()
    };
    let mut now = from;
    let poll = options.poll_s.max(1) * 1000;
    while now < to {
        report.polls += 1;
        let db = store.snapshot();
        let next = station_agenda(&db, &station_name, now)?
            .into_iter()
            .filter(|s| s.t_aos >= now && s.t_aos < to)
            .find(|s| !db.downlinks.iter().any(|r| r.session_id == s.id));
        let Some(session) = next else {
            break;
        };
        // Sleep in poll steps until the pass begins.
        report.polls += (session.t_aos.millis_since(now) / poll).max(0) as u64;
        match track_and_sync(store, &db, &session, options) {
            Ok(record) => report.tracks.push(record),
            Err(e) => report.errors.push((session.id.clone(), e.to_string())),
        }
        now = session.t_los;
    }
    Ok(report)
}

fn track_and_sync(
    store: &Store,
    db: &Db,
    session: &CommSession,
    options: &AgentOptions,
) -> Result<DownlinkRecord, AgentError> {
    let sat = db.satellite(&session.sat_name)?;
    let elements = sat.tle.as_ref().ok_or_else(|| AgentError::NoElements(sat.name.clone()))?;
    let station = db.location(&session.station_name)?;
    let schedule = antenna_schedule(session, elements, station, options.step_s)?;
    let record = run_track(db, session, &schedule, options.efficiency)?;
    record_downlink(store, record)?;
    Ok(sync_after_los(store, &session.id, session.t_los)?)
}
