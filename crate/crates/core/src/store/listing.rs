//! The unified chronological session list and its CSV export.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Db;
use crate::model::{CaptureSession, CommSession, SessionState};
use crate::time::Epoch;

pub const SESSION_CSV_HEADER: [&str; 10] = [
    "ses_type_ope",
    "sat_name",
    "loc_name",
    "beam",
    "t_start_utc",
    "loc_t_mel_utc",
    "loc_t_mel_local",
    "m_el_deg",
    "enabled",
    "priority",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionKind {
    Comm,
    Capture,
}

impl FromStr for SessionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "comm" => Ok(SessionKind::Comm),
            "capture" => Ok(SessionKind::Capture),
            other => Err(format!("unknown session type `{other}` (expected comm or capture)")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionFilter {
    pub from: Option<Epoch>,
    pub to: Option<Epoch>,
    pub sat: Option<String>,
    pub kind: Option<SessionKind>,
    /// Comm rows match on their flag; capture rows count as enabled once confirmed.
    pub enabled: Option<bool>,
}

/// One row of the unified list. Comm rows leave capture-only fields empty and vice versa.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRow {
    pub id: String,
    pub kind: SessionKind,
    /// AOS for comm rows, MEL for capture rows.
    pub t_sort: Epoch,
    pub sat_name: String,
    pub loc_name: String,
    pub beam: Option<String>,
    pub t_start_utc: Option<Epoch>,
    pub loc_t_mel_utc: Option<Epoch>,
    pub loc_t_mel_local: Option<Epoch>,
    pub m_el_deg: f64,
    pub enabled: Option<bool>,
    pub priority: Option<i32>,
    pub interference: Option<bool>,
    pub state: SessionState,
    pub revision: u64,
}

impl SessionRow {
    fn comm(s: &CommSession) -> Self {
        SessionRow {
            id: s.id.clone(),
            kind: SessionKind::Comm,
            t_sort: s.t_aos,
            sat_name: s.sat_name.clone(),
            loc_name: s.station_name.clone(),
            beam: Some(s.beam_label.clone()),
            t_start_utc: Some(s.t_aos),
            loc_t_mel_utc: None,
            loc_t_mel_local: None,
            m_el_deg: s.max_elevation,
            enabled: Some(s.enabled),
            priority: Some(s.priority),
            interference: Some(s.interference),
            state: s.state,
            revision: s.revision,
        }
    }

    fn capture(s: &CaptureSession) -> Self {
        SessionRow {
            id: s.id.clone(),
            kind: SessionKind::Capture,
            t_sort: s.t_mel,
            sat_name: s.sat_name.clone(),
            loc_name: s.location_name.clone(),
            beam: None,
            t_start_utc: None,
            loc_t_mel_utc: Some(s.t_mel),
            loc_t_mel_local: Some(s.local_clock_time),
            m_el_deg: s.elevation_at_target,
            enabled: None,
            priority: None,
            interference: None,
            state: s.state,
            revision: s.revision,
        }
    }

    fn is_enabled(&self) -> bool {
        self.enabled.unwrap_or(self.state == SessionState::Confirmed)
    }
}

impl SessionFilter {
    fn admits(&self, row: &SessionRow) -> bool {
        self.from.is_none_or(|t| row.t_sort >= t)
            && self.to.is_none_or(|t| row.t_sort < t)
            && self.sat.as_ref().is_none_or(|s| &row.sat_name == s)
            && self.kind.is_none_or(|k| row.kind == k)
            && self.enabled.is_none_or(|e| row.is_enabled() == e)
    }
}

impl Db {
    /// Comm and capture sessions merged and ordered by (timestamp, id).
    pub fn list_sessions(&self, filter: &SessionFilter) -> Vec<SessionRow> {
        let mut rows: Vec<SessionRow> = self
            .comm_sessions
            .values()
            .map(SessionRow::comm)
            .chain(self.capture_sessions.values().map(SessionRow::capture))
            .filter(|r| filter.admits(r))
            .collect();
        rows.sort_by(|a, b| a.t_sort.cmp(&b.t_sort).then_with(|| a.id.cmp(&b.id)));
        rows
    }
}

fn trim_float(v: f64) -> String {
    let text = format!("{v:.3}");
    text.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub fn sessions_csv(rows: &[SessionRow]) -> String {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    writer.write_record(SESSION_CSV_HEADER).expect("in-memory write");
    let time = |t: Option<Epoch>| t.map(Epoch::slash_format).unwrap_or_default();
    for r in rows {
        writer
            .write_record([
                match r.kind {
                    SessionKind::Comm => "Comm".to_string(),
                    SessionKind::Capture => "Capture".to_string(),
                },
                r.sat_name.clone(),
                r.loc_name.clone(),
                r.beam.clone().unwrap_or_default(),
                time(r.t_start_utc),
                time(r.loc_t_mel_utc),
                time(r.loc_t_mel_local),
                trim_float(r.m_el_deg),
                r.enabled.map(|e| e.to_string()).unwrap_or_default(),
                r.priority.map(|p| p.to_string()).unwrap_or_default(),
            ])
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}
