//! Turning stored sessions into template jobs and a CMD file.

use serde::Serialize;

use crate::astro::OutOfEphemerisRange;
use crate::error::{Coded, ErrorClass};
use crate::geometry::{beta_angle, local_clock_time, local_solar_time, solar_elevation};
use crate::model::{CaptureSession, CommSession, SessionState, SlotState, TemplateKind};
use crate::store::{Db, StoreError};
use crate::template::{
    context_schema, generate_cmd_file, lint_template, CmdFile, Diagnostic, PlaybackItem, SessionContext, SessionJob,
    TemplateError, TemplateSet,
};
use crate::time::Epoch;

/// Seconds before and after MEL covered by each session type.
pub fn session_lead_lag(kind: TemplateKind) -> (i64, i64) {
    match kind {
        TemplateKind::Routine => (720, 600),
        TemplateKind::XbandDownload => (900, 600),
        TemplateKind::SmiMfc | TemplateKind::HptMfc => (900, 300),
    }
}

/// Session start and end, whole seconds around MEL.
pub fn session_window(kind: TemplateKind, t_mel: Epoch) -> (Epoch, Epoch) {
    let (lead, lag) = session_lead_lag(kind);
    let mel = t_mel.round_to_second();
    (mel.add_millis(-lead * 1000), mel.add_millis(lag * 1000))
}

/// X-band downlinks play back stored images; every other link runs the routine template.
pub fn comm_template(link_name: &str) -> TemplateKind {
    if link_name.eq_ignore_ascii_case("XTLM") {
        TemplateKind::XbandDownload
    } else {
        TemplateKind::Routine
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PlanError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("no solar ephemeris for {0}")]
    Ephemeris(Epoch),
    #[error("satellite {0} has no element set")]
    NoElements(String),
}

impl From<OutOfEphemerisRange> for PlanError {
    fn from(e: OutOfEphemerisRange) -> Self {
        PlanError::Ephemeris(e.0)
    }
}

impl Coded for PlanError {
    fn code(&self) -> &'static str {
        match self {
            PlanError::Store(e) => e.code(),
            PlanError::Template(e) => e.code(),
            PlanError::Ephemeris(_) => "EPHEMERIS_OUT_OF_RANGE",
            PlanError::NoElements(_) => "NO_ELEMENTS",
        }
    }

    fn class(&self) -> ErrorClass {
        match self {
            PlanError::Store(e) => e.class(),
            PlanError::Template(e) => e.class(),
            _ => ErrorClass::Unprocessable,
        }
    }
}

fn comm_context(db: &Db, s: &CommSession) -> Result<SessionContext, PlanError> {
    let sat = db.satellite(&s.sat_name)?;
    let elements = sat.tle.as_ref().ok_or_else(|| PlanError::NoElements(sat.name.clone()))?;
    let station = db.location(&s.station_name)?;
    let (start, end) = session_window(comm_template(&s.link_name), s.t_mel);
    let mut c = SessionContext::new();
    c.time("ses_t_start_utc", start)
        .time("ses_t_end_utc", end)
        .time("loc_t_aos_utc", s.t_aos)
        .time("loc_t_mel_utc", s.t_mel)
        .time("loc_t_los_utc", s.t_los)
        // A pass that never reaches 5 degrees leaves no playback time.
        .time("loc_t_los5_utc", s.t_los5.unwrap_or(s.t_aos))
        .time("loc_t_mel_local", local_clock_time(s.t_mel, station.utc_offset_hours))
        .text("loc_name", &station.name)
        .num("loc_lat_deg", station.point.latitude)
        .num("loc_lon_deg", station.point.longitude)
        .num("m_el_deg", s.max_elevation)
        .num("sat_sunlit", if s.sunlit { 1.0 } else { 0.0 })
        .num("sun_el_deg", solar_elevation(&station.point, s.t_mel)?)
        .num("orb_sun_deg", beta_angle(elements, s.t_mel)?)
        .num("sat_t_mel_lst", local_solar_time(station.point.longitude, s.t_mel))
        .text("sat_name", &s.sat_name)
        .text("link_name", &s.link_name);
    Ok(c)
}

fn capture_context(db: &Db, s: &CaptureSession) -> SessionContext {
    let (start, end) = session_window(s.cmd_template, s.t_mel);
    let mut c = SessionContext::new();
    c.time("ses_t_start_utc", start)
        .time("ses_t_end_utc", end)
        .time("loc_t_mel_utc", s.t_mel)
        .time("loc_t_mel_local", s.local_clock_time)
        .text("loc_name", &s.location_name)
        .num("loc_lat_deg", s.location.latitude)
        .num("loc_lon_deg", s.location.longitude)
        .num("m_el_deg", s.elevation_at_target)
        .num("sat_sunlit", if s.sunlit { 1.0 } else { 0.0 })
        .num("sun_el_deg", s.sun_el_deg)
        .num("orb_sun_deg", s.orb_sun_deg)
        .num("sat_t_mel_lst", s.local_solar_time)
        .num("res_factor", s.resolution_factor)
        .num("roll_deg", s.roll_deg)
        .text("sat_name", &s.sat_name)
        .text("sensor_name", &s.sensor_name);
    if let Some(cloud) = s.cloud_pct {
        c.num("cloud_pct", cloud);
    }
    let addresses = db
        .registries
        .get(&s.sat_name)
        .map(|r| r.addresses_for(&s.id))
        .unwrap_or_default();
    c.with_queue(addresses)
}

/// Enabled, non-interfering comm sessions and confirmed captures of one
/// satellite whose session window starts in `[from, until)`, plus the pool
/// of stored images awaiting playback.
pub fn plan_jobs(db: &Db, sat: &str, from: Epoch, until: Epoch) -> Result<(Vec<SessionJob>, Vec<PlaybackItem>), PlanError> {
    let sat_name = db.satellite(sat)?.name.clone();
    let in_range = |t: Epoch| t >= from && t < until;
    let mut jobs = Vec::new();
    for s in db.comm_sessions.values() {
        if s.sat_name != sat_name || !s.enabled || s.interference {
            continue;
        }
        let kind = comm_template(&s.link_name);
        let (start, _) = session_window(kind, s.t_mel);
        if in_range(start) {
            jobs.push(SessionJob {
                session_id: s.id.clone(),
                kind,
                t_start: start,
                ctx: comm_context(db, s)?,
                draws_playback: kind == TemplateKind::XbandDownload,
            });
        }
    }
    for s in db.capture_sessions.values() {
        if s.sat_name != sat_name || s.state != SessionState::Confirmed {
            continue;
        }
        let (start, _) = session_window(s.cmd_template, s.t_mel);
        if in_range(start) {
            jobs.push(SessionJob {
                session_id: s.id.clone(),
                kind: s.cmd_template,
                t_start: start,
                ctx: capture_context(db, s),
                draws_playback: false,
            });
        }
    }
    jobs.sort_by(|a, b| (a.t_start, &a.session_id).cmp(&(b.t_start, &b.session_id)));
    for (i, job) in jobs.iter_mut().enumerate() {
        job.ctx.num("ses_index", i as f64);
    }

    let mut pool = Vec::new();
    if let Some(registry) = db.registries.get(&sat_name) {
        for address in registry.playback_queue() {
            let Some(slot) = registry.slots().iter().find(|s| s.address == address) else { continue };
            let SlotState::Allocated { session_id, .. } = &slot.state else { continue };
            // Images exist once their capture has happened.
            let Some(capture) = db.capture_sessions.get(session_id) else { continue };
            pool.push(PlaybackItem {
                address,
                ready_at: capture.t_mel,
            });
        }
    }
    Ok((jobs, pool))
}

#[derive(Debug, Clone, Serialize)]
pub struct CmdReport {
    pub satellite: String,
    pub from: Epoch,
    pub until: Epoch,
    pub sessions: Vec<String>,
    pub played_back: Vec<String>,
    pub total_duration_s: f64,
    pub diagnostics: Vec<Diagnostic>,
    #[serde(skip)]
    pub file: CmdFile,
}

impl CmdReport {
    pub fn text(&self) -> String {
        self.file.to_text()
    }
}

/// Builds the CMD file for one satellite. Reads the store only.
pub fn generate_satellite_cmd(
    db: &Db,
    sat: &str,
    from: Epoch,
    until: Epoch,
    templates: &TemplateSet,
) -> Result<CmdReport, PlanError> {
    let (jobs, pool) = plan_jobs(db, sat, from, until)?;
    let schema = context_schema();
    let mut kinds: Vec<TemplateKind> = jobs.iter().map(|j| j.kind).collect();
    kinds.sort();
    kinds.dedup();
    let diagnostics = kinds
        .into_iter()
        .flat_map(|k| lint_template(templates.get(k), &schema))
        .collect();
    let file = generate_cmd_file(&jobs, templates, &pool)?;
    Ok(CmdReport {
        satellite: db.satellite(sat)?.name.clone(),
        from,
        until,
        sessions: file.sections.iter().map(|s| s.session_id.clone()).collect(),
        played_back: file.played_back().map(str::to_string).collect(),
        total_duration_s: file.total_duration_s(),
        diagnostics,
        file,
    })
}
