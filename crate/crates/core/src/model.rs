//! Records held by the session store.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::astro::{GeodeticPoint, OrbitalElements};
use crate::time::Epoch;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sensor {
    pub id: String,
    pub name: String,
    /// Ground sample distance at nadir, metres.
    pub gsd_m: f64,
    /// Image footprint (along-track, cross-track), km.
    pub swath_km: (f64, f64),
    pub min_sun_el_deg: f64,
    #[serde(default)]
    pub spectral: String,
}

impl Sensor {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gsd_m > 0.0) {
            return Err(format!("sensor {}: gsd_m must be positive", self.name));
        }
        if !(0.0..=90.0).contains(&self.min_sun_el_deg) {
            return Err(format!("sensor {}: min_sun_el_deg outside [0, 90]", self.name));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkDirection {
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommLink {
    /// UCMD, SCMD, STLM, XTLM, ...
    pub name: String,
    pub direction: LinkDirection,
    pub rate_bps: f64,
    #[serde(default)]
    pub band: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Satellite {
    pub id: String,
    pub name: String,
    pub norad_id: u32,
    #[serde(default)]
    pub tle: Option<OrbitalElements>,
    pub links: Vec<CommLink>,
    #[serde(default)]
    pub sensors: Vec<Sensor>,
    #[serde(default)]
    pub priority_class: i32,
    #[serde(default = "default_true")]
    pub active: bool,
}

fn default_true() -> bool {
    true
}

impl Satellite {
    pub fn link(&self, name: &str) -> Option<&CommLink> {
        self.links.iter().find(|l| l.name == name)
    }

    pub fn sensor(&self, name: &str) -> Option<&Sensor> {
        self.sensors.iter().find(|s| s.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationKind {
    Station,
    Target,
}

/// A ground station (CommLocation) or an imaging target (CapLocation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub id: String,
    pub name: String,
    pub point: GeodeticPoint,
    #[serde(default)]
    pub utc_offset_hours: f64,
    pub kind: LocationKind,
    #[serde(default)]
    pub links_supported: Vec<String>,
    #[serde(default)]
    pub min_elevation_mask: f64,
}

impl Location {
    pub fn validate(&self) -> Result<(), String> {
        if !(-12.0..=14.0).contains(&self.utc_offset_hours) {
            return Err(format!("location {}: utc offset outside [-12, +14]", self.name));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Tentative,
    Confirmed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommSession {
    pub id: String,
    pub sat_name: String,
    pub station_name: String,
    pub link_name: String,
    pub max_elevation: f64,
    pub sunlit: bool,
    pub interference: bool,
    pub enabled: bool,
    pub t_aos: Epoch,
    pub t_mel: Epoch,
    pub t_los: Epoch,
    #[serde(default)]
    pub t_los5: Option<Epoch>,
    pub priority: i32,
    pub beam_label: String,
    pub state: SessionState,
    /// Bumped on every change; lets clients detect stale views.
    #[serde(default)]
    pub revision: u64,
}

impl CommSession {
    pub fn refresh_beam_label(&mut self) {
        self.beam_label = if self.enabled {
            self.link_name.clone()
        } else {
            format!("{}-dis", self.link_name)
        };
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureSession {
    pub id: String,
    pub sat_name: String,
    pub sensor_name: String,
    pub location_name: String,
    pub location: GeodeticPoint,
    #[serde(default)]
    pub utc_offset_hours: f64,
    pub t_mel: Epoch,
    pub elevation_at_target: f64,
    pub roll_deg: f64,
    pub sunlit: bool,
    pub sun_el_deg: f64,
    pub orb_sun_deg: f64,
    pub local_solar_time: f64,
    pub local_clock_time: Epoch,
    pub resolution_factor: f64,
    pub cloud_pct: Option<f64>,
    /// False when the forecast was unknown: shown to users but never picked automatically.
    pub auto_selectable: bool,
    pub state: SessionState,
    pub request_id: String,
    pub cmd_template: TemplateKind,
    #[serde(default)]
    pub revision: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    Routine,
    XbandDownload,
    SmiMfc,
    HptMfc,
}

impl TemplateKind {
    pub const ALL: [TemplateKind; 4] = [
        TemplateKind::Routine,
        TemplateKind::XbandDownload,
        TemplateKind::SmiMfc,
        TemplateKind::HptMfc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateKind::Routine => "routine",
            TemplateKind::XbandDownload => "xband_download",
            TemplateKind::SmiMfc => "smi_mfc",
            TemplateKind::HptMfc => "hpt_mfc",
        }
    }

    pub fn is_imaging(self) -> bool {
        matches!(self, TemplateKind::SmiMfc | TemplateKind::HptMfc)
    }
}

impl fmt::Display for TemplateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown template type `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestStatus {
    Open,
    CandidatesIssued,
    Confirmed,
    Expired,
}

impl RequestStatus {
    /// The only transitions the request lifecycle admits.
    pub fn can_become(self, next: RequestStatus) -> bool {
        use RequestStatus::*;
        matches!(
            (self, next),
            (Open, CandidatesIssued) | (Open, Expired) | (CandidatesIssued, Confirmed) | (CandidatesIssued, Expired)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RequestTarget {
    Location { id: String },
    Point { name: String, point: GeodeticPoint },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: String,
    pub user_id: String,
    pub template_id: String,
    pub target: RequestTarget,
    pub target_name: String,
    pub target_point: GeodeticPoint,
    pub window_start: Epoch,
    pub window_end: Epoch,
    pub status: RequestStatus,
    pub created_at: Epoch,
}

/// A predefined imaging request a data user can pick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestTemplate {
    pub id: String,
    pub sensor_name: String,
    pub cmd_template: TemplateKind,
    #[serde(default = "default_slots")]
    pub slots_per_capture: usize,
    #[serde(default)]
    pub max_resolution_factor: Option<f64>,
    #[serde(default)]
    pub max_cloud_pct: Option<f64>,
}

fn default_slots() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "state")]
pub enum SlotState {
    Free,
    Allocated { session_id: String, seq: u64 },
    Downlinked { session_id: String, seq: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddressSlot {
    pub address: String,
    pub state: SlotState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownlinkRecord {
    pub session_id: String,
    pub sat_name: String,
    pub station_name: String,
    pub link_name: String,
    pub rate_bps: f64,
    pub t_start: Epoch,
    pub t_end: Epoch,
    pub bytes: u64,
    pub synced: bool,
    pub file_manifest: Vec<ManifestEntry>,
    /// Memory addresses whose contents were played back during the track.
    #[serde(default)]
    pub played_back: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub when: Epoch,
    pub actor: String,
    pub session_id: String,
    pub field: String,
    pub old: String,
    pub new: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Notification {
    pub id: u64,
    pub created: Epoch,
    pub sat_name: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegisteredFile {
    pub name: String,
    pub bytes: u64,
    pub session_id: String,
    pub registered_at: Epoch,
}

/// One completed run of a scheduled job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRun {
    pub job: String,
    /// The period the run covers, e.g. a UTC date.
    pub period: String,
    pub at: Epoch,
    pub summary: String,
}
