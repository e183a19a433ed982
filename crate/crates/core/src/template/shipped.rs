//! The four standard templates and the variables a session context binds.

use std::collections::BTreeMap;
use std::path::Path;

use super::ast::TemplateProgram;
use super::parser::parse_template;
use super::TemplateError;
use crate::model::TemplateKind;

/// Every name a session context may bind, besides the built-ins.
pub const CONTEXT_VARIABLES: &[&str] = &[
    "ses_index",
    "ses_t_start_utc",
    "ses_t_end_utc",
    "loc_t_aos_utc",
    "loc_t_mel_utc",
    "loc_t_los_utc",
    "loc_t_los5_utc",
    "loc_t_mel_local",
    "loc_name",
    "loc_lat_deg",
    "loc_lon_deg",
    "m_el_deg",
    "sat_sunlit",
    "sun_el_deg",
    "orb_sun_deg",
    "sat_t_mel_lst",
    "res_factor",
    "roll_deg",
    "cloud_pct",
    "sat_name",
    "sensor_name",
    "link_name",
];

pub const BUILTINS: &[&str] = &["t_cursor", "addr_count", "next_addr"];

/// Declared variables plus built-ins.
pub fn context_schema() -> Vec<&'static str> {
    CONTEXT_VARIABLES.iter().chain(BUILTINS).copied().collect()
}

pub fn shipped_source(kind: TemplateKind) -> &'static str {
    match kind {
        TemplateKind::Routine => include_str!("../../templates/routine.cmdt"),
        TemplateKind::XbandDownload => include_str!("../../templates/xband_download.cmdt"),
        TemplateKind::SmiMfc => include_str!("../../templates/smi_mfc.cmdt"),
        TemplateKind::HptMfc => include_str!("../../templates/hpt_mfc.cmdt"),
    }
}

pub fn shipped_template(kind: TemplateKind) -> TemplateProgram {
    parse_template(shipped_source(kind)).expect("shipped templates parse")
}

/// One program per template type.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSet {
    programs: BTreeMap<TemplateKind, TemplateProgram>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::shipped()
    }
}

impl TemplateSet {
    pub fn shipped() -> Self {
        let programs = TemplateKind::ALL.into_iter().map(|k| (k, shipped_template(k))).collect();
        Self { programs }
    }

    /// Shipped templates, overridden by any `<type>.cmdt` found in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, (String, TemplateError)> {
        let mut set = Self::shipped();
        for kind in TemplateKind::ALL {
            let path = dir.join(format!("{kind}.cmdt"));
            if let Ok(text) = std::fs::read_to_string(&path) {
                let program = parse_template(&text).map_err(|e| (path.display().to_string(), e))?;
                set.programs.insert(kind, program);
            }
        }
        Ok(set)
    }

    pub fn get(&self, kind: TemplateKind) -> &TemplateProgram {
        &self.programs[&kind]
    }

    pub fn insert(&mut self, kind: TemplateKind, program: TemplateProgram) {
        self.programs.insert(kind, program);
    }
}
