//! Service and CLI configuration: a TOML file plus environment overrides.
//!
//! ```toml
//! store = "satops.json"
//! bind = "127.0.0.1:8080"
//!
//! [[tokens]]
//! token = "op-secret"
//! principal = "alice"
//! role = "operator"
//!
//! [forecast]
//! provider = "grid"          # none | constant | grid | remote
//! path = "clouds.csv"
//!
//! [[satellites]]
//! id = "sat1"
//! name = "SAT1"
//! tle = """
//! 1 90001U ...
//! 2 90001 ...
//! """
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::astro::{parse_tle, GeodeticPoint};
use crate::forecast::{CloudForecastProvider, ConstantForecast, GridForecast, NoForecast, RemoteForecast};
use crate::model::{CommLink, Location, LocationKind, RequestTemplate, Satellite, Sensor};
use crate::passes::ConstraintSet;
use crate::store::{Db, RegistrationOptions, StoreError, DEFAULT_SETUP_S, DEFAULT_TEARDOWN_S, REQUEST_MAX_LEAD_S};

pub const ENV_BIND: &str = "SATOPS_BIND";
pub const ENV_STORE: &str = "SATOPS_STORE";
pub const ENV_OPERATOR_TOKEN: &str = "SATOPS_OPERATOR_TOKEN";
pub const ENV_USER_TOKEN: &str = "SATOPS_USER_TOKEN";
pub const ENV_FORECAST_ENDPOINT: &str = "SATOPS_FORECAST_ENDPOINT";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Read { path: String, message: String },
    #[error("configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Operator,
    DataUser,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenEntry {
    pub token: String,
    pub principal: String,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanningConfig {
    pub registration_horizon_days: f64,
    pub setup_s: i64,
    pub teardown_s: i64,
    pub max_resolution_factor: f64,
    pub max_cloud_pct: f64,
    pub require_sat_sunlit: bool,
    pub efficiency: f64,
    pub schedule_step_s: u32,
}

impl Default for PlanningConfig {
    fn default() -> Self {
        let c = ConstraintSet::default();
        PlanningConfig {
            registration_horizon_days: 7.0,
            setup_s: DEFAULT_SETUP_S,
            teardown_s: DEFAULT_TEARDOWN_S,
            max_resolution_factor: c.max_resolution_factor,
            max_cloud_pct: c.max_cloud_pct,
            require_sat_sunlit: c.require_sat_sunlit,
            efficiency: crate::agent::DEFAULT_EFFICIENCY,
            schedule_step_s: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastKind {
    #[default]
    None,
    Constant,
    Grid,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastConfig {
    pub provider: ForecastKind,
    pub value: f64,
    pub path: Option<PathBuf>,
    pub band_deg: f64,
    pub endpoint: Option<String>,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig {
            provider: ForecastKind::None,
            value: 0.0,
            path: None,
            band_deg: 1.0,
            endpoint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatelliteConfig {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub norad_id: Option<u32>,
    /// Two or three line element set.
    #[serde(default)]
    pub tle: Option<String>,
    pub links: Vec<CommLink>,
    #[serde(default)]
    pub sensors: Vec<Sensor>,
    #[serde(default)]
    pub priority_class: i32,
    #[serde(default = "yes")]
    pub active: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationConfig {
    pub id: String,
    #[serde(default)]
    pub name: Option<String>,
    pub lat: f64,
    pub lon: f64,
    #[serde(default)]
    pub alt_m: f64,
    #[serde(default)]
    pub utc_offset_hours: f64,
    pub kind: LocationKind,
    #[serde(default)]
    pub links_supported: Vec<String>,
    #[serde(default)]
    pub min_elevation_mask: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub store: PathBuf,
    pub bind: String,
    pub templates_dir: Option<PathBuf>,
    pub tokens: Vec<TokenEntry>,
    pub planning: PlanningConfig,
    pub forecast: ForecastConfig,
    pub satellites: Vec<SatelliteConfig>,
    pub locations: Vec<LocationConfig>,
    pub templates: Vec<RequestTemplate>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            store: PathBuf::from("satops.json"),
            bind: "127.0.0.1:8080".into(),
            templates_dir: None,
            tokens: Vec::new(),
            planning: PlanningConfig::default(),
            forecast: ForecastConfig::default(),
            satellites: Vec::new(),
            locations: Vec::new(),
            templates: Vec::new(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: Config = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Reads `path`, then applies the process environment.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut config = Self::from_toml(&text)?;
        config.apply_env(|k| std::env::var(k).ok());
        Ok(config)
    }

    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) {
        if let Some(bind) = var(ENV_BIND) {
            self.bind = bind;
        }
        if let Some(store) = var(ENV_STORE) {
            self.store = PathBuf::from(store);
        }
        for (key, role, principal) in [
            (ENV_OPERATOR_TOKEN, Role::Operator, "operator"),
            (ENV_USER_TOKEN, Role::DataUser, "user"),
        ] {
            if let Some(token) = var(key) {
                self.tokens.retain(|t| t.role != role || t.principal != principal);
                self.tokens.push(TokenEntry {
                    token,
                    principal: principal.into(),
                    role,
                });
            }
        }
        if let Some(endpoint) = var(ENV_FORECAST_ENDPOINT) {
            self.forecast.provider = ForecastKind::Remote;
            self.forecast.endpoint = Some(endpoint);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let horizon_s = self.planning.registration_horizon_days * 86_400.0;
        if !(horizon_s >= REQUEST_MAX_LEAD_S) {
            return Err(ConfigError::Invalid(
                "registration horizon must cover the 12 h request window".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.planning.efficiency) {
            return Err(ConfigError::Invalid("planning.efficiency must lie in [0, 1]".into()));
        }
        if self.planning.schedule_step_s == 0 {
            return Err(ConfigError::Invalid("planning.schedule_step_s must be at least 1".into()));
        }
        self.constraints().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let mut seen = std::collections::BTreeSet::new();
        for t in &self.tokens {
            if !seen.insert(&t.token) {
                return Err(ConfigError::Invalid(format!("token for {} is not unique", t.principal)));
            }
        }
        match self.forecast.provider {
            ForecastKind::Grid if self.forecast.path.is_none() => {
                Err(ConfigError::Invalid("forecast.provider = \"grid\" needs forecast.path".into()))
            }
            ForecastKind::Remote if self.forecast.endpoint.is_none() => {
                Err(ConfigError::Invalid("forecast.provider = \"remote\" needs forecast.endpoint".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn role_of(&self, token: &str) -> Option<&TokenEntry> {
        self.tokens.iter().find(|t| t.token == token)
    }

    pub fn constraints(&self) -> ConstraintSet {
        ConstraintSet {
            max_resolution_factor: self.planning.max_resolution_factor,
            min_sun_el_deg: None,
            max_cloud_pct: self.planning.max_cloud_pct,
            require_sat_sunlit: self.planning.require_sat_sunlit,
        }
    }

    pub fn registration(&self) -> RegistrationOptions {
        RegistrationOptions {
            horizon_s: self.planning.registration_horizon_days * 86_400.0,
            setup_s: self.planning.setup_s,
            teardown_s: self.planning.teardown_s,
        }
    }

    pub fn forecast_provider(&self) -> Result<Arc<dyn CloudForecastProvider>, ConfigError> {
        let f = &self.forecast;
        Ok(match f.provider {
            ForecastKind::None => Arc::new(NoForecast),
            ForecastKind::Constant => Arc::new(ConstantForecast(f.value)),
            ForecastKind::Grid => {
                let path = f.path.as_ref().expect("validated");
                Arc::new(GridForecast::from_file(path, f.band_deg).map_err(|e| ConfigError::Read {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?)
            }
            ForecastKind::Remote => Arc::new(RemoteForecast::new(f.endpoint.clone().expect("validated"))),
        })
    }

    /// Loads the configured satellites, locations and request templates into `db`.
    pub fn bootstrap(&self, db: &mut Db) -> Result<(), StoreError> {
        for s in &self.satellites {
            let tle = match &s.tle {
                Some(text) => Some(parse_tle(text).map_err(|e| StoreError::Invalid(format!("{}: {e}", s.name)))?),
                None => None,
            };
            let norad_id = s.norad_id.or(tle.as_ref().map(|t| t.norad_id)).unwrap_or(0);
            db.upsert_satellite(Satellite {
                id: s.id.clone(),
                name: s.name.clone(),
                norad_id,
                tle,
                links: s.links.clone(),
                sensors: s.sensors.clone(),
                priority_class: s.priority_class,
                active: s.active,
            })?;
        }
        for l in &self.locations {
            let point = GeodeticPoint::new(l.lat, l.lon, l.alt_m)
                .map_err(|e| StoreError::Invalid(format!("location {}: {e}", l.id)))?;
            db.upsert_location(Location {
                id: l.id.clone(),
                name: l.name.clone().unwrap_or_else(|| l.id.clone()),
                point,
                utc_offset_hours: l.utc_offset_hours,
                kind: l.kind,
                links_supported: l.links_supported.clone(),
                min_elevation_mask: l.min_elevation_mask,
            })?;
        }
        for t in &self.templates {
            db.upsert_template(t.clone());
        }
        Ok(())
    }
}
