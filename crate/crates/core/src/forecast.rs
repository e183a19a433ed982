//! Cloud-cover forecast providers.
//!
//! Callers never see provider failures: anything that is not a timely, valid
//! percentage degrades to [`CloudCover::Unknown`].

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::time::Epoch;

/// Time budget for a single remote forecast lookup.
pub const FORECAST_BUDGET: Duration = Duration::from_secs(2);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "percent")]
pub enum CloudCover {
    Known(f64),
    Unknown,
}

impl CloudCover {
    pub fn percent(self) -> Option<f64> {
        match self {
            CloudCover::Known(p) => Some(p),
            CloudCover::Unknown => None,
        }
    }
}

pub trait CloudForecastProvider: Send + Sync {
    fn query(&self, lat: f64, lon: f64, t: Epoch) -> CloudCover;
}

/// Provider that knows nothing.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoForecast;

impl CloudForecastProvider for NoForecast {
    fn query(&self, _lat: f64, _lon: f64, _t: Epoch) -> CloudCover {
        CloudCover::Unknown
    }
}

/// Same value everywhere; handy for scenarios and tests.
#[derive(Debug, Clone, Copy)]
pub struct ConstantForecast(pub f64);

impl CloudForecastProvider for ConstantForecast {
    fn query(&self, _lat: f64, _lon: f64, _t: Epoch) -> CloudCover {
        CloudCover::Known(self.0)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ForecastFileError {
    #[error("reading forecast grid: {0}")]
    Io(#[from] std::io::Error),
    #[error("forecast grid line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum HourKey {
    Any,
    At(i64),
}

/// File-backed gridded forecast keyed by (latitude band, longitude band, UTC hour).
///
/// CSV with header `lat_band,lon_band,hour,cloud_pct`. Band columns hold the
/// lower band edge in degrees; `hour` is an ISO-8601 hour (`2021-05-11T04:00:00Z`)
/// or `*` for every hour. Missing cells are [`CloudCover::Unknown`].
#[derive(Debug, Clone)]
pub struct GridForecast {
    band_deg: f64,
    cells: HashMap<(i64, i64, HourKey), f64>,
}

impl GridForecast {
    pub fn new(band_deg: f64) -> Self {
        GridForecast {
            band_deg,
            cells: HashMap::new(),
        }
    }

    fn band(&self, deg: f64) -> i64 {
        (deg / self.band_deg).floor() as i64
    }

    /// Sets the cell containing (lat, lon) for the hour containing `hour`, or all hours when `None`.
    pub fn set(&mut self, lat: f64, lon: f64, hour: Option<Epoch>, percent: f64) {
        let key = match hour {
            Some(t) => HourKey::At(t.start_of_utc_hour().unix_millis()),
            None => HourKey::Any,
        };
        self.cells
            .insert((self.band(lat), self.band(lon), key), percent.clamp(0.0, 100.0));
    }

    pub fn from_csv(text: &str, band_deg: f64) -> Result<Self, ForecastFileError> {
        let mut grid = GridForecast::new(band_deg);
        for (index, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (index == 0 && line.starts_with("lat_band")) {
                continue;
            }
            let err = |message: &str| ForecastFileError::Format {
                line: index + 1,
                message: message.to_string(),
            };
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let [lat, lon, hour, pct] = cols.as_slice() else {
                return Err(err("expected 4 columns"));
            };
            let lat: f64 = lat.parse().map_err(|_| err("bad lat_band"))?;
            let lon: f64 = lon.parse().map_err(|_| err("bad lon_band"))?;
            let pct: f64 = pct.parse().map_err(|_| err("bad cloud_pct"))?;
            let hour = match *hour {
                "*" => None,
                h => Some(Epoch::parse(h).map_err(|_| err("bad hour"))?),
            };
            // Nudge into the band so that edge values land in the intended cell.
            let eps = band_deg * 1e-9;
            grid.set(lat + eps, lon + eps, hour, pct);
        }
        Ok(grid)
    }

    pub fn from_file(path: &Path, band_deg: f64) -> Result<Self, ForecastFileError> {
        Self::from_csv(&std::fs::read_to_string(path)?, band_deg)
    }
}

impl CloudForecastProvider for GridForecast {
    fn query(&self, lat: f64, lon: f64, t: Epoch) -> CloudCover {
        let (la, lo) = (self.band(lat), self.band(lon));
        let hour = HourKey::At(t.start_of_utc_hour().unix_millis());
        self.cells
            .get(&(la, lo, hour))
            .or_else(|| self.cells.get(&(la, lo, HourKey::Any)))
            .map_or(CloudCover::Unknown, |&p| CloudCover::Known(p))
    }
}

/// HTTP adapter: `GET <endpoint>?lat=..&lon=..&time=<iso>` answering a bare percentage.
pub struct RemoteForecast {
    endpoint: String,
    agent: ureq::Agent,
}

impl RemoteForecast {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self::with_budget(endpoint, FORECAST_BUDGET)
    }

    pub fn with_budget(endpoint: impl Into<String>, budget: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(budget))
            .http_status_as_error(false)
            .build()
            .into();
        RemoteForecast {
            endpoint: endpoint.into(),
            agent,
        }
    }

    fn fetch(&self, lat: f64, lon: f64, t: Epoch) -> Result<f64, String> {
        let mut response = self
            .agent
            .get(&self.endpoint)
            .query("lat", lat.to_string())
            .query("lon", lon.to_string())
            .query("time", t.iso_seconds())
            .call()
            .map_err(|e| e.to_string())?;
        if response.status() != 200 {
            return Err(format!("status {}", response.status()));
        }
        let mut body = String::new();
        response
            .body_mut()
            .as_reader()
            .take(64)
            .read_to_string(&mut body)
            .map_err(|e| e.to_string())?;
        let value: f64 = body.trim().parse().map_err(|_| format!("bad body `{}`", body.trim()))?;
        if (0.0..=100.0).contains(&value) {
            Ok(value)
        } else {
            Err(format!("percentage {value} out of range"))
        }
    }
}

impl CloudForecastProvider for RemoteForecast {
    fn query(&self, lat: f64, lon: f64, t: Epoch) -> CloudCover {
        match self.fetch(lat, lon, t) {
            Ok(p) => CloudCover::Known(p),
            Err(reason) => {
                tracing::warn!(endpoint = %self.endpoint, %reason, "cloud forecast unavailable");
                CloudCover::Unknown
            }
        }
    }
}
