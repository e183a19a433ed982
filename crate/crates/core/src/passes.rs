//! Communication-pass and imaging-opportunity search.
//!
//! The elevation curve is sampled on a coarse grid (30 s by default). Every
//! sampled local maximum is refined by golden-section search, so passes that
//! peak between samples are still found; threshold crossings are then
//! bracketed on the grid and refined by bisection.

use serde::{Deserialize, Serialize};

use crate::astro::frames::GeodeticPoint;
use crate::astro::propagate::{PropagationError, Propagator, Sgp4Propagator};
use crate::astro::sun::{sun_direction, OutOfEphemerisRange};
use crate::astro::{eci_to_ecef, OrbitalElements};
use crate::forecast::{CloudCover, CloudForecastProvider};
use crate::geometry::{illumination, is_sunlit, pointing_geometry, topocentric};
use crate::model::Sensor;
use crate::time::Epoch;

pub const DEFAULT_COARSE_STEP_S: f64 = 30.0;
/// Crossing and maximum refinement tolerance.
pub const REFINE_TOLERANCE_S: f64 = 1e-3;
pub const MAX_COMM_WINDOW_DAYS: f64 = 31.0;
pub const MAX_CAPTURE_WINDOW_DAYS: f64 = 14.0;
pub const LOS5_ELEVATION_DEG: f64 = 5.0;
/// Sampled maxima this far below the threshold are still refined.
const GRAZING_MARGIN_DEG: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PassError {
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    Ephemeris(#[from] OutOfEphemerisRange),
    #[error("search window ends before it starts")]
    EmptyWindow,
    #[error("search window of {days:.2} days exceeds {max} days")]
    WindowTooLong { days: f64, max: f64 },
    #[error("minimum elevation {0} deg outside [0, 20]")]
    InvalidThreshold(f64),
    #[error("pass peaks at {0:.3} deg and never rises above 5 deg")]
    NeverAboveFive(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: Epoch,
    pub end: Epoch,
}

impl TimeWindow {
    pub fn new(start: Epoch, end: Epoch) -> Self {
        TimeWindow { start, end }
    }

    pub fn seconds(&self) -> f64 {
        self.end.seconds_since(self.start)
    }

    pub fn contains(&self, t: Epoch) -> bool {
        self.start <= t && t <= self.end
    }

    fn checked(&self, max_days: f64) -> Result<(), PassError> {
        if self.end < self.start {
            return Err(PassError::EmptyWindow);
        }
        let days = self.seconds() / 86_400.0;
        if days > max_days {
            return Err(PassError::WindowTooLong { days, max: max_days });
        }
        Ok(())
    }
}

/// A named point on the ground.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub id: String,
    pub point: GeodeticPoint,
    #[serde(default)]
    pub utc_offset_hours: f64,
}

impl Site {
    pub fn new(id: impl Into<String>, point: GeodeticPoint) -> Self {
        Site {
            id: id.into(),
            point,
            utc_offset_hours: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pass {
    pub satellite_id: String,
    pub location_id: String,
    pub t_aos: Epoch,
    pub t_mel: Epoch,
    pub t_los: Epoch,
    pub t_los5: Option<Epoch>,
    pub max_elevation: f64,
    pub sunlit_at_mel: bool,
}

impl Pass {
    pub fn duration_seconds(&self) -> f64 {
        self.t_los.seconds_since(self.t_aos)
    }
}

/// Elevation of a satellite above a site's horizon as a function of time.
pub struct ElevationCurve<'a> {
    propagator: &'a dyn Propagator,
    site: GeodeticPoint,
}

impl<'a> ElevationCurve<'a> {
    pub fn new(propagator: &'a dyn Propagator, site: GeodeticPoint) -> Self {
        ElevationCurve { propagator, site }
    }

    pub fn at(&self, t: Epoch) -> Result<f64, PropagationError> {
        let state = self.propagator.propagate(t)?;
        Ok(topocentric(&self.site, eci_to_ecef(&state)).elevation)
    }

    /// Elevation at `seconds` after `origin`, at millisecond resolution.
    fn at_offset(&self, origin: Epoch, seconds: f64) -> Result<f64, PropagationError> {
        self.at(origin.add_seconds(seconds))
    }
}

/// A refined local maximum of a sampled curve, plus the grid it came from.
struct Peak {
    t: f64,
    value: f64,
    index: usize,
}

/// Grid search state over one window, in seconds from `origin`.
struct Scan<'c, 'a> {
    curve: &'c ElevationCurve<'a>,
    origin: Epoch,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl<'c, 'a> Scan<'c, 'a> {
    fn run(curve: &'c ElevationCurve<'a>, window: TimeWindow, step: f64) -> Result<Self, PassError> {
        let total = window.seconds();
        let mut times = Vec::new();
        let mut t = 0.0;
        while t < total {
            times.push(t);
            t += step;
        }
        times.push(total);
        let values = times
            .iter()
            .map(|&t| curve.at_offset(window.start, t))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Scan {
            curve,
            origin: window.start,
            times,
            values,
        })
    }

    fn eval(&self, t: f64) -> Result<f64, PassError> {
        Ok(self.curve.at_offset(self.origin, t)?)
    }

    fn epoch(&self, t: f64) -> Epoch {
        self.origin.add_seconds(t)
    }

    /// Refined interior maxima whose sampled value is within reach of `floor`.
    fn peaks(&self, floor: f64) -> Result<Vec<Peak>, PassError> {
        let v = &self.values;
        let mut out = Vec::new();
        for i in 1..v.len().saturating_sub(1) {
            if v[i] > v[i - 1] && v[i] >= v[i + 1] && v[i] > floor - GRAZING_MARGIN_DEG {
                let (t, value) = self.golden_max(self.times[i - 1], self.times[i + 1])?;
                let (t, value) = if value >= v[i] { (t, value) } else { (self.times[i], v[i]) };
                out.push(Peak { t, value, index: i });
            }
        }
        Ok(out)
    }

    fn golden_max(&self, mut a: f64, mut b: f64) -> Result<(f64, f64), PassError> {
        let ratio = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - ratio * (b - a);
        let mut d = a + ratio * (b - a);
        let mut fc = self.eval(c)?;
        let mut fd = self.eval(d)?;
        while b - a > REFINE_TOLERANCE_S {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - ratio * (b - a);
                fc = self.eval(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + ratio * (b - a);
                fd = self.eval(d)?;
            }
        }
        let t = (a + b) / 2.0;
        Ok((t, self.eval(t)?))
    }

    /// Bisects `[below, above]` where the curve is under `level` at `below` and at or over it at `above`.
    fn bisect(&self, mut below: f64, mut above: f64, level: f64) -> Result<f64, PassError> {
        while (above - below).abs() > REFINE_TOLERANCE_S {
            let mid = (below + above) / 2.0;
            if self.eval(mid)? >= level {
                above = mid;
            } else {
                below = mid;
            }
        }
        Ok((below + above) / 2.0)
    }

    /// Last crossing of `level` before the peak, or `None` if the curve is above it back to the window start.
    fn rise_before(&self, peak: &Peak, level: f64) -> Result<Option<f64>, PassError> {
        let Some(j) = (0..=peak.index)
            .rev()
            .find(|&j| self.times[j] < peak.t && self.values[j] < level)
        else {
            return Ok(None);
        };
        let above = self.times[j + 1].min(peak.t);
        Ok(Some(self.bisect(self.times[j], above, level)?))
    }

    /// First crossing of `level` after the peak, or `None` if it stays above it to the window end.
    fn set_after(&self, peak: &Peak, level: f64) -> Result<Option<f64>, PassError> {
        let Some(k) = (peak.index..self.times.len())
            .find(|&k| self.times[k] > peak.t && self.values[k] < level)
        else {
            return Ok(None);
        };
        let above = self.times[k - 1].max(peak.t);
        Ok(Some(self.bisect(self.times[k], above, level)?))
    }
}

/// Pass search with a configurable coarse grid.
pub struct PassFinder {
    propagator: Box<dyn Propagator>,
    step_s: f64,
}

impl PassFinder {
    pub fn new(elements: &OrbitalElements) -> Result<Self, PassError> {
        Ok(Self::with_propagator(Box::new(Sgp4Propagator::new(elements)?)))
    }

    pub fn with_propagator(propagator: Box<dyn Propagator>) -> Self {
        PassFinder {
            propagator,
            step_s: DEFAULT_COARSE_STEP_S,
        }
    }

    pub fn step(mut self, seconds: f64) -> Self {
        assert!(seconds > 0.0, "coarse step must be positive");
        self.step_s = seconds;
        self
    }

    pub fn elements(&self) -> &OrbitalElements {
        self.propagator.elements()
    }

    pub fn propagator(&self) -> &dyn Propagator {
        self.propagator.as_ref()
    }

    /// Complete passes (rise and set both inside `window`) above `min_elevation`, sorted by AOS.
    pub fn comm_passes(
        &self,
        station: &Site,
        window: TimeWindow,
        min_elevation: f64,
    ) -> Result<Vec<Pass>, PassError> {
        window.checked(MAX_COMM_WINDOW_DAYS)?;
        if !(0.0..=20.0).contains(&min_elevation) {
            return Err(PassError::InvalidThreshold(min_elevation));
        }
        if window.seconds() == 0.0 {
            return Ok(Vec::new());
        }
        let curve = ElevationCurve::new(self.propagator.as_ref(), station.point);
        let scan = Scan::run(&curve, window, self.step_s)?;
        let mut passes: Vec<Pass> = Vec::new();
        for peak in scan.peaks(min_elevation)? {
            if peak.value < min_elevation {
                continue;
            }
            let (Some(aos), Some(los)) = (scan.rise_before(&peak, min_elevation)?, scan.set_after(&peak, min_elevation)?)
            else {
                continue;
            };
            let t_los = scan.epoch(los);
            let t_los5 = if peak.value > LOS5_ELEVATION_DEG {
                scan.set_after(&peak, LOS5_ELEVATION_DEG)?
                    .map(|t| scan.epoch(t).min(t_los))
            } else {
                None
            };
            let t_mel = scan.epoch(peak.t);
            let state = self.propagator.propagate(t_mel)?;
            let sun = sun_direction(t_mel)?;
            let pass = Pass {
                satellite_id: self.elements().satellite_id.clone(),
                location_id: station.id.clone(),
                t_aos: scan.epoch(aos),
                t_mel,
                t_los,
                t_los5,
                max_elevation: peak.value,
                sunlit_at_mel: is_sunlit(state.position, sun.direction),
            };
            // Two sampled maxima inside one visibility interval describe the same pass.
            match passes.iter_mut().find(|p| p.t_aos == pass.t_aos && p.t_los == pass.t_los) {
                Some(existing) if existing.max_elevation >= pass.max_elevation => {}
                Some(existing) => *existing = pass,
                None => passes.push(pass),
            }
        }
        passes.sort_by_key(|p| p.t_aos);
        Ok(passes)
    }

    /// Descending 5 deg crossing between MEL and LOS.
    pub fn los5(&self, pass: &Pass, station: &GeodeticPoint) -> Result<Epoch, PassError> {
        if pass.max_elevation <= LOS5_ELEVATION_DEG {
            return Err(PassError::NeverAboveFive(pass.max_elevation));
        }
        let curve = ElevationCurve::new(self.propagator.as_ref(), *station);
        let end = pass.t_los.max(pass.t_mel);
        let window = TimeWindow::new(pass.t_mel, end);
        let mut below = window.seconds();
        // The set may lie past LOS when the station mask exceeds 5 deg.
        while curve.at_offset(pass.t_mel, below)? >= LOS5_ELEVATION_DEG {
            below += self.step_s;
        }
        let scan = Scan {
            curve: &curve,
            origin: pass.t_mel,
            times: vec![0.0, below],
            values: vec![pass.max_elevation, curve.at_offset(pass.t_mel, below)?],
        };
        let t = scan.bisect(below, 0.0, LOS5_ELEVATION_DEG)?;
        Ok(scan.epoch(t).min(pass.t_los))
    }

    /// Imaging opportunities over `target`: one per local maximum of target
    /// elevation that satisfies `constraints`, sorted by closest approach.
    pub fn capture_opportunities(
        &self,
        target: &Site,
        sensor: &Sensor,
        window: TimeWindow,
        constraints: &ConstraintSet,
        forecast: &dyn CloudForecastProvider,
    ) -> Result<Vec<Opportunity>, PassError> {
        window.checked(MAX_CAPTURE_WINDOW_DAYS)?;
        if window.seconds() == 0.0 {
            return Ok(Vec::new());
        }
        let curve = ElevationCurve::new(self.propagator.as_ref(), target.point);
        let scan = Scan::run(&curve, window, self.step_s)?;
        let mut out = Vec::new();
        for peak in scan.peaks(0.0)? {
            if peak.value <= 0.0 {
                continue;
            }
            let t_mel = scan.epoch(peak.t);
            let opportunity = self.evaluate_opportunity(target, sensor, t_mel, forecast)?;
            let Some(opportunity) = opportunity else { continue };
            if constraints.verdict(&opportunity.metrics(), sensor).is_admitted() {
                out.push(opportunity);
            }
        }
        out.sort_by_key(|o| o.t_mel);
        Ok(out)
    }

    /// All attributes of a candidate imaging instant; `None` when the target cannot see the satellite.
    pub fn evaluate_opportunity(
        &self,
        target: &Site,
        sensor: &Sensor,
        t_mel: Epoch,
        forecast: &dyn CloudForecastProvider,
    ) -> Result<Option<Opportunity>, PassError> {
        let state = self.propagator.propagate(t_mel)?;
        let Ok(pointing) = pointing_geometry(&state, &target.point) else {
            return Ok(None);
        };
        let light = illumination(self.elements(), &state, &target.point, target.utc_offset_hours)?;
        let cloud = forecast.query(target.point.latitude, target.point.longitude, t_mel);
        Ok(Some(Opportunity {
            satellite_id: self.elements().satellite_id.clone(),
            sensor_id: sensor.id.clone(),
            location_id: target.id.clone(),
            t_mel,
            elevation_at_target: pointing.elevation_at_target,
            roll_deg: pointing.roll_deg,
            resolution_factor: pointing.resolution_factor.unwrap_or(f64::INFINITY),
            sat_sunlit: light.sat_sunlit,
            sun_el_deg: light.sun_el_deg,
            orb_sun_deg: light.orb_sun_deg,
            local_solar_time: light.local_solar_time,
            local_clock_time: light.local_clock_time,
            cloud_pct: cloud.percent(),
            auto_selectable: cloud != CloudCover::Unknown,
        }))
    }
}

/// Communication passes with the default 30 s grid.
pub fn find_comm_passes(
    elements: &OrbitalElements,
    station: &Site,
    window: TimeWindow,
    min_elevation: f64,
) -> Result<Vec<Pass>, PassError> {
    PassFinder::new(elements)?.comm_passes(station, window, min_elevation)
}

pub fn find_capture_opportunities(
    elements: &OrbitalElements,
    target: &Site,
    sensor: &Sensor,
    window: TimeWindow,
    constraints: &ConstraintSet,
    forecast: &dyn CloudForecastProvider,
) -> Result<Vec<Opportunity>, PassError> {
    PassFinder::new(elements)?.capture_opportunities(target, sensor, window, constraints, forecast)
}

pub fn los5_time(pass: &Pass, elements: &OrbitalElements, station: &GeodeticPoint) -> Result<Epoch, PassError> {
    if pass.max_elevation <= LOS5_ELEVATION_DEG {
        return Err(PassError::NeverAboveFive(pass.max_elevation));
    }
    PassFinder::new(elements)?.los5(pass, station)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Opportunity {
    pub satellite_id: String,
    pub sensor_id: String,
    pub location_id: String,
    pub t_mel: Epoch,
    pub elevation_at_target: f64,
    pub roll_deg: f64,
    pub resolution_factor: f64,
    pub sat_sunlit: bool,
    pub sun_el_deg: f64,
    pub orb_sun_deg: f64,
    pub local_solar_time: f64,
    pub local_clock_time: Epoch,
    pub cloud_pct: Option<f64>,
    /// False when the forecast is unknown.
    pub auto_selectable: bool,
}

impl Opportunity {
    pub fn metrics(&self) -> CandidateMetrics {
        CandidateMetrics {
            resolution_factor: self.resolution_factor,
            sun_el_deg: self.sun_el_deg,
            cloud_pct: self.cloud_pct,
            sat_sunlit: self.sat_sunlit,
        }
    }
}

/// The constraint-relevant attributes of one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateMetrics {
    pub resolution_factor: f64,
    pub sun_el_deg: f64,
    pub cloud_pct: Option<f64>,
    pub sat_sunlit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub max_resolution_factor: f64,
    /// Overrides the sensor's own minimum solar elevation when set.
    #[serde(default)]
    pub min_sun_el_deg: Option<f64>,
    pub max_cloud_pct: f64,
    pub require_sat_sunlit: bool,
}

impl Default for ConstraintSet {
    fn default() -> Self {
        ConstraintSet {
            max_resolution_factor: 1.3,
            min_sun_el_deg: None,
            max_cloud_pct: 25.0,
            require_sat_sunlit: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Violation {
    ResolutionFactor,
    SunElevation,
    CloudCover,
    Eclipse,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict", content = "violations")]
pub enum Verdict {
    Accept,
    /// Passes every evaluable check but the cloud forecast is unknown.
    AcceptUnknownCloud,
    Reject(Vec<Violation>),
}

impl Verdict {
    pub fn is_admitted(&self) -> bool {
        !matches!(self, Verdict::Reject(_))
    }
}

impl ConstraintSet {
    /// Accepts everything with positive elevation.
    pub fn unconstrained() -> Self {
        ConstraintSet {
            max_resolution_factor: f64::INFINITY,
            min_sun_el_deg: Some(-90.0),
            max_cloud_pct: 100.0,
            require_sat_sunlit: false,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.max_resolution_factor >= 1.0) {
            return Err("max_resolution_factor must be at least 1".into());
        }
        if !(0.0..=100.0).contains(&self.max_cloud_pct) {
            return Err("max_cloud_pct must be within [0, 100]".into());
        }
        Ok(())
    }

    pub fn min_sun_el_for(&self, sensor: &Sensor) -> f64 {
        self.min_sun_el_deg.unwrap_or(sensor.min_sun_el_deg)
    }

    pub fn verdict(&self, m: &CandidateMetrics, sensor: &Sensor) -> Verdict {
        let mut violations = Vec::new();
        if !(m.resolution_factor <= self.max_resolution_factor) {
            violations.push(Violation::ResolutionFactor);
        }
        if !(m.sun_el_deg >= self.min_sun_el_for(sensor)) {
            violations.push(Violation::SunElevation);
        }
        if m.cloud_pct.is_some_and(|c| !(c <= self.max_cloud_pct)) {
            violations.push(Violation::CloudCover);
        }
        if self.require_sat_sunlit && !m.sat_sunlit {
            violations.push(Violation::Eclipse);
        }
        match (violations.is_empty(), m.cloud_pct) {
            (false, _) => Verdict::Reject(violations),
            (true, None) => Verdict::AcceptUnknownCloud,
            (true, Some(_)) => Verdict::Accept,
        }
    }
}
