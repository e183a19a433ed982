//! Orbit propagation behind a common interface.
//!
//! [`Sgp4Propagator`] is the production model (backed by the `sgp4` crate in
//! AFSPC-compatibility mode, which is what the public verification vectors
//! were generated with). [`J2Propagator`] is an analytic two-body + secular J2
//! model that can be swapped in where SGP4 is not wanted.

use serde::{Deserialize, Serialize};

use super::tle::OrbitalElements;
use super::{EARTH_EQUATORIAL_RADIUS_KM, J2, MU_EARTH};
use crate::time::Epoch;
use crate::vec3::Vec3;

/// Maximum distance from the element epoch a propagation may reach.
pub const MAX_PROPAGATION_DAYS: f64 = 30.0;
/// Perigee altitude below which an orbit is treated as decayed.
pub const DECAY_ALTITUDE_KM: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PropagationError {
    #[error("satellite {satellite}: orbit decayed ({reason})")]
    DecayedOrbit { satellite: String, reason: String },
    #[error("satellite {satellite}: {days:.2} days from element epoch exceeds the {max} day horizon")]
    StaleElements { satellite: String, days: f64, max: f64 },
    #[error("satellite {satellite}: invalid elements ({reason})")]
    InvalidElements { satellite: String, reason: String },
}

/// Position and velocity in the propagator's inertial frame (TEME for SGP4).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub epoch: Epoch,
    /// km
    pub position: Vec3,
    /// km/s
    pub velocity: Vec3,
}

pub trait Propagator: Send + Sync {
    fn elements(&self) -> &OrbitalElements;

    /// State at `minutes` after the exact element epoch, without horizon checks.
    fn propagate_minutes(&self, minutes: f64) -> Result<(Vec3, Vec3), PropagationError>;

    fn propagate(&self, t: Epoch) -> Result<StateVector, PropagationError> {
        let seconds = self.elements().seconds_since_epoch(t);
        let days = seconds.abs() / 86_400.0;
        if days > MAX_PROPAGATION_DAYS {
            return Err(PropagationError::StaleElements {
                satellite: self.elements().satellite_id.clone(),
                days,
                max: MAX_PROPAGATION_DAYS,
            });
        }
        let (position, velocity) = self.propagate_minutes(seconds / 60.0)?;
        check_perigee(&self.elements().satellite_id, position, velocity)?;
        Ok(StateVector {
            epoch: t,
            position,
            velocity,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagationModel {
    #[default]
    Sgp4,
    TwoBodyJ2,
}

pub fn build_propagator(
    elements: &OrbitalElements,
    model: PropagationModel,
) -> Result<Box<dyn Propagator>, PropagationError> {
    Ok(match model {
        PropagationModel::Sgp4 => Box::new(Sgp4Propagator::new(elements)?),
        PropagationModel::TwoBodyJ2 => Box::new(J2Propagator::new(elements)),
    })
}

/// One-shot SGP4 propagation; build a [`Sgp4Propagator`] when sampling many instants.
pub fn propagate(elements: &OrbitalElements, t: Epoch) -> Result<StateVector, PropagationError> {
    Sgp4Propagator::new(elements)?.propagate(t)
}

fn check_perigee(satellite: &str, r: Vec3, v: Vec3) -> Result<(), PropagationError> {
    let rn = r.norm();
    if !rn.is_finite() || rn < EARTH_EQUATORIAL_RADIUS_KM {
        return Err(PropagationError::DecayedOrbit {
            satellite: satellite.to_string(),
            reason: format!("radius {rn:.1} km is below the Earth's surface"),
        });
    }
    let energy = v.dot(v) / 2.0 - MU_EARTH / rn;
    if energy >= 0.0 {
        return Ok(());
    }
    let a = -MU_EARTH / (2.0 * energy);
    let e_vec = r * (v.dot(v) / MU_EARTH - 1.0 / rn) - v * (r.dot(v) / MU_EARTH);
    let perigee_alt = a * (1.0 - e_vec.norm()) - EARTH_EQUATORIAL_RADIUS_KM;
    if perigee_alt < DECAY_ALTITUDE_KM {
        return Err(PropagationError::DecayedOrbit {
            satellite: satellite.to_string(),
            reason: format!("perigee altitude {perigee_alt:.1} km"),
        });
    }
    Ok(())
}

pub struct Sgp4Propagator {
    elements: OrbitalElements,
    constants: sgp4::Constants,
}

impl Sgp4Propagator {
    pub fn new(elements: &OrbitalElements) -> Result<Self, PropagationError> {
        let invalid = |reason: String| PropagationError::InvalidElements {
            satellite: elements.satellite_id.clone(),
            reason,
        };
        let sgp4_elements = to_sgp4_elements(elements).ok_or_else(|| invalid("epoch".into()))?;
        let constants = sgp4::Constants::from_elements_afspc_compatibility_mode(&sgp4_elements)
            .map_err(|e| invalid(e.to_string()))?;
        Ok(Sgp4Propagator {
            elements: elements.clone(),
            constants,
        })
    }
}

impl Propagator for Sgp4Propagator {
    fn elements(&self) -> &OrbitalElements {
        &self.elements
    }

    fn propagate_minutes(&self, minutes: f64) -> Result<(Vec3, Vec3), PropagationError> {
        let prediction = self
            .constants
            .propagate_afspc_compatibility_mode(sgp4::MinutesSinceEpoch(minutes))
            .map_err(|e| PropagationError::DecayedOrbit {
                satellite: self.elements.satellite_id.clone(),
                reason: e.to_string(),
            })?;
        Ok((prediction.position.into(), prediction.velocity.into()))
    }
}

fn to_sgp4_elements(el: &OrbitalElements) -> Option<sgp4::Elements> {
    let year_start = chrono::NaiveDate::from_ymd_opt(el.epoch_year, 1, 1)?.and_hms_opt(0, 0, 0)?;
    let nanos = ((el.epoch_day - 1.0) * 86_400e9).round() as i64;
    let datetime = year_start + chrono::Duration::nanoseconds(nanos);
    Some(sgp4::Elements {
        object_name: Some(el.satellite_id.clone()),
        international_designator: Some(el.international_designator.clone()),
        norad_id: u64::from(el.norad_id),
        classification: match el.classification {
            'C' => sgp4::Classification::Classified,
            'S' => sgp4::Classification::Secret,
            _ => sgp4::Classification::Unclassified,
        },
        datetime,
        mean_motion_dot: el.mean_motion_dot,
        mean_motion_ddot: el.mean_motion_ddot,
        drag_term: el.bstar,
        element_set_number: u64::from(el.element_set_no),
        inclination: el.inclination,
        right_ascension: el.raan,
        eccentricity: el.eccentricity,
        argument_of_perigee: el.arg_perigee,
        mean_anomaly: el.mean_anomaly,
        mean_motion: el.mean_motion,
        revolution_number: u64::from(el.rev_number),
        ephemeris_type: el.ephemeris_type,
    })
}

/// Two-body motion with secular J2 drift of the node, perigee and mean anomaly.
pub struct J2Propagator {
    elements: OrbitalElements,
    semi_major_axis: f64,
    mean_motion_rad_s: f64,
    raan_rate: f64,
    argp_rate: f64,
    anomaly_rate: f64,
}

impl J2Propagator {
    pub fn new(elements: &OrbitalElements) -> Self {
        let n = elements.mean_motion * std::f64::consts::TAU / 86_400.0;
        let a = (MU_EARTH / (n * n)).cbrt();
        let e = elements.eccentricity;
        let i = elements.inclination.to_radians();
        let p = a * (1.0 - e * e);
        let k = 1.5 * J2 * (EARTH_EQUATORIAL_RADIUS_KM / p).powi(2) * n;
        let (ci, si) = (i.cos(), i.sin());
        J2Propagator {
            elements: elements.clone(),
            semi_major_axis: a,
            mean_motion_rad_s: n,
            raan_rate: -k * ci,
            argp_rate: k * (2.0 - 2.5 * si * si),
            anomaly_rate: k * (1.0 - 1.5 * si * si) * (1.0 - e * e).sqrt(),
        }
    }
}

impl Propagator for J2Propagator {
    fn elements(&self) -> &OrbitalElements {
        &self.elements
    }

    fn propagate_minutes(&self, minutes: f64) -> Result<(Vec3, Vec3), PropagationError> {
        let dt = minutes * 60.0;
        let el = &self.elements;
        let e = el.eccentricity;
        let a = self.semi_major_axis;
        let raan = el.raan.to_radians() + self.raan_rate * dt;
        let argp = el.arg_perigee.to_radians() + self.argp_rate * dt;
        let mean = el.mean_anomaly.to_radians() + (self.mean_motion_rad_s + self.anomaly_rate) * dt;
        let ecc_anomaly = solve_kepler(mean, e);
        let (se, ce) = ecc_anomaly.sin_cos();
        let root = (1.0 - e * e).sqrt();
        // Perifocal position and velocity.
        let r = a * (1.0 - e * ce);
        let pos_pf = Vec3::new(a * (ce - e), a * root * se, 0.0);
        let vel_scale = (MU_EARTH * a).sqrt() / r;
        let vel_pf = Vec3::new(-vel_scale * se, vel_scale * root * ce, 0.0);
        let to_inertial = |v: Vec3| {
            let v = v.rotate_z(argp);
            let (si, ci) = el.inclination.to_radians().sin_cos();
            let v = Vec3::new(v.x, ci * v.y - si * v.z, si * v.y + ci * v.z);
            v.rotate_z(raan)
        };
        Ok((to_inertial(pos_pf), to_inertial(vel_pf)))
    }
}

fn solve_kepler(mean_anomaly: f64, e: f64) -> f64 {
    let m = mean_anomaly.rem_euclid(std::f64::consts::TAU);
    let mut ea = if e < 0.8 { m } else { std::f64::consts::PI };
    for _ in 0..50 {
        let delta = (ea - e * ea.sin() - m) / (1.0 - e * ea.cos());
        ea -= delta;
        if delta.abs() < 1e-14 {
            break;
        }
    }
    ea
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::astro::tle::parse_tle;

    fn iss() -> OrbitalElements {
        parse_tle(
            "1 25544U 98067A   20194.88612269 -.00002218  00000-0 -31515-4 0  9992\n\
             2 25544  51.6461 221.2784 0001413  89.1723 280.4612 15.49507896236008",
        )
        .unwrap()
    }

    #[test]
    fn radius_at_epoch_within_apsides() {
        let el = iss();
        let a = el.semi_major_axis_km();
        let r = propagate(&el, el.epoch).unwrap().position.norm();
        // SGP4 mean elements differ from osculating ones by a few km of short-period terms.
        let slack = 25.0;
        assert!(r >= a * (1.0 - el.eccentricity) - slack && r <= a * (1.0 + el.eccentricity) + slack);
    }

    #[test]
    fn stale_elements_rejected() {
        let el = iss();
        let t = el.epoch.add_seconds(31.0 * 86_400.0);
        assert!(matches!(propagate(&el, t), Err(PropagationError::StaleElements { .. })));
    }

    #[test]
    fn deterministic() {
        let el = iss();
        let t = el.epoch.add_seconds(5_000.0);
        assert_eq!(propagate(&el, t).unwrap(), propagate(&el, t).unwrap());
    }

    #[test]
    fn j2_model_tracks_sgp4_over_an_orbit() {
        let el = iss();
        let sgp4 = Sgp4Propagator::new(&el).unwrap();
        let j2 = J2Propagator::new(&el);
        for minutes in [0.0, 30.0, 60.0, 90.0] {
            let (a, _) = sgp4.propagate_minutes(minutes).unwrap();
            let (b, _) = j2.propagate_minutes(minutes).unwrap();
            assert!((a - b).norm() < 60.0, "{minutes} min: {}", (a - b).norm());
        }
    }
}
