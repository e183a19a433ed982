//! Inertial/Earth-fixed rotation and WGS-84 geodesy.
//!
//! The Earth-fixed frame is obtained by rotating about the pole by Greenwich
//! mean sidereal time only; polar motion and nutation are ignored.

use serde::{Deserialize, Serialize};

use super::propagate::StateVector;
use super::{EARTH_EQUATORIAL_RADIUS_KM, EARTH_FLATTENING};
use crate::time::Epoch;
use crate::vec3::Vec3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FrameError {
    #[error("cannot take the geodetic position of the Earth's centre")]
    OriginPoint,
    #[error("{field} = {value} is out of range")]
    OutOfRange { field: &'static str, value: f64 },
}

/// Greenwich mean sidereal time in radians, [0, 2pi). IAU-82 polynomial, UT1 = UTC.
pub fn gmst(t: Epoch) -> f64 {
    let tu = t.centuries_since_j2000();
    let seconds = 67_310.548_41
        + (876_600.0 * 3600.0 + 8_640_184.812_866) * tu
        + 0.093_104 * tu * tu
        - 6.2e-6 * tu * tu * tu;
    (seconds / 240.0).to_radians().rem_euclid(std::f64::consts::TAU)
}

pub fn eci_to_ecef(state: &StateVector) -> Vec3 {
    inertial_to_fixed(state.position, state.epoch)
}

pub fn inertial_to_fixed(position: Vec3, t: Epoch) -> Vec3 {
    position.rotate_z(-gmst(t))
}

pub fn ecef_to_eci(position: Vec3, t: Epoch) -> Vec3 {
    position.rotate_z(gmst(t))
}

/// A point relative to the WGS-84 ellipsoid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodeticPoint {
    /// degrees, [-90, 90]
    pub latitude: f64,
    /// degrees, (-180, 180]
    pub longitude: f64,
    /// metres above the ellipsoid
    #[serde(default)]
    pub altitude_m: f64,
}

impl GeodeticPoint {
    pub fn new(latitude: f64, longitude: f64, altitude_m: f64) -> Result<Self, FrameError> {
        if !(-90.0..=90.0).contains(&latitude) {
            return Err(FrameError::OutOfRange {
                field: "latitude",
                value: latitude,
            });
        }
        if !longitude.is_finite() || !altitude_m.is_finite() {
            return Err(FrameError::OutOfRange {
                field: "longitude",
                value: longitude,
            });
        }
        Ok(GeodeticPoint {
            latitude,
            longitude: normalize_longitude(longitude),
            altitude_m,
        })
    }

    pub fn to_ecef(&self) -> Vec3 {
        geodetic_to_ecef(self)
    }

    /// Outward ellipsoid normal (local "up").
    pub fn up(&self) -> Vec3 {
        let (sl, cl) = self.latitude.to_radians().sin_cos();
        let (so, co) = self.longitude.to_radians().sin_cos();
        Vec3::new(cl * co, cl * so, sl)
    }
}

pub fn normalize_longitude(lon: f64) -> f64 {
    let wrapped = (lon + 180.0).rem_euclid(360.0) - 180.0;
    if wrapped == -180.0 {
        180.0
    } else {
        wrapped
    }
}

fn eccentricity_squared() -> f64 {
    EARTH_FLATTENING * (2.0 - EARTH_FLATTENING)
}

pub fn geodetic_to_ecef(point: &GeodeticPoint) -> Vec3 {
    let a = EARTH_EQUATORIAL_RADIUS_KM;
    let e2 = eccentricity_squared();
    let h = point.altitude_m / 1000.0;
    let (sl, cl) = point.latitude.to_radians().sin_cos();
    let (so, co) = point.longitude.to_radians().sin_cos();
    let n = a / (1.0 - e2 * sl * sl).sqrt();
    Vec3::new((n + h) * cl * co, (n + h) * cl * so, (n * (1.0 - e2) + h) * sl)
}

pub fn ecef_to_geodetic(position: Vec3) -> Result<GeodeticPoint, FrameError> {
    let Vec3 { x, y, z } = position;
    let p = x.hypot(y);
    if p == 0.0 && z == 0.0 {
        return Err(FrameError::OriginPoint);
    }
    let a = EARTH_EQUATORIAL_RADIUS_KM;
    let e2 = eccentricity_squared();
    let longitude = if p == 0.0 { 0.0 } else { y.atan2(x).to_degrees() };
    let mut lat = z.atan2(p * (1.0 - e2));
    let mut n = a;
    for _ in 0..12 {
        let sl = lat.sin();
        n = a / (1.0 - e2 * sl * sl).sqrt();
        let next = (z + e2 * n * sl).atan2(p);
        let converged = (next - lat).abs() < 1e-15;
        lat = next;
        if converged {
            break;
        }
    }
    let (sl, cl) = lat.sin_cos();
    // Valid at every latitude, including the poles.
    let h = p * cl + z * sl - a * a / n;
    Ok(GeodeticPoint {
        latitude: lat.to_degrees(),
        longitude: normalize_longitude(longitude),
        altitude_m: h * 1000.0,
    })
}
