//! Low-precision solar ephemeris (almanac series, ~0.01 deg over 1950-2050).

use serde::{Deserialize, Serialize};

use crate::time::Epoch;
use crate::vec3::Vec3;

pub const EPHEMERIS_FIRST_YEAR: i32 = 1990;
pub const EPHEMERIS_LAST_YEAR: i32 = 2060;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0} is outside the solar ephemeris range {EPHEMERIS_FIRST_YEAR}-{EPHEMERIS_LAST_YEAR}")]
pub struct OutOfEphemerisRange(pub Epoch);

/// Geocentric sun direction in the equatorial frame of date.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SunVector {
    pub direction: Vec3,
    pub distance_au: f64,
}

impl SunVector {
    pub fn position_km(&self) -> Vec3 {
        self.direction * (self.distance_au * super::AU_KM)
    }

    /// Declination in degrees.
    pub fn declination(&self) -> f64 {
        self.direction.z.clamp(-1.0, 1.0).asin().to_degrees()
    }
}

pub fn sun_direction(t: Epoch) -> Result<SunVector, OutOfEphemerisRange> {
    let year = t.year();
    if !(EPHEMERIS_FIRST_YEAR..=EPHEMERIS_LAST_YEAR).contains(&year) {
        return Err(OutOfEphemerisRange(t));
    }
    let n = t.julian_date() - 2_451_545.0;
    let mean_longitude = 280.460 + 0.985_647_4 * n;
    let g = (357.528 + 0.985_600_3 * n).to_radians();
    let ecliptic_longitude =
        (mean_longitude + 1.915 * g.sin() + 0.020 * (2.0 * g).sin()).to_radians();
    let obliquity = (23.439 - 0.000_000_4 * n).to_radians();
    let distance_au = 1.000_14 - 0.016_71 * g.cos() - 0.000_14 * (2.0 * g).cos();
    let (sl, cl) = ecliptic_longitude.sin_cos();
    let (se, ce) = obliquity.sin_cos();
    let direction = Vec3::new(cl, ce * sl, se * sl);
    // Normalise away rounding so the unit-norm property holds to 1e-15.
    Ok(SunVector {
        direction: direction.unit(),
        distance_au,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equinox_declination_near_zero() {
        let t = Epoch::ymd_hms(2021, 3, 20, 9, 37, 0);
        assert!(sun_direction(t).unwrap().declination().abs() < 0.5);
    }

    #[test]
    fn solstice_declination_is_obliquity() {
        let t = Epoch::ymd_hms(2021, 6, 21, 3, 32, 0);
        assert!((sun_direction(t).unwrap().declination() - 23.44).abs() < 0.1);
    }

    #[test]
    fn range_limits() {
        assert!(sun_direction(Epoch::ymd_hms(1989, 12, 31, 0, 0, 0)).is_err());
        assert!(sun_direction(Epoch::ymd_hms(2061, 1, 1, 0, 0, 0)).is_err());
        assert!(sun_direction(Epoch::ymd_hms(2060, 12, 31, 0, 0, 0)).is_ok());
    }

    #[test]
    fn unit_norm() {
        let mut t = Epoch::ymd_hms(1990, 1, 1, 0, 0, 0);
        while t.year() < 2060 {
            let s = sun_direction(t).unwrap();
            assert!((s.direction.norm() - 1.0).abs() < 1e-12);
            assert!((0.98..1.02).contains(&s.distance_au));
            t = t.add_seconds(86_400.0 * 37.3);
        }
    }
}
