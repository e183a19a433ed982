//! Instantaneous satellite / ground / sun geometry.

use serde::{Deserialize, Serialize};

use crate::astro::frames::{inertial_to_fixed, GeodeticPoint};
use crate::astro::sun::{sun_direction, OutOfEphemerisRange};
use crate::astro::{
    ecef_to_geodetic, eci_to_ecef, OrbitalElements, StateVector, EARTH_EQUATORIAL_RADIUS_KM, J2,
    MU_EARTH,
};
use crate::time::Epoch;
use crate::vec3::Vec3;

/// Local-horizon look angles from a site to a satellite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Topocentric {
    /// degrees clockwise from north, [0, 360)
    pub azimuth: f64,
    /// degrees, [-90, 90]
    pub elevation: f64,
    /// km
    pub range: f64,
}

pub fn topocentric(site: &GeodeticPoint, sat_ecef: Vec3) -> Topocentric {
    let rho = sat_ecef - site.to_ecef();
    let (sl, cl) = site.latitude.to_radians().sin_cos();
    let (so, co) = site.longitude.to_radians().sin_cos();
    // South-east-zenith components.
    let south = sl * co * rho.x + sl * so * rho.y - cl * rho.z;
    let east = -so * rho.x + co * rho.y;
    let zenith = cl * co * rho.x + cl * so * rho.y + sl * rho.z;
    let range = rho.norm();
    let elevation = (zenith / range).clamp(-1.0, 1.0).asin().to_degrees();
    let azimuth = east.atan2(-south).to_degrees().rem_euclid(360.0);
    Topocentric {
        // rem_euclid can return exactly 360.0 for tiny negative inputs.
        azimuth: if azimuth >= 360.0 { 0.0 } else { azimuth },
        elevation,
        range,
    }
}

/// Cylindrical umbra: dark iff behind the Earth relative to the Sun and within
/// one equatorial radius of the shadow axis.
pub fn is_sunlit(sat_position: Vec3, sun_dir: Vec3) -> bool {
    let s = sun_dir.unit();
    let along = sat_position.dot(s);
    if along >= 0.0 {
        return true;
    }
    let perpendicular = (sat_position - s * along).norm();
    perpendicular >= EARTH_EQUATORIAL_RADIUS_KM
}

/// Geometric solar elevation at a ground site, degrees (no refraction).
pub fn solar_elevation(site: &GeodeticPoint, t: Epoch) -> Result<f64, OutOfEphemerisRange> {
    let sun = sun_direction(t)?;
    let sun_fixed = inertial_to_fixed(sun.position_km(), t);
    Ok(topocentric(site, sun_fixed).elevation)
}

/// Right ascension of the ascending node at `t`, including secular J2 regression.
pub fn raan_at(elements: &OrbitalElements, t: Epoch) -> f64 {
    let n = elements.mean_motion * std::f64::consts::TAU / 86_400.0;
    let a = (MU_EARTH / (n * n)).cbrt();
    let e = elements.eccentricity;
    let p = a * (1.0 - e * e);
    let rate = -1.5 * n * J2 * (EARTH_EQUATORIAL_RADIUS_KM / p).powi(2)
        * elements.inclination.to_radians().cos();
    let dt = elements.seconds_since_epoch(t);
    (elements.raan.to_radians() + rate * dt).rem_euclid(std::f64::consts::TAU)
}

/// Unit normal of the orbital plane at `t`.
pub fn orbit_normal(elements: &OrbitalElements, t: Epoch) -> Vec3 {
    let (si, ci) = elements.inclination.to_radians().sin_cos();
    let (so, co) = raan_at(elements, t).sin_cos();
    Vec3::new(si * so, -si * co, ci)
}

/// Solar elevation above the orbital plane, degrees [-90, 90].
pub fn beta_angle(elements: &OrbitalElements, t: Epoch) -> Result<f64, OutOfEphemerisRange> {
    let sun = sun_direction(t)?;
    Ok(beta_from_vectors(orbit_normal(elements, t), sun.direction))
}

pub fn beta_from_vectors(normal: Vec3, sun_dir: Vec3) -> f64 {
    normal
        .unit()
        .dot(sun_dir.unit())
        .clamp(-1.0, 1.0)
        .asin()
        .to_degrees()
}

/// Mean solar time at a longitude, decimal hours in [0, 24).
pub fn local_solar_time(longitude: f64, t: Epoch) -> f64 {
    let hours = (t.utc_hours() + longitude / 15.0).rem_euclid(24.0);
    if hours >= 24.0 {
        0.0
    } else {
        hours
    }
}

/// Civil clock time at a site with a fixed UTC offset (no daylight saving).
pub fn local_clock_time(t: Epoch, utc_offset_hours: f64) -> Epoch {
    t.add_seconds(utc_offset_hours * 3600.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IlluminationState {
    pub sat_sunlit: bool,
    pub sun_el_deg: f64,
    pub orb_sun_deg: f64,
    pub local_solar_time: f64,
    pub local_clock_time: Epoch,
}

pub fn illumination(
    elements: &OrbitalElements,
    state: &StateVector,
    site: &GeodeticPoint,
    utc_offset_hours: f64,
) -> Result<IlluminationState, OutOfEphemerisRange> {
    let t = state.epoch;
    let sun = sun_direction(t)?;
    Ok(IlluminationState {
        sat_sunlit: is_sunlit(state.position, sun.direction),
        sun_el_deg: solar_elevation(site, t)?,
        orb_sun_deg: beta_from_vectors(orbit_normal(elements, t), sun.direction),
        local_solar_time: local_solar_time(site.longitude, t),
        local_clock_time: local_clock_time(t, utc_offset_hours),
    })
}

/// Off-nadir pointing geometry toward a ground target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointingGeometry {
    /// Angle between the geodetic nadir and the satellite-to-target line, degrees.
    pub roll_deg: f64,
    /// Satellite elevation as seen from the target, degrees.
    pub elevation_at_target: f64,
    /// Effective / nadir ground-sample-distance ratio; `None` when the target
    /// cannot see the satellite.
    pub resolution_factor: Option<f64>,
    pub slant_range_km: f64,
    pub altitude_km: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("target not visible (elevation {:.3} deg)", .0.elevation_at_target)]
pub struct TargetNotVisible(pub PointingGeometry);

/// Roll, target elevation and resolution factor for imaging `target` from `sat_state`.
///
/// The resolution factor is `(slant_range / altitude) / sin(elevation_at_target)`:
/// exactly 1 at the geodetic nadir and increasing monotonically off-nadir.
pub fn pointing_geometry(
    sat_state: &StateVector,
    target: &GeodeticPoint,
) -> Result<PointingGeometry, TargetNotVisible> {
    pointing_geometry_ecef(eci_to_ecef(sat_state), target)
}

pub fn pointing_geometry_ecef(
    sat_ecef: Vec3,
    target: &GeodeticPoint,
) -> Result<PointingGeometry, TargetNotVisible> {
    let sub = ecef_to_geodetic(sat_ecef).expect("satellite is not at the geocentre");
    let nadir = -sub.up();
    let line_of_sight = target.to_ecef() - sat_ecef;
    let roll_deg = nadir.angle_to(line_of_sight).to_degrees();
    let look = topocentric(target, sat_ecef);
    let altitude_km = sub.altitude_m / 1000.0;
    let mut geometry = PointingGeometry {
        roll_deg,
        elevation_at_target: look.elevation,
        resolution_factor: None,
        slant_range_km: look.range,
        altitude_km,
    };
    if look.elevation <= 0.0 {
        return Err(TargetNotVisible(geometry));
    }
    geometry.resolution_factor =
        Some((look.range / altitude_km) / look.elevation.to_radians().sin());
    Ok(geometry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::astro::geodetic_to_ecef;

    fn site(lat: f64, lon: f64) -> GeodeticPoint {
        GeodeticPoint::new(lat, lon, 0.0).unwrap()
    }

    #[test]
    fn zenith_and_antipode() {
        let s = site(38.26, 140.87);
        let above = GeodeticPoint::new(38.26, 140.87, 500_000.0).unwrap();
        let look = topocentric(&s, above.to_ecef());
        assert!((look.elevation - 90.0).abs() < 0.01);
        assert!((look.range - 500.0).abs() < 1e-6);
        let opposite = site(-38.26, 140.87 - 180.0);
        let far = GeodeticPoint { altitude_m: 500_000.0, ..opposite };
        assert!(topocentric(&s, far.to_ecef()).elevation < 0.0);
    }

    #[test]
    fn azimuth_conventions() {
        let s = site(0.0, 0.0);
        let north = GeodeticPoint::new(5.0, 0.0, 500_000.0).unwrap();
        let east = GeodeticPoint::new(0.0, 5.0, 500_000.0).unwrap();
        assert!(topocentric(&s, north.to_ecef()).azimuth.min(360.0 - topocentric(&s, north.to_ecef()).azimuth) < 1e-6);
        assert!((topocentric(&s, east.to_ecef()).azimuth - 90.0).abs() < 1e-6);
    }

    #[test]
    fn sunlit_cases() {
        let sun = Vec3::new(1.0, 0.0, 0.0);
        assert!(is_sunlit(Vec3::new(6878.0, 0.0, 0.0), sun));
        assert!(!is_sunlit(Vec3::new(-6878.0, 0.0, 0.0), sun));
        assert!(is_sunlit(Vec3::new(-6878.0, 7000.0, 0.0), sun));
    }

    #[test]
    fn local_solar_time_examples() {
        let noon = Epoch::ymd_hms(2021, 5, 11, 12, 0, 0);
        assert!((local_solar_time(0.0, noon) - 12.0).abs() < 1e-12);
        assert!((local_solar_time(135.0, Epoch::ymd_hms(2021, 5, 11, 3, 0, 0)) - 12.0).abs() < 1e-12);
        assert!((local_solar_time(-90.0, Epoch::ymd_hms(2021, 5, 11, 23, 0, 0)) - 17.0).abs() < 1e-12);
    }

    #[test]
    fn beta_angle_definition() {
        let n = Vec3::new(0.0, 0.0, 1.0);
        assert!((beta_from_vectors(n, n) - 90.0).abs() < 1e-12);
        assert!(beta_from_vectors(n, Vec3::new(1.0, 0.0, 0.0)).abs() < 0.01);
    }

    #[test]
    fn nadir_target_has_unit_factor() {
        let sat = GeodeticPoint::new(10.0, 20.0, 500_000.0).unwrap();
        let g = pointing_geometry_ecef(sat.to_ecef(), &site(10.0, 20.0)).unwrap();
        assert!(g.roll_deg < 1e-6);
        assert!((g.elevation_at_target - 90.0).abs() < 1e-6);
        assert!((g.resolution_factor.unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn factor_grows_with_roll() {
        let sat = geodetic_to_ecef(&GeodeticPoint::new(0.0, 0.0, 500_000.0).unwrap());
        let mut previous = (0.0, 1.0);
        for lon in [0.5, 1.0, 2.0, 3.0, 4.0, 6.0] {
            let g = pointing_geometry_ecef(sat, &site(0.0, lon)).unwrap();
            assert!(g.roll_deg > previous.0);
            assert!(g.resolution_factor.unwrap() > previous.1);
            previous = (g.roll_deg, g.resolution_factor.unwrap());
        }
    }

    #[test]
    fn hidden_target_reports_geometry() {
        let sat = geodetic_to_ecef(&GeodeticPoint::new(0.0, 0.0, 500_000.0).unwrap());
        let err = pointing_geometry_ecef(sat, &site(0.0, 60.0)).unwrap_err();
        assert!(err.0.resolution_factor.is_none());
        assert!(err.0.elevation_at_target < 0.0 && err.0.roll_deg > 0.0);
    }
}
