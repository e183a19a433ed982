//! Numerical kernels against independent references.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use satops_core::astro::{gmst, parse_tle, sun_direction, GeodeticPoint, Propagator, Sgp4Propagator};
use satops_core::geometry::topocentric;
use satops_core::{Epoch, Vec3};

#[derive(Deserialize)]
struct Vectors {
    list: Vec<Case>,
}

#[derive(Deserialize)]
struct Case {
    line1: String,
    line2: String,
    states: Vec<State>,
}

#[derive(Deserialize)]
struct State {
    time: f64,
    position: [f64; 3],
    velocity: [f64; 3],
}

fn vectors() -> Vectors {
    toml::from_str(include_str!("data/sgp4_vectors.toml")).unwrap()
}

#[test]
fn sgp4_matches_verification_vectors_within_a_metre() {
    let mut checked = 0;
    for case in vectors().list {
        let elements = parse_tle(&format!("{}\n{}", case.line1, case.line2)).unwrap();
        let prop = Sgp4Propagator::new(&elements).unwrap();
        for s in &case.states {
            let (r, v) = prop.propagate_minutes(s.time).unwrap();
            let dr = (r - Vec3::from(s.position)).norm();
            let dv = (v - Vec3::from(s.velocity)).norm();
            assert!(dr < 1e-3, "{} at {} min: {} m", elements.norad_id, s.time, dr * 1e3);
            assert!(dv < 1e-6, "{} at {} min: {} m/s", elements.norad_id, s.time, dv * 1e3);
            checked += 1;
        }
    }
    assert!(checked >= 100);
}

#[test]
fn tle_fields_match_the_reference_parser() {
    for case in vectors().list {
        let ours = parse_tle(&format!("{}\n{}", case.line1, case.line2)).unwrap();
        let theirs = sgp4::Elements::from_tle(None, case.line1.as_bytes(), case.line2.as_bytes()).unwrap();
        assert_eq!(u64::from(ours.norad_id), theirs.norad_id);
        for (a, b) in [
            (ours.inclination, theirs.inclination),
            (ours.raan, theirs.right_ascension),
            (ours.eccentricity, theirs.eccentricity),
            (ours.arg_perigee, theirs.argument_of_perigee),
            (ours.mean_anomaly, theirs.mean_anomaly),
            (ours.mean_motion, theirs.mean_motion),
            (ours.bstar, theirs.drag_term),
            (ours.mean_motion_dot, theirs.mean_motion_dot),
            (ours.mean_motion_ddot, theirs.mean_motion_ddot),
        ] {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{} {a} vs {b}", ours.norad_id);
        }
        let epoch = Epoch::from_datetime(theirs.datetime.and_utc());
        assert!(ours.epoch.millis_since(epoch).abs() <= 1);
        let (l1, l2) = ours.to_lines();
        let again = parse_tle(&format!("{l1}\n{l2}")).unwrap();
        assert_eq!(again.norad_id, ours.norad_id);
        assert!((again.mean_motion - ours.mean_motion).abs() < 1e-8);
    }
}

/// Apparent solar longitude after the chapter-25 low-accuracy series of
/// Meeus, Astronomical Algorithms (2nd ed.), returned as a unit vector.
fn sun_oracle(t: Epoch) -> Vec3 {
    let c = (t.julian_date() - 2_451_545.0) / 36_525.0;
    let l0 = 280.46646 + 36_000.76983 * c + 0.0003032 * c * c;
    let m = (357.52911 + 35_999.05029 * c - 0.0001537 * c * c).to_radians();
    let center = (1.914602 - 0.004817 * c - 0.000014 * c * c) * m.sin()
        + (0.019993 - 0.000101 * c) * (2.0 * m).sin()
        + 0.000289 * (3.0 * m).sin();
    let omega = (125.04 - 1934.136 * c).to_radians();
    let lambda = (l0 + center - 0.00569 - 0.00478 * omega.sin()).to_radians();
    let eps0 = 23.0 + (26.0 + (21.448 - 46.8150 * c - 0.00059 * c * c + 0.001813 * c * c * c) / 60.0) / 60.0;
    let eps = (eps0 + 0.00256 * omega.cos()).to_radians();
    Vec3::new(lambda.cos(), eps.cos() * lambda.sin(), eps.sin() * lambda.sin())
}

fn radec(v: Vec3) -> (f64, f64) {
    (v.y.atan2(v.x).to_degrees().rem_euclid(360.0), v.z.asin().to_degrees())
}

#[test]
fn sun_direction_matches_almanac_example() {
    // Meeus example 25.a, 1992 October 13.0: RA 13h13m31.4s, Dec -7d47'06".
    let t = Epoch::ymd_hms(1992, 10, 13, 0, 0, 0);
    let (ra, dec) = radec(sun_direction(t).unwrap().direction);
    let ra_ref = (13.0 + 13.0 / 60.0 + 31.4 / 3600.0) * 15.0;
    let dec_ref: f64 = -(7.0 + 47.0 / 60.0 + 6.0 / 3600.0);
    assert!(((ra - ra_ref) * dec_ref.to_radians().cos()).abs() < 0.05, "{ra} vs {ra_ref}");
    assert!((dec - dec_ref).abs() < 0.05, "{dec} vs {dec_ref}");
}

#[test]
fn sun_direction_tracks_the_series_over_the_ephemeris_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let start = Epoch::ymd_hms(1990, 1, 1, 0, 0, 0);
    let span = Epoch::ymd_hms(2060, 12, 31, 0, 0, 0).seconds_since(start);
    let mut worst: f64 = 0.0;
    for _ in 0..5_000 {
        let t = start.add_seconds(rng.gen_range(0.0..span));
        let ours = sun_direction(t).unwrap().direction;
        worst = worst.max(ours.angle_to(sun_oracle(t)).to_degrees());
    }
    assert!(worst < 0.05, "worst separation {worst} deg");
}

#[test]
fn gmst_matches_published_values() {
    // Meeus examples 12.a and 12.b.
    let a = gmst(Epoch::ymd_hms(1987, 4, 10, 0, 0, 0)).to_degrees();
    let a_ref = (13.0 + 10.0 / 60.0 + 46.3668 / 3600.0) * 15.0;
    assert!((a - a_ref).abs() < 1e-5, "{a} vs {a_ref}");
    let b = gmst(Epoch::ymd_hms(1987, 4, 10, 19, 21, 0)).to_degrees();
    let b_ref = (8.0 + 34.0 / 60.0 + 57.0896 / 3600.0) * 15.0;
    assert!((b - b_ref).abs() < 1e-5, "{b} vs {b_ref}");
}

#[test]
fn gmst_agrees_with_the_usno_approximation() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let start = Epoch::ymd_hms(1995, 1, 1, 0, 0, 0);
    for _ in 0..2_000 {
        let t = start.add_seconds(rng.gen_range(0.0..60.0 * 365.25 * 86_400.0));
        let d = t.julian_date() - 2_451_545.0;
        let usno = ((18.697_374_558 + 24.065_709_824_419_08 * d) * 15.0).rem_euclid(360.0);
        let mut diff = (gmst(t).to_degrees() - usno).rem_euclid(360.0);
        if diff > 180.0 {
            diff -= 360.0;
        }
        // The approximation is good to about 0.1 s of time over this century.
        assert!(diff.abs() < 0.1 / 240.0 + 1e-4, "{t}: {diff}");
    }
}

#[test]
fn topocentric_angles_match_the_dot_product_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10_000 {
        let site = GeodeticPoint::new(rng.gen_range(-89.0..89.0), rng.gen_range(-180.0..180.0), rng.gen_range(0.0..3000.0))
            .unwrap();
        let origin = site.to_ecef();
        let up = site.up();
        let east = Vec3::new(0.0, 0.0, 1.0).cross(up).unit();
        let north = up.cross(east);
        let offset = Vec3::new(
            rng.gen_range(-3000.0..3000.0),
            rng.gen_range(-3000.0..3000.0),
            rng.gen_range(-3000.0..3000.0),
        );
        if offset.norm() < 1.0 {
            continue;
        }
        let look = topocentric(&site, origin + offset);
        let el = (offset.dot(up) / offset.norm()).asin().to_degrees();
        let az = offset.dot(east).atan2(offset.dot(north)).to_degrees().rem_euclid(360.0);
        assert!((look.elevation - el).abs() < 1e-6);
        let mut d = (look.azimuth - az).rem_euclid(360.0);
        if d > 180.0 {
            d -= 360.0;
        }
        // Azimuth is undefined straight overhead.
        if el.abs() < 89.9 {
            assert!(d.abs() < 1e-6, "{} vs {az}", look.azimuth);
        }
        assert!((look.range - offset.norm()).abs() < 1e-9 * offset.norm().max(1.0));
    }
}
