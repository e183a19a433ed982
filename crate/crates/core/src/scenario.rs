//! A self-contained demonstration scenario: two sun-synchronous satellites,
//! a mid-latitude and a polar station, a few imaging targets and request
//! templates. Used by `init --demo`, the Python smoke test and the test suites.

use crate::astro::{GeodeticPoint, OrbitalElements, MU_EARTH, EARTH_EQUATORIAL_RADIUS_KM};
use crate::model::{
    CommLink, LinkDirection, Location, LocationKind, RequestTemplate, Satellite, Sensor, TemplateKind,
};
use crate::store::Db;
use crate::time::Epoch;

/// Near-circular mean elements for an orbit of the given altitude.
pub fn synthetic_elements(
    name: &str,
    norad_id: u32,
    epoch: Epoch,
    altitude_km: f64,
    inclination: f64,
    raan: f64,
    mean_anomaly: f64,
) -> OrbitalElements {
    let a = EARTH_EQUATORIAL_RADIUS_KM + altitude_km;
    let n_rad_s = (MU_EARTH / (a * a * a)).sqrt();
    let mean_motion = (n_rad_s * 86_400.0 / std::f64::consts::TAU * 1e8).round() / 1e8;
    // Whole milliseconds keep the record, the epoch and the day fraction consistent.
    let epoch = Epoch::from_unix_millis(epoch.unix_millis());
    let year = epoch.year();
    let day = epoch.day_of_year();
    let day = (day * 1e8).round() / 1e8;
    let epoch = Epoch::from_year_and_day(year, day).expect("valid epoch");
    OrbitalElements {
        satellite_id: name.to_string(),
        norad_id,
        classification: 'U',
        international_designator: format!("{:02}001A", year.rem_euclid(100)),
        epoch_year: year,
        epoch_day: day,
        epoch,
        mean_motion_dot: 0.0,
        mean_motion_ddot: 0.0,
        bstar: 0.0,
        ephemeris_type: 0,
        element_set_no: 999,
        inclination,
        raan: raan.rem_euclid(360.0),
        eccentricity: 0.0001,
        arg_perigee: 90.0,
        mean_anomaly: mean_anomaly.rem_euclid(360.0),
        mean_motion,
        rev_number: 1,
    }
}

/// The reference 500 km, 97.4 deg orbit.
pub fn sso_elements(name: &str, norad_id: u32, epoch: Epoch, raan: f64, mean_anomaly: f64) -> OrbitalElements {
    synthetic_elements(name, norad_id, epoch, 500.0, 97.4, raan, mean_anomaly)
}

pub fn sensors() -> Vec<Sensor> {
    vec![
        Sensor {
            id: "HPT".into(),
            name: "HPT".into(),
            gsd_m: 2.2,
            swath_km: (3.6, 2.7),
            min_sun_el_deg: 5.0,
            spectral: "RGBN".into(),
        },
        Sensor {
            id: "SMI".into(),
            name: "SMI".into(),
            gsd_m: 47.0,
            swath_km: (77.0, 58.0),
            min_sun_el_deg: 25.0,
            spectral: "430-1020 nm, 1 nm steps".into(),
        },
        Sensor {
            id: "MFC".into(),
            name: "MFC".into(),
            gsd_m: 35.0,
            swath_km: (58.0, 44.0),
            min_sun_el_deg: 5.0,
            spectral: String::new(),
        },
    ]
}

pub fn links() -> Vec<CommLink> {
    let link = |name: &str, direction, rate_bps, band: &str| CommLink {
        name: name.into(),
        direction,
        rate_bps,
        band: band.into(),
    };
    vec![
        link("SCMD", LinkDirection::Up, 1_000.0, "S"),
        link("STLM", LinkDirection::Down, 1_000_000.0, "S"),
        link("XTLM", LinkDirection::Down, 20_000_000.0, "X"),
    ]
}

pub fn satellites(epoch: Epoch) -> Vec<Satellite> {
    vec![
        Satellite {
            id: "sat1".into(),
            name: "SAT1".into(),
            norad_id: 90001,
            tle: Some(sso_elements("SAT1", 90001, epoch, 45.0, 0.0)),
            links: links(),
            sensors: sensors(),
            priority_class: 2,
            active: true,
        },
        Satellite {
            id: "sat2".into(),
            name: "SAT2".into(),
            norad_id: 90002,
            tle: Some(sso_elements("SAT2", 90002, epoch, 75.0, 180.0)),
            links: links(),
            sensors: sensors(),
            priority_class: 1,
            active: true,
        },
    ]
}

fn location(id: &str, lat: f64, lon: f64, offset: f64, kind: LocationKind, links: &[&str]) -> Location {
    Location {
        id: id.into(),
        name: id.into(),
        point: GeodeticPoint::new(lat, lon, 0.0).expect("valid coordinates"),
        utc_offset_hours: offset,
        kind,
        links_supported: links.iter().map(|l| l.to_string()).collect(),
        min_elevation_mask: 0.0,
    }
}

pub fn stations() -> Vec<Location> {
    vec![
        location("SENDAI", 38.3, 140.9, 9.0, LocationKind::Station, &["SCMD", "STLM", "XTLM"]),
        location("KIRUNA", 67.8, 20.4, 1.0, LocationKind::Station, &["SCMD", "STLM"]),
    ]
}

pub fn targets() -> Vec<Location> {
    vec![
        location("TOKYO", 35.68, 139.77, 9.0, LocationKind::Target, &[]),
        location("MANILA", 14.6, 121.0, 8.0, LocationKind::Target, &[]),
        location("NAIROBI", -1.29, 36.82, 3.0, LocationKind::Target, &[]),
    ]
}

pub fn request_templates() -> Vec<RequestTemplate> {
    vec![
        RequestTemplate {
            id: "hpt-standard".into(),
            sensor_name: "HPT".into(),
            cmd_template: TemplateKind::HptMfc,
            slots_per_capture: 2,
            max_resolution_factor: None,
            max_cloud_pct: None,
        },
        RequestTemplate {
            id: "smi-standard".into(),
            sensor_name: "SMI".into(),
            cmd_template: TemplateKind::SmiMfc,
            slots_per_capture: 1,
            max_resolution_factor: None,
            max_cloud_pct: None,
        },
    ]
}

/// The full scenario with element sets at `epoch`.
pub fn demo_db(epoch: Epoch) -> Db {
    let mut db = Db::default();
    for sat in satellites(epoch) {
        db.upsert_satellite(sat).expect("demo satellites are valid");
    }
    for loc in stations().into_iter().chain(targets()) {
        db.upsert_location(loc).expect("demo locations are valid");
    }
    for t in request_templates() {
        db.upsert_template(t);
    }
    db
}
