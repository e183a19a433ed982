use satops_core::agent::{
    antenna_schedule, link_bytes, record_downlink, run_agent, run_track, seconds_above_mask, sync_after_los,
    volume_report, AgentOptions,
};
use satops_core::astro::{eci_to_ecef, Propagator, Sgp4Propagator};
use satops_core::error::Coded;
use satops_core::forecast::ConstantForecast;
use satops_core::model::{CommSession, RegisteredFile, RequestTarget, SessionState};
use satops_core::passes::{ConstraintSet, TimeWindow};
use satops_core::scenario;
use satops_core::store::{
    auto_register_comm_sessions, confirm_request, create_request, set_enabled, set_priority, PlanningContext,
    RegistrationOptions, Store, StoreError,
};
use satops_core::{Epoch, Vec3};

fn t0() -> Epoch {
    Epoch::ymd_hms(2021, 5, 10, 0, 0, 0)
}

fn registered(days: f64) -> Store {
    let store = Store::in_memory(scenario::demo_db(t0()));
    let options = RegistrationOptions {
        horizon_s: days * 86_400.0,
        ..Default::default()
    };
    let report = auto_register_comm_sessions(&store, t0(), &options);
    assert!(report.errors.is_empty(), "{:?}", report.errors);
    store
}

fn sessions(store: &Store, station: &str, link: &str) -> Vec<CommSession> {
    let mut v: Vec<CommSession> = store.read(|db| {
        db.comm_sessions
            .values()
            .filter(|s| s.station_name == station && s.link_name == link)
            .cloned()
            .collect()
    });
    v.sort_by_key(|s| s.t_aos);
    v
}

/// Makes `id` the enabled winner of its conflict group.
fn promote(store: &Store, id: &str) {
    set_priority(store, id, 10, "op", t0()).unwrap();
    set_enabled(store, id, true, "op", t0()).unwrap();
}

/// Azimuth and elevation from the local east/north/up basis.
fn look_oracle(lat: f64, lon: f64, site: Vec3, sat: Vec3) -> (f64, f64) {
    let (sl, cl) = lat.to_radians().sin_cos();
    let (so, co) = lon.to_radians().sin_cos();
    let east = Vec3::new(-so, co, 0.0);
    let north = Vec3::new(-sl * co, -sl * so, cl);
    let up = Vec3::new(cl * co, cl * so, sl);
    let rho = sat - site;
    let az = rho.dot(east).atan2(rho.dot(north)).to_degrees().rem_euclid(360.0);
    let el = (rho.dot(up) / rho.norm()).asin().to_degrees();
    (az, el)
}

#[test]
fn schedule_covers_aos_to_los_at_one_second() {
    let store = registered(1.0);
    let db = store.snapshot();
    let mut session = sessions(&store, "SENDAI", "STLM").remove(0);
    session.t_los = session.t_aos.add_seconds(600.0);
    let sat = db.satellite(&session.sat_name).unwrap();
    let station = db.location("SENDAI").unwrap();
    let schedule = antenna_schedule(&session, sat.tle.as_ref().unwrap(), station, 1).unwrap();
    assert_eq!(schedule.samples.len(), 601);
    assert_eq!(schedule.samples[0].t, session.t_aos);
    assert_eq!(schedule.samples[600].t, session.t_los);

    // A fractional duration still ends exactly on LOS.
    session.t_los = session.t_aos.add_millis(100_500);
    let schedule = antenna_schedule(&session, sat.tle.as_ref().unwrap(), station, 10).unwrap();
    assert_eq!(schedule.samples.len(), 12);
    assert_eq!(schedule.samples.last().unwrap().t, session.t_los);

    let csv = schedule.to_csv();
    assert!(csv.starts_with("t_utc,az_deg,el_deg\n"));
    assert_eq!(csv.lines().count(), 13);

    let err = antenna_schedule(&session, sat.tle.as_ref().unwrap(), station, 0).unwrap_err();
    assert_eq!(err.code(), "INVALID_STEP");
}

#[test]
fn schedule_angles_match_the_basis_oracle() {
    let store = registered(2.0);
    let db = store.snapshot();
    let station = db.location("SENDAI").unwrap();
    let site = station.point.to_ecef();
    let mut checked = 0;
    for session in sessions(&store, "SENDAI", "STLM") {
        let elements = db.satellite(&session.sat_name).unwrap().tle.clone().unwrap();
        let schedule = antenna_schedule(&session, &elements, station, 1).unwrap();
        let prop = Sgp4Propagator::new(&elements).unwrap();
        for s in &schedule.samples {
            let sat = eci_to_ecef(&prop.propagate(s.t).unwrap());
            let (az, el) = look_oracle(station.point.latitude, station.point.longitude, site, sat);
            let mut d = (s.az_deg - az).rem_euclid(360.0);
            if d > 180.0 {
                d -= 360.0;
            }
            assert!(d.abs() < 1e-6, "az {} vs {az}", s.az_deg);
            assert!((s.el_deg - el).abs() < 1e-6);
        }
        if session.max_elevation < 85.0 {
            for w in schedule.samples.windows(2) {
                assert!((w[1].az_deg - w[0].az_deg).abs() < 15.0, "azimuth jump");
            }
            // Near zenith the elevation moves too fast for 1 s samples to catch the peak.
            let peak = schedule.samples.iter().map(|s| s.el_deg).fold(f64::MIN, f64::max);
            assert!((peak - session.max_elevation).abs() < 0.05, "{peak} vs {}", session.max_elevation);
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn link_volume_is_rate_times_time() {
    assert_eq!(link_bytes(1_000_000.0, 100.0, 1.0), 12_500_000);
    assert_eq!(link_bytes(20_000_000.0, 400.0, 0.8), 800_000_000);
    assert_eq!(link_bytes(1_000.0, 0.0, 0.8), 0);
}

#[test]
fn track_bytes_follow_time_above_mask() {
    let store = registered(1.0);
    let db = store.snapshot();
    let session = sessions(&store, "SENDAI", "STLM").remove(0);
    let sat = db.satellite(&session.sat_name).unwrap();
    let station = db.location("SENDAI").unwrap();
    let schedule = antenna_schedule(&session, sat.tle.as_ref().unwrap(), station, 1).unwrap();
    let record = run_track(&db, &session, &schedule, 0.8).unwrap();
    let seconds = seconds_above_mask(&schedule, 0.0);
    assert!((seconds - session.t_los.seconds_since(session.t_aos)).abs() < 0.01);
    assert_eq!(record.bytes, link_bytes(1_000_000.0, seconds, 0.8));
    assert_eq!(record.file_manifest.len(), 1);
    assert!(record.file_manifest[0].name.ends_with(".tlm"));
    assert!(record.played_back.is_empty());

    let err = run_track(&db, &session, &schedule, 1.5).unwrap_err();
    assert_eq!(err.code(), "INVALID_EFFICIENCY");

    // Raising the mask shortens the useful time.
    let higher = seconds_above_mask(&schedule, 10.0);
    assert!(higher < seconds);
}

#[test]
fn sync_waits_for_los_and_renames_clashing_files() {
    let store = registered(1.0);
    let db = store.snapshot();
    let session = sessions(&store, "SENDAI", "STLM").remove(0);
    let sat = db.satellite(&session.sat_name).unwrap();
    let schedule = antenna_schedule(&session, sat.tle.as_ref().unwrap(), db.location("SENDAI").unwrap(), 1).unwrap();
    let record = run_track(&db, &session, &schedule, 0.8).unwrap();
    let name = record.file_manifest[0].name.clone();
    record_downlink(&store, record.clone()).unwrap();
    let err = record_downlink(&store, record).unwrap_err();
    assert_eq!(err.code(), "INVALID_RECORD");

    let err = sync_after_los(&store, &session.id, session.t_los.add_seconds(-1.0)).unwrap_err();
    assert!(matches!(err, StoreError::SyncBeforeLos(_)));
    assert_eq!(err.code(), "SYNC_BEFORE_LOS");

    store
        .transaction(|db| {
            db.files.push(RegisteredFile {
                name: name.clone(),
                bytes: 1,
                session_id: "EARLIER".into(),
                registered_at: t0(),
            });
            Ok::<_, StoreError>(())
        })
        .unwrap();
    let synced = sync_after_los(&store, &session.id, session.t_los).unwrap();
    assert!(synced.synced);
    let renamed = &synced.file_manifest[0].name;
    assert_ne!(renamed, &name);
    let (stem, ext) = name.rsplit_once('.').unwrap();
    let suffix = renamed.strip_prefix(&format!("{stem}-")).unwrap().strip_suffix(&format!(".{ext}")).unwrap();
    assert_eq!(suffix.len(), 8);
    assert!(suffix.chars().all(|c| c.is_ascii_hexdigit()));

    // Syncing again changes nothing.
    let files = store.read(|db| db.files.len());
    sync_after_los(&store, &session.id, session.t_los).unwrap();
    assert_eq!(store.read(|db| db.files.len()), files);
}

#[test]
fn agent_tracks_enabled_sessions_and_reports_volumes() {
    let store = registered(2.0);
    let targets: Vec<CommSession> = ["SENDAI", "KIRUNA"]
        .iter()
        .flat_map(|st| sessions(&store, st, "STLM").into_iter().take(3))
        .collect();
    for s in &targets {
        promote(&store, &s.id);
    }
    let end = t0().add_seconds(2.0 * 86_400.0);
    let mut tracked = 0;
    for station in ["SENDAI", "KIRUNA"] {
        let report = run_agent(&store, station, t0(), end, &AgentOptions::default()).unwrap();
        assert!(report.errors.is_empty(), "{:?}", report.errors);
        assert!(report.tracks.iter().all(|r| r.synced && r.station_name == station));
        tracked += report.tracks.len();
        // A second run finds nothing new.
        let again = run_agent(&store, station, t0(), end, &AgentOptions::default()).unwrap();
        assert!(again.tracks.is_empty());
    }
    assert_eq!(tracked, store.read(|db| db.downlinks.len()));
    assert!(tracked >= targets.len());

    let db = store.snapshot();
    let report = volume_report(&db, t0(), end);
    let raw: u64 = db.downlinks.iter().map(|r| r.bytes).sum();
    assert_eq!(report.total(), raw);
    for (i, sat) in report.satellites.iter().enumerate() {
        let sum: u64 = db.downlinks.iter().filter(|r| &r.sat_name == sat).map(|r| r.bytes).sum();
        assert_eq!(report.satellite_total(i), sum);
    }
    for (j, st) in report.stations.iter().enumerate() {
        let sum: u64 = db.downlinks.iter().filter(|r| &r.station_name == st).map(|r| r.bytes).sum();
        assert_eq!(report.station_total(j), sum);
    }
    let csv = report.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "GB,KIRUNA,SENDAI,total(/sat)");
    assert!(csv.lines().last().unwrap().starts_with("total(/GRS),"));

    let empty = volume_report(&db, end, end.add_seconds(86_400.0));
    assert_eq!(empty.total(), 0);
    assert_eq!(empty.satellites.len(), 2);
}

#[test]
fn xband_track_plays_back_captured_images_and_frees_slots() {
    let store = registered(3.0);
    let ctx = PlanningContext {
        forecast: &ConstantForecast(10.0),
        constraints: ConstraintSet::default(),
    };
    // Earliest XTLM pass preceded by a confirmable TOKYO capture of the same satellite.
    let xband = sessions(&store, "SENDAI", "XTLM");
    let mut chosen = None;
    'outer: for now in (0..48).map(|h| t0().add_seconds(h as f64 * 3_600.0)) {
        let window = TimeWindow::new(now.add_seconds(3_600.0), now.add_seconds(12.0 * 3_600.0));
        let target = RequestTarget::Location { id: "TOKYO".into() };
        let Ok(outcome) = create_request(&store, &ctx, now, "user", "hpt-standard", target, window) else {
            continue;
        };
        for c in &outcome.candidates {
            if let Some(x) = xband
                .iter()
                .find(|x| {
                    x.sat_name == c.sat_name
                        && x.t_aos > c.t_mel.add_seconds(3_600.0)
                        && x.t_los5.is_some_and(|t| t.seconds_since(x.t_aos) > 300.0)
                })
            {
                chosen = Some((now, outcome.request.id.clone(), c.clone(), x.clone()));
                break 'outer;
            }
        }
    }
    let (now, request_id, candidate, xband) = chosen.expect("a capture followed by an X-band pass");
    let capture = confirm_request(&store, now, &request_id, &candidate.id, "user").unwrap();
    assert_eq!(capture.state, SessionState::Confirmed);
    let addresses = store.read(|db| db.registries[&capture.sat_name].addresses_for(&capture.id));
    assert_eq!(addresses.len(), 2);

    promote(&store, &xband.id);
    let report = run_agent(&store, "SENDAI", xband.t_aos.add_seconds(-60.0), xband.t_los.add_seconds(1.0), &AgentOptions::default())
        .unwrap();
    assert!(report.errors.is_empty(), "{:?}", report.errors);
    let record = report.tracks.iter().find(|r| r.session_id == xband.id).unwrap();
    assert_eq!(record.played_back, addresses);
    assert_eq!(record.file_manifest.len(), 2);
    assert!(record.file_manifest.iter().all(|f| f.name.ends_with(".img")));
    assert_eq!(record.file_manifest.iter().map(|f| f.bytes).sum::<u64>(), record.bytes);
    let db = store.snapshot();
    assert!(db.registries[&capture.sat_name].addresses_for(&capture.id).is_empty());
}
