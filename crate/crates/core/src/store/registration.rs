//! Rolling registration of communication sessions from fresh pass predictions.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Db, Store, StoreError};
use crate::model::{CommSession, Location, Satellite, SessionState};
use crate::passes::{Pass, PassFinder, Site, TimeWindow};
use crate::time::Epoch;

/// Two predictions of the same pass may differ by at most this much at MEL.
pub const UPSERT_WINDOW_S: i64 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegistrationOptions {
    pub horizon_s: f64,
    pub setup_s: i64,
    pub teardown_s: i64,
}

impl Default for RegistrationOptions {
    fn default() -> Self {
        RegistrationOptions {
            horizon_s: 7.0 * 86_400.0,
            setup_s: super::DEFAULT_SETUP_S,
            teardown_s: super::DEFAULT_TEARDOWN_S,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistrationReport {
    pub created: usize,
    pub updated: usize,
    pub unchanged: usize,
    pub removed: usize,
    /// (satellite, message) for every satellite whose batch was skipped.
    pub errors: Vec<(String, String)>,
}

impl RegistrationReport {
    fn absorb(&mut self, other: RegistrationReport) {
        self.created += other.created;
        self.updated += other.updated;
        self.unchanged += other.unchanged;
        self.removed += other.removed;
        self.errors.extend(other.errors);
    }
}

struct StationPasses {
    station: Location,
    passes: Vec<Pass>,
}

fn predict(sat: &Satellite, stations: &[Location], window: TimeWindow) -> Result<Vec<StationPasses>, String> {
    let elements = sat.tle.as_ref().ok_or("no element set")?;
    let finder = PassFinder::new(elements).map_err(|e| e.to_string())?;
    stations
        .iter()
        .filter(|st| sat.links.iter().any(|l| st.links_supported.contains(&l.name)))
        .map(|st| {
            let site = Site {
                id: st.name.clone(),
                point: st.point,
                utc_offset_hours: st.utc_offset_hours,
            };
            let passes = finder
                .comm_passes(&site, window, st.min_elevation_mask)
                .map_err(|e| format!("{}: {e}", st.name))?;
            Ok(StationPasses {
                station: st.clone(),
                passes,
            })
        })
        .collect()
}

fn same_times(s: &CommSession, p: &Pass) -> bool {
    s.t_aos == p.t_aos
        && s.t_mel == p.t_mel
        && s.t_los == p.t_los
        && s.t_los5 == p.t_los5
        && s.max_elevation == p.max_elevation
        && s.sunlit == p.sunlit_at_mel
}

fn upsert(db: &mut Db, sat: &Satellite, predicted: &[StationPasses], now: Epoch, horizon_end: Epoch) -> RegistrationReport {
    let mut report = RegistrationReport::default();
    for sp in predicted {
        let station = &sp.station;
        for link in sat.links.iter().filter(|l| station.links_supported.contains(&l.name)) {
            let mut matched: BTreeSet<String> = BTreeSet::new();
            for pass in &sp.passes {
                let existing = db
                    .comm_sessions
                    .values()
                    .filter(|s| {
                        s.sat_name == sat.name
                            && s.station_name == station.name
                            && s.link_name == link.name
                            && !matched.contains(&s.id)
                            && s.t_mel.millis_since(pass.t_mel).abs() <= UPSERT_WINDOW_S * 1000
                    })
                    .min_by_key(|s| s.t_mel.millis_since(pass.t_mel).abs())
                    .map(|s| s.id.clone());
                match existing {
                    Some(id) => {
                        matched.insert(id.clone());
                        let s = db.comm_sessions.get_mut(&id).expect("id just found");
                        if same_times(s, pass) {
                            report.unchanged += 1;
                        } else {
                            s.t_aos = pass.t_aos;
                            s.t_mel = pass.t_mel;
                            s.t_los = pass.t_los;
                            s.t_los5 = pass.t_los5;
                            s.max_elevation = pass.max_elevation;
                            s.sunlit = pass.sunlit_at_mel;
                            s.revision += 1;
                            report.updated += 1;
                        }
                    }
                    None => {
                        let id = db.next_comm_id();
                        let mut session = CommSession {
                            id: id.clone(),
                            sat_name: sat.name.clone(),
                            station_name: station.name.clone(),
                            link_name: link.name.clone(),
                            max_elevation: pass.max_elevation,
                            sunlit: pass.sunlit_at_mel,
                            interference: false,
                            enabled: false,
                            t_aos: pass.t_aos,
                            t_mel: pass.t_mel,
                            t_los: pass.t_los,
                            t_los5: pass.t_los5,
                            priority: sat.priority_class,
                            beam_label: String::new(),
                            state: SessionState::Tentative,
                            revision: 0,
                        };
                        session.refresh_beam_label();
                        matched.insert(id.clone());
                        db.comm_sessions.insert(id, session);
                        report.created += 1;
                    }
                }
            }
            // Predictions that vanished: drop them unless an operator has enabled them.
            let stale: Vec<String> = db
                .comm_sessions
                .values()
                .filter(|s| {
                    s.sat_name == sat.name
                        && s.station_name == station.name
                        && s.link_name == link.name
                        && !s.enabled
                        && !matched.contains(&s.id)
                        && s.t_aos >= now
                        && s.t_los <= horizon_end
                })
                .map(|s| s.id.clone())
                .collect();
            for id in stale {
                db.comm_sessions.remove(&id);
                report.removed += 1;
            }
        }
    }
    report
}

/// Upserts every pass of the next `horizon_s` for all active satellites, one
/// transaction per satellite, then re-resolves interference at the touched stations.
pub fn auto_register_comm_sessions(store: &Store, now: Epoch, options: &RegistrationOptions) -> RegistrationReport {
    let snapshot = store.snapshot();
    let stations: Vec<Location> = snapshot.stations().cloned().collect();
    let window = TimeWindow::new(now, now.add_seconds(options.horizon_s));
    let mut report = RegistrationReport::default();
    for sat in snapshot.satellites.values().filter(|s| s.active) {
        let predicted = match predict(sat, &stations, window) {
            Ok(p) => p,
            Err(message) => {
                tracing::warn!(satellite = %sat.name, %message, "registration skipped");
                report.errors.push((sat.name.clone(), message));
                continue;
            }
        };
        let result = store.transaction(|db| {
            let part = upsert(db, sat, &predicted, now, window.end);
            for sp in &predicted {
                db.resolve_station(&sp.station.name, options.setup_s, options.teardown_s);
            }
            Ok::<_, StoreError>(part)
        });
        match result {
            Ok(part) => report.absorb(part),
            Err(e) => report.errors.push((sat.name.clone(), e.to_string())),
        }
    }
    tracing::info!(
        created = report.created,
        updated = report.updated,
        unchanged = report.unchanged,
        removed = report.removed,
        "comm session registration finished"
    );
    report
}
