//! Operator edits to communication sessions.

use super::{Db, Store, StoreError, DEFAULT_SETUP_S, DEFAULT_TEARDOWN_S};
use crate::model::{AuditRecord, CommSession, SessionState};
use crate::time::Epoch;

/// Sessions freeze this long before AOS so a station never runs a plan that is still changing.
pub const LOCK_LEAD_S: i64 = 120;

fn editable<'a>(db: &'a mut Db, id: &str, now: Epoch) -> Result<&'a mut CommSession, StoreError> {
    let s = db
        .comm_sessions
        .get_mut(id)
        .ok_or_else(|| StoreError::not_found("communication session", id))?;
    if s.t_los <= now {
        return Err(StoreError::SessionInPast(id.to_string()));
    }
    if now >= s.t_aos.add_millis(-LOCK_LEAD_S * 1000) {
        return Err(StoreError::SessionLocked(id.to_string()));
    }
    Ok(s)
}

fn record(db: &mut Db, now: Epoch, actor: &str, id: &str, field: &str, old: String, new: String) {
    db.audit(AuditRecord {
        when: now,
        actor: actor.to_string(),
        session_id: id.to_string(),
        field: field.to_string(),
        old,
        new,
    });
}

/// Sets the enable flag; a change is audited and re-runs interference at the station.
pub fn set_enabled(store: &Store, id: &str, enabled: bool, actor: &str, now: Epoch) -> Result<CommSession, StoreError> {
    store.transaction(|db| {
        let s = editable(db, id, now)?;
        if s.enabled == enabled {
            return Ok(s.clone());
        }
        s.enabled = enabled;
        s.state = if enabled { SessionState::Confirmed } else { SessionState::Tentative };
        s.refresh_beam_label();
        s.revision += 1;
        let station = s.station_name.clone();
        record(db, now, actor, id, "enabled", (!enabled).to_string(), enabled.to_string());
        db.resolve_station(&station, DEFAULT_SETUP_S, DEFAULT_TEARDOWN_S);
        Ok(db.comm_sessions[id].clone())
    })
}

pub fn set_priority(store: &Store, id: &str, priority: i32, actor: &str, now: Epoch) -> Result<CommSession, StoreError> {
    store.transaction(|db| {
        let s = editable(db, id, now)?;
        let old = s.priority;
        if old == priority {
            return Ok(s.clone());
        }
        s.priority = priority;
        s.revision += 1;
        let station = s.station_name.clone();
        record(db, now, actor, id, "priority", old.to_string(), priority.to_string());
        db.resolve_station(&station, DEFAULT_SETUP_S, DEFAULT_TEARDOWN_S);
        Ok(db.comm_sessions[id].clone())
    })
}

/// Upcoming sessions a station will actually run: enabled, interference-free, not yet over.
pub fn station_agenda(db: &Db, station: &str, now: Epoch) -> Result<Vec<CommSession>, StoreError> {
    let name = db.location(station)?.name.clone();
    let mut agenda: Vec<CommSession> = db
        .comm_sessions_at(&name)
        .filter(|s| s.enabled && !s.interference && s.t_los > now)
        .cloned()
        .collect();
    agenda.sort_by(|a, b| a.t_aos.cmp(&b.t_aos).then_with(|| a.id.cmp(&b.id)));
    Ok(agenda)
}
