//! Imaging requests: candidate issue, confirmation, expiry and address bookkeeping.

use serde::{Deserialize, Serialize};

use super::{Db, Store, StoreError};
use crate::astro::GeodeticPoint;
use crate::forecast::CloudForecastProvider;
use crate::model::{
    AuditRecord, CaptureSession, Request, RequestStatus, RequestTarget, RequestTemplate, Satellite,
    SessionState,
};
use crate::passes::{ConstraintSet, Opportunity, PassFinder, Site, TimeWindow};
use crate::time::Epoch;

pub const REQUEST_MIN_LEAD_S: f64 = 3_600.0;
pub const REQUEST_MAX_LEAD_S: f64 = 12.0 * 3_600.0;

/// Inputs to candidate generation that do not live in the store.
pub struct PlanningContext<'a> {
    pub forecast: &'a dyn CloudForecastProvider,
    /// Defaults; a request template may tighten them.
    pub constraints: ConstraintSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestOutcome {
    pub request: Request,
    pub candidates: Vec<CaptureSession>,
}

fn constraints_for(base: ConstraintSet, template: &RequestTemplate) -> ConstraintSet {
    ConstraintSet {
        max_resolution_factor: template.max_resolution_factor.unwrap_or(base.max_resolution_factor),
        max_cloud_pct: template.max_cloud_pct.unwrap_or(base.max_cloud_pct),
        ..base
    }
}

fn resolve_target(db: &Db, target: &RequestTarget) -> Result<(String, GeodeticPoint, f64), StoreError> {
    match target {
        RequestTarget::Location { id } => {
            let loc = db.location(id)?;
            Ok((loc.name.clone(), loc.point, loc.utc_offset_hours))
        }
        RequestTarget::Point { name, point } => {
            let point = GeodeticPoint::new(point.latitude, point.longitude, point.altitude_m)
                .map_err(|e| StoreError::Invalid(e.to_string()))?;
            // Ad-hoc points get the nominal zone of their meridian.
            let offset = (point.longitude / 15.0).round().clamp(-12.0, 14.0);
            Ok((name.clone(), point, offset))
        }
    }
}

fn candidate(id: String, request_id: &str, template: &RequestTemplate, site: &Site, sat: &Satellite, o: &Opportunity) -> CaptureSession {
    CaptureSession {
        id,
        sat_name: sat.name.clone(),
        sensor_name: template.sensor_name.clone(),
        location_name: site.id.clone(),
        location: site.point,
        utc_offset_hours: site.utc_offset_hours,
        t_mel: o.t_mel,
        elevation_at_target: o.elevation_at_target,
        roll_deg: o.roll_deg,
        sunlit: o.sat_sunlit,
        sun_el_deg: o.sun_el_deg,
        orb_sun_deg: o.orb_sun_deg,
        local_solar_time: o.local_solar_time,
        local_clock_time: o.local_clock_time,
        resolution_factor: o.resolution_factor,
        cloud_pct: o.cloud_pct,
        auto_selectable: o.auto_selectable,
        state: SessionState::Tentative,
        request_id: request_id.to_string(),
        cmd_template: template.cmd_template,
        revision: 0,
    }
}

/// Issues tentative candidates for an imaging request.
///
/// A request without candidates is still recorded (status open) before
/// [`StoreError::NoCandidates`] is returned.
pub fn create_request(
    store: &Store,
    ctx: &PlanningContext<'_>,
    now: Epoch,
    user_id: &str,
    template_id: &str,
    target: RequestTarget,
    window: TimeWindow,
) -> Result<RequestOutcome, StoreError> {
    let earliest = now.add_seconds(REQUEST_MIN_LEAD_S);
    let latest = now.add_seconds(REQUEST_MAX_LEAD_S);
    if window.start < earliest || window.end > latest || window.end <= window.start {
        return Err(StoreError::WindowOutOfRange {
            now,
            start: window.start,
            end: window.end,
        });
    }
    let snapshot = store.snapshot();
    let template = snapshot
        .templates
        .get(template_id)
        .cloned()
        .ok_or_else(|| StoreError::UnknownTemplate(template_id.to_string()))?;
    let (target_name, point, offset) = resolve_target(&snapshot, &target)?;
    let site = Site {
        id: target_name.clone(),
        point,
        utc_offset_hours: offset,
    };
    let constraints = constraints_for(ctx.constraints, &template);

    let mut found: Vec<(Satellite, Opportunity)> = Vec::new();
    for sat in snapshot.satellites.values().filter(|s| s.active) {
        let (Some(elements), Some(sensor)) = (&sat.tle, sat.sensor(&template.sensor_name)) else {
            continue;
        };
        let result = PassFinder::new(elements)
            .and_then(|f| f.capture_opportunities(&site, sensor, window, &constraints, ctx.forecast));
        match result {
            Ok(ops) => found.extend(ops.into_iter().map(|o| (sat.clone(), o))),
            Err(e) => tracing::warn!(satellite = %sat.name, error = %e, "opportunity search failed"),
        }
    }
    found.sort_by(|a, b| a.1.t_mel.cmp(&b.1.t_mel).then_with(|| a.0.name.cmp(&b.0.name)));

    let outcome = store.transaction(|db| {
        let id = db.next_request_id();
        let mut request = Request {
            id: id.clone(),
            user_id: user_id.to_string(),
            template_id: template_id.to_string(),
            target: target.clone(),
            target_name: target_name.clone(),
            target_point: point,
            window_start: window.start,
            window_end: window.end,
            status: RequestStatus::Open,
            created_at: now,
        };
        let mut candidates = Vec::with_capacity(found.len());
        for (sat, o) in &found {
            let cap_id = db.next_capture_id();
            let session = candidate(cap_id.clone(), &id, &template, &site, sat, o);
            db.capture_sessions.insert(cap_id, session.clone());
            candidates.push(session);
        }
        if !candidates.is_empty() {
            request.status = RequestStatus::CandidatesIssued;
        }
        db.requests.insert(id, request.clone());
        Ok::<_, StoreError>(RequestOutcome { request, candidates })
    })?;
    if outcome.candidates.is_empty() {
        return Err(StoreError::NoCandidates(outcome.request.id));
    }
    Ok(outcome)
}

/// Promotes one candidate to a confirmed session, drops its siblings and reserves storage.
pub fn confirm_request(
    store: &Store,
    now: Epoch,
    request_id: &str,
    candidate_id: &str,
    actor: &str,
) -> Result<CaptureSession, StoreError> {
    store.transaction(|db| {
        let request = db
            .requests
            .get(request_id)
            .cloned()
            .ok_or_else(|| StoreError::not_found("request", request_id))?;
        match request.status {
            RequestStatus::CandidatesIssued => {}
            RequestStatus::Confirmed => return Err(StoreError::AlreadyConfirmed(request_id.to_string())),
            other => {
                return Err(StoreError::InvalidTransition {
                    id: request_id.to_string(),
                    status: format!("{other:?}").to_lowercase(),
                    expected: "candidates_issued",
                })
            }
        }
        let chosen = db
            .capture_sessions
            .get(candidate_id)
            .cloned()
            .ok_or_else(|| StoreError::not_found("candidate", candidate_id))?;
        if chosen.request_id != request_id {
            return Err(StoreError::CandidateMismatch {
                request: request_id.to_string(),
                candidate: candidate_id.to_string(),
            });
        }
        if chosen.t_mel < now.add_seconds(REQUEST_MIN_LEAD_S) {
            return Err(StoreError::CandidateExpired(candidate_id.to_string()));
        }
        let template = db
            .templates
            .get(&request.template_id)
            .cloned()
            .ok_or_else(|| StoreError::UnknownTemplate(request.template_id.clone()))?;
        db.registry_mut(&chosen.sat_name)
            .allocate(candidate_id, template.slots_per_capture.max(1))
            .map_err(|source| StoreError::Address {
                satellite: chosen.sat_name.clone(),
                source,
            })?;
        db.capture_sessions
            .retain(|id, s| s.request_id != request_id || id == candidate_id);
        let session = db.capture_sessions.get_mut(candidate_id).expect("chosen candidate kept");
        session.state = SessionState::Confirmed;
        session.revision += 1;
        let session = session.clone();
        let req = db.requests.get_mut(request_id).expect("request exists");
        debug_assert!(req.status.can_become(RequestStatus::Confirmed));
        req.status = RequestStatus::Confirmed;
        db.audit(AuditRecord {
            when: now,
            actor: actor.to_string(),
            session_id: candidate_id.to_string(),
            field: "state".into(),
            old: "tentative".into(),
            new: "confirmed".into(),
        });
        Ok(session)
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpiryReport {
    pub requests_expired: usize,
    pub candidates_removed: usize,
}

/// Expires unconfirmed requests whose window has closed and deletes their candidates.
pub fn expire_stale(store: &Store, now: Epoch) -> Result<ExpiryReport, StoreError> {
    store.transaction(|db| {
        let mut report = ExpiryReport::default();
        let stale: Vec<String> = db
            .requests
            .values()
            .filter(|r| r.window_end <= now && r.status.can_become(RequestStatus::Expired))
            .map(|r| r.id.clone())
            .collect();
        for id in stale {
            db.requests.get_mut(&id).expect("listed").status = RequestStatus::Expired;
            report.requests_expired += 1;
            let before = db.capture_sessions.len();
            db.capture_sessions
                .retain(|_, s| !(s.request_id == id && s.state == SessionState::Tentative));
            report.candidates_removed += before - db.capture_sessions.len();
        }
        Ok(report)
    })
}

/// Frees storage slots after their contents reached the ground.
pub fn release_addresses(store: &Store, sat_name: &str, addresses: &[String]) -> Result<(), StoreError> {
    store.transaction(|db| {
        let sat = db.satellite(sat_name)?.name.clone();
        db.registry_mut(&sat)
            .release(addresses)
            .map_err(|source| StoreError::Address { satellite: sat, source })
    })
}
