//! HTTP+JSON service under `/api/v1`.
//!
//! Every handler runs its store work on the blocking pool; the store
//! serializes writers, so concurrent requests need no further locking.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Extension, Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use satops_core::agent::{antenna_schedule, volume_report};
use satops_core::astro::{parse_tle_file, GeodeticPoint};
use satops_core::config::{Config, Role};
use satops_core::error::{Coded, ErrorClass};
use satops_core::forecast::CloudForecastProvider;
use satops_core::jobs::{run_due_jobs, JobReport};
use satops_core::model::{RequestTarget, TemplateKind};
use satops_core::passes::TimeWindow;
use satops_core::planner::{generate_satellite_cmd, PlanError};
use satops_core::store::{
    confirm_request, create_request, set_enabled, set_priority, PlanningContext,
    SessionFilter, SessionKind, Store, StoreError,
};
use satops_core::template::{context_schema, lint_template, Diagnostic, TemplateSet};
use satops_core::Epoch;

pub const MAX_PAGE: usize = 1000;

/// Source of "now"; tests pin it.
#[derive(Clone)]
pub struct Clock(Arc<dyn Fn() -> Epoch + Send + Sync>);

impl Clock {
    pub fn system() -> Self {
        Clock(Arc::new(Epoch::now))
    }

    pub fn fixed(t: Epoch) -> Self {
        Clock(Arc::new(move || t))
    }

    pub fn from_fn(f: impl Fn() -> Epoch + Send + Sync + 'static) -> Self {
        Clock(Arc::new(f))
    }

    pub fn now(&self) -> Epoch {
        (self.0)()
    }
}

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub config: Arc<Config>,
    pub forecast: Arc<dyn CloudForecastProvider>,
    pub templates: Arc<TemplateSet>,
    pub clock: Clock,
}

#[derive(Debug, Clone, Serialize)]
pub struct Principal {
    pub id: String,
    pub role: Role,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: String,
    message: String,
    diagnostics: Vec<TemplateDiagnostic>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TemplateDiagnostic {
    pub template: String,
    #[serde(flatten)]
    pub diagnostic: Diagnostic,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code: code.to_string(),
            message: message.into(),
            diagnostics: Vec::new(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BAD_REQUEST", message)
    }

    fn coded(e: &(impl Coded + std::fmt::Display)) -> Self {
        let status = StatusCode::from_u16(e.class().http_status()).expect("valid status");
        if e.class() == ErrorClass::Internal {
            tracing::error!(code = e.code(), "{e}");
        }
        Self::new(status, e.code(), e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        Self::coded(&e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "code": self.code, "message": self.message });
        if !self.diagnostics.is_empty() {
            body["diagnostics"] = serde_json::to_value(&self.diagnostics).expect("serializable");
        }
        (self.status, Json(json!({ "error": body }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string()))?
}

async fn require_operator(Extension(who): Extension<Principal>, req: Request, next: Next) -> Response {
    if who.role != Role::Operator {
        return ApiError::new(StatusCode::FORBIDDEN, "FORBIDDEN", "operator role required").into_response();
    }
    next.run(req).await
}

async fn authenticate(State(state): State<AppState>, mut req: Request, next: Next) -> Response {
    let token = req
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(str::trim);
    let Some(entry) = token.and_then(|t| state.config.role_of(t)) else {
        return ApiError::new(StatusCode::UNAUTHORIZED, "UNAUTHENTICATED", "missing or unknown bearer token")
            .into_response();
    };
    req.extensions_mut().insert(Principal {
        id: entry.principal.clone(),
        role: entry.role,
    });
    next.run(req).await
}

/// Every authenticated route with the role it needs.
pub const ROUTES: &[(&str, &str, bool)] = &[
    ("POST", "/api/v1/tle", true),
    ("GET", "/api/v1/requests", false),
    ("POST", "/api/v1/requests", false),
    ("GET", "/api/v1/requests/{id}", false),
    ("POST", "/api/v1/requests/{id}/confirm", false),
    ("GET", "/api/v1/sessions", false),
    ("GET", "/api/v1/sessions/{id}", false),
    ("PATCH", "/api/v1/sessions/{id}", true),
    ("POST", "/api/v1/satellites/{id}/cmdfile", true),
    ("GET", "/api/v1/stations/{id}/schedule", true),
    ("GET", "/api/v1/reports/volumes", false),
    ("GET", "/api/v1/notifications", true),
];

pub fn router(state: AppState) -> Router {
    let operator = Router::new()
        .route("/tle", post(ingest_tle))
        .route("/sessions/:id", patch(edit_session))
        .route("/satellites/:id/cmdfile", post(cmd_file))
        .route("/stations/:id/schedule", get(schedule))
        .route("/notifications", get(notifications))
        .route_layer(middleware::from_fn(require_operator));
    let api = Router::new()
        .route("/requests", get(list_requests).post(submit_request))
        .route("/requests/:id", get(get_request))
        .route("/requests/:id/confirm", post(confirm))
        .route("/sessions", get(list_sessions))
        .route("/sessions/:id", get(get_session))
        .route("/reports/volumes", get(volumes))
        .merge(operator)
        .route_layer(middleware::from_fn_with_state(state.clone(), authenticate));
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .nest("/api/v1", api)
        .with_state(state)
}

fn parse_time(name: &str, value: &str) -> ApiResult<Epoch> {
    Epoch::parse(value).map_err(|_| ApiError::bad_request(format!("`{name}` is not an ISO-8601 UTC time: {value}")))
}

fn csv_response(body: String, file_name: &str) -> Response {
    (
        [
            (header::CONTENT_TYPE, "text/csv".to_string()),
            (header::CONTENT_DISPOSITION, format!("attachment; filename=\"{file_name}\"")),
        ],
        body,
    )
        .into_response()
}

#[derive(Debug, Serialize)]
pub struct TleOutcome {
    pub accepted: Vec<TleAccepted>,
    pub rejected: Vec<TleRejected>,
}

#[derive(Debug, Serialize)]
pub struct TleAccepted {
    pub satellite: String,
    pub norad_id: u32,
    pub epoch: Epoch,
}

#[derive(Debug, Serialize)]
pub struct TleRejected {
    pub index: usize,
    pub norad_id: Option<u32>,
    pub code: String,
    pub message: String,
}

/// Body: a TLE file (two or three lines per set).
async fn ingest_tle(
    State(state): State<AppState>,
    body: Bytes,
) -> ApiResult<Json<TleOutcome>> {
    let text = String::from_utf8(body.to_vec()).map_err(|_| ApiError::bad_request("body is not UTF-8"))?;
    blocking(move || {
        let parsed = parse_tle_file(&text);
        if parsed.is_empty() {
            return Err(ApiError::bad_request("no element sets in body"));
        }
        state
            .store
            .transaction(|db| {
                let mut out = TleOutcome {
                    accepted: Vec::new(),
                    rejected: Vec::new(),
                };
                for (index, result) in parsed.into_iter().enumerate() {
                    match result {
                        Ok(el) => {
                            let (norad_id, epoch) = (el.norad_id, el.epoch);
                            match db.ingest_elements(el) {
                                Ok(satellite) => out.accepted.push(TleAccepted { satellite, norad_id, epoch }),
                                Err(e) => out.rejected.push(TleRejected {
                                    index,
                                    norad_id: Some(norad_id),
                                    code: e.code().into(),
                                    message: e.to_string(),
                                }),
                            }
                        }
                        Err(e) => out.rejected.push(TleRejected {
                            index,
                            norad_id: None,
                            code: e.code().into(),
                            message: e.to_string(),
                        }),
                    }
                }
                Ok::<_, StoreError>(out)
            })
            .map(Json)
            .map_err(ApiError::from)
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum TargetBody {
    Id { id: String },
    Point {
        lat: f64,
        lon: f64,
        #[serde(default)]
        alt_m: f64,
        #[serde(default)]
        name: Option<String>,
    },
}

#[derive(Debug, Deserialize)]
pub struct WindowBody {
    pub start: String,
    pub end: String,
}

#[derive(Debug, Deserialize)]
pub struct RequestBody {
    pub template_id: String,
    pub target: TargetBody,
    pub window: WindowBody,
}

async fn submit_request(
    State(state): State<AppState>,
    Extension(who): Extension<Principal>,
    Json(body): Json<RequestBody>,
) -> ApiResult<Response> {
    let window = TimeWindow::new(parse_time("window.start", &body.window.start)?, parse_time("window.end", &body.window.end)?);
    let target = match body.target {
        TargetBody::Id { id } => RequestTarget::Location { id },
        TargetBody::Point { lat, lon, alt_m, name } => {
            let point = GeodeticPoint::new(lat, lon, alt_m).map_err(|e| ApiError::bad_request(e.to_string()))?;
            RequestTarget::Point {
                name: name.unwrap_or_else(|| format!("{lat:.4},{lon:.4}")),
                point,
            }
        }
    };
    blocking(move || {
        let ctx = PlanningContext {
            forecast: state.forecast.as_ref(),
            constraints: state.config.constraints(),
        };
        let now = state.clock.now();
        let outcome = create_request(&state.store, &ctx, now, &who.id, &body.template_id, target, window)?;
        Ok((StatusCode::CREATED, Json(outcome)).into_response())
    })
    .await
}

#[derive(Debug, Deserialize)]
pub struct PageQuery {
    pub offset: Option<usize>,
    pub limit: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct Page<T> {
    pub total: usize,
    pub offset: usize,
    pub items: Vec<T>,
}

fn page<T>(items: Vec<T>, offset: Option<usize>, limit: Option<usize>) -> Page<T> {
    let total = items.len();
    let offset = offset.unwrap_or(0);
    let items = items.into_iter().skip(offset).take(limit.unwrap_or(MAX_PAGE).min(MAX_PAGE)).collect();
    Page { total, offset, items }
}

/// Requests with their current candidates; data users see their own only.
async fn list_requests(
    State(state): State<AppState>,
    Extension(who): Extension<Principal>,
    Query(q): Query<PageQuery>,
) -> ApiResult<Json<Page<serde_json::Value>>> {
    let items = state.store.read(|db| {
        db.requests
            .values()
            .filter(|r| who.role == Role::Operator || r.user_id == who.id)
            .map(|r| {
                let candidates: Vec<_> = db.capture_sessions.values().filter(|c| c.request_id == r.id).collect();
                json!({ "request": r, "candidates": candidates })
            })
            .collect()
    });
    Ok(Json(page(items, q.offset, q.limit)))
}

async fn get_request(
    State(state): State<AppState>,
    Extension(who): Extension<Principal>,
    Path(id): Path<String>,
) -> ApiResult<Json<serde_json::Value>> {
    state.store.read(|db| {
        let r = db
            .requests
            .get(&id)
            .filter(|r| who.role == Role::Operator || r.user_id == who.id)
            .ok_or_else(|| StoreError::not_found("request", &id))?;
        let candidates: Vec<_> = db.capture_sessions.values().filter(|c| c.request_id == r.id).collect();
        Ok(Json(json!({ "request": r, "candidates": candidates })))
    })
}

#[derive(Debug, Deserialize)]
pub struct ConfirmBody {
    pub candidate_id: String,
}

async fn confirm(
    State(state): State<AppState>,
    Extension(who): Extension<Principal>,
    Path(id): Path<String>,
    Json(body): Json<ConfirmBody>,
) -> ApiResult<Response> {
    blocking(move || {
        let owner = state.store.read(|db| db.requests.get(&id).map(|r| r.user_id.clone()));
        match owner {
            Some(owner) if who.role == Role::Operator || owner == who.id => {}
            _ => return Err(StoreError::not_found("request", &id).into()),
        }
        let session = confirm_request(&state.store, state.clock.now(), &id, &body.candidate_id, &who.id)?;
        Ok(Json(session).into_response())
    })
    .await
}

#[derive(Debug, Deserialize)]
pub struct SessionQuery {
    pub from: Option<String>,
    pub to: Option<String>,
    pub sat: Option<String>,
    #[serde(rename = "type")]
    pub kind: Option<String>,
    pub enabled: Option<bool>,
    pub offset: Option<usize>,
    pub limit: Option<usize>,
}

async fn list_sessions(
    State(state): State<AppState>,
    Query(q): Query<SessionQuery>,
) -> ApiResult<Json<Page<satops_core::store::SessionRow>>> {
    let filter = SessionFilter {
        from: q.from.as_deref().map(|v| parse_time("from", v)).transpose()?,
        to: q.to.as_deref().map(|v| parse_time("to", v)).transpose()?,
        sat: q.sat,
        kind: q
            .kind
            .as_deref()
            .map(str::parse::<SessionKind>)
            .transpose()
            .map_err(ApiError::bad_request)?,
        enabled: q.enabled,
    };
    let rows = state.store.read(|db| db.list_sessions(&filter));
    Ok(Json(page(rows, q.offset, q.limit)))
}

async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<serde_json::Value>> {
    state.store.read(|db| {
        if let Some(s) = db.comm_sessions.get(&id) {
            return Ok(Json(json!({ "type": "comm", "session": s })));
        }
        if let Some(s) = db.capture_sessions.get(&id) {
            return Ok(Json(json!({ "type": "capture", "session": s })));
        }
        Err(StoreError::not_found("session", &id).into())
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionPatch {
    pub enabled: Option<bool>,
    pub priority: Option<i32>,
}

async fn edit_session(
    State(state): State<AppState>,
    Extension(who): Extension<Principal>,
    Path(id): Path<String>,
    Json(body): Json<SessionPatch>,
) -> ApiResult<Json<serde_json::Value>> {
    if body.enabled.is_none() && body.priority.is_none() {
        return Err(ApiError::bad_request("nothing to change: give `enabled` and/or `priority`"));
    }
    blocking(move || {
        let now = state.clock.now();
        let mut session = None;
        if let Some(p) = body.priority {
            session = Some(set_priority(&state.store, &id, p, &who.id, now)?);
        }
        if let Some(e) = body.enabled {
            session = Some(set_enabled(&state.store, &id, e, &who.id, now)?);
        }
        Ok(Json(json!({ "type": "comm", "session": session })))
    })
    .await
}

#[derive(Debug, Deserialize)]
pub struct CmdQuery {
    pub until: Option<String>,
    pub from: Option<String>,
    /// `text` returns the file itself with the report in a header.
    pub format: Option<String>,
}

fn lint_all(templates: &TemplateSet) -> Vec<TemplateDiagnostic> {
    let schema = context_schema();
    TemplateKind::ALL
        .into_iter()
        .flat_map(|k| {
            lint_template(templates.get(k), &schema).into_iter().map(move |diagnostic| TemplateDiagnostic {
                template: k.as_str().to_string(),
                diagnostic,
            })
        })
        .collect()
}

/// Builds the CMD file over confirmed and enabled sessions. Never writes to the store.
async fn cmd_file(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<CmdQuery>,
) -> ApiResult<Response> {
    let now = state.clock.now();
    let from = q.from.as_deref().map(|v| parse_time("from", v)).transpose()?.unwrap_or(now);
    let until = match q.until.as_deref() {
        Some(v) => parse_time("until", v)?,
        None => from.add_seconds(state.config.registration().horizon_s),
    };
    if until <= from {
        return Err(ApiError::bad_request("`until` must be after `from`"));
    }
    let as_text = q.format.as_deref() == Some("text");
    blocking(move || {
        let db = state.store.snapshot();
        let report = generate_satellite_cmd(&db, &id, from, until, &state.templates).map_err(|e| {
            let mut err = ApiError::coded(&e);
            if let PlanError::Template(_) = e {
                err.diagnostics = lint_all(&state.templates);
            }
            err
        })?;
        let text = report.text();
        let file_name = format!("{}_{}.cmd", report.satellite, from.iso_seconds().replace(':', ""));
        if as_text {
            let summary = serde_json::to_string(&report).expect("serializable");
            return Ok((
                [
                    (header::CONTENT_TYPE, "text/plain; charset=utf-8".to_string()),
                    (header::CONTENT_DISPOSITION, format!("attachment; filename=\"{file_name}\"")),
                    (header::HeaderName::from_static("x-generation-report"), summary),
                ],
                text,
            )
                .into_response());
        }
        Ok(Json(json!({ "file_name": file_name, "report": report, "cmd": text })).into_response())
    })
    .await
}

#[derive(Debug, Deserialize)]
pub struct ScheduleQuery {
    pub session: String,
    pub step: Option<u32>,
}

async fn schedule(
    State(state): State<AppState>,
    Path(station): Path<String>,
    Query(q): Query<ScheduleQuery>,
) -> ApiResult<Response> {
    let step = q.step.unwrap_or(state.config.planning.schedule_step_s);
    blocking(move || {
        let db = state.store.snapshot();
        let loc = db.location(&station)?;
        let session = db
            .comm_sessions
            .get(&q.session)
            .filter(|s| s.station_name == loc.name)
            .ok_or_else(|| StoreError::not_found("session at this station", &q.session))?;
        let sat = db.satellite(&session.sat_name)?;
        let elements = sat
            .tle
            .as_ref()
            .ok_or_else(|| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "NO_ELEMENTS", format!("{} has no element set", sat.name)))?;
        let sched = antenna_schedule(session, elements, loc, step).map_err(|e| ApiError::coded(&e))?;
        Ok(csv_response(sched.to_csv(), &format!("{}.csv", session.id)))
    })
    .await
}

#[derive(Debug, Deserialize)]
pub struct RangeQuery {
    pub from: String,
    pub to: String,
}

async fn volumes(
    State(state): State<AppState>,
    Query(q): Query<RangeQuery>,
) -> ApiResult<Response> {
    let (from, to) = (parse_time("from", &q.from)?, parse_time("to", &q.to)?);
    if to <= from {
        return Err(ApiError::bad_request("`to` must be after `from`"));
    }
    let csv = state.store.read(|db| volume_report(db, from, to).to_csv());
    Ok(csv_response(csv, "volumes.csv"))
}

async fn notifications(
    State(state): State<AppState>,
    Query(q): Query<PageQuery>,
) -> ApiResult<Json<Page<satops_core::model::Notification>>> {
    let mut items = state.store.read(|db| db.notifications.clone());
    items.reverse();
    Ok(Json(page(items, q.offset, q.limit)))
}

/// One scheduler cycle: registration and reminders when due, then expiry.
pub fn scheduler_tick(state: &AppState) -> Result<JobReport, StoreError> {
    run_due_jobs(&state.store, state.clock.now(), &state.config.registration())
}
