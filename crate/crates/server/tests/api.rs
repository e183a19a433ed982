use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use satops_core::config::{Config, Role, TokenEntry};
use satops_core::forecast::ConstantForecast;
use satops_core::model::TemplateKind;
use satops_core::planner::generate_satellite_cmd;
use satops_core::scenario;
use satops_core::store::{auto_register_comm_sessions, RegistrationOptions, Store};
use satops_core::template::{parse_template, TemplateSet};
use satops_core::Epoch;
use satops_server::{router, scheduler_tick, AppState, Clock, ROUTES};

const OP: &str = "op-token";
const USER: &str = "user-token";
const OTHER: &str = "other-user-token";

fn t0() -> Epoch {
    Epoch::ymd_hms(2021, 5, 10, 0, 0, 0)
}

fn config() -> Config {
    let mut config = Config::default();
    for (token, principal, role) in [(OP, "olga", Role::Operator), (USER, "umar", Role::DataUser), (OTHER, "ode", Role::DataUser)] {
        config.tokens.push(TokenEntry {
            token: token.into(),
            principal: principal.into(),
            role,
        });
    }
    config
}

struct Harness {
    app: Router,
    state: AppState,
    clock: Arc<AtomicI64>,
}

impl Harness {
    fn new(store: Store, templates: TemplateSet) -> Self {
        let clock = Arc::new(AtomicI64::new(t0().unix_millis()));
        let c = clock.clone();
        let state = AppState {
            store: Arc::new(store),
            config: Arc::new(config()),
            forecast: Arc::new(ConstantForecast(10.0)),
            templates: Arc::new(templates),
            clock: Clock::from_fn(move || Epoch::from_unix_millis(c.load(Ordering::SeqCst))),
        };
        Harness {
            app: router(state.clone()),
            state,
            clock,
        }
    }

    fn demo() -> Self {
        let store = Store::in_memory(scenario::demo_db(t0()));
        auto_register_comm_sessions(&store, t0(), &RegistrationOptions { horizon_s: 3.0 * 86_400.0, ..Default::default() });
        Self::new(store, TemplateSet::shipped())
    }

    fn set_now(&self, t: Epoch) {
        self.clock.store(t.unix_millis(), Ordering::SeqCst);
    }

    fn now(&self) -> Epoch {
        self.state.clock.now()
    }

    async fn call(&self, method: Method, uri: &str, token: Option<&str>, body: Option<Value>) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(t) = token {
            req = req.header("authorization", format!("Bearer {t}"));
        }
        let req = match body {
            Some(v) => req.header("content-type", "application/json").body(Body::from(v.to_string())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let headers = resp.headers().clone();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
        (status, headers, bytes)
    }

    async fn json(&self, method: Method, uri: &str, token: &str, body: Option<Value>) -> (StatusCode, Value) {
        let (status, _, bytes) = self.call(method, uri, Some(token), body).await;
        (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
    }

    /// Walks the clock forward hourly until a TOKYO request yields candidates.
    async fn request_with_candidates(&self) -> Value {
        for h in 0..48 {
            self.set_now(t0().add_seconds(f64::from(h) * 3_600.0));
            let (status, body) = self.json(Method::POST, "/api/v1/requests", USER, Some(self.request_body(2.0, 6.0))).await;
            if status == StatusCode::CREATED {
                return body;
            }
            assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
            assert_eq!(body["error"]["code"], "NO_CANDIDATES");
        }
        panic!("no candidates in two days");
    }

    fn request_body(&self, start_h: f64, end_h: f64) -> Value {
        json!({
            "template_id": "hpt-standard",
            "target": { "id": "TOKYO" },
            "window": {
                "start": self.now().add_seconds(start_h * 3_600.0).iso_seconds(),
                "end": self.now().add_seconds(end_h * 3_600.0).iso_seconds(),
            }
        })
    }
}

fn sample_body(method: &str, path: &str) -> Option<Value> {
    match (method, path) {
        ("POST", "/api/v1/requests") => Some(json!({
            "template_id": "hpt-standard",
            "target": { "id": "TOKYO" },
            "window": { "start": "2021-05-10T02:00:00Z", "end": "2021-05-10T06:00:00Z" }
        })),
        ("POST", "/api/v1/requests/{id}/confirm") => Some(json!({ "candidate_id": "CAP-999999" })),
        ("PATCH", _) => Some(json!({ "enabled": true })),
        _ => None,
    }
}

#[tokio::test]
async fn role_matrix_is_enforced_on_every_route() {
    let h = Harness::demo();
    for &(method, path, operator_only) in ROUTES {
        let uri = path.replace("{id}", "X");
        let method = Method::from_bytes(method.as_bytes()).unwrap();
        for (token, expect_denied) in [
            (None, Some(StatusCode::UNAUTHORIZED)),
            (Some("wrong"), Some(StatusCode::UNAUTHORIZED)),
            (Some(USER), operator_only.then_some(StatusCode::FORBIDDEN)),
            (Some(OP), None),
        ] {
            let (status, _, body) = h.call(method.clone(), &uri, token, sample_body(method.as_str(), path)).await;
            match expect_denied {
                Some(code) => assert_eq!(status, code, "{method} {uri} as {token:?}"),
                None => assert!(
                    status != StatusCode::UNAUTHORIZED && status != StatusCode::FORBIDDEN && status != StatusCode::METHOD_NOT_ALLOWED,
                    "{method} {uri} as {token:?}: {status} {}",
                    String::from_utf8_lossy(&body)
                ),
            }
        }
    }
    let (status, _, _) = h.call(Method::GET, "/healthz", None, None).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn request_lifecycle_over_http() {
    let h = Harness::demo();
    let created = h.request_with_candidates().await;
    let request_id = created["request"]["id"].as_str().unwrap().to_string();
    let candidates = created["candidates"].as_array().unwrap();
    assert!(!candidates.is_empty());
    assert_eq!(created["request"]["status"], "candidates_issued");

    // Window limits.
    for (start, end) in [(2.0, 13.0), (0.5, 4.0)] {
        let (status, body) = h.json(Method::POST, "/api/v1/requests", USER, Some(h.request_body(start, end))).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        assert_eq!(body["error"]["code"], "WINDOW_OUT_OF_RANGE");
        assert!(body["error"]["message"].as_str().unwrap().contains("between 1 h and 12 h"));
    }
    let (status, body) = h
        .json(Method::POST, "/api/v1/requests", USER, Some(json!({"template_id": "hpt-standard", "target": {"id": "TOKYO"}, "window": {"start": "soon", "end": "later"}})))
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");

    // Another data user can neither see nor confirm it.
    let (status, _) = h.json(Method::GET, &format!("/api/v1/requests/{request_id}"), OTHER, None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (_, list) = h.json(Method::GET, "/api/v1/requests", OTHER, None).await;
    assert_eq!(list["total"], 0);
    let candidate_id = candidates[0]["id"].as_str().unwrap();
    let confirm_uri = format!("/api/v1/requests/{request_id}/confirm");
    let (status, _) = h.json(Method::POST, &confirm_uri, OTHER, Some(json!({ "candidate_id": candidate_id }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, session) = h.json(Method::POST, &confirm_uri, USER, Some(json!({ "candidate_id": candidate_id }))).await;
    assert_eq!(status, StatusCode::OK, "{session}");
    assert_eq!(session["state"], "confirmed");
    let (status, body) = h.json(Method::POST, &confirm_uri, USER, Some(json!({ "candidate_id": candidate_id }))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"]["code"], "ALREADY_CONFIRMED");

    // Siblings are gone.
    let (_, detail) = h.json(Method::GET, &format!("/api/v1/requests/{request_id}"), USER, None).await;
    assert_eq!(detail["candidates"].as_array().unwrap().len(), 1);

    let (status, body) = h.json(Method::POST, "/api/v1/requests/REQ-404/confirm", OP, Some(json!({"candidate_id": "x"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND, "{body}");
}

#[tokio::test]
async fn session_list_is_pageable_and_deterministic() {
    let h = Harness::demo();
    let (status, all) = h.json(Method::GET, "/api/v1/sessions?type=comm", OP, None).await;
    assert_eq!(status, StatusCode::OK);
    let total = all["total"].as_u64().unwrap() as usize;
    assert!(total > 20);
    let mut paged = Vec::new();
    for offset in (0..total).step_by(7) {
        let (_, page) = h.json(Method::GET, &format!("/api/v1/sessions?type=comm&offset={offset}&limit=7"), OP, None).await;
        paged.extend(page["items"].as_array().unwrap().iter().cloned());
    }
    assert_eq!(&paged, all["items"].as_array().unwrap());
    let (_, again) = h.json(Method::GET, "/api/v1/sessions?type=comm", USER, None).await;
    assert_eq!(again, all);
    let times: Vec<&str> = paged.iter().map(|r| r["t_sort"].as_str().unwrap()).collect();
    assert!(times.windows(2).all(|w| w[0] <= w[1]));

    let (_, sat1) = h.json(Method::GET, "/api/v1/sessions?sat=SAT1&from=2021-05-11T00:00:00Z&to=2021-05-12T00:00:00Z", OP, None).await;
    for row in sat1["items"].as_array().unwrap() {
        assert_eq!(row["sat_name"], "SAT1");
        assert!(row["t_sort"].as_str().unwrap().starts_with("2021-05-11"));
    }
    let (status, _) = h.json(Method::GET, "/api/v1/sessions?type=bogus", OP, None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

fn first_comm(h: &Harness, link: &str, after: Epoch) -> satops_core::model::CommSession {
    h.state.store.read(|db| {
        db.comm_sessions
            .values()
            .filter(|s| s.link_name == link && s.t_aos > after)
            .min_by_key(|s| s.t_aos)
            .cloned()
            .unwrap()
    })
}

#[tokio::test]
async fn patch_edits_sessions_and_rejects_past_ones() {
    let h = Harness::demo();
    let s = first_comm(&h, "STLM", t0().add_seconds(86_400.0));
    let uri = format!("/api/v1/sessions/{}", s.id);
    let (status, body) = h.json(Method::PATCH, &uri, OP, Some(json!({ "enabled": true, "priority": 7 }))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["session"]["enabled"], true);
    assert_eq!(body["session"]["priority"], 7);
    let (_, fetched) = h.json(Method::GET, &uri, USER, None).await;
    assert_eq!(fetched["session"]["enabled"], true);
    let audit = h.state.store.audit_log().unwrap();
    assert!(audit.iter().any(|r| r.session_id == s.id && r.actor == "olga" && r.field == "enabled"));

    let (status, _) = h.json(Method::PATCH, &uri, OP, Some(json!({}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = h.json(Method::PATCH, &uri, OP, Some(json!({ "colour": "red" }))).await;
    assert!(status.is_client_error());

    h.set_now(s.t_los.add_seconds(60.0));
    let (status, body) = h.json(Method::PATCH, &uri, OP, Some(json!({ "enabled": false }))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"]["code"], "SESSION_IN_PAST");
    let (status, _) = h.json(Method::PATCH, "/api/v1/sessions/COM-999999", OP, Some(json!({ "enabled": false }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

/// One confirmed capture plus one enabled downlink pass on the same satellite.
async fn planned(h: &Harness) -> (String, Epoch, Epoch) {
    let created = h.request_with_candidates().await;
    let xband: Vec<satops_core::model::CommSession> = h.state.store.read(|db| {
        let mut v: Vec<_> = db.comm_sessions.values().filter(|s| s.link_name == "XTLM").cloned().collect();
        v.sort_by_key(|s| s.t_aos);
        v
    });
    let (candidate, downlink) = created["candidates"]
        .as_array()
        .unwrap()
        .iter()
        .find_map(|c| {
            let mel = Epoch::parse(c["t_mel"].as_str().unwrap()).unwrap();
            xband
                .iter()
                .find(|x| x.sat_name == c["sat_name"] && x.t_aos > mel.add_seconds(3_600.0) && x.t_los5.is_some())
                .map(|x| (c.clone(), x.clone()))
        })
        .expect("a downlink after a candidate");
    let request_id = created["request"]["id"].as_str().unwrap();
    let (status, _) = h
        .json(Method::POST, &format!("/api/v1/requests/{request_id}/confirm"), USER, Some(json!({ "candidate_id": candidate["id"] })))
        .await;
    assert_eq!(status, StatusCode::OK);
    let uri = format!("/api/v1/sessions/{}", downlink.id);
    let (status, body) = h.json(Method::PATCH, &uri, OP, Some(json!({ "priority": 10, "enabled": true }))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    (downlink.sat_name.clone(), h.now(), downlink.t_los.add_seconds(60.0))
}

#[tokio::test]
async fn cmd_file_matches_golden_and_mutates_nothing() {
    let h = Harness::demo();
    let (sat, from, until) = planned(&h).await;
    let before = h.state.store.snapshot();
    let uri = format!("/api/v1/satellites/{sat}/cmdfile?until={}&format=text", until.iso_seconds());
    let (status, headers, body) = h.call(Method::POST, &uri, Some(OP), None).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    assert!(headers["content-disposition"].to_str().unwrap().starts_with("attachment"));
    let report: Value = serde_json::from_str(headers["x-generation-report"].to_str().unwrap()).unwrap();
    assert_eq!(report["sessions"].as_array().unwrap().len(), 2);
    let text = String::from_utf8(body).unwrap();

    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/cmdfile.cmd");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(path, &text).unwrap();
    }
    assert_eq!(text, std::fs::read_to_string(path).unwrap());
    let library = generate_satellite_cmd(&before, &sat, from, until, &TemplateSet::shipped()).unwrap();
    assert_eq!(text, library.text());

    // Twice, byte-identical, store untouched.
    let (_, _, again) = h.call(Method::POST, &uri, Some(OP), None).await;
    assert_eq!(again, text.as_bytes());
    assert_eq!(h.state.store.snapshot(), before);

    let (status, json) = h.json(Method::POST, &format!("/api/v1/satellites/{sat}/cmdfile?until={}", until.iso_seconds()), OP, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(json["cmd"], text);
    let (status, _) = h.json(Method::POST, "/api/v1/satellites/NOPE/cmdfile", OP, None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = h.json(Method::POST, &format!("/api/v1/satellites/{sat}/cmdfile?until=2000-01-01T00:00:00Z"), OP, None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn broken_template_yields_422_with_diagnostics() {
    let store = Store::in_memory(scenario::demo_db(t0()));
    auto_register_comm_sessions(&store, t0(), &RegistrationOptions { horizon_s: 2.0 * 86_400.0, ..Default::default() });
    let mut templates = TemplateSet::shipped();
    templates.insert(
        TemplateKind::Routine,
        parse_template("#waitabs {ses_t_start_utc}\n10 5 ; OBC_HK_REQUEST\n{rotator_angle} 5 ; BAD\n").unwrap(),
    );
    let h = Harness::new(store, templates);
    let s = first_comm(&h, "STLM", t0().add_seconds(3_600.0));
    let (status, _) = h.json(Method::PATCH, &format!("/api/v1/sessions/{}", s.id), OP, Some(json!({"priority": 10, "enabled": true}))).await;
    assert_eq!(status, StatusCode::OK);
    let (status, body) = h
        .json(Method::POST, &format!("/api/v1/satellites/{}/cmdfile?until={}", s.sat_name, s.t_los.add_seconds(60.0).iso_seconds()), OP, None)
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    assert_eq!(body["error"]["code"], "UNBOUND_VARIABLE");
    let diag = &body["error"]["diagnostics"][0];
    assert_eq!(diag["template"], "routine");
    assert_eq!(diag["kind"], "unbound_variable");
    assert_eq!(diag["line"], 3);
    assert_eq!(diag["col"], 2);
}

#[tokio::test]
async fn tle_ingest_reports_each_set() {
    let h = Harness::demo();
    let (l1, l2) = scenario::sso_elements("SAT1", 90001, t0().add_seconds(3_600.0), 45.0, 10.0).to_lines();
    let (u1, u2) = scenario::sso_elements("X", 99999, t0(), 0.0, 0.0).to_lines();
    let broken = format!("{}0", &l2[..68]);
    let body = format!("SAT1\n{l1}\n{l2}\n{u1}\n{u2}\n{l1}\n{broken}\n");
    let req = Request::post("/api/v1/tle").header("authorization", format!("Bearer {OP}")).body(Body::from(body)).unwrap();
    let resp = h.app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let out: Value = serde_json::from_slice(&resp.into_body().collect().await.unwrap().to_bytes()).unwrap();
    assert_eq!(out["accepted"].as_array().unwrap().len(), 1);
    assert_eq!(out["accepted"][0]["satellite"], "SAT1");
    let codes: Vec<&str> = out["rejected"].as_array().unwrap().iter().map(|r| r["code"].as_str().unwrap()).collect();
    assert_eq!(codes, ["NOT_FOUND", "TLE_CHECKSUM_MISMATCH"]);
    let epoch = h.state.store.read(|db| db.satellites["SAT1"].tle.as_ref().unwrap().epoch);
    assert_eq!(epoch, t0().add_seconds(3_600.0));
}

#[tokio::test]
async fn schedule_and_volume_csv() {
    let h = Harness::demo();
    let s = first_comm(&h, "STLM", t0());
    let (status, headers, body) = h
        .call(Method::GET, &format!("/api/v1/stations/{}/schedule?session={}&step=10", s.station_name, s.id), Some(OP), None)
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(headers["content-type"], "text/csv");
    let text = String::from_utf8(body).unwrap();
    assert_eq!(text.lines().next(), Some("t_utc,az_deg,el_deg"));
    let last = text.lines().last().unwrap();
    assert!(last.starts_with(&s.t_los.iso_millis()));
    let other = if s.station_name == "SENDAI" { "KIRUNA" } else { "SENDAI" };
    let (status, _, _) = h.call(Method::GET, &format!("/api/v1/stations/{other}/schedule?session={}", s.id), Some(OP), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, _, body) = h.call(Method::GET, "/api/v1/reports/volumes?from=2021-05-10&to=2021-05-17", Some(USER), None).await;
    assert_eq!(status, StatusCode::OK);
    let csv = String::from_utf8(body).unwrap();
    assert!(csv.starts_with("GB,"));
    let (status, _, _) = h.call(Method::GET, "/api/v1/reports/volumes?from=2021-05-17&to=2021-05-10", Some(USER), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn mutations_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ops.json");
    let (id, snapshot) = {
        let store = Store::open_exclusive(&path).unwrap();
        store
            .transaction(|db| {
                *db = scenario::demo_db(t0());
                Ok::<_, satops_core::store::StoreError>(())
            })
            .unwrap();
        assert!(Store::open(&path).is_err(), "second writer must be refused");
        let h = Harness::new(store, TemplateSet::shipped());
        let report = tokio::task::spawn_blocking({
            let state = h.state.clone();
            move || scheduler_tick(&state)
        })
        .await
        .unwrap()
        .unwrap();
        assert_eq!(report.reminders.len(), 2);
        let s = first_comm(&h, "STLM", t0().add_seconds(86_400.0));
        let (status, _) = h.json(Method::PATCH, &format!("/api/v1/sessions/{}", s.id), OP, Some(json!({ "enabled": true }))).await;
        assert_eq!(status, StatusCode::OK);
        let created = h.request_with_candidates().await;
        assert!(created["request"]["id"].is_string());
        (s.id, h.state.store.snapshot())
    };
    let reopened = Store::open_exclusive(&path).unwrap();
    assert_eq!(reopened.snapshot(), snapshot);
    assert!(reopened.read(|db| db.comm_sessions[&id].enabled));
    let h = Harness::new(reopened, TemplateSet::shipped());
    let (_, notes) = h.json(Method::GET, "/api/v1/notifications", OP, None).await;
    assert_eq!(notes["total"], 2);
}
