//! Python bindings: `import satops`.
//!
//! Errors raise `satops.SatopsError` with `args == (code, message)`.
//! Structured results come back as plain dicts and lists.

use std::fmt::Display;
use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::Serialize;

use satops_core::agent::volume_report;
use satops_core::astro::{parse_tle, parse_tle_file, GeodeticPoint, OrbitalElements};
use satops_core::config::Config;
use satops_core::error::Coded;
use satops_core::model::RequestTarget;
use satops_core::passes::{find_comm_passes, Site, TimeWindow};
use satops_core::planner::generate_satellite_cmd;
use satops_core::scenario;
use satops_core::store::{
    self, auto_register_comm_sessions, confirm_request, create_request, PlanningContext, RegistrationOptions,
    SessionFilter, SessionKind,
};
use satops_core::template::{context_schema, lint_template, parse_template, TemplateSet};
use satops_core::Epoch;

create_exception!(satops, SatopsError, PyException);

fn err<E: Coded + Display>(e: E) -> PyErr {
    SatopsError::new_err((e.code().to_string(), e.to_string()))
}

fn invalid(message: impl Into<String>) -> PyErr {
    SatopsError::new_err(("USAGE".to_string(), message.into()))
}

fn epoch(text: &str) -> PyResult<Epoch> {
    Epoch::parse(text).map_err(|_| invalid(format!("cannot read time `{text}`")))
}

fn window(start: &str, end: &str) -> PyResult<TimeWindow> {
    let (start, end) = (epoch(start)?, epoch(end)?);
    if end <= start {
        return Err(invalid("end must be after start"));
    }
    Ok(TimeWindow::new(start, end))
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| invalid(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Mean orbital elements read from a two- or three-line element set.
#[pyclass(name = "Elements", frozen)]
struct PyElements(OrbitalElements);

#[pymethods]
impl PyElements {
    #[staticmethod]
    fn from_tle(text: &str) -> PyResult<Self> {
        parse_tle(text).map(PyElements).map_err(err)
    }

    #[getter]
    fn satellite_id(&self) -> &str {
        &self.0.satellite_id
    }

    #[getter]
    fn norad_id(&self) -> u32 {
        self.0.norad_id
    }

    #[getter]
    fn epoch(&self) -> String {
        self.0.epoch.iso_millis()
    }

    /// Passes over a ground point between `start` and `end` (ISO-8601 UTC).
    #[pyo3(signature = (lat, lon, start, end, min_elevation = 0.0, alt_m = 0.0))]
    fn comm_passes(
        &self,
        py: Python<'_>,
        lat: f64,
        lon: f64,
        start: &str,
        end: &str,
        min_elevation: f64,
        alt_m: f64,
    ) -> PyResult<Py<PyAny>> {
        let point = GeodeticPoint::new(lat, lon, alt_m).map_err(|e| invalid(e.to_string()))?;
        let passes = find_comm_passes(&self.0, &Site::new("site", point), window(start, end)?, min_elevation).map_err(err)?;
        to_py(py, &passes)
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.0)
    }

    fn __repr__(&self) -> String {
        format!("Elements({}, norad_id={}, epoch={})", self.0.satellite_id, self.0.norad_id, self.0.epoch.iso_millis())
    }
}

/// An operations store file. Every mutation is persisted before the call returns.
#[pyclass(name = "Store", frozen)]
struct PyStore {
    store: store::Store,
    config: Config,
}

impl PyStore {
    fn templates(&self) -> PyResult<TemplateSet> {
        match &self.config.templates_dir {
            Some(dir) => TemplateSet::load_dir(dir).map_err(|(_, e)| err(e)),
            None => Ok(TemplateSet::shipped()),
        }
    }
}

#[pymethods]
impl PyStore {
    #[new]
    #[pyo3(signature = (path, config = None))]
    fn new(path: PathBuf, config: Option<PathBuf>) -> PyResult<Self> {
        let config = match config {
            Some(p) => Config::load(&p).map_err(|e| invalid(e.to_string()))?,
            None => Config::default(),
        };
        let store = store::Store::open(&path).map_err(err)?;
        store.transaction(|db| config.bootstrap(db)).map_err(err)?;
        Ok(PyStore { store, config })
    }

    /// Replace the contents with the demo constellation, stations and targets.
    fn init_demo(&self, epoch_utc: &str) -> PyResult<()> {
        let t = epoch(epoch_utc)?;
        self.store
            .transaction(|db| {
                *db = scenario::demo_db(t);
                self.config.bootstrap(db)
            })
            .map_err(err)
    }

    fn satellites(&self) -> Vec<String> {
        self.store.read(|db| db.satellites.keys().cloned().collect())
    }

    fn locations(&self) -> Vec<String> {
        self.store.read(|db| db.locations.keys().cloned().collect())
    }

    /// Ingest a TLE file; returns `(accepted satellite names, [(index, code, message)])`.
    fn ingest_tle(&self, text: &str) -> PyResult<(Vec<String>, Vec<(usize, String, String)>)> {
        let parsed = parse_tle_file(text);
        self.store
            .transaction(|db| {
                let (mut accepted, mut rejected) = (Vec::new(), Vec::new());
                for (i, item) in parsed.into_iter().enumerate() {
                    match item.map_err(err_parts).and_then(|el| db.ingest_elements(el).map_err(err_parts)) {
                        Ok(name) => accepted.push(name),
                        Err((code, message)) => rejected.push((i, code, message)),
                    }
                }
                Ok::<_, store::StoreError>((accepted, rejected))
            })
            .map_err(err)
    }

    /// Register communication sessions for every satellite and station.
    #[pyo3(signature = (now, horizon_s = None))]
    fn register_sessions(&self, py: Python<'_>, now: &str, horizon_s: Option<f64>) -> PyResult<Py<PyAny>> {
        let mut options: RegistrationOptions = self.config.registration();
        if let Some(h) = horizon_s {
            options.horizon_s = h;
        }
        let report = auto_register_comm_sessions(&self.store, epoch(now)?, &options);
        to_py(py, &report)
    }

    #[pyo3(signature = (start = None, end = None, sat = None, kind = None, enabled = None))]
    fn sessions(
        &self,
        py: Python<'_>,
        start: Option<&str>,
        end: Option<&str>,
        sat: Option<String>,
        kind: Option<&str>,
        enabled: Option<bool>,
    ) -> PyResult<Py<PyAny>> {
        let kind = match kind {
            None => None,
            Some("comm") => Some(SessionKind::Comm),
            Some("capture") => Some(SessionKind::Capture),
            Some(other) => return Err(invalid(format!("unknown session kind `{other}`"))),
        };
        let filter = SessionFilter {
            from: start.map(epoch).transpose()?,
            to: end.map(epoch).transpose()?,
            sat,
            kind,
            enabled,
        };
        let rows = self.store.read(|db| db.list_sessions(&filter));
        to_py(py, &rows)
    }

    fn set_enabled(&self, py: Python<'_>, id: &str, enabled: bool, actor: &str, now: &str) -> PyResult<Py<PyAny>> {
        let session = store::set_enabled(&self.store, id, enabled, actor, epoch(now)?).map_err(err)?;
        to_py(py, &session)
    }

    fn set_priority(&self, py: Python<'_>, id: &str, priority: i32, actor: &str, now: &str) -> PyResult<Py<PyAny>> {
        let session = store::set_priority(&self.store, id, priority, actor, epoch(now)?).map_err(err)?;
        to_py(py, &session)
    }

    /// Create an imaging request over a stored location; returns the request and its candidates.
    fn create_request(
        &self,
        py: Python<'_>,
        now: &str,
        user: &str,
        template_id: &str,
        target: String,
        start: &str,
        end: &str,
    ) -> PyResult<Py<PyAny>> {
        let forecast = self.config.forecast_provider().map_err(|e| invalid(e.to_string()))?;
        let planning = PlanningContext {
            forecast: forecast.as_ref(),
            constraints: self.config.constraints(),
        };
        let outcome = create_request(
            &self.store,
            &planning,
            epoch(now)?,
            user,
            template_id,
            RequestTarget::Location { id: target },
            TimeWindow::new(epoch(start)?, epoch(end)?),
        )
        .map_err(err)?;
        to_py(py, &outcome)
    }

    fn confirm_request(&self, py: Python<'_>, now: &str, request_id: &str, candidate_id: &str, user: &str) -> PyResult<Py<PyAny>> {
        let session = confirm_request(&self.store, epoch(now)?, request_id, candidate_id, user).map_err(err)?;
        to_py(py, &session)
    }

    /// CMD file text and its generation report for one satellite.
    fn generate_cmd(&self, py: Python<'_>, sat: &str, start: &str, end: &str) -> PyResult<(String, Py<PyAny>)> {
        let w = window(start, end)?;
        let templates = self.templates()?;
        let db = self.store.snapshot();
        let report = generate_satellite_cmd(&db, sat, w.start, w.end, &templates).map_err(err)?;
        Ok((report.text(), to_py(py, &report)?))
    }

    fn volume_report_csv(&self, start: &str, end: &str) -> PyResult<String> {
        let w = window(start, end)?;
        Ok(self.store.read(|db| volume_report(db, w.start, w.end).to_csv()))
    }
}

fn err_parts<E: Coded + Display>(e: E) -> (String, String) {
    (e.code().to_string(), e.to_string())
}

/// Lint a CMD template against the session context; returns a list of diagnostics.
#[pyfunction(name = "lint_template")]
fn py_lint_template(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    let program = parse_template(text).map_err(err)?;
    to_py(py, &lint_template(&program, &context_schema()))
}

#[pymodule]
fn satops(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SatopsError", m.py().get_type::<SatopsError>())?;
    m.add_class::<PyElements>()?;
    m.add_class::<PyStore>()?;
    m.add_function(wrap_pyfunction!(py_lint_template, m)?)?;
    Ok(())
}
