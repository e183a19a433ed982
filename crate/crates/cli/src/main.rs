//! `satops`: operate directly on a store file, no service needed.
//!
//! Exit codes: 0 success, 1 caller error, 2 internal error.

use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use satops_core::agent::{run_agent, volume_report, AgentOptions};
use satops_core::astro::{parse_tle_file, GeodeticPoint};
use satops_core::config::Config;
use satops_core::error::{Coded, ErrorClass};
use satops_core::forecast::CloudForecastProvider;
use satops_core::jobs::simulate_jobs;
use satops_core::model::{Location, RequestTarget};
use satops_core::passes::{find_capture_opportunities, find_comm_passes, ConstraintSet, Site, TimeWindow};
use satops_core::planner::generate_satellite_cmd;
use satops_core::scenario;
use satops_core::store::{
    auto_register_comm_sessions, confirm_request, create_request, sessions_csv, set_enabled, set_priority,
    PlanningContext, SessionFilter, SessionKind, Store, StoreError,
};
use satops_core::template::{context_schema, lint_template, parse_template, TemplateSet};
use satops_core::time::parse_duration_seconds;
use satops_core::Epoch;

#[derive(Parser)]
#[command(name = "satops", version, args_override_self = true, about = "Satellite operations: passes, sessions, requests, CMD files and reports")]
struct Cli {
    /// Store file.
    #[arg(long, global = true, env = "SATOPS_STORE", default_value = "satops.json")]
    store: PathBuf,
    /// Configuration file for constraints, forecast and planning defaults.
    #[arg(long, global = true, env = "SATOPS_CONFIG")]
    config: Option<PathBuf>,
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,
    /// Pin the clock (ISO-8601 UTC); defaults to the system time.
    #[arg(long, global = true, env = "SATOPS_NOW")]
    now: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create or bootstrap a store.
    Init {
        /// Load the two-satellite demonstration scenario.
        #[arg(long)]
        demo: bool,
        /// Epoch of the demo element sets (defaults to --now).
        #[arg(long)]
        epoch: Option<String>,
    },
    #[command(subcommand)]
    Tle(TleCmd),
    /// Communication passes of a satellite over a station.
    Passes {
        sat: String,
        station: String,
        #[command(flatten)]
        range: Range,
        /// Elevation mask in degrees; defaults to the station's.
        #[arg(long)]
        mask: Option<f64>,
    },
    /// Imaging opportunities of a satellite sensor over a target.
    Opportunities {
        sat: String,
        target: String,
        sensor: String,
        #[command(flatten)]
        range: Range,
        /// Report every geometric opportunity, ignoring constraints.
        #[arg(long)]
        unconstrained: bool,
    },
    #[command(subcommand)]
    Sessions(SessionsCmd),
    #[command(subcommand)]
    Request(RequestCmd),
    #[command(subcommand)]
    Cmd(CmdCmd),
    #[command(subcommand)]
    Report(ReportCmd),
    #[command(subcommand)]
    Agent(AgentCmd),
    #[command(subcommand)]
    Jobs(JobsCmd),
}

#[derive(Args)]
struct Range {
    /// Start (ISO-8601, `now`, or either plus an offset such as `+7d`).
    #[arg(long)]
    from: String,
    #[arg(long)]
    to: String,
}

#[derive(Subcommand)]
enum TleCmd {
    /// Replace element sets from a TLE file, matched by catalogue number.
    Import { file: PathBuf },
}

#[derive(Subcommand)]
enum SessionsCmd {
    /// Register communication sessions for the coming days.
    Register {
        #[arg(long, default_value = "7d")]
        horizon: String,
    },
    /// The unified chronological session list.
    List {
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: Option<String>,
        #[arg(long)]
        sat: Option<String>,
        /// comm or capture.
        #[arg(long = "type")]
        kind: Option<String>,
        #[arg(long)]
        enabled: Option<bool>,
        /// CSV instead of a table.
        #[arg(long)]
        csv: bool,
    },
    Enable { id: String },
    Disable { id: String },
    Priority { id: String, priority: i32 },
}

#[derive(Subcommand)]
enum RequestCmd {
    /// Submit an imaging request and list its candidates.
    Create {
        #[arg(long)]
        template: String,
        /// Target location id; or give --lat/--lon.
        #[arg(long, conflicts_with_all = ["lat", "lon"])]
        target: Option<String>,
        #[arg(long, requires = "lon", allow_hyphen_values = true)]
        lat: Option<f64>,
        #[arg(long, requires = "lat", allow_hyphen_values = true)]
        lon: Option<f64>,
        #[arg(long)]
        start: String,
        #[arg(long)]
        end: String,
        #[arg(long, default_value = "cli")]
        user: String,
    },
    /// Confirm one candidate of a request.
    Confirm {
        request: String,
        candidate: String,
        #[arg(long, default_value = "cli")]
        user: String,
    },
}

#[derive(Subcommand)]
enum CmdCmd {
    /// Build the CMD file of a satellite.
    Generate {
        sat: String,
        #[arg(long)]
        until: String,
        #[arg(long)]
        from: Option<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Parse and check a template file.
    Lint { template: PathBuf },
}

#[derive(Subcommand)]
enum ReportCmd {
    /// Downlinked volume per satellite and station.
    Volumes {
        #[command(flatten)]
        range: Range,
    },
}

#[derive(Subcommand)]
enum AgentCmd {
    /// Run a station agent against a simulated clock.
    Run {
        station: String,
        /// `<from>..<to>`.
        #[arg(long)]
        sim_clock: String,
        #[arg(long)]
        step: Option<u32>,
    },
}

#[derive(Subcommand)]
enum JobsCmd {
    /// Run the scheduled jobs over a simulated clock.
    Simulate {
        #[command(flatten)]
        range: Range,
        #[arg(long, default_value = "1h")]
        tick: String,
    },
}

#[derive(Debug, Serialize)]
struct CliError {
    code: &'static str,
    #[serde(skip)]
    class: ErrorClass,
    message: String,
}

impl<E: Coded + Display> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError {
            code: e.code(),
            class: e.class(),
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError {
        code: "USAGE",
        class: ErrorClass::Validation,
        message: message.into(),
    }
}

fn io_error(path: &Path, e: impl Display) -> CliError {
    CliError {
        code: "IO",
        class: ErrorClass::Validation,
        message: format!("{}: {e}", path.display()),
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// `2021-05-10T00:00:00Z`, `now`, `now+2h`, `2021-05-10+7d`.
fn parse_when(text: &str, now: Epoch) -> Result<Epoch> {
    let (base, offset) = match text.rfind(['+', '-']) {
        Some(i) if i > 0 && parse_duration_seconds(&text[i + 1..]).is_some() && !text[i + 1..].contains(':') => {
            let sign = if text[i..].starts_with('-') { -1.0 } else { 1.0 };
            let base = &text[..i];
            if base == "now" || Epoch::parse(base).is_ok() {
                (base, sign * parse_duration_seconds(&text[i + 1..]).expect("checked"))
            } else {
                (text, 0.0)
            }
        }
        _ => (text, 0.0),
    };
    let t = if base == "now" {
        now
    } else {
        Epoch::parse(base).map_err(|_| usage(format!("cannot read time `{text}`")))?
    };
    Ok(t.add_seconds(offset))
}

fn parse_range(range: &Range, now: Epoch) -> Result<TimeWindow> {
    let (from, to) = (parse_when(&range.from, now)?, parse_when(&range.to, now)?);
    if to <= from {
        return Err(usage("--to must be after --from"));
    }
    Ok(TimeWindow::new(from, to))
}

fn site(loc: &Location) -> Site {
    Site {
        id: loc.name.clone(),
        point: loc.point,
        utc_offset_hours: loc.utc_offset_hours,
    }
}

struct Ctx {
    cli_store: PathBuf,
    config: Config,
    json: bool,
    now: Epoch,
}

impl Ctx {
    fn open(&self) -> Result<Store> {
        Ok(Store::open(&self.cli_store)?)
    }

    fn forecast(&self) -> Result<std::sync::Arc<dyn CloudForecastProvider>> {
        self.config
            .forecast_provider()
            .map_err(|e| CliError { code: "CONFIG", class: ErrorClass::Validation, message: e.to_string() })
    }

    /// JSON when asked for, the human rendering otherwise.
    fn emit<T: Serialize>(&self, value: &T, human: impl FnOnce() -> String) {
        if self.json {
            out(&format!("{}\n", serde_json::to_string_pretty(value).expect("serializable")));
        } else {
            let text = human();
            if !text.is_empty() {
                out(&format!("{}\n", text.trim_end()));
            }
        }
    }
}

/// Writes to stdout; a closed pipe (`satops ... | head`) ends the process quietly.
fn out(text: &str) {
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = stdout.write_all(text.as_bytes()).and_then(|()| stdout.flush()) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error[IO]: stdout: {e}");
        std::process::exit(2);
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => Config::load(path).map_err(|e| CliError { code: "CONFIG", class: ErrorClass::Validation, message: e.to_string() })?,
        None => Config::default(),
    };
    let now = match &cli.now {
        Some(t) => Epoch::parse(t).map_err(|_| usage(format!("--now: cannot read `{t}`")))?,
        None => Epoch::now(),
    };
    let ctx = Ctx {
        cli_store: cli.store,
        config,
        json: cli.json,
        now,
    };
    match cli.command {
        Command::Init { demo, epoch } => init(&ctx, demo, epoch),
        Command::Tle(TleCmd::Import { file }) => tle_import(&ctx, &file),
        Command::Passes { sat, station, range, mask } => passes(&ctx, &sat, &station, &range, mask),
        Command::Opportunities { sat, target, sensor, range, unconstrained } => {
            opportunities(&ctx, &sat, &target, &sensor, &range, unconstrained)
        }
        Command::Sessions(cmd) => sessions(&ctx, cmd),
        Command::Request(cmd) => request(&ctx, cmd),
        Command::Cmd(cmd) => cmd_file(&ctx, cmd),
        Command::Report(ReportCmd::Volumes { range }) => {
            let w = parse_range(&range, ctx.now)?;
            let store = ctx.open()?;
            let report = store.read(|db| volume_report(db, w.start, w.end));
            ctx.emit(&report, || report.to_csv());
            Ok(())
        }
        Command::Agent(AgentCmd::Run { station, sim_clock, step }) => {
            let (from, to) = sim_clock.split_once("..").ok_or_else(|| usage("--sim-clock expects <from>..<to>"))?;
            let w = parse_range(&Range { from: from.into(), to: to.into() }, ctx.now)?;
            let store = ctx.open()?;
            let options = AgentOptions {
                step_s: step.unwrap_or(ctx.config.planning.schedule_step_s),
                efficiency: ctx.config.planning.efficiency,
                ..Default::default()
            };
            let report = run_agent(&store, &station, w.start, w.end, &options)?;
            ctx.emit(&report, || {
                let mut out = format!("{}: {} tracks, {} polls\n", report.station, report.tracks.len(), report.polls);
                for r in &report.tracks {
                    out += &format!("{} {} {} {} bytes\n", r.session_id, r.link_name, r.t_start.iso_seconds(), r.bytes);
                }
                for (id, e) in &report.errors {
                    out += &format!("{id}: {e}\n");
                }
                out
            });
            Ok(())
        }
        Command::Jobs(JobsCmd::Simulate { range, tick }) => {
            let w = parse_range(&range, ctx.now)?;
            let tick = parse_duration_seconds(&tick).filter(|t| *t >= 1.0).ok_or_else(|| usage("--tick: expected a duration such as 1h"))?;
            let store = ctx.open()?;
            let reports = simulate_jobs(&store, w.start, w.end, tick as i64, &ctx.config.registration())?;
            let ran: Vec<_> = reports.into_iter().filter(|r| r.registration.is_some() || !r.reminders.is_empty()).collect();
            ctx.emit(&ran, || {
                ran.iter()
                    .map(|r| {
                        let reg = r.registration.as_ref().map_or(String::new(), |g| format!(" registered +{} ~{}", g.created, g.updated));
                        format!("{}{reg} reminders {:?}\n", r.at.map(Epoch::iso_seconds).unwrap_or_default(), r.reminders)
                    })
                    .collect()
            });
            Ok(())
        }
    }
}

fn init(ctx: &Ctx, demo: bool, epoch: Option<String>) -> Result<()> {
    let store = ctx.open()?;
    let epoch = epoch.map(|e| parse_when(&e, ctx.now)).transpose()?.unwrap_or(ctx.now);
    store.transaction(|db| {
        if demo {
            *db = scenario::demo_db(epoch);
        }
        ctx.config.bootstrap(db)
    })?;
    let summary = store.read(|db| {
        serde_json::json!({
            "store": ctx.cli_store,
            "satellites": db.satellites.keys().collect::<Vec<_>>(),
            "locations": db.locations.keys().collect::<Vec<_>>(),
            "templates": db.templates.keys().collect::<Vec<_>>(),
        })
    });
    ctx.emit(&summary, || {
        format!(
            "{}: satellites {}, locations {}",
            ctx.cli_store.display(),
            summary["satellites"],
            summary["locations"]
        )
    });
    Ok(())
}

fn tle_import(ctx: &Ctx, file: &Path) -> Result<()> {
    let text = std::fs::read_to_string(file).map_err(|e| io_error(file, e))?;
    let store = ctx.open()?;
    let mut rejected = Vec::new();
    let accepted = store.transaction(|db| {
        let mut accepted = Vec::new();
        for (i, parsed) in parse_tle_file(&text).into_iter().enumerate() {
            let outcome = parsed.map_err(CliError::from).and_then(|el| Ok(db.ingest_elements(el)?));
            match outcome {
                Ok(name) => accepted.push(name),
                Err(e) => rejected.push(serde_json::json!({ "index": i, "code": e.code, "message": e.message })),
            }
        }
        Ok::<_, StoreError>(accepted)
    })?;
    let out = serde_json::json!({ "accepted": accepted, "rejected": rejected });
    ctx.emit(&out, || {
        let mut s = format!("accepted: {}\n", accepted.join(", "));
        for r in &rejected {
            s += &format!("rejected #{}: {} {}\n", r["index"], r["code"].as_str().unwrap_or(""), r["message"].as_str().unwrap_or(""));
        }
        s
    });
    if accepted.is_empty() && !rejected.is_empty() {
        return Err(usage("no element set accepted"));
    }
    Ok(())
}

fn passes(ctx: &Ctx, sat: &str, station: &str, range: &Range, mask: Option<f64>) -> Result<()> {
    let window = parse_range(range, ctx.now)?;
    let db = ctx.open()?.snapshot();
    let sat = db.satellite(sat)?;
    let elements = sat.tle.as_ref().ok_or_else(|| usage(format!("{} has no element set", sat.name)))?;
    let loc = db.location(station)?;
    let list = find_comm_passes(elements, &site(loc), window, mask.unwrap_or(loc.min_elevation_mask))?;
    ctx.emit(&list, || {
        let mut s = String::from("AOS                  MEL                  LOS                  max_el  LOS5\n");
        for p in &list {
            s += &format!(
                "{}  {}  {}  {:6.2}  {}\n",
                p.t_aos.iso_seconds(),
                p.t_mel.iso_seconds(),
                p.t_los.iso_seconds(),
                p.max_elevation,
                p.t_los5.map(Epoch::iso_seconds).unwrap_or_else(|| "-".into())
            );
        }
        s
    });
    Ok(())
}

fn opportunities(ctx: &Ctx, sat: &str, target: &str, sensor: &str, range: &Range, unconstrained: bool) -> Result<()> {
    let window = parse_range(range, ctx.now)?;
    let db = ctx.open()?.snapshot();
    let sat = db.satellite(sat)?;
    let elements = sat.tle.as_ref().ok_or_else(|| usage(format!("{} has no element set", sat.name)))?;
    let sensor = sat.sensor(sensor).ok_or_else(|| usage(format!("{} carries no sensor {sensor}", sat.name)))?;
    let constraints = if unconstrained { ConstraintSet::unconstrained() } else { ctx.config.constraints() };
    let forecast = ctx.forecast()?;
    let list = find_capture_opportunities(elements, &site(db.location(target)?), sensor, window, &constraints, forecast.as_ref())?;
    ctx.emit(&list, || {
        let mut s = String::from("MEL                  el      roll    res    sun_el  cloud\n");
        for o in &list {
            s += &format!(
                "{}  {:6.2}  {:6.2}  {:5.3}  {:6.2}  {}\n",
                o.t_mel.iso_seconds(),
                o.elevation_at_target,
                o.roll_deg,
                o.resolution_factor,
                o.sun_el_deg,
                o.cloud_pct.map_or("?".into(), |c| format!("{c:.0}%"))
            );
        }
        s
    });
    Ok(())
}

fn sessions(ctx: &Ctx, cmd: SessionsCmd) -> Result<()> {
    let store = ctx.open()?;
    match cmd {
        SessionsCmd::Register { horizon } => {
            let horizon_s = parse_duration_seconds(&horizon).filter(|h| *h > 0.0).ok_or_else(|| usage("--horizon: expected a duration such as 7d"))?;
            let options = satops_core::store::RegistrationOptions { horizon_s, ..ctx.config.registration() };
            let report = auto_register_comm_sessions(&store, ctx.now, &options);
            ctx.emit(&report, || {
                let mut s = format!(
                    "created {} updated {} unchanged {} removed {}\n",
                    report.created, report.updated, report.unchanged, report.removed
                );
                for (sat, e) in &report.errors {
                    s += &format!("{sat}: {e}\n");
                }
                s
            });
            if !report.errors.is_empty() {
                return Err(CliError {
                    code: "REGISTRATION_FAILED",
                    class: ErrorClass::Unprocessable,
                    message: format!("{} satellite batches skipped", report.errors.len()),
                });
            }
        }
        SessionsCmd::List { from, to, sat, kind, enabled, csv } => {
            let filter = SessionFilter {
                from: from.map(|t| parse_when(&t, ctx.now)).transpose()?,
                to: to.map(|t| parse_when(&t, ctx.now)).transpose()?,
                sat,
                kind: kind.map(|k| k.parse::<SessionKind>()).transpose().map_err(usage)?,
                enabled,
            };
            let rows = store.read(|db| db.list_sessions(&filter));
            ctx.emit(&rows, || {
                if csv {
                    return sessions_csv(&rows);
                }
                rows.iter()
                    .map(|r| {
                        format!(
                            "{:<11} {:<7} {:<5} {:<8} {}  {:5.1}  {}{}\n",
                            r.id,
                            r.sat_name,
                            r.beam.as_deref().unwrap_or("IMG"),
                            r.loc_name,
                            r.t_sort.iso_seconds(),
                            r.m_el_deg,
                            match r.enabled {
                                Some(true) => "enabled",
                                Some(false) => "disabled",
                                None => "confirmed",
                            },
                            if r.interference == Some(true) { " (interference)" } else { "" }
                        )
                    })
                    .collect()
            });
        }
        SessionsCmd::Enable { id } => edit(ctx, set_enabled(&store, &id, true, "cli", ctx.now)?),
        SessionsCmd::Disable { id } => edit(ctx, set_enabled(&store, &id, false, "cli", ctx.now)?),
        SessionsCmd::Priority { id, priority } => edit(ctx, set_priority(&store, &id, priority, "cli", ctx.now)?),
    }
    Ok(())
}

fn edit(ctx: &Ctx, s: satops_core::model::CommSession) {
    ctx.emit(&s, || {
        format!(
            "{} enabled={} priority={} interference={}",
            s.id, s.enabled, s.priority, s.interference
        )
    });
}

fn request(ctx: &Ctx, cmd: RequestCmd) -> Result<()> {
    let store = ctx.open()?;
    match cmd {
        RequestCmd::Create { template, target, lat, lon, start, end, user } => {
            let target = match (target, lat, lon) {
                (Some(id), _, _) => RequestTarget::Location { id },
                (None, Some(lat), Some(lon)) => RequestTarget::Point {
                    name: format!("{lat:.4},{lon:.4}"),
                    point: GeodeticPoint::new(lat, lon, 0.0).map_err(|e| usage(e.to_string()))?,
                },
                _ => return Err(usage("give --target or --lat and --lon")),
            };
            let window = TimeWindow::new(parse_when(&start, ctx.now)?, parse_when(&end, ctx.now)?);
            let forecast = ctx.forecast()?;
            let planning = PlanningContext {
                forecast: forecast.as_ref(),
                constraints: ctx.config.constraints(),
            };
            let outcome = create_request(&store, &planning, ctx.now, &user, &template, target, window)?;
            ctx.emit(&outcome, || {
                let mut s = format!("{} {} candidates\n", outcome.request.id, outcome.candidates.len());
                for c in &outcome.candidates {
                    s += &format!(
                        "{} {} {} res {:.3} sun {:.1} cloud {}\n",
                        c.id,
                        c.sat_name,
                        c.t_mel.iso_seconds(),
                        c.resolution_factor,
                        c.sun_el_deg,
                        c.cloud_pct.map_or("?".into(), |p| format!("{p:.0}%"))
                    );
                }
                s
            });
        }
        RequestCmd::Confirm { request, candidate, user } => {
            let session = confirm_request(&store, ctx.now, &request, &candidate, &user)?;
            ctx.emit(&session, || format!("{} confirmed, {} at {}", session.id, session.sat_name, session.t_mel.iso_seconds()));
        }
    }
    Ok(())
}

fn cmd_file(ctx: &Ctx, cmd: CmdCmd) -> Result<()> {
    let templates = match &ctx.config.templates_dir {
        Some(dir) => TemplateSet::load_dir(dir).map_err(|(path, e)| {
            let mut err = CliError::from(e);
            err.message = format!("{path}: {}", err.message);
            err
        })?,
        None => TemplateSet::shipped(),
    };
    match cmd {
        CmdCmd::Generate { sat, until, from, output } => {
            let from = from.map(|t| parse_when(&t, ctx.now)).transpose()?.unwrap_or(ctx.now);
            let until = parse_when(&until, ctx.now)?;
            if until <= from {
                return Err(usage("--until must be after --from"));
            }
            let db = ctx.open()?.snapshot();
            let report = generate_satellite_cmd(&db, &sat, from, until, &templates)?;
            let text = report.text();
            match &output {
                Some(path) => std::fs::write(path, &text).map_err(|e| io_error(path, e))?,
                None if !ctx.json => out(&text),
                None => {}
            }
            if ctx.json {
                ctx.emit(&serde_json::json!({ "report": report, "cmd": text }), String::new);
            } else {
                for d in &report.diagnostics {
                    eprintln!("warning: line {}:{}: {}", d.line, d.col, d.message);
                }
                if let Some(path) = &output {
                    eprintln!("{}: {} sessions written to {}", report.satellite, report.sessions.len(), path.display());
                }
            }
        }
        CmdCmd::Lint { template } => {
            let text = std::fs::read_to_string(&template).map_err(|e| io_error(&template, e))?;
            let program = parse_template(&text)?;
            let diagnostics = lint_template(&program, &context_schema());
            ctx.emit(&diagnostics, || {
                diagnostics
                    .iter()
                    .map(|d| format!("{}:{}:{}: {:?}: {}\n", template.display(), d.line, d.col, d.kind, d.message))
                    .collect()
            });
            if !diagnostics.is_empty() {
                return Err(CliError {
                    code: "TEMPLATE_DIAGNOSTICS",
                    class: ErrorClass::Validation,
                    message: format!("{} diagnostics", diagnostics.len()),
                });
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let json = cli.json;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if json {
                eprintln!("{}", serde_json::json!({ "error": { "code": e.code, "message": e.message } }));
            } else {
                eprintln!("error[{}]: {}", e.code, e.message);
            }
            ExitCode::from(e.class.exit_code() as u8)
        }
    }
}
