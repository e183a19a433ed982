use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use satops_core::passes::{find_comm_passes, Site, TimeWindow};
use satops_core::store::Store;
use satops_core::Epoch;

const T0: &str = "2021-05-10T00:00:00Z";

struct Env {
    _dir: tempfile::TempDir,
    store: PathBuf,
}

impl Env {
    fn demo() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let env = Env {
            store: dir.path().join("ops.json"),
            _dir: dir,
        };
        env.ok(&["init", "--demo"]);
        env
    }

    fn dir(&self) -> &Path {
        self._dir.path()
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_satops"))
            .arg("--store")
            .arg(&self.store)
            .args(["--now", T0])
            .args(args)
            .env_remove("SATOPS_CONFIG")
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    }

    fn json(&self, args: &[&str]) -> Value {
        let mut all = vec!["--json"];
        all.extend_from_slice(args);
        serde_json::from_str(&self.ok(&all)).unwrap()
    }

    fn fails(&self, args: &[&str]) -> (i32, String) {
        let out = self.run(args);
        (out.status.code().unwrap(), String::from_utf8(out.stderr).unwrap())
    }
}

#[test]
fn passes_match_the_library_call() {
    let env = Env::demo();
    let out = env.json(&["passes", "SAT1", "SENDAI", "--from", T0, "--to", "2021-05-10T00:00:00Z+7d"]);
    let db = Store::open(&env.store).unwrap().snapshot();
    let loc = db.location("SENDAI").unwrap();
    let t0 = Epoch::parse(T0).unwrap();
    let site = Site {
        id: loc.name.clone(),
        point: loc.point,
        utc_offset_hours: loc.utc_offset_hours,
    };
    let expected = find_comm_passes(
        db.satellite("SAT1").unwrap().tle.as_ref().unwrap(),
        &site,
        TimeWindow::new(t0, t0.add_seconds(7.0 * 86_400.0)),
        loc.min_elevation_mask,
    )
    .unwrap();
    assert!(!expected.is_empty());
    assert_eq!(out, serde_json::to_value(&expected).unwrap());
    let text = env.ok(&["passes", "SAT1", "SENDAI", "--from", "now", "--to", "now+1d"]);
    assert!(text.starts_with("AOS"));
}

#[test]
fn cmd_generate_is_deterministic() {
    let env = Env::demo();
    env.ok(&["sessions", "register", "--horizon", "2d"]);
    let rows = env.json(&["sessions", "list", "--sat", "SAT1", "--type", "comm", "--from", "now+1d"]);
    let id = rows[0]["id"].as_str().unwrap();
    env.ok(&["sessions", "priority", id, "10"]);
    let enabled = env.json(&["sessions", "enable", id]);
    assert_eq!(enabled["enabled"], true);
    let (a, b) = (env.dir().join("a.cmd"), env.dir().join("b.cmd"));
    for path in [&a, &b] {
        env.ok(&["cmd", "generate", "SAT1", "--until", "now+3d", "-o", path.to_str().unwrap()]);
    }
    let first = std::fs::read(&a).unwrap();
    assert!(!first.is_empty());
    assert_eq!(first, std::fs::read(&b).unwrap());
    assert!(String::from_utf8(first).unwrap().contains(&format!("// === {id} ")));
    let report = env.json(&["cmd", "generate", "SAT1", "--until", "now+3d"]);
    assert_eq!(report["report"]["sessions"][0], id);
}

#[test]
fn exit_codes_follow_the_taxonomy() {
    let env = Env::demo();
    env.ok(&["sessions", "register", "--horizon", "1d"]);
    let rows = env.json(&["sessions", "list", "--type", "comm"]);
    let past = rows[0]["id"].as_str().unwrap().to_string();
    let t_end = "2021-05-12T00:00:00Z";

    let bad_template = env.dir().join("bad.cmdt");
    std::fs::write(&bad_template, "#waitabs {ses_t_start_utc}\n10 5 ; OK\n{nope} 5 ; BAD\n").unwrap();
    let broken_template = env.dir().join("broken.cmdt");
    std::fs::write(&broken_template, "#if 1 >\n").unwrap();
    let bad_tle = env.dir().join("bad.tle");
    std::fs::write(&bad_tle, "1 00005U\n2 00005\n").unwrap();

    let cases: Vec<(Vec<&str>, i32, &str)> = vec![
        (vec!["--now", t_end, "sessions", "enable", &past], 1, "SESSION_IN_PAST"),
        (vec!["sessions", "enable", "COM-999999"], 1, "NOT_FOUND"),
        (vec!["passes", "SAT9", "SENDAI", "--from", T0, "--to", "now+1d"], 1, "NOT_FOUND"),
        (vec!["passes", "SAT1", "SENDAI", "--from", "now+1d", "--to", T0], 1, "USAGE"),
        (vec!["passes", "SAT1", "SENDAI", "--from", "yesterday", "--to", T0], 1, "USAGE"),
        (
            vec!["request", "create", "--template", "hpt-standard", "--target", "TOKYO", "--start", "now+2h", "--end", "now+13h"],
            1,
            "WINDOW_OUT_OF_RANGE",
        ),
        (
            vec!["request", "create", "--template", "nope", "--target", "TOKYO", "--start", "now+2h", "--end", "now+6h"],
            1,
            "UNKNOWN_TEMPLATE",
        ),
        (vec!["request", "confirm", "REQ-000404", "CAP-000001"], 1, "NOT_FOUND"),
        (vec!["cmd", "lint", bad_template.to_str().unwrap()], 1, "TEMPLATE_DIAGNOSTICS"),
        (vec!["cmd", "lint", broken_template.to_str().unwrap()], 1, "TEMPLATE_SYNTAX"),
        (vec!["tle", "import", bad_tle.to_str().unwrap()], 1, "USAGE"),
        (vec!["report", "volumes", "--from", "now", "--to", "now"], 1, "USAGE"),
        (vec!["agent", "run", "SENDAI", "--sim-clock", "now"], 1, "USAGE"),
        (vec!["agent", "run", "NOWHERE", "--sim-clock", "now..now+1h"], 1, "NOT_FOUND"),
    ];
    for (args, code, tag) in cases {
        let (status, stderr) = env.fails(&args);
        assert_eq!(status, code, "{args:?}: {stderr}");
        assert!(stderr.contains(&format!("[{tag}]")), "{args:?}: {stderr}");
    }

    // Clap usage errors are caller errors too; help is success.
    assert_eq!(env.fails(&["sessions", "frobnicate"]).0, 1);
    assert_eq!(env.fails(&["--help"]).0, 0);

    // A corrupt store is an internal error.
    std::fs::write(&env.store, "{ not json").unwrap();
    let (status, stderr) = env.fails(&["sessions", "list"]);
    assert_eq!(status, 2, "{stderr}");
    assert!(stderr.contains("[STORE_IO]"));
}

#[test]
fn refuses_to_run_while_the_service_holds_the_lock() {
    let env = Env::demo();
    let held = Store::open_exclusive(&env.store).unwrap();
    let (status, stderr) = env.fails(&["sessions", "list"]);
    assert_eq!(status, 1);
    assert!(stderr.contains("[STORE_LOCKED]"), "{stderr}");
    drop(held);
    env.ok(&["sessions", "list"]);
}

#[test]
fn request_agent_and_report_round_trip() {
    let env = Env::demo();
    env.ok(&["sessions", "register", "--horizon", "3d"]);
    let mut found = None;
    for h in 0..48 {
        let now = Epoch::parse(T0).unwrap().add_seconds(f64::from(h) * 3_600.0).iso_seconds();
        let out = Command::new(env!("CARGO_BIN_EXE_satops"))
            .args(["--store", env.store.to_str().unwrap(), "--json", "--now", &now])
            .args(["request", "create", "--template", "hpt-standard", "--target", "TOKYO", "--start", "now+2h", "--end", "now+6h"])
            .output()
            .unwrap();
        if out.status.success() {
            found = Some((now, serde_json::from_slice::<Value>(&out.stdout).unwrap()));
            break;
        }
        assert!(String::from_utf8_lossy(&out.stderr).contains("NO_CANDIDATES"));
    }
    let (now, outcome) = found.expect("candidates within two days");
    let request = outcome["request"]["id"].as_str().unwrap();
    let candidate = outcome["candidates"][0]["id"].as_str().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_satops"))
        .args(["--store", env.store.to_str().unwrap(), "--json", "--now", &now, "request", "confirm", request, candidate])
        .output()
        .unwrap();
    assert!(out.status.success());
    let confirmed: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(confirmed["state"], "confirmed");
    let captures = env.json(&["sessions", "list", "--type", "capture"]);
    assert_eq!(captures.as_array().unwrap().len(), 1);

    let ran = env.json(&["jobs", "simulate", "--from", T0, "--to", "now+2d"]);
    assert_eq!(ran.as_array().unwrap().iter().filter(|r| !r["registration"].is_null()).count(), 3);

    let rows = env.json(&["sessions", "list", "--type", "comm", "--from", "now+1d", "--to", "now+2d"]);
    for row in rows.as_array().unwrap().iter().filter(|r| r["loc_name"] == "SENDAI") {
        env.ok(&["sessions", "enable", row["id"].as_str().unwrap()]);
    }
    let report = env.json(&["agent", "run", "SENDAI", "--sim-clock", "now+1d..now+2d"]);
    assert!(!report["tracks"].as_array().unwrap().is_empty());
    assert!(report["errors"].as_array().unwrap().is_empty());
    let csv = env.ok(&["report", "volumes", "--from", T0, "--to", "now+3d"]);
    assert!(csv.starts_with("GB,"));
    let sessions_csv = env.ok(&["sessions", "list", "--csv"]);
    assert!(sessions_csv.starts_with("ses_type_ope,"));
}
