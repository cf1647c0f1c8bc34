use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use transition_core::calibration::CalibrationSet;
use transition_core::engine::Action;
use transition_core::scenario::ScenarioData;
use transition_core::Model;
use transition_service::{CreateSession, ExportFilter, FileStore, PostAction, SessionService};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_transition"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn bundled_history() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/scenario-ch-2022.csv")
}

#[test]
fn do_nothing_runs_out_of_supply() {
    let o = run(&["run", "--script", "do-nothing", "--out", "/dev/null"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("insufficient supply in turn"), "{}", stderr(&o));
}

#[test]
fn balanced_renewables_completes_with_full_csv() {
    let o = run(&["run", "--script", "balanced-renewables"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 1 + 29 + 1);
    assert!(lines[1].starts_with("2022,"));
    assert!(lines[29].starts_with("2050,"));
    assert!(lines[30].starts_with("total,"));
}

#[test]
fn same_script_and_seed_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for i in 0..2 {
        let csv = dir.path().join(format!("m{i}.csv"));
        let card = dir.path().join(format!("c{i}.json"));
        let log = dir.path().join(format!("l{i}.jsonl"));
        let o = bin()
            .args(["run", "--script", "all-solar", "--seed", "77", "--out"])
            .arg(&csv)
            .arg("--card")
            .arg(&card)
            .arg("--log")
            .arg(&log)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push([csv, card, log].map(|p| std::fs::read(p).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn script_errors_exit_with_usage_status() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "seed = 1\n[[turns]]\nactions = [{ type = \"teleport\" }]\n").unwrap();
    let o = bin().args(["run", "--script"]).arg(&bad).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let o = run(&["run", "--script", "no-such-script"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn strict_run_aborts_on_rejection_with_context() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("s.toml");
    std::fs::write(&script, "[[turns]]\nactions = [{ type = \"decommission\", plantId = 4040 }]\n").unwrap();
    let o = bin().args(["run", "--out", "/dev/null", "--script"]).arg(&script).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("turn 1: `decommission` rejected"), "{}", stderr(&o));
}

#[test]
fn calibrate_writes_one_row_per_series_and_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = bin().arg("calibrate").arg("--history").arg(bundled_history()).arg("--out").arg(out).output().unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let set = CalibrationSet::fit(&ScenarioData::bundled()).unwrap();
    let series = set.forecasts.len() + set.seasonal.len() + set.emission_factors.len();
    assert_eq!(text.lines().count(), 1 + series);
}

#[test]
fn calibrate_rejects_empty_history() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let o = bin().arg("calibrate").arg("--history").arg(&empty).output().unwrap();
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("empty"), "{}", stderr(&o));
}

#[test]
fn replay_of_an_exported_log_matches_the_service() {
    let dir = tempfile::tempdir().unwrap();
    let service = SessionService::open(Arc::new(Model::bundled()), Arc::new(FileStore::open(dir.path()).unwrap())).unwrap();
    for _ in 0..3 {
        let id = service.create_session(CreateSession::default()).unwrap().session_id;
        for action in [
            Action::SetImport { tj_per_season: 25_000.0 },
            Action::Borrow { mchf: 400.0 },
            Action::EndTurn,
            Action::EndTurn,
            Action::Upgrade { plant_id: 404 },
        ] {
            service.post_action(id, PostAction { seq: None, action }).unwrap();
        }
    }
    let export = dir.path().join("export.ndjson");
    let text: String = service
        .export(&ExportFilter::default())
        .iter()
        .map(|r| serde_json::to_string(r).unwrap() + "\n")
        .collect();
    std::fs::write(&export, &text).unwrap();
    let o = bin().arg("replay").arg(&export).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(String::from_utf8(o.stdout).unwrap().matches(" match").count(), 3);

    // A tampered score card is caught.
    let tampered = text.replacen("\"partial\":true", "\"partial\":false", 1);
    std::fs::write(&export, tampered).unwrap();
    let o = bin().arg("replay").arg(&export).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn http(port: u16, method: &str, path: &str, body: &str) -> Option<(u16, String)> {
    let mut s = TcpStream::connect(("127.0.0.1", port)).ok()?;
    s.set_read_timeout(Some(Duration::from_secs(5))).ok()?;
    write!(
        s,
        "{method} {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
        body.len()
    )
    .ok()?;
    let mut resp = String::new();
    s.read_to_string(&mut resp).ok()?;
    let status = resp.split(' ').nth(1)?.parse().ok()?;
    let body = resp.split_once("\r\n\r\n")?.1.to_string();
    Some((status, body))
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn start_server(port: u16, storage: &Path) -> Server {
    let child = bin()
        .args(["serve", "--listen", &format!("127.0.0.1:{port}"), "--storage"])
        .arg(storage)
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let server = Server(child);
    let deadline = Instant::now() + Duration::from_secs(20);
    while Instant::now() < deadline {
        if let Some((200, _)) = http(port, "GET", "/health", "") {
            return server;
        }
        std::thread::sleep(Duration::from_millis(50));
    }
    panic!("server did not come up");
}

/// Looks up a JSON pointer in a response body.
fn json_field(body: &str, pointer: &str) -> serde_json::Value {
    // Chunked transfer encoding may wrap the body; take the JSON object.
    let start = body.find('{').unwrap();
    let end = body.rfind('}').unwrap();
    let v: serde_json::Value = serde_json::from_str(&body[start..=end]).unwrap();
    v.pointer(pointer).cloned().unwrap()
}

#[test]
fn serve_survives_kill_and_restart() {
    let dir = tempfile::tempdir().unwrap();
    let port = free_port();
    let server = start_server(port, dir.path());
    let (status, body) = http(port, "POST", "/sessions", "{}").unwrap();
    assert_eq!(status, 201);
    let id = json_field(&body, "/sessionId").as_str().unwrap().to_string();
    let (status, _) = http(
        port,
        "POST",
        &format!("/sessions/{id}/actions"),
        r#"{"action":{"type":"set_import","tjPerSeason":2500.5}}"#,
    )
    .unwrap();
    assert_eq!(status, 200);
    let (_, before) = http(port, "GET", &format!("/sessions/{id}"), "").unwrap();
    drop(server);

    let port = free_port();
    let _server = start_server(port, dir.path());
    let (status, after) = http(port, "GET", &format!("/sessions/{id}"), "").unwrap();
    assert_eq!(status, 200);
    assert_eq!(json_field(&after, ""), json_field(&before, ""));
    assert_eq!(json_field(&after, "/state/importLevelTj"), 2500.5);
}

#[test]
fn serve_refuses_a_bad_storage_path() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("not-a-dir");
    std::fs::write(&file, "x").unwrap();
    let o = bin()
        .args(["serve", "--listen", "127.0.0.1:0", "--storage"])
        .arg(&file)
        .output()
        .unwrap();
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("not a directory"), "{}", stderr(&o));
}
