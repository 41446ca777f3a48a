use serde_json::Value;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_minerisk"));
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("MINERISK_")) {
        c.env_remove(k);
    }
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const METRIC_REGION: &str = r#"{"id": "plot", "mode": "metric", "bounds": {"min_x": 0, "min_y": 0, "max_x": 100, "max_y": 100}, "tile_size_m": 25}"#;

/// Two training regions and a test region, all small.
fn regions(dir: &Path) {
    ok(dir, &["synth", "--seed", "1", "--size", "300", "--n-mines", "16", "--clusters", "2", "--out", "a.json"]);
    ok(dir, &["synth", "--seed", "2", "--size", "300", "--n-mines", "16", "--clusters", "2", "--out", "b.json"]);
    ok(dir, &["synth", "--seed", "3", "--size", "300", "--n-mines", "16", "--pattern", "multi", "--out", "t.json"]);
}

#[test]
fn ingest_csv_prints_the_region_summary() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("region.json"), METRIC_REGION).unwrap();
    std::fs::write(dir.path().join("mines.csv"), "x,y\n10,10\n12,14\n60,60\n61,62\n90,10\n").unwrap();
    let out = ok(dir.path(), &["ingest", "--mines", "mines.csv", "--region", "region.json", "--out", "plot.json"]);
    let text = stdout(&out);
    for col in ["Number of tiles", "Number of landmines", "Share of tiles"] {
        assert!(text.contains(col), "{text}");
    }
    let file = json(dir.path().join("plot.json"));
    assert_eq!(file["dataset"]["mines"].as_array().unwrap().len(), 5);
    assert_eq!(file["summary"]["tiles"], 16);
    assert_eq!(file["summary"]["mines"], 5);
    assert_eq!(file["summary"]["share_of_mined_tiles"], 3.0 / 16.0);
}

#[test]
fn ingest_rejects_non_point_features() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("region.json"), METRIC_REGION).unwrap();
    let geojson = r#"{"type": "FeatureCollection", "features": [
        {"type": "Feature", "geometry": {"type": "Point", "coordinates": [10, 10]}, "properties": {}},
        {"type": "Feature", "id": "road", "geometry": {"type": "LineString", "coordinates": [[0, 0], [5, 5]]}, "properties": {}}
    ]}"#;
    std::fs::write(dir.path().join("mines.geojson"), geojson).unwrap();
    let out = run(dir.path(), &["ingest", "--mines", "mines.geojson", "--region", "region.json"]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains("feature 1") && err.contains("road"), "{err}");
}

#[test]
fn malformed_csv_names_the_line() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("region.json"), METRIC_REGION).unwrap();
    std::fs::write(dir.path().join("mines.csv"), "x,y\n10,10\n12,abc\n").unwrap();
    let out = run(dir.path(), &["ingest", "--mines", "mines.csv", "--region", "region.json"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn train_simulate_report_round_trip() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    regions(d);
    ok(d, &["train", "--instance", "linear", "--dataset", "a.json", "--dataset", "b.json", "--out", "linear.json"]);
    let model = json(d.join("linear.json"));
    assert_eq!(model["kind"], "linear");
    assert_eq!(model["metadata"]["region_ids"], serde_json::json!(["synthetic-1", "synthetic-2"]));

    let sim = [
        "simulate",
        "--seed",
        "9",
        "--dataset",
        "t.json",
        "--instance",
        "random,sequential,linear",
        "--model",
        "linear.json",
    ];
    ok(d, &[&sim[..], &["--out", "sim.json", "--history-dir", "hist"]].concat());
    ok(d, &[&sim[..], &["--out", "sim2.json"]].concat());
    let first = std::fs::read(d.join("sim.json")).unwrap();
    assert_eq!(first, std::fs::read(d.join("sim2.json")).unwrap(), "same seed must give identical bytes");

    let out = json(d.join("sim.json"));
    let results = out["results"].as_array().unwrap();
    assert_eq!(results.len(), 3);
    let tiles = out["tiles"].as_u64().unwrap() as usize;
    for r in results {
        let card = &r["scorecard"];
        let shares: Vec<f64> = serde_json::from_value(r["shares"].clone()).unwrap();
        assert_eq!(shares.len(), tiles);
        let mean = shares.iter().sum::<f64>() / tiles as f64;
        assert!((card["demining_score"].as_f64().unwrap() - mean).abs() < 1e-12);
        let t: Vec<f64> = ["t50", "t75", "t90", "t100"].iter().map(|k| card[k].as_f64().unwrap()).collect();
        assert!(t.windows(2).all(|w| w[0] <= w[1]) && t[3] <= 100.0);
    }
    let csv = std::fs::read_to_string(d.join("hist/sequential.csv")).unwrap();
    assert!(csv.starts_with("timestep,share_found\n"));
    assert_eq!(csv.lines().count(), tiles + 1);

    let rep = ok(d, &["report", "sim.json", "--out", "report.json"]);
    let header = stdout(&rep).lines().next().unwrap().to_string();
    for col in ["Demining Score", "T50", "T75", "T90", "T100"] {
        assert!(header.contains(col), "{header}");
    }
    let report = json(d.join("report.json"));
    assert_eq!(report["rows"].as_array().unwrap().len(), 3);
    let series = &report["plot"][0];
    assert_eq!(series["percent_cleared"].as_array().unwrap().len(), tiles);
    assert_eq!(series["percent_cleared"][tiles - 1], 100.0);
}

#[test]
fn seeds_are_mandatory_and_models_are_checked() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    regions(d);
    let out = run(d, &["simulate", "--dataset", "t.json"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("seed"));
    let out = run(d, &["cv", "--instance", "linear", "--dataset", "a.json", "--dataset", "b.json"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("seed"));
    let out = run(d, &["simulate", "--seed", "1", "--dataset", "t.json", "--instance", "bayesian"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("train --instance bayesian"), "{}", stderr(&out));
    let out = run(d, &["simulate", "--seed", "1", "--dataset", "missing.json"]);
    assert!(!out.status.success());
    let out = run(d, &["train", "--instance", "greedy", "--dataset", "a.json"]);
    assert!(!out.status.success());
}

#[test]
fn cv_covers_the_linear_grid() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    regions(d);
    let args = ["cv", "--seed", "4", "--instance", "linear", "--dataset", "a.json", "--dataset", "b.json"];
    ok(d, &[&args[..], &["--out", "cv.json"]].concat());
    let report = json(d.join("cv.json"));
    let cells = report["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 9);
    let best = report["best_score"].as_f64().unwrap();
    for c in cells {
        assert!(c["weighted_score"].as_f64().unwrap() <= best);
    }
    assert_eq!(cells[report["best_index"].as_u64().unwrap() as usize]["hyperparameters"], report["best"]);

    // a pinned axis narrows the grid
    ok(d, &[&args[..], &["--landmine-weight", "30", "--out", "cv30.json"]].concat());
    assert_eq!(json(d.join("cv30.json"))["cells"].as_array().unwrap().len(), 3);

    ok(d, &["train", "--instance", "linear", "--dataset", "a.json", "--cv-report", "cv.json", "--out", "m.json"]);
    assert_eq!(json(d.join("m.json"))["hyperparameters"], report["best"]);
}

#[test]
fn config_file_env_and_flags_layer() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    regions(d);
    std::fs::create_dir(d.join("cfg")).unwrap();
    std::fs::rename(d.join("t.json"), d.join("cfg/t.json")).unwrap();
    std::fs::write(
        d.join("cfg/run.json"),
        r#"{"seed": 11, "test_dataset": "t.json", "instance": ["random"], "random_runs": 2, "out": "from_config.json"}"#,
    )
    .unwrap();
    ok(d, &["simulate", "--config", "cfg/run.json"]);
    let from_file = json(d.join("cfg/from_config.json"));
    assert_eq!(from_file["seed"], 11);
    assert_eq!(from_file["random_runs"], 2);

    let out = bin()
        .current_dir(d)
        .env("MINERISK_SEED", "12")
        .args(["simulate", "--config", "cfg/run.json", "--out", "env.json"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(json(d.join("env.json"))["seed"], 12);

    let out = bin()
        .current_dir(d)
        .env("MINERISK_SEED", "12")
        .args(["simulate", "--config", "cfg/run.json", "--seed", "13", "--out", "flag.json"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let flag = json(d.join("flag.json"));
    assert_eq!(flag["seed"], 13);
    assert_ne!(flag["results"][0]["shares"], from_file["results"][0]["shares"]);

    std::fs::write(d.join("cfg/bad.json"), r#"{"seeds": 1}"#).unwrap();
    assert!(!run(d, &["simulate", "--config", "cfg/bad.json"]).status.success());
}

fn http(addr: &str, method: &str, path: &str, body: &str) -> (u16, Value) {
    let mut s = TcpStream::connect(addr).unwrap();
    write!(
        s,
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut raw = String::new();
    s.read_to_string(&mut raw).unwrap();
    let status = raw[9..12].parse().unwrap();
    let body = raw.split_once("\r\n\r\n").map(|x| x.1).unwrap_or("");
    (status, serde_json::from_str(body).unwrap_or(Value::Null))
}

#[cfg(unix)]
#[test]
fn serve_answers_and_persists_on_shutdown() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    regions(d);
    let mut child = bin()
        .current_dir(d)
        .args(["serve", "--bind", "127.0.0.1:0", "--data-dir", "sessions"])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on http://").expect("address line").to_string();

    let (status, health) = http(&addr, "GET", "/health", "");
    assert_eq!(status, 200);
    assert_eq!(health["models"], serde_json::json!([]));

    let dataset = std::fs::read_to_string(d.join("t.json")).unwrap();
    let (status, body) =
        http(&addr, "POST", "/sessions", &format!(r#"{{"dataset": {dataset}, "instance": "linear"}}"#));
    assert_eq!(status, 409, "{body}");
    assert_eq!(body["code"], "model_missing");
    let (status, created) = http(&addr, "POST", "/sessions", &format!(r#"{{"dataset": {dataset}}}"#));
    assert_eq!(status, 201);
    let id = created["id"].as_str().unwrap();
    let (status, _) = http(&addr, "POST", &format!("/sessions/{id}/clear"), r#"{"tile": 0}"#);
    assert_eq!(status, 200);

    let killed = Command::new("kill").args(["-TERM", &child.id().to_string()]).status().unwrap();
    assert!(killed.success());
    assert!(child.wait().unwrap().success());
    let snapshot = json(d.join(format!("sessions/{id}.state.json")));
    assert_eq!(snapshot["revision"], 1);
    assert!(d.join(format!("sessions/{id}.jsonl")).exists());
}

#[test]
fn serve_reports_bind_failures() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["serve", "--bind", "not-an-address"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("binding"));
}
