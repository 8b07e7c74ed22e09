mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::{synthetic_dataset, tiny_config};

fn tprnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tprnn")).args(args).env_remove("TPRNN_DATA_DIR").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

struct Workspace {
    _dir: tempfile::TempDir,
    config: String,
    out: std::path::PathBuf,
}

fn workspace(days: i64) -> Workspace {
    let dir = tempfile::tempdir().unwrap();
    let data = synthetic_dataset(dir.path(), days);
    let out = dir.path().join("run");
    let config = dir.path().join("run.toml");
    fs::write(&config, tiny_config(&data, &dir.path().join("cache"), &out)).unwrap();
    Workspace { config: config.display().to_string(), out, _dir: dir }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&tprnn(&[])), 1);
    assert_eq!(code(&tprnn(&["frobnicate"])), 1);
    assert_eq!(code(&tprnn(&["train", "--model", "lstm"])), 1);
    assert_eq!(code(&tprnn(&["ingest", "--weeks", "many"])), 1);
    assert_eq!(code(&tprnn(&["--help"])), 0);
    let o = tprnn(&["ingest"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("TPRNN_DATA_DIR"), "{}", stderr(&o));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[pooling]\nn = 700\n").unwrap();
    let o = tprnn(&["ingest", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("config"), "{}", stderr(&o));
}

#[test]
fn data_errors_exit_two_and_name_the_input() {
    let o = tprnn(&["ingest", "--dataset", "/nonexistent/power.txt"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("/nonexistent/power.txt"));
    assert!(stderr(&o).contains("ingest"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, format!("{}\n16/12/2006;17:24:00;4.216;0.418;234.840;18.400;0.000;1.000;17.000\n16/12/2006;17:25:00;x;0;0;0;0;0;0\n", common::HEADER)).unwrap();
    let cache = dir.path().join("c");
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, format!("cache_dir = \"{}\"\n", cache.display())).unwrap();
    let o = tprnn(&["ingest", "--config", cfg.to_str().unwrap(), "--dataset", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    fs::write(&bad, "").unwrap();
    assert_eq!(code(&tprnn(&["ingest", "--config", cfg.to_str().unwrap(), "--dataset", bad.to_str().unwrap()])), 2);
}

#[test]
fn data_dir_env_supplies_the_default_dataset() {
    let dir = tempfile::tempdir().unwrap();
    synthetic_dataset(dir.path(), 3);
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, format!("cache_dir = \"{}\"\n", dir.path().join("cache").display())).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_tprnn"))
        .args(["ingest", "--config", cfg.to_str().unwrap()])
        .env("TPRNN_DATA_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains(&format!("raw_records: {}", 3 * 1440)));
}

#[test]
fn ingest_reports_counts_and_is_idempotent() {
    let ws = workspace(16);
    let first = tprnn(&["ingest", "--config", &ws.config]);
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    let text = stdout(&first);
    let missing = (0..16 * 1440).filter(|i| i % 97 == 5).count();
    assert!(text.contains(&format!("raw_records: {}", 16 * 1440)), "{text}");
    assert!(text.contains(&format!("missing_records: {missing}")), "{text}");
    assert!(text.contains(&format!("imputed_minutes: {missing}")), "{text}");
    assert!(!text.contains("nothing to do"));
    let second = tprnn(&["ingest", "--config", &ws.config]);
    assert_eq!(code(&second), 0);
    assert!(stdout(&second).contains("nothing to do"));
}

#[test]
fn training_failure_exits_three() {
    let ws = workspace(16);
    let text = fs::read_to_string(&ws.config).unwrap().replace("[svr]\nepochs = 2", "[svr]\nepochs = 2\nlr = 1e300\nc = 1e300");
    fs::write(&ws.config, text).unwrap();
    let o = tprnn(&["train", "--config", &ws.config, "--model", "svr"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("epoch"), "{}", stderr(&o));
    assert!(stderr(&o).contains("train"), "{}", stderr(&o));
}

fn read(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn train_then_evaluate() {
    let ws = workspace(16);
    for model in ["arima", "tprnn"] {
        let o = tprnn(&["train", "--config", &ws.config, "--model", model]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    assert!(ws.out.join("checkpoints/arima.txt").is_file());
    assert!(ws.out.join("checkpoints/tprnn.json").is_file());
    let log = fs::read_to_string(ws.out.join("logs/tprnn.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2);
    for line in log.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["method"], "tprnn");
        assert!(v["train_loss"].as_f64().unwrap().is_finite());
    }

    let again = tprnn(&["train", "--config", &ws.config, "--model", "arima"]);
    assert_eq!(code(&again), 1);

    let o = tprnn(&["evaluate", "--config", &ws.config]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("ARIMA") && stdout(&o).contains("TPRNN"));
    let report: serde_json::Value = serde_json::from_slice(&read(&ws.out.join("report.json"))).unwrap();
    let rows = report["report"]["rows"].as_array().unwrap();
    assert_eq!(rows.iter().map(|r| r["method"].as_str().unwrap()).collect::<Vec<_>>(), ["arima", "tprnn"]);
    // one test week: 14 segments of 720 minutes, 690 predictions each
    assert_eq!(rows[0]["points"], 14 * 690);
    let trace = fs::read_to_string(ws.out.join("traces/tprnn.csv")).unwrap();
    assert_eq!(trace.lines().count(), 14 * 690 + 1);
    assert!(trace.starts_with("timestamp_iso8601,actual_kw,predicted_kw\n2006-12-25T00:30:00,"), "{}", &trace[..80]);

    let single = tprnn(&["evaluate", "--config", &ws.config, ws.out.join("checkpoints/arima.txt").to_str().unwrap()]);
    assert_eq!(code(&single), 0);
    let report: serde_json::Value = serde_json::from_slice(&read(&ws.out.join("report.json"))).unwrap();
    assert_eq!(report["report"]["rows"].as_array().unwrap().len(), 1);
}

#[test]
fn evaluate_refuses_mismatched_checkpoints() {
    let ws = workspace(16);
    assert_eq!(code(&tprnn(&["train", "--config", &ws.config, "--model", "arima"])), 0);
    let other = ws.out.with_file_name("other.toml");
    let other_out = ws.out.with_file_name("other");
    let text = fs::read_to_string(&ws.config).unwrap().replace("window = 30", "window = 20");
    fs::write(&other, text.replace(&ws.out.display().to_string(), &other_out.display().to_string())).unwrap();
    assert_eq!(code(&tprnn(&["train", "--config", other.to_str().unwrap(), "--model", "svr"])), 0);

    let o = tprnn(&[
        "evaluate",
        "--config",
        &ws.config,
        ws.out.join("checkpoints/arima.txt").to_str().unwrap(),
        other_out.join("checkpoints/svr.txt").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("window"), "{}", stderr(&o));

    let o = tprnn(&["evaluate", "--config", other.to_str().unwrap(), ws.out.join("checkpoints/arima.txt").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("mismatched: window"), "{}", stderr(&o));
}

#[test]
fn reproduce_writes_everything_and_guards_the_output() {
    let ws = workspace(16);
    let o = tprnn(&["reproduce", "--config", &ws.config, "--skip", "svr"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let manifest: serde_json::Value = serde_json::from_slice(&read(&ws.out.join("manifest.json"))).unwrap();
    assert_eq!(manifest["methods"].as_array().unwrap().len(), 4);
    let report: serde_json::Value = serde_json::from_slice(&read(&ws.out.join("report.json"))).unwrap();
    assert_eq!(report["report"]["rows"].as_array().unwrap().len(), 4);
    assert_eq!(report["reference"].as_array().unwrap().len(), 5);
    for entry in manifest["artifacts"].as_array().unwrap() {
        let bytes = read(&ws.out.join(entry["path"].as_str().unwrap()));
        assert_eq!(entry["sha256"].as_str().unwrap(), tprnn::cache::sha256_hex(&bytes));
    }
    assert!(!ws.out.join("checkpoints/svr.txt").exists());
    assert_eq!(fs::read_dir(ws.out.join("traces")).unwrap().count(), 4);

    let refused = tprnn(&["reproduce", "--config", &ws.config]);
    assert_eq!(code(&refused), 1);
    assert!(stderr(&refused).contains("--force"));

    // the saved effective config reruns to the same bytes
    let saved = ws.out.join("config.toml");
    let rerun_out = ws.out.with_file_name("rerun");
    let o = tprnn(&["reproduce", "--config", saved.to_str().unwrap(), "--out", rerun_out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for rel in ["report.json", "report.txt", "checkpoints/tprnn.json", "checkpoints/arima.txt", "traces/drnn.csv"] {
        assert_eq!(read(&ws.out.join(rel)), read(&rerun_out.join(rel)), "{rel}");
    }

    let forced = tprnn(&["reproduce", "--config", &ws.config, "--force", "--skip", "rnn,drnn,tprnn"]);
    assert_eq!(code(&forced), 0, "{}", stderr(&forced));
    assert!(!ws.out.join("checkpoints/tprnn.json").exists());
    assert!(ws.out.join("checkpoints/svr.txt").exists());
}

#[test]
fn export_writes_the_span() {
    let ws = workspace(16);
    let csv = ws.out.with_file_name("series.csv");
    let o = tprnn(&["export", "--config", &ws.config, "--weeks", "1", "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("timestamp_iso8601,gap_kw"));
    assert!(lines.next().unwrap().starts_with("2006-12-18T00:00:00,"));
    assert_eq!(text.lines().count(), 10_080 + 1);
    assert_eq!(code(&tprnn(&["export", "--config", &ws.config, "--out", csv.to_str().unwrap()])), 1);
}
