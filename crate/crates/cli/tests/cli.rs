mod common;

use std::path::Path;

use common::*;
use smartchair_core::monitor::{http_request, Health};

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

fn small_dataset(dir: &Path) -> std::path::PathBuf {
    let out = dir.join("sim");
    run_ok(&["simulate", "--subjects", "2", "--seconds", "10", "--out", p(&out)]);
    out
}

#[test]
fn simulate_writes_dataset_stream_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let sim = small_dataset(dir.path());
    // 2 subjects x 8 postures x 10 s at 3 Hz.
    assert_eq!(csv_rows(&sim.join("dataset.csv")).len(), 480);
    assert_eq!(csv_rows(&sim.join("session_schedule.csv")).len(), 8);
    let m = manifest(&sim);
    assert_eq!(m["command"], "simulate");
    assert_eq!(output_digests(&sim).unwrap().len(), 4);
}

#[test]
fn train_eval_single_model_and_confusion_totals() {
    let dir = tempfile::tempdir().unwrap();
    let sim = small_dataset(dir.path());
    let out = dir.path().join("train");
    run_ok(&["train-eval", "--data", p(&sim.join("dataset.csv")), "--models", "dt", "--out", p(&out)]);
    let acc = csv_rows(&out.join("accuracy.csv"));
    assert_eq!(acc.len(), 1);
    let n_test: u64 = acc[0][4].parse().unwrap();
    let total: u64 =
        csv_rows(&out.join("confusion_dt.csv")).iter().flat_map(|r| r[1..].iter().map(|v| v.parse::<u64>().unwrap())).sum();
    assert_eq!(total, n_test);
    assert!(out.join("report_dt.txt").exists() && out.join("model.scm").exists());
    assert!(!out.join("confusion_rf.csv").exists());
}

#[test]
fn ppg_validate_dumps_four_equal_stage_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ppg");
    run_ok(&["ppg-validate", "--duration", "30", "--out", p(&out)]);
    let mut r = csv::Reader::from_path(out.join("stages.csv")).unwrap();
    assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), ["stage_a", "stage_b", "stage_c", "stage_d"]);
    let rows: Vec<_> = r.records().map(|rec| rec.unwrap()).collect();
    assert_eq!(rows.len(), 3000);
    assert!(rows.iter().all(|rec| rec.len() == 4));
}

#[test]
fn exit_codes_separate_config_data_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(run_cli(&["simulate", "--rate", "0", "--out", p(&out)]).code, 2);
    assert_eq!(run_cli(&["frobnicate"]).code, 2);
    let missing = dir.path().join("missing.csv");
    assert_eq!(run_cli(&["train-eval", "--data", p(&missing), "--out", p(&out)]).code, 3);

    let bad_cfg = dir.path().join("bad.toml");
    std::fs::write(&bad_cfg, "[simulate]\nno_such_key = 1\n").unwrap();
    assert_eq!(run_cli(&["--config", p(&bad_cfg), "simulate", "--out", p(&out)]).code, 2);

    // A dataset without one class cannot train the SVM.
    let sim = small_dataset(dir.path());
    let full = std::fs::read_to_string(sim.join("dataset.csv")).unwrap();
    let partial: String = full.lines().filter(|l| !l.ends_with(",LeanBack")).map(|l| format!("{l}\n")).collect();
    let partial_path = dir.path().join("partial.csv");
    std::fs::write(&partial_path, partial).unwrap();
    let r = run_cli(&["train-eval", "--data", p(&partial_path), "--models", "svm", "--out", p(&out)]);
    assert_eq!(r.code, 3, "{}", r.stderr);
    assert!(r.stderr.contains("LeanBack"), "{}", r.stderr);
}

#[test]
fn serve_reports_the_model_checksum_and_replay_records_events() {
    let dir = tempfile::tempdir().unwrap();
    let sim = small_dataset(dir.path());
    let train = dir.path().join("train");
    run_ok(&["train-eval", "--data", p(&sim.join("dataset.csv")), "--models", "dt,rf", "--out", p(&train)]);
    let mut served = spawn_serve(&train.join("model.scm"), &dir.path().join("serve"), &["--max-sessions", "1"]);

    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
    let (code, body) = rt.block_on(http_request(served.api, "GET", "/health", None)).unwrap();
    assert_eq!(code, 200);
    let health: Health = serde_json::from_str(&body).unwrap();
    assert_eq!(health.model_checksum, served.checksum);
    assert_eq!(health.status, "ok");

    let replay_out = dir.path().join("replay");
    let ingest = served.ingest.to_string();
    run_ok(&["replay", "--session", p(&sim.join("session.frames")), "--addr", &ingest, "--speed", "0", "--out", p(&replay_out)]);
    assert!(served.child.wait().unwrap().success());

    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(replay_out.join("replay_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["ok"], summary["sent"]);
    let events = csv_rows(&replay_out.join("replay_events.csv"));
    // Each occupied posture appears once, separated by Empty.
    let occupied: Vec<_> = events.iter().filter(|e| e[1] != "Empty").map(|e| e[1].clone()).collect();
    assert_eq!(occupied.len(), 7, "{events:?}");

    let stats_out = dir.path().join("stats");
    let session = dir.path().join("serve/sessions/S000001.ndjson");
    run_ok(&["stats", "--session", p(&session), "--out", p(&stats_out)]);
    let stats: serde_json::Value = serde_json::from_slice(&std::fs::read(stats_out.join("stats.json")).unwrap()).unwrap();
    let sum: f64 = stats["postures"].as_array().unwrap().iter().map(|s| s["duration_s"].as_f64().unwrap()).sum();
    assert!((sum - stats["total_s"].as_f64().unwrap()).abs() < 1e-9);
}
