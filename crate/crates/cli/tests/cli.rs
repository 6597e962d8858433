use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn distinguish(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_distinguish"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = distinguish(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn error_message(out: &Output) -> String {
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(stderr.trim_end().lines().count(), 1, "stderr: {stderr}");
    let v: Value = serde_json::from_str(stderr.trim()).expect("error is JSON");
    v["error"].as_str().expect("error message").to_owned()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulated(dir: &Path) -> String {
    let out = dir.join("sim");
    ok(&[
        "simulate",
        "--kind",
        "uniform",
        "--models",
        "8",
        "--questions",
        "40",
        "--seed",
        "1",
        "--distinct",
        "--out",
        s(&out),
    ]);
    out.join("matrix.csv").display().to_string()
}

#[test]
fn missing_seed_is_an_error_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let res = distinguish(&[
        "simulate",
        "--kind",
        "uniform",
        "--models",
        "4",
        "--questions",
        "4",
        "--out",
        s(&out),
    ]);
    assert!(error_message(&res).contains("--seed"));
    assert!(!out.exists());
}

#[test]
fn refuses_to_overwrite_without_force() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let args = [
        "theory",
        "--law",
        "infinite",
        "--kmax",
        "3",
        "--out",
        s(&out),
    ];
    ok(&args);
    let res = distinguish(&args);
    assert!(error_message(&res).contains("--force"));
    let mut forced = args.to_vec();
    forced.push("--force");
    ok(&forced);
}

#[test]
fn single_run_has_zero_spread_and_zero_prior_gives_fraction() {
    let tmp = tempfile::tempdir().unwrap();
    let m = simulated(tmp.path());
    let out = tmp.path().join("e");
    ok(&[
        "experiment",
        "--matrix",
        &m,
        "--heuristic",
        "sep",
        "--seed",
        "2",
        "--runs",
        "1",
        "--prior",
        "0",
        "--k-max",
        "6",
        "--out",
        s(&out),
    ]);
    let curves = read_csv(&out.join("curves.csv"));
    assert_eq!(curves.len(), 6);
    for row in &curves {
        assert_eq!(row[2].parse::<f64>().unwrap(), 0.0);
        assert_eq!(row[1], row[3]);
        assert_eq!(row[3], row[4]);
    }
    for row in read_csv(&out.join("cdf.csv")) {
        assert_eq!(row[3], row[4], "accuracy equals cumulative fraction");
    }
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["runs"], 1);
    assert_eq!(summary["total_pairs"], 28);
}

#[test]
fn config_file_merges_under_flags_and_rejects_unknown_keys() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.json");
    fs::write(
        &cfg,
        r#"{"kind": "uniform", "models": 5, "questions": 7, "seed": 3}"#,
    )
    .unwrap();
    let out = tmp.path().join("o");
    ok(&[
        "simulate",
        "--config",
        s(&cfg),
        "--questions",
        "9",
        "--out",
        s(&out),
    ]);
    let text = fs::read_to_string(out.join("matrix.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[0].split(',').count(), 10);

    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["questions"], 9);
    assert_eq!(manifest["config"]["models"], 5);
    assert!(manifest["config"].get("out").is_none());

    fs::write(&cfg, r#"{"kind": "uniform", "colour": 1}"#).unwrap();
    let res = distinguish(&[
        "simulate",
        "--config",
        s(&cfg),
        "--out",
        s(&tmp.path().join("p")),
    ]);
    assert!(error_message(&res).contains("colour"));
}

#[test]
fn manifest_records_input_digests() {
    let tmp = tempfile::tempdir().unwrap();
    let m = simulated(tmp.path());
    let out = tmp.path().join("s");
    ok(&[
        "score",
        "--matrix",
        &m,
        "--heuristic",
        "rand",
        "--seed",
        "9",
        "--out",
        s(&out),
    ]);
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let digest = manifest["inputs_sha256"][&m].as_str().unwrap();
    assert_eq!(digest.len(), 64);
    assert!(digest.chars().all(|c| c.is_ascii_hexdigit()));

    let scores = read_csv(&out.join("scores.csv"));
    assert_eq!(scores.len(), 40);
    let values: Vec<f64> = scores.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(values.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn interrogating_a_model_with_itself_accepts() {
    let tmp = tempfile::tempdir().unwrap();
    let m = simulated(tmp.path());
    let out = tmp.path().join("i");
    ok(&[
        "interrogate",
        "--a",
        "matrix:m2",
        "--b",
        "matrix:m2",
        "--matrix",
        &m,
        "--heuristic",
        "sep",
        "--seed",
        "1",
        "--budget",
        "5",
        "--out",
        s(&out),
    ]);
    let v: Value =
        serde_json::from_str(&fs::read_to_string(out.join("verdict.json")).unwrap()).unwrap();
    assert_eq!(v["decision"], "accept_h0");
    assert_eq!(v["queries_used"], 5);
    assert_eq!(v["advisory_confidence"], 1.0 - 0.5f64.powi(5));
}

#[test]
fn interrogating_an_unreachable_endpoint_aborts() {
    let tmp = tempfile::tempdir().unwrap();
    let m = simulated(tmp.path());
    // Bind then drop to get a port nobody listens on.
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let out = tmp.path().join("i");
    ok(&[
        "interrogate",
        "--a",
        "matrix:m2",
        "--b",
        &format!("tcp://127.0.0.1:{port}"),
        "--matrix",
        &m,
        "--heuristic",
        "rand",
        "--seed",
        "1",
        "--timeout-secs",
        "2",
        "--out",
        s(&out),
    ]);
    let v: Value =
        serde_json::from_str(&fs::read_to_string(out.join("verdict.json")).unwrap()).unwrap();
    assert_eq!(v["decision"], "aborted");
    assert!(v["advisory_confidence"].is_null());
}

#[test]
fn scalability_reports_unreachable_targets() {
    let tmp = tempfile::tempdir().unwrap();
    let dup = tmp.path().join("dup.csv");
    fs::write(&dup, "model_id,q0,q1\na,0,1\nb,0,1\nc,1,0\n").unwrap();
    let out = tmp.path().join("s");
    ok(&[
        "scalability",
        "--matrices",
        s(&dup),
        "--complete",
        "3",
        "--heuristic",
        "greedy",
        "--out",
        s(&out),
    ]);
    let rows = read_csv(&out.join("sweep.csv"));
    assert_eq!(rows[0], ["3", "unreachable", "0.99"]);
    assert_eq!(rows[1], ["8", "3", "0.99"]);
}

#[test]
fn brute_force_respects_the_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let m = simulated(tmp.path());
    let res = distinguish(&[
        "theory",
        "--brute-force",
        "--matrix",
        &m,
        "--k",
        "5",
        "--budget",
        "1000",
        "--out",
        s(&tmp.path().join("b")),
    ]);
    assert!(error_message(&res).contains("1000"));
}

#[test]
fn analyze_writes_square_distances() {
    let tmp = tempfile::tempdir().unwrap();
    let m = simulated(tmp.path());
    let out = tmp.path().join("a");
    ok(&["analyze", "--matrix", &m, "--distances", "--out", s(&out)]);
    let d = read_csv(&out.join("distances.csv"));
    assert_eq!(d.len(), 8);
    for (i, row) in d.iter().enumerate() {
        assert_eq!(row.len(), 9);
        assert_eq!(row[i + 1], "0");
    }
    let hist = read_csv(&out.join("histogram.csv"));
    let total: usize = hist.iter().map(|r| r[1].parse::<usize>().unwrap()).sum();
    assert_eq!(total, 40);
}
