use std::path::Path;
use std::process::{Command, Output};

fn scarv(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scarv"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = scarv(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn pipeline_from_text_to_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["--out-dir", "g", "gen", "--n", "150"]);
    ok(d, &["--out-dir", "m", "mine", "--input", "g/dataset.jsonl"]);
    let stats = std::fs::read_to_string(d.join("m/cluster_stats.json")).unwrap();
    assert!(stats.contains("\"purity\""));
    for (dir, seed) in [("s0", "1"), ("s1", "2")] {
        ok(d, &["--out-dir", dir, "--master-seed", seed, "score", "--input", "g/dataset.jsonl", "--seeds", "2"]);
        let scores = format!("{dir}/scores.csv");
        ok(d, &[
            "--out-dir", dir, "aggregate", "--scores", &scores, "--clusters", "m/clusters.csv",
            "--input", "g/dataset.jsonl",
        ]);
    }
    ok(d, &["--out-dir", "e", "eval", "--rankings", "s0/ranking.csv", "s1/ranking.csv"]);
    let metrics = std::fs::read_to_string(d.join("e/metrics.csv")).unwrap();
    assert!(metrics.starts_with("metric,value\nstability,"));
    assert_eq!(metrics.lines().count(), 5);
}

#[test]
fn oracle_dedup_needs_clusters() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("scores.csv"), "example_id,seed_0\n0,0.5\n1,0.2\n").unwrap();
    let out = scarv(d, &["aggregate", "--scores", "scores.csv", "--method", "dedup_oracle"]);
    assert_eq!(out.status.code(), Some(2));
    ok(d, &["--out-dir", "r", "aggregate", "--scores", "scores.csv", "--method", "bare"]);
    let ranking = std::fs::read_to_string(d.join("r/ranking.csv")).unwrap();
    assert_eq!(ranking, "position,example_id,score\n1,0,0.5\n2,1,0.2\n");
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(scarv(d, &["no-such-command"]).status.code(), Some(2));
    assert_eq!(scarv(d, &["frontier", "--r-list", "0"]).status.code(), Some(2));
    assert_eq!(scarv(d, &["run"]).status.code(), Some(2));
    let missing = scarv(d, &["aggregate", "--scores", "absent.csv"]);
    assert_eq!(missing.status.code(), Some(3));
    std::fs::write(d.join("bad.toml"), "outer_runs = 1\n").unwrap();
    assert_eq!(scarv(d, &["--config", "bad.toml", "run"]).status.code(), Some(2));
}

#[test]
fn run_and_report_from_config() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(
        d.join("exp.toml"),
        "methods = [\"bare\", \"full_scarv\"]\nseeds_per_run = 2\nouter_runs = 2\n\
         [dataset]\nkind = \"synthetic\"\nn = 120\ntest_size = 100\nval_size = 50\n",
    )
    .unwrap();
    ok(d, &["--config", "exp.toml", "--out-dir", "o", "--jobs", "2", "run"]);
    assert!(d.join("o/results.csv").exists());
    assert!(d.join("o/methods.svg").exists());
    ok(d, &["--out-dir", "sig", "eval", "--results", "o/results.csv"]);
    let sig = std::fs::read_to_string(d.join("sig/significance.csv")).unwrap();
    assert!(sig.lines().nth(1).unwrap().starts_with("full_scarv,bare,"));
    ok(d, &["--out-dir", "rep", "report", "--results", "o/results.csv"]);
    assert!(d.join("rep/methods.svg").exists());
}

#[test]
fn synthetic_frontier_writes_per_config_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["--out-dir", "f", "frontier", "--configs", "1", "--outer-runs", "2", "--r-list", "1,2"]);
    let csv = std::fs::read_to_string(d.join("f/config0/frontier.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let summary = std::fs::read_to_string(d.join("f/frontier_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
}
