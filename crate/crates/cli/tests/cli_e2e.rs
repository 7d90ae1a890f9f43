//! End-to-end tests of the `curverisk` binary: exit codes, artifacts,
//! and output determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_curverisk"))
}

fn config_path(name: &str) -> String {
    format!("{}/../../configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal exit")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf-8 stderr")
}

#[test]
fn run_case1_writes_artifacts() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out_dir = dir.path().to_str().expect("utf-8 path");
    let out = run(&["run", &config_path("case1.cfg"), "--out", out_dir]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("PASS"), "stdout: {}", stdout(&out));

    let trace = fs::read_to_string(dir.path().join("trace.csv")).expect("trace written");
    let lines: Vec<&str> = trace.lines().collect();
    assert!(lines.len() >= 201, "expected >= 200 data rows, got {}", lines.len() - 1);
    assert!(lines[0].starts_with("step,t,phase,action,"), "header first");

    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("metrics.json")).expect("metrics"))
            .expect("metrics.json parses");
    assert!(metrics["meta"]["generated_unix_ms"].is_number(), "meta present by default");
    assert_eq!(metrics["metrics"]["scenario"], "case1");
    assert_eq!(metrics["metrics"]["lane_changes"], 1);
    assert_eq!(metrics["metrics"]["collision"], false);
}

#[test]
fn equal_seeds_are_byte_identical_without_meta() {
    let dir_a = tempfile::tempdir().expect("tempdir");
    let dir_b = tempfile::tempdir().expect("tempdir");
    for dir in [&dir_a, &dir_b] {
        let out = run(&[
            "run",
            &config_path("case1.cfg"),
            "--seed",
            "7",
            "--no-meta",
            "--out",
            dir.path().to_str().expect("utf-8 path"),
        ]);
        assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    }
    let read = |dir: &Path, name: &str| fs::read(dir.join(name)).expect("artifact exists");
    assert_eq!(
        read(dir_a.path(), "trace.csv"),
        read(dir_b.path(), "trace.csv"),
        "same seed must give byte-identical traces"
    );
    assert_eq!(
        read(dir_a.path(), "metrics.json"),
        read(dir_b.path(), "metrics.json"),
        "--no-meta must make metrics byte-identical too"
    );
    let metrics: serde_json::Value = serde_json::from_slice(&read(dir_a.path(), "metrics.json"))
        .expect("metrics.json parses");
    assert!(metrics.get("meta").is_none(), "--no-meta omits the meta block");
}

#[test]
fn missing_file_and_malformed_config_exit_one() {
    let out = run(&["run", "/nonexistent/nowhere.cfg"]);
    assert_eq!(exit_code(&out), 1);
    assert!(stderr(&out).contains("/nonexistent/nowhere.cfg"));

    let dir = tempfile::tempdir().expect("tempdir");
    let bad = dir.path().join("bad.cfg");
    fs::write(
        &bad,
        r#"{ "road": { "inner_edge_radius": 64.0 }, "vehicles": [] }"#,
    )
    .expect("config written");
    let out = run(&["run", bad.to_str().expect("utf-8 path")]);
    assert_eq!(exit_code(&out), 1);
    assert!(
        stderr(&out).contains("outer_edge_radius"),
        "error names the missing key: {}",
        stderr(&out)
    );
}

#[test]
fn usage_errors_exit_one() {
    let out = run(&["run"]);
    assert_eq!(exit_code(&out), 1, "missing argument is a usage error");
    let out = run(&["frobnicate"]);
    assert_eq!(exit_code(&out), 1, "unknown subcommand is a usage error");
    let out = run(&["--help"]);
    assert_eq!(exit_code(&out), 0, "help is not an error");
}

#[test]
fn validate_prints_summary_and_writes_nothing() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = bin()
        .current_dir(dir.path())
        .args(["validate", &config_path("case2.cfg")])
        .output()
        .expect("binary runs");
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("OK"), "summary starts with OK: {text}");
    for role in ["SV", "PV", "IV", "RV"] {
        assert!(text.contains(role), "summary lists {role}: {text}");
    }
    assert_eq!(
        fs::read_dir(dir.path()).expect("dir readable").count(),
        0,
        "validate must not write artifacts"
    );
}

#[test]
fn validate_rejects_bad_values_with_key_names() {
    let dir = tempfile::tempdir().expect("tempdir");
    let bad = dir.path().join("negative.cfg");
    fs::write(
        &bad,
        r#"{
            "road": { "inner_edge_radius": 64.0, "outer_edge_radius": 70.0, "lane_width": -3.0 },
            "vehicles": [ { "role": "SV", "lane": 2, "angle_deg": 0.0, "speed": 5.0 } ]
        }"#,
    )
    .expect("config written");
    let out = run(&["validate", bad.to_str().expect("utf-8 path")]);
    assert_eq!(exit_code(&out), 1);
    assert!(
        stderr(&out).contains("road.lane_width"),
        "invariant failure names the key: {}",
        stderr(&out)
    );

    let unknown_role = dir.path().join("role.cfg");
    fs::write(
        &unknown_role,
        r#"{
            "road": { "inner_edge_radius": 64.0, "outer_edge_radius": 70.0, "lane_width": 3.0 },
            "vehicles": [ { "role": "XV", "lane": 2, "angle_deg": 0.0, "speed": 5.0 } ]
        }"#,
    )
    .expect("config written");
    let out = run(&["validate", unknown_role.to_str().expect("utf-8 path")]);
    assert_eq!(exit_code(&out), 1);
    let err = stderr(&out);
    assert!(
        err.contains("XV") && err.contains("SV"),
        "enumerated-value error lists the variants: {err}"
    );
}

#[test]
fn scenario_failure_exits_two_but_writes_artifacts() {
    let dir = tempfile::tempdir().expect("tempdir");
    // A lane width of 4 m cannot be crossed inside the steering budget
    // and the decision box, so planning fails at the trigger.
    let cfg = dir.path().join("blocked.cfg");
    fs::write(
        &cfg,
        r#"{
            "name": "blocked",
            "road": { "inner_edge_radius": 100.0, "outer_edge_radius": 108.0, "lane_width": 4.0 },
            "field_params": { "r1": 104.0 },
            "vehicles": [
                { "role": "SV", "lane": 2, "angle_deg": 0.0, "speed": 5.0 },
                { "role": "PV", "lane": 2, "angle_deg": 6.0, "speed": 2.0 },
                { "role": "IV", "lane": 1, "angle_deg": 1.5, "speed": 11.0 },
                { "role": "RV", "lane": 1, "angle_deg": -5.0, "speed": 5.5 }
            ]
        }"#,
    )
    .expect("config written");
    let out = run(&[
        "run",
        cfg.to_str().expect("utf-8 path"),
        "--out",
        dir.path().to_str().expect("utf-8 path"),
    ]);
    assert_eq!(exit_code(&out), 2, "stdout: {}\nstderr: {}", stdout(&out), stderr(&out));
    assert!(stdout(&out).contains("FAIL"));
    assert!(stdout(&out).contains("failure:"), "failure reason printed: {}", stdout(&out));
    assert!(dir.path().join("trace.csv").exists(), "artifacts written despite failure");
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("metrics.json")).expect("metrics"))
            .expect("metrics.json parses");
    assert!(metrics["metrics"]["failure"].is_string(), "failure recorded in metrics");
}

#[test]
fn bench_writes_one_row_per_algorithm() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = run(&["bench", "--seeds", "1", "--out", dir.path().to_str().expect("utf-8 path")]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let table = fs::read_to_string(dir.path().join("bench.csv")).expect("bench.csv written");
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 3, "header plus one row per algorithm: {table}");
    assert_eq!(
        lines[0],
        "algorithm,median_iters_to_tolerance,median_wall_ms,median_final_cost"
    );
    assert!(lines[1].starts_with("ipso,"));
    assert!(lines[2].starts_with("pso,"));
    assert!(stdout(&out).contains("grid oracle"), "stdout: {}", stdout(&out));
}
