//! End-to-end runs of the `pgfm` binary against JSON fixtures.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn pgfm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pgfm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_model_a(dir: &Path) -> PathBuf {
    let model = pgfm_core::zoo::model_a();
    let path = dir.join("model_a.json");
    std::fs::write(&path, serde_json::to_string_pretty(&model).unwrap()).unwrap();
    path
}

#[test]
fn validate_model_file_prints_residual_and_k() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model_a(dir.path());
    let out = pgfm(&["validate", model.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let payload: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(payload["validation"]["normalization_residual"].as_f64().unwrap() <= 1e-10);
    assert!((payload["validation"]["k_bound"]["value"].as_f64().unwrap() - 0.5).abs() < 1e-9);
}

#[test]
fn derive_at_zero_recovers_the_density() {
    let out = pgfm(&[
        "derive",
        "--model",
        "zoo:model_a",
        "--sites",
        "0.3",
        "--at",
        "zero",
        "--method",
        "pgfm",
    ]);
    assert!(out.status.success());
    let payload: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((payload["value"]["re"].as_f64().unwrap() - 0.5).abs() < 1e-10);
}

#[test]
fn compare_emits_a_small_residual_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("matrix.csv");
    let out = pgfm(&[
        "compare",
        "--model",
        "zoo:model_a",
        "--sites",
        "0.3,0.7",
        "--at",
        "reference",
        "--methods",
        "oracle,pgfm,nested_fd",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let payload: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(payload["max_off_diagonal"].as_f64().unwrap() <= 1e-6);
    let csv_text = std::fs::read_to_string(&csv).unwrap();
    assert!(csv_text.starts_with("method,"));
    assert_eq!(csv_text.lines().count(), 4);
}

#[test]
fn eval_verbs_round_trip_fixture_files() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model_a(dir.path());

    let field = dir.path().join("h.json");
    std::fs::write(
        &field,
        serde_json::to_string(&pgfm_core::field::ScalarField::constant(0.5)).unwrap(),
    )
    .unwrap();
    let out = pgfm(&[
        "eval-pgfl",
        "--model",
        model.to_str().unwrap(),
        "--field",
        field.to_str().unwrap(),
        "--enforce-gamma",
    ]);
    assert!(out.status.success());
    let payload: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((payload["value"]["re"].as_f64().unwrap() - 0.5625).abs() < 1e-10);

    let measure = dir.path().join("eta.json");
    std::fs::write(
        &measure,
        r#"{ "atoms": [ { "x": [0.3], "re": 1.0, "im": 0.0 } ] }"#,
    )
    .unwrap();
    let out = pgfm(&[
        "eval-pgfm",
        "--model",
        model.to_str().unwrap(),
        "--measure",
        measure.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let payload: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((payload["value"]["re"].as_f64().unwrap() - 1.0).abs() < 1e-10);

    let region = dir.path().join("s.json");
    std::fs::write(&region, r#"{ "boxes": [ { "lower": [0.0], "upper": [0.5] } ] }"#).unwrap();
    let out = pgfm(&[
        "eval-bmf",
        "--model",
        model.to_str().unwrap(),
        "--region",
        region.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let payload: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((payload["value"]["re"].as_f64().unwrap() - 0.5625).abs() < 1e-10);
}

#[test]
fn derive_with_measure_file_and_csv_table() {
    let dir = tempfile::tempdir().unwrap();
    let measure = dir.path().join("eta.json");
    std::fs::write(
        &measure,
        r#"{ "atoms": [ { "x": [0.6], "re": 0.5, "im": 0.5 } ] }"#,
    )
    .unwrap();
    let csv = dir.path().join("table.csv");
    let out = pgfm(&[
        "derive",
        "--model",
        "zoo:model_a",
        "--sites",
        "0.3",
        "--at",
        measure.to_str().unwrap(),
        "--method",
        "nested_fd",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let table = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(table.lines().next().unwrap(), "parameter,re,im");
    assert_eq!(table.lines().count(), 4);
}

#[test]
fn gamma_violation_is_a_clean_error() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model_a(dir.path());
    let field = dir.path().join("big.json");
    std::fs::write(
        &field,
        serde_json::to_string(&pgfm_core::field::ScalarField::constant(1.5)).unwrap(),
    )
    .unwrap();
    let out = pgfm(&[
        "eval-pgfl",
        "--model",
        model.to_str().unwrap(),
        "--field",
        field.to_str().unwrap(),
        "--enforce-gamma",
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unit ball"), "stderr: {err}");
}

#[test]
fn malformed_json_names_the_offending_path() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let out = pgfm(&["validate", bad.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json"), "stderr: {err}");
}

#[test]
fn unknown_verb_and_unknown_model_fail() {
    let out = pgfm(&["frobnicate"]);
    assert!(!out.status.success());
    let out = pgfm(&["validate", "zoo:missing"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing"));
}

#[test]
fn demo_failures_emit_witnesses() {
    let out = pgfm(&["demo-failures"]);
    assert!(out.status.success());
    let payload: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((payload["bmf_nonadditivity"]["gap"].as_f64().unwrap() + 0.125).abs() < 1e-9);
    assert!(payload["unit_ball_exit"]["sup"].as_f64().unwrap() > 1.0);
    let witness = payload["unit_ball_exit"]["witness"][0].as_f64().unwrap();
    assert!((witness - 0.5).abs() < 1e-6);
}

#[test]
fn identical_invocations_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a.json");
    let out_b = dir.path().join("b.json");
    for out in [&out_a, &out_b] {
        let run = pgfm(&[
            "derive",
            "--model",
            "zoo:bernoulli_gauss",
            "--sites",
            "0.5",
            "--at",
            "zero",
            "--method",
            "limit_sequence",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(run.status.success());
    }
    assert_eq!(
        std::fs::read(&out_a).unwrap(),
        std::fs::read(&out_b).unwrap()
    );

    let demo_a = stdout(&pgfm(&["demo-failures"]));
    let demo_b = stdout(&pgfm(&["demo-failures"]));
    assert_eq!(demo_a, demo_b);
}

#[test]
fn suite_report_files_are_deterministic_and_exit_codes_follow_checks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    // empty overrides, fixed seed, serial for a cheap smoke run
    std::fs::write(
        &cfg,
        r#"{ "seed": 7, "tolerance_overrides": { }, "parallel": true }"#,
    )
    .unwrap();
    let report_a = dir.path().join("r1.json");
    let report_b = dir.path().join("r2.json");
    let junit = dir.path().join("r.xml");
    for report in [&report_a, &report_b] {
        let out = pgfm(&[
            "suite",
            "--config",
            cfg.to_str().unwrap(),
            "--report",
            report.to_str().unwrap(),
            "--junit",
            junit.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stdout(&out));
    }
    assert_eq!(
        std::fs::read(&report_a).unwrap(),
        std::fs::read(&report_b).unwrap()
    );
    let xml = std::fs::read_to_string(&junit).unwrap();
    assert!(xml.contains("<testsuite name=\"pgfm-suite\""));

    // impossible tolerance: the suite exits nonzero
    std::fs::write(
        &cfg,
        r#"{ "seed": 7, "tolerance_overrides": { "ac01-normalization": 0.0 } }"#,
    )
    .unwrap();
    let out = pgfm(&["suite", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stdout(&out).contains("FAIL ac01-normalization"));
}

#[test]
fn frechet_verb_reports_the_closed_form_residual() {
    let dir = tempfile::tempdir().unwrap();
    let direction = dir.path().join("nu.json");
    std::fs::write(
        &direction,
        r#"{ "atoms": [ { "x": [0.4], "re": 0.5, "im": 0.0 } ] }"#,
    )
    .unwrap();
    let out = pgfm(&[
        "frechet",
        "--model",
        "zoo:model_a",
        "--at",
        "zero",
        "--direction",
        direction.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let payload: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((payload["residual"].as_f64().unwrap() - 0.125).abs() < 1e-10);
}
