mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::golden_path;
use dae_index::report::load_report;
use serde_json::Value;

fn daeindex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_daeindex"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn json(args: &[&str]) -> Value {
    let out = daeindex(args);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn pendulum_analyze_reports_indices_and_bounds() {
    let p = golden_path("pendulum");
    let v = json(&["--json", "analyze", path(&p)]);
    assert_eq!(v["format_version"], 1);
    assert_eq!(v["command"], "analyze");
    assert_eq!(v["index"]["sigma"], 4);
    assert_eq!(
        v["index"]["mu"]["values"],
        serde_json::json!([0, 1, 2, 3, 4, 4])
    );
    assert_eq!(v["index"]["sigma_tilde"], 2);
    assert_eq!(v["index"]["sigma_hat"], 3);
    assert_eq!(v["bounds"]["ord"], 2);
    assert_eq!(v["bounds"]["greenspan"], 4);
    assert_eq!(v["bounds"]["ritt"], 4);
    assert_eq!(v["bounds"]["jacobi"], 2);
    assert_eq!(v["bounds"]["order_bounds_hold"], true);
    assert_eq!(v["basis"]["reduced"], true);
}

#[test]
fn chain_index_is_zero() {
    let p = golden_path("chain4");
    let v = json(&["--json", "index", path(&p)]);
    assert_eq!(v["index"]["sigma"], 0);
    assert_eq!(v["index"]["mu"]["values"], serde_json::json!([0, 0]));
}

#[test]
fn output_is_deterministic_for_a_fixed_seed() {
    let p = golden_path("pendulum");
    for args in [
        vec!["--seed", "7", "--json", "--audit", "analyze", path(&p)],
        vec!["--seed", "7", "analyze", path(&p)],
    ] {
        let a = daeindex(&args);
        let b = daeindex(&args);
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(a.stdout, b.stdout);
    }
}

#[test]
fn exact_and_default_modes_agree_on_indices() {
    let p = golden_path("pendulum");
    let a = json(&["--json", "analyze", path(&p)]);
    let b = json(&["--json", "--exact", "analyze", path(&p)]);
    assert_eq!(b["ranks"]["mode"], "exact");
    for key in ["index", "bounds"] {
        assert_eq!(a[key], b[key], "{key}");
    }
}

#[test]
fn reports_round_trip_through_the_loader() {
    for (name, verb) in [
        ("pendulum", "analyze"),
        ("chain4", "analyze"),
        ("jacobi4", "bounds"),
        ("ode_timevarying", "index"),
    ] {
        let p = golden_path(name);
        let out = daeindex(&["--json", "--audit", verb, path(&p)]);
        assert_eq!(out.status.code(), Some(0), "{name}");
        let text = String::from_utf8(out.stdout).expect("utf-8");
        let report = load_report(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        let again = serde_json::to_string_pretty(&report).expect("serializes") + "\n";
        assert_eq!(again, text, "{name}");
    }
}

#[test]
fn loader_rejects_other_format_versions() {
    let p = golden_path("toy_single");
    let out = daeindex(&["--json", "index", path(&p)]);
    let text = String::from_utf8(out.stdout)
        .expect("utf-8")
        .replace("\"format_version\": 1", "\"format_version\": 2");
    assert!(load_report(&text).is_err());
}

#[test]
fn human_output_contains_the_mu_table() {
    let p = golden_path("pendulum");
    let out = daeindex(&["analyze", path(&p)]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).expect("utf-8");
    assert!(text.contains("mu_k"), "{text}");
    assert!(text.contains("sigma = 4"), "{text}");
    assert!(text.lines().count() > 10);
}

#[test]
fn relation_verb_finds_the_chain_relation() {
    let p = golden_path("chain4");
    let v = json(&[
        "--json",
        "relation",
        path(&p),
        "--localize",
        "u4",
        "--target",
        "u1",
        "--basis",
        "u4'",
        "--y-jets",
        "y1",
    ]);
    assert_eq!(v["relation"]["relation"], "u1 + u4' - y1");
    assert_eq!(v["relation"]["degree"], 1);
}

#[test]
fn relation_verb_handles_time_varying_coefficients() {
    let p = golden_path("ode_timevarying");
    let v = json(&[
        "--json",
        "relation",
        path(&p),
        "--target",
        "x1'",
        "--basis",
        "x1,u1",
    ]);
    assert_eq!(v["relation"]["relation"], "t*x1 - x1' + u1");
    assert_eq!(v["relation"]["degree"], 1);
}

#[test]
fn malformed_input_exits_with_parse_error() {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/malformed.json");
    let out = daeindex(&["analyze", path(&p)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("implicit multiplication"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn missing_file_exits_with_input_error() {
    let out = daeindex(&["analyze", "/nonexistent/system.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/nonexistent/system.json"));
}

#[test]
fn bad_epsilon_is_rejected() {
    let p = golden_path("toy_single");
    for eps in ["0", "1.5", "2^x", "-0.1"] {
        let out = daeindex(&["--epsilon", eps, "index", path(&p)]);
        assert_eq!(out.status.code(), Some(2), "{eps}");
    }
    assert_eq!(
        daeindex(&["--epsilon", "2^(-20)", "index", path(&p)])
            .status
            .code(),
        Some(0)
    );
}

#[test]
fn dependent_outputs_fail_to_stabilize() {
    let dir = tempfile::tempdir().expect("temp dir");
    let file = dir.path().join("dependent.json");
    let text =
        r#"{"format_version": 1, "field": "Q", "x": [], "u": ["u1"], "f": [], "g": ["u1", "u1'"]}"#;
    std::fs::write(&file, text).expect("write system");
    let out = daeindex(&["index", path(&file)]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}
