//! End-to-end tests of the `ksym` binary: the exit-code contract over the
//! fixture matrix, report determinism, and the report schema.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn run_ksym(args: &[&str], out: &Path) -> Output {
    let mut all_args: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    all_args.push("--out".into());
    all_args.push(out.display().to_string());
    Command::new(env!("CARGO_BIN_EXE_ksym"))
        .args(&all_args)
        .output()
        .expect("binary runs")
}

#[test]
fn exit_codes_over_the_fixture_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");

    // Valid specs: every executed check passes.
    for (name, subcommand) in [
        ("flat22.json", "all"),
        ("curved.json", "all"),
        ("k2_affine.json", "all"),
        ("flat22.json", "validate"),
        ("curved.json", "curvature"),
        ("k2_affine.json", "connection"),
    ] {
        let output = run_ksym(
            &[
                subcommand,
                fixture(name).to_str().unwrap(),
                "--samples",
                "40",
                "--grid",
                "8",
            ],
            &out,
        );
        assert_eq!(
            output.status.code(),
            Some(0),
            "{subcommand} {name}: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    }

    // Spec errors exit 2 before any check runs.
    for name in ["broken_missing_k.json", "broken_bad_index.json"] {
        let output = run_ksym(&["validate", fixture(name).to_str().unwrap()], &out);
        assert_eq!(output.status.code(), Some(2), "{name}");
        assert!(!output.stderr.is_empty());
    }

    // A falsified hypothesis is a failed check, exit 1.
    let output = run_ksym(
        &[
            "validate",
            fixture("broken_c5.json").to_str().unwrap(),
            "--samples",
            "20",
        ],
        &out,
    );
    assert_eq!(output.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let c5 = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["id"] == "C5")
        .unwrap();
    assert_eq!(c5["status"], "fail");
    assert!(c5["witness"]["detail"]
        .as_str()
        .unwrap()
        .contains("t[1][1][1]"));
}

#[test]
fn unknown_subcommand_exits_2_with_usage() {
    let output = Command::new(env!("CARGO_BIN_EXE_ksym"))
        .arg("frobnicate")
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("Usage"), "{stderr}");
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let output = run_ksym(
            &[
                "all",
                fixture("curved.json").to_str().unwrap(),
                "--samples",
                "30",
                "--seed",
                "7",
                "--grid",
                "6",
            ],
            out,
        );
        assert_eq!(output.status.code(), Some(0));
    }
    assert_eq!(
        std::fs::read(&a).unwrap(),
        std::fs::read(&b).unwrap(),
        "reports must be byte-identical for fixed inputs and seed"
    );
}

#[test]
fn report_schema_fields() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let output = run_ksym(
        &[
            "validate",
            fixture("flat22.json").to_str().unwrap(),
            "--samples",
            "25",
        ],
        &out,
    );
    assert_eq!(output.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["spec_digest"].as_str().unwrap().len(), 64);
    assert!(report["tool_version"].is_string());
    assert_eq!(report["seed"], 0);
    let checks = report["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 7);
    for (i, check) in checks.iter().enumerate() {
        assert_eq!(check["id"], format!("C{}", i + 1));
        // Residuals are decimal strings with 17 significant digits.
        let text = check["max_residual"].as_str().unwrap();
        assert!(text.contains('e'), "{text}");
    }
}

#[test]
fn seed_changes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for (out, seed) in [(&a, "0"), (&b, "1")] {
        let output = run_ksym(
            &[
                "validate",
                fixture("curved.json").to_str().unwrap(),
                "--samples",
                "25",
                "--seed",
                seed,
            ],
            out,
        );
        assert_eq!(output.status.code(), Some(0));
    }
    let ja: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&a).unwrap()).unwrap();
    let jb: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&b).unwrap()).unwrap();
    assert_eq!(ja["seed"], 0);
    assert_eq!(jb["seed"], 1);
}

#[test]
fn thread_cap_env_is_accepted_and_does_not_change_reports() {
    let dir = tempfile::tempdir().unwrap();
    let single = dir.path().join("single.json");
    let multi = dir.path().join("multi.json");
    for (out, threads) in [(&single, "1"), (&multi, "4")] {
        let output = Command::new(env!("CARGO_BIN_EXE_ksym"))
            .env("KSYM_THREADS", threads)
            .args([
                "validate",
                fixture("k2_affine.json").to_str().unwrap(),
                "--samples",
                "50",
                "--out",
                out.to_str().unwrap(),
            ])
            .output()
            .expect("binary runs");
        assert_eq!(output.status.code(), Some(0));
    }
    // Report assembly is deterministic regardless of worker scheduling.
    assert_eq!(
        std::fs::read(&single).unwrap(),
        std::fs::read(&multi).unwrap()
    );
}

#[test]
fn normal_form_standalone_fails_on_curved_specs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let output = run_ksym(
        &[
            "normal-form",
            fixture("curved.json").to_str().unwrap(),
            "--samples",
            "25",
            "--grid",
            "6",
        ],
        &out,
    );
    assert_eq!(output.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let nf1 = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["id"] == "NF1")
        .unwrap();
    assert_eq!(nf1["status"], "fail");
}

#[test]
fn normal_form_succeeds_on_flat_specs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let output = run_ksym(
        &[
            "normal-form",
            fixture("flat22.json").to_str().unwrap(),
            "--samples",
            "20",
            "--grid",
            "5",
        ],
        &out,
    );
    assert_eq!(
        output.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let pairs = report["artifacts"]["normal_form_pairs"].as_array().unwrap();
    assert_eq!(pairs.len(), 10);
}
