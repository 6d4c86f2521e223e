//! End-to-end tests of the CLI contract: exit codes, deterministic golden
//! tables, report structure, and the fuzz negative controls.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_taucover"))
}

fn spec_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs")
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(bin()).args(args).output().expect("spawn taucover");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).to_string(),
        String::from_utf8_lossy(&out.stderr).to_string(),
    )
}

#[test]
fn usage_error_is_64() {
    let (code, _, _) = run(&[]);
    assert_eq!(code, 64);
    let (code, _, _) = run(&["frobnicate"]);
    assert_eq!(code, 64);
}

#[test]
fn missing_spec_is_66() {
    let (code, _, err) = run(&["verify", "--spec", "/nonexistent/spec.json"]);
    assert_eq!(code, 66, "stderr: {err}");
}

#[test]
fn non_wdvv_potential_is_2() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.json");
    // F = v^4: eta = 4v is not constant
    std::fs::write(&spec, r#"{ "potential": { "n": 1, "F": [[[4], "1"]] } }"#).unwrap();
    let (code, _, err) = run(&["verify", "--spec", spec.to_str().unwrap()]);
    assert_eq!(code, 2, "stderr: {err}");
}

#[test]
fn build_is_deterministic_and_matches_golden_values() {
    let dir1 = tempfile::tempdir().unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    let spec = spec_dir().join("kdv.json");
    for d in [&dir1, &dir2] {
        let (code, out, err) = run(&[
            "build",
            "--spec",
            spec.to_str().unwrap(),
            "--pmax",
            "6",
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "stdout: {out} stderr: {err}");
    }
    for name in ["theta.json", "h.json", "omega.json"] {
        let a = std::fs::read(dir1.path().join(name)).unwrap();
        let b = std::fs::read(dir2.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }
    // spot-check golden content: theta_{1,3} = v^4/24, omega_{1,1;1,1} = v^3/3
    let theta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir1.path().join("theta.json")).unwrap())
            .unwrap();
    assert_eq!(theta["theta"][0][3], serde_json::json!([[[4], "1/24"]]));
    let omega: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir1.path().join("omega.json")).unwrap())
            .unwrap();
    assert_eq!(omega["omega"][0][1][0][1], serde_json::json!([[[3], "1/3"]]));
}

#[test]
fn verify_passes_on_the_shipped_specs() {
    for name in ["kdv.json", "a2.json"] {
        let dir = tempfile::tempdir().unwrap();
        let spec = spec_dir().join(name);
        let (code, out, err) = run(&[
            "verify",
            "--spec",
            spec.to_str().unwrap(),
            "--pmax",
            "3",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{name} stdout: {out} stderr: {err}");
        let report: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("verify_report.json")).unwrap(),
        )
        .unwrap();
        assert!(report["records"].as_array().unwrap().len() > 5);
    }
}

#[test]
fn verify_report_hash_is_deterministic() {
    let spec = spec_dir().join("a2.json");
    let mut hashes = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let (code, _, _) = run(&[
            "verify",
            "--spec",
            spec.to_str().unwrap(),
            "--pmax",
            "2",
            "--seed",
            "7",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let report =
            std::fs::read_to_string(dir.path().join("verify_report.json")).unwrap();
        hashes.push(report);
    }
    assert_eq!(hashes[0], hashes[1], "identical spec + seed must give identical reports");
}

#[test]
fn fuzz_produces_named_failures() {
    let spec = spec_dir().join("kdv.json");
    for (target, expect) in [
        ("h", "tau_symmetry"),
        ("omega", "galilean_omega_shift"),
        ("deformation", "deformation_tau_symmetry"),
    ] {
        let dir = tempfile::tempdir().unwrap();
        let (code, _, err) = run(&[
            "verify",
            "--spec",
            spec.to_str().unwrap(),
            "--pmax",
            "3",
            "--fuzz",
            target,
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(code, 1, "fuzz {target} must fail; stderr: {err}");
        let report: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("verify_report.json")).unwrap(),
        )
        .unwrap();
        let failed: Vec<&str> = report["records"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|r| r["status"] == "fail")
            .filter_map(|r| r["name"].as_str())
            .collect();
        assert!(
            failed.contains(&expect),
            "fuzz {target}: expected failing check {expect}, got {failed:?}"
        );
    }
}

#[test]
fn solve_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let spec = spec_dir().join("kdv.json");
    let (code, out, err) = run(&[
        "solve",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "stdout: {out} stderr: {err}");
    let csv = std::fs::read_to_string(dir.path().join("tau_grid_0.csv")).unwrap();
    assert!(csv.starts_with("x,t,v,f,f_1_0,f_1_p,route_residual"));
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("solve_manifest.json")).unwrap(),
    )
    .unwrap();
    let runs = manifest["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 3);
    // the third run hits the gradient catastrophe and is truncated
    assert!(runs[2]["breaking"].as_f64().is_some());
}

#[test]
fn deform_verify_passes_on_kdv_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let spec = spec_dir().join("kdv.json");
    let (code, out, err) = run(&[
        "deform-verify",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "stdout: {out} stderr: {err}");
}
