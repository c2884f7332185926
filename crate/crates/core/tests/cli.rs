use std::path::{Path, PathBuf};
use std::process::Command;

use cvf::cli::{emit_schema, manifest_schema, parse_manifest, report_schema, run, Overrides, Report, Status};
use jsonschema::JSONSchema;
use serde_json::Value;

fn manifest_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("manifests")
}

fn manifests() -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(manifest_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().map_or(false, |e| e == "json"))
        .collect();
    out.sort();
    out
}

fn cvf(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_cvf")).args(args).output().unwrap()
}

fn compile(schema: &Value) -> JSONSchema {
    JSONSchema::compile(schema).expect("schema compiles")
}

#[test]
fn schema_command_prints_both_schemas() {
    let out = cvf(&["schema"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["manifest"]["properties"]["chart"].is_object());
    assert!(v["report"]["properties"]["analyses"].is_object());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), emit_schema());
}

#[test]
fn catalog_lists_builtins() {
    let out = cvf(&["catalog"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in cvf::models::CHART_NAMES.iter().chain(cvf::models::FIELD_NAMES.iter()) {
        assert!(text.contains(name), "{name}");
    }
}

#[test]
fn shipped_manifests_validate() {
    let schema = compile(&manifest_schema());
    let files = manifests();
    assert!(files.len() >= 3);
    for path in files {
        let text = std::fs::read_to_string(&path).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert!(schema.is_valid(&v), "{}", path.display());
        parse_manifest(&text).unwrap();
    }
}

#[test]
fn schema_rejects_malformed_manifests() {
    let schema = compile(&manifest_schema());
    let bad = [
        r#"{"chart": {"builtin": "euclidean", "dim": 2}, "field": {"builtin": "euler"}, "analyses": []}"#,
        r#"{"chart": {"builtin": "euclidean", "dim": 2}, "field": {"builtin": "euler"}, "analyses": ["zeros"], "extra": 0}"#,
        r#"{"chart": {"builtin": "euclidean", "dim": 2, "metric": [["1"]]}, "field": {"builtin": "euler"}, "analyses": ["zeros"]}"#,
        r#"{"chart": {"builtin": "torus", "dim": 2}, "field": {"builtin": "euler"}, "analyses": ["zeros"]}"#,
        r#"{"chart": {"builtin": "euclidean", "dim": 2}, "field": {"builtin": "euler", "components": ["x1", "x2"]}, "analyses": ["zeros"]}"#,
        r#"{"chart": {"builtin": "euclidean", "dim": 2}, "field": {"builtin": "euler"}, "analyses": ["everything"]}"#,
    ];
    for text in bad {
        let v: Value = serde_json::from_str(text).unwrap();
        assert!(!schema.is_valid(&v), "{text}");
    }
}

#[test]
fn reports_validate_and_round_trip() {
    let schema = compile(&report_schema());
    for name in ["plane_rotation.json", "not_conformal.json", "inline_hyperbolic_rotation.json"] {
        let text = std::fs::read_to_string(manifest_dir().join(name)).unwrap();
        let report = run(&parse_manifest(&text).unwrap(), &Overrides::default()).unwrap();
        let json = report.to_json();
        let v: Value = serde_json::from_str(&json).unwrap();
        assert!(schema.is_valid(&v), "{name}");
        let back: Report = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
        assert_eq!(back.to_json(), json);
    }
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = manifest_dir();
    let pass = cvf(&["run", dir.join("plane_rotation.json").to_str().unwrap()]);
    assert_eq!(pass.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&pass.stdout).unwrap();
    assert_eq!(report["status"], "pass");

    let fail = cvf(&["run", dir.join("not_conformal.json").to_str().unwrap()]);
    assert_eq!(fail.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&fail.stdout).unwrap();
    assert_eq!(report["status"], "fail");
    assert!(report["analyses"][0]["result"]["max_residual"].as_f64().unwrap() > 1.0);

    let tmp = tempfile::tempdir().unwrap();
    let broken = tmp.path().join("broken.json");
    std::fs::write(&broken, "{ \"chart\": ").unwrap();
    assert_eq!(cvf(&["run", broken.to_str().unwrap()]).status.code(), Some(2));
    let unknown = tmp.path().join("unknown.json");
    std::fs::write(
        &unknown,
        r#"{"chart": {"builtin": "euclidean", "dim": 2}, "field": {"builtin": "vortex"}, "analyses": ["zeros"]}"#,
    )
    .unwrap();
    assert_eq!(cvf(&["run", unknown.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(cvf(&["run", tmp.path().join("missing.json").to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(cvf(&["run"]).status.code(), Some(2));
    assert_eq!(
        cvf(&["run", dir.join("plane_rotation.json").to_str().unwrap(), "--zero-tol", "-1"]).status.code(),
        Some(2)
    );
}

#[test]
fn out_flag_and_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("report.json");
    let manifest = manifest_dir().join("plane_rotation.json");
    let res = cvf(&[
        "run",
        manifest.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "11",
        "--zero-tol",
        "1e-10",
        "--class-tol",
        "1e-7",
        "--isolation-radius",
        "0.1",
        "--geo-steps",
        "50",
        "--fd-step",
        "0.002",
    ]);
    assert_eq!(res.status.code(), Some(0));
    assert!(res.stdout.is_empty());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let s = &report["settings"];
    assert_eq!(s["seed"], 11);
    assert_eq!(s["zero_tol"].as_f64(), Some(1e-10));
    assert_eq!(s["class_tol"].as_f64(), Some(1e-7));
    assert_eq!(s["isolation_radius"].as_f64(), Some(0.1));
    assert_eq!(s["geo_steps"], 50);
    assert_eq!(s["fd_step"].as_f64(), Some(0.002));
}

#[test]
fn reruns_are_byte_identical_and_seeds_matter() {
    let manifest = manifest_dir().join("inline_hyperbolic_rotation.json");
    let m = manifest.to_str().unwrap();
    let a = cvf(&["run", m]);
    let b = cvf(&["run", m]);
    assert_eq!(a.stdout, b.stdout);
    let c = cvf(&["run", m, "--seed", "2"]);
    assert_ne!(a.stdout, c.stdout);
    let report: Value = serde_json::from_slice(&c.stdout).unwrap();
    assert_eq!(report["status"], "pass");
}

#[test]
fn runtime_errors_name_the_analysis() {
    // log(x1) is undefined on half of the domain
    let text = r#"{"chart": {"builtin": "euclidean", "dim": 2},
                   "field": {"components": ["log(x1)", "0"]},
                   "analyses": ["check-conformal"]}"#;
    let report = run(&parse_manifest(text).unwrap(), &Overrides::default()).unwrap();
    assert_eq!(report.status, Status::Fail);
    assert_eq!(report.analyses[0].status, Status::Error);
    assert!(report.analyses[0].error.as_deref().unwrap().starts_with("check-conformal"));
    assert_eq!(report.exit_code(), 1);
}
