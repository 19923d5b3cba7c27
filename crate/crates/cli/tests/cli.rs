use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn islm(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_islm"))
        .args(args)
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .output()
        .expect("binary runs")
}

fn result(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("result.json")).unwrap()).unwrap()
}

#[test]
fn isocline_of_builtin_reference() {
    let tmp = tempfile::tempdir().unwrap();
    let out = islm(&["isocline"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = result(tmp.path());
    assert_eq!(doc["schema_version"], "1");
    assert_eq!(doc["isocline"]["branches"].as_array().unwrap().len(), 3);
    assert_eq!(doc["isocline"]["folds"].as_array().unwrap().len(), 2);
    assert!(tmp.path().join("provenance.json").exists());
}

#[test]
fn zero_horizon_writes_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    let model = configs().join("reference.toml");
    fs::write(
        &cfg,
        format!(
            "model_path = {:?}\n[simulate]\nmode = \"full\"\ny0 = 3.0\nt_end = 0.0\n",
            model.display().to_string()
        ),
    )
    .unwrap();
    let dir = tmp.path().join("out");
    let out = islm(&["simulate", "--config", cfg.to_str().unwrap()], &dir);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert!(csv.starts_with("t,Y,R"));
}

#[test]
fn fiscal_ramp_portrait_marks_one_jump() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("fiscal_ramp.toml");
    let out = islm(
        &["portrait", "--config", cfg.to_str().unwrap(), "--format", "svg,json"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let svg = fs::read_to_string(tmp.path().join("portrait.svg")).unwrap();
    assert_eq!(svg.matches("class=\"jump\"").count(), 1);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("fiscal_ramp.toml");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = islm(
            &["scenario", "--config", cfg.to_str().unwrap(), "--format", "csv,json,svg"],
            dir,
        );
        assert_eq!(out.status.code(), Some(0));
    }
    for f in ["trajectory.csv", "result.json", "portrait.svg"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn negative_epsilon_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = islm(&["validate", "--epsilon", "-1"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[simulate]\nhorizon = 5\n").unwrap();
    let out = islm(&["simulate", "--config", cfg.to_str().unwrap()], &tmp.path().join("o"));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn validate_passes_on_reference() {
    let tmp = tempfile::tempdir().unwrap();
    let out = islm(&["validate"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(result(tmp.path())["validation"]["passed"], true);
}
