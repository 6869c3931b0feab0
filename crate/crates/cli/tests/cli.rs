use std::fs;
use std::process::{Command, Output};

fn pecs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pecs")).arg("--quiet").args(args).output().unwrap()
}

fn scratch(name: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("pecs-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn error_kind(out: &Output) -> String {
    let v: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    v["error"]["kind"].as_str().unwrap().to_string()
}

#[test]
fn golomb_code_summary() {
    let d = scratch("codes");
    let out = pecs(&["--out", d.to_str().unwrap(), "codes", "gen", "--kind", "golomb", "--m", "64"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["isl_db"].as_f64().unwrap() - 22.05).abs() < 0.01, "{v}");
    let summary = fs::read_to_string(d.join("summary.json")).unwrap();
    assert!(summary.contains("\"provenance\""));
    assert!(fs::read_to_string(d.join("sequence.json")).is_ok());
}

#[test]
fn bad_parameters_exit_with_config_error() {
    let d = scratch("bad");
    let out = pecs(&["--out", d.to_str().unwrap(), "design", "--n", "1", "--m", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "config");
    let cfg = d.join("c.json");
    fs::write(&cfg, r#"{"design": {"n": 8, "bogus": 1}}"#).unwrap();
    let out = pecs(&["--out", d.to_str().unwrap(), "design", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_is_an_io_error() {
    let d = scratch("io");
    let out = pecs(&["--out", d.to_str().unwrap(), "analyze-af", "--input", d.join("nope.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_kind(&out), "io");
}
