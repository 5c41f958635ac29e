use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_coarse-kit")).args(args).env_remove("COARSEKIT_BUDGET").output().unwrap();
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn report(args: &[&str]) -> Value {
    let r = run(args);
    assert_eq!(r.code, 0, "{args:?}: {}", r.stderr);
    serde_json::from_str(&r.stdout).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn fixture(kind: &str, name: &str) -> String {
    let path = scratch(name);
    let out = path.to_str().unwrap().to_string();
    report(&["fixture", kind, "--out", &out]);
    out
}

fn schema() -> Value {
    serde_json::from_str(include_str!("../report.schema.json")).unwrap()
}

fn required(node: &Value) -> Vec<&str> {
    node["required"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect()
}

/// Structural check of a report against the published schema.
fn conforms(report: &Value) {
    let schema = schema();
    let obj = report.as_object().unwrap();
    let mut top: Vec<&str> = obj.keys().map(String::as_str).collect();
    top.sort();
    let mut expected = required(&schema);
    expected.sort();
    assert_eq!(top, expected);
    let commands: Vec<&str> = schema["properties"]["command"]["enum"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(commands.contains(&report["command"].as_str().unwrap()));
    let config_schema = &schema["properties"]["config"];
    let config = report["config"].as_object().unwrap();
    let mut keys: Vec<&str> = config.keys().map(String::as_str).collect();
    keys.sort();
    let mut expected = required(config_schema);
    expected.sort();
    assert_eq!(keys, expected);
    assert!(config["budget"].as_u64().unwrap() >= 1);
    assert!(config["tolerance"].as_f64().unwrap() > 0.0);
    assert!(config["inputs"].is_object());
    assert!(report["result"].is_object() || report["result"].is_array());
}

#[test]
fn classify_bs_reports_the_verdict() {
    let r = report(&["classify-bs", "--lambda", "3/2", "--primes", "2,3"]);
    conforms(&r);
    assert_eq!(r["result"]["verdict"], "fg_not_fp");
    assert_eq!(r["result"]["input"]["valuations"], serde_json::json!([-1, 1]));
    let r = report(&["classify-bs", "--lambda", "1/6", "--primes", "2,3"]);
    assert_eq!(r["result"]["verdict"], "finitely_presented");
}

#[test]
fn growth_defaults_to_csv_with_a_config_line() {
    let r = run(&["growth", "--family", "abelian:2", "--radius", "3"]);
    assert_eq!(r.code, 0);
    let mut lines = r.stdout.lines();
    assert!(lines.next().unwrap().starts_with("# coarse-kit growth budget=1000000 seed=0 tolerance=1e-9"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows, ["r,count", "0,1", "1,5", "2,13", "3,25"]);
    let json = report(&["--format", "json", "growth", "--family", "abelian:2", "--radius", "3"]);
    conforms(&json);
    assert_eq!(json["result"]["samples"][3], serde_json::json!([3, 25]));
}

#[test]
fn rotation_of_the_hexagon_is_three() {
    let r = report(&["rotation", "--circle", "1:6", "--loop", "polygon"]);
    conforms(&r);
    assert_eq!(r["result"]["rho"], 3);
    let r = report(&["rotation", "--circle", "1:6", "--loop", "constant"]);
    assert_eq!(r["result"]["rho"], 0);
}

#[test]
fn hexagon_loop_has_nonzero_class_and_backtracks_contract() {
    let hex = fixture("circle:1:6", "hex.json");
    let r = report(&["h1", "--space", &hex, "--c", "1", "--loop", "c0,c1,c2,c3,c4,c5,c0"]);
    conforms(&r);
    assert_eq!(r["result"]["is_zero"], false);
    let r = report(&["contract", "--space", &hex, "--c", "1", "--loop", "c0,c1,c0"]);
    assert_eq!(r["result"]["verdict"], "contracted");
    let r = report(&["sc-probe", "--space", &hex, "--base", "c0", "--c1", "1", "--c2", "1", "--samples", "8"]);
    assert_eq!(r["result"]["sc_fails"], true);
}

#[test]
fn fixture_without_out_prints_the_space() {
    let r = run(&["fixture", "line:0:3"]);
    assert_eq!(r.code, 0);
    let space: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(space["points"].as_array().unwrap().len(), 4);
}

#[test]
fn steinberg_transform_relators_hold() {
    let out = scratch("sl3.json");
    let r = report(&["defining-subset", "--steinberg", "3", "--out", out.to_str().unwrap()]);
    conforms(&r);
    assert_eq!(r["result"]["m"], 4);
    assert_eq!(r["result"]["max_relator_length"], 3);
    assert_eq!(r["result"]["relators_hold"]["holds"], true);
    let v = report(&["verify-presentation", "--presentation", out.to_str().unwrap()]);
    assert_eq!(v["result"]["relators_hold"]["holds"], true);
    assert_eq!(v["result"]["letters"], r["result"]["letters"]);
}

#[test]
fn ball_cache_is_stable_on_reload() {
    let cache = scratch("heisenberg.jsonl");
    let _ = std::fs::remove_file(&cache);
    let path = cache.to_str().unwrap();
    let first = report(&["ball", "--family", "heisenberg", "--radius", "4", "--cache", path]);
    let bytes = std::fs::read(&cache).unwrap();
    let second = report(&["ball", "--family", "heisenberg", "--radius", "4", "--cache", path]);
    assert_eq!(std::fs::read(&cache).unwrap(), bytes);
    assert_eq!(first["result"], second["result"]);
}

#[test]
fn semidirect_hom_file_round_trips() {
    let hom = scratch("hom.json");
    std::fs::write(&hom, r#"[{"direction": [1, 0], "scale": 2}, {"direction": ["-1/2", 0], "scale": 3}]"#).unwrap();
    let r = report(&["classify-semidirect", "--hom", hom.to_str().unwrap()]);
    conforms(&r);
    assert_eq!(r["result"]["verdict"], "cg_not_cp");
    let r = report(&["classify-semidirect", "--lambda", "1/6", "--primes", "2,3"]);
    assert_eq!(r["result"]["verdict"], "compactly_presented");
}

#[test]
fn exit_codes_separate_usage_and_budget_errors() {
    let r = run(&["ball", "--family", "nope:3", "--radius", "3"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.starts_with("error:"));
    let r = run(&["--budget", "100", "ball", "--family", "free:3", "--radius", "30"]);
    assert_eq!(r.code, 3);
    assert_eq!(run(&["--budget", "0", "ball", "--family", "free:2", "--radius", "1"]).code, 2);
    assert_eq!(run(&["classify-bs", "--lambda", "5", "--primes", "2,3"]).code, 2);
    assert_eq!(run(&["no-such-command"]).code, 2);
}

#[test]
fn budget_can_come_from_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_coarse-kit"))
        .args(["engulfs", "--lambda", "6", "--primes", "2,3"])
        .env("COARSEKIT_BUDGET", "77")
        .output()
        .unwrap();
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["config"]["budget"], 77);
    assert_eq!(r["result"]["engulfs"], true);
}
