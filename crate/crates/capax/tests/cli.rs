use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn capax(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_capax"))
        .args(args)
        .current_dir(dir)
        .env("CAPAX_CACHE_DIR", dir.join("cache"))
        .output()
        .expect("spawn capax")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m2.json"), r#"{"entries": [[2, 1], [1, 2]]}"#).unwrap();
    fs::write(dir.path().join("id3.json"), r#"[[1, 0, 0], [0, 1, 0], [0, 0, 1]]"#).unwrap();
    fs::write(dir.path().join("newtonian3.json"), r#"{"kind": "newtonian", "dim": 3}"#).unwrap();
    fs::write(dir.path().join("sphere1.json"), r#"{"kind": "sphere", "center": [0, 0, 0], "r": 1}"#).unwrap();
    dir
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(out.status.code(), Some(code), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn matrix_capacity_is_two_thirds() {
    let dir = setup();
    let out = capax(dir.path(), &["capacity", "--matrix", "m2.json", "--formulation", "primal", "-o", "out"]);
    assert_code(&out, 0);
    let r = read_json(&dir.path().join("out/result.json"));
    assert!((r["capacity"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-14);
    assert_eq!(r["status"], "converged");
    assert_eq!(r["checks"]["passed"], true);
    let csv = fs::read_to_string(dir.path().join("out/weights.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn every_formulation_agrees_on_the_matrix_kernel() {
    let dir = setup();
    for f in ["primal", "dual", "obstacle", "minmass", "maxmass", "exact"] {
        let out = capax(dir.path(), &["capacity", "--matrix", "m2.json", "--formulation", f, "-o", f]);
        assert_code(&out, 0);
        let r = read_json(&dir.path().join(f).join("result.json"));
        assert!((r["capacity"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12, "{f}");
    }
}

#[test]
fn newtonian_sphere_capacity_is_close_to_one() {
    let dir = setup();
    let out = capax(
        dir.path(),
        &["capacity", "--kernel", "newtonian3.json", "--shape", "sphere1.json", "--formulation", "dual", "-o", "out/"],
    );
    assert_code(&out, 0);
    let r = read_json(&dir.path().join("out/result.json"));
    let c = r["capacity"].as_f64().unwrap();
    assert!((c - 1.0).abs() < 0.02, "capacity {c}");
}

#[test]
fn output_uses_seventeen_significant_digits() {
    let dir = setup();
    assert_code(&capax(dir.path(), &["capacity", "--matrix", "m2.json", "-o", "out"]), 0);
    let text = fs::read_to_string(dir.path().join("out/result.json")).unwrap();
    let line = text.lines().find(|l| l.trim_start().starts_with("\"capacity\"")).unwrap();
    let mantissa = line.split(':').nth(1).unwrap().trim().trim_end_matches(',').split(['e', 'E']).next().unwrap();
    assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17, "{line}");
}

#[test]
fn missing_file_exits_with_one() {
    let dir = setup();
    let out = capax(dir.path(), &["capacity", "--matrix", "nope.json", "-o", "out"]);
    assert_code(&out, 1);
    assert!(!out.stderr.is_empty());
}

#[test]
fn malformed_json_exits_with_one() {
    let dir = setup();
    fs::write(dir.path().join("bad.json"), "{ not json").unwrap();
    assert_code(&capax(dir.path(), &["capacity", "--kernel", "bad.json", "-o", "out"]), 1);
}

#[test]
fn equilibrium_suite_passes_on_the_matrix_kernel() {
    let dir = setup();
    let out = capax(dir.path(), &["verify", "--matrix", "m2.json", "--suite", "theorem11", "-o", "v"]);
    assert_code(&out, 0);
    let r = read_json(&dir.path().join("v/report.json"));
    assert_eq!(r["report"]["passed"], true);
    assert_eq!(r["report"]["failed"], 0);
}

#[test]
fn principles_suite_passes_on_the_identity() {
    let dir = setup();
    let out = capax(dir.path(), &["verify", "--matrix", "id3.json", "--suite", "principles", "-o", "v"]);
    assert_code(&out, 0);
    let r = read_json(&dir.path().join("v/report.json"));
    assert_eq!(r["certificate"]["frostman"]["holds"], true);
    assert_eq!(r["report"]["skipped"], 0);
}

#[test]
fn balayage_suite_passes_on_the_hand_case() {
    let dir = setup();
    let out = capax(
        dir.path(),
        &["verify", "--matrix", "m2.json", "--suite", "balayage", "--subset", "1", "--measure", "dirac:0", "-o", "v"],
    );
    assert_code(&out, 0);
    let r = read_json(&dir.path().join("v/report.json"));
    assert_eq!(r["report"]["passed"], true);
}

#[test]
fn balayage_command_writes_all_formulations() {
    let dir = setup();
    let out = capax(dir.path(), &["balayage", "--matrix", "m2.json", "--subset", "1", "--measure", "dirac:0", "-o", "b"]);
    assert_code(&out, 0);
    let r = read_json(&dir.path().join("b/balayage.json"));
    for f in ["projection", "constrained_min_energy", "potential_equation"] {
        let w = r["formulations"][f]["weights"].as_array().unwrap();
        assert_eq!(w[0].as_f64().unwrap(), 0.0, "{f}");
        assert!((w[1].as_f64().unwrap() - 0.5).abs() < 1e-15, "{f}");
        assert!(dir.path().join(format!("b/swept_{f}.csv")).exists());
    }
}

#[test]
fn converge_writes_monotone_stages() {
    let dir = setup();
    let out = capax(dir.path(), &["converge", "--matrix", "id3.json", "--stages", "3", "--order", "index", "-o", "c"]);
    assert_code(&out, 0);
    let csv = fs::read_to_string(dir.path().join("c/stages.csv")).unwrap();
    let caps: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(caps.len(), 3);
    assert!(caps.windows(2).all(|w| w[0] <= w[1]));
    assert!((caps[2] - 3.0).abs() < 1e-12);
}

#[test]
fn runs_are_deterministic() {
    let dir = setup();
    for o in ["a", "b"] {
        assert_code(&capax(dir.path(), &["verify", "--matrix", "m2.json", "--suite", "balayage", "--subset", "1", "-o", o]), 0);
    }
    let a = fs::read_to_string(dir.path().join("a/report.json")).unwrap();
    let b = fs::read_to_string(dir.path().join("b/report.json")).unwrap();
    assert_eq!(a, b);
}
