use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_conformal-workbench"))
}

fn run(args: &[&str]) -> (Output, Value) {
    let out = bin().args(args).output().expect("spawn");
    let v = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out, v)
}

fn strip_timing(mut v: Value) -> Value {
    if let Some(m) = v.as_object_mut() {
        m.remove("timing_ms");
    }
    v
}

#[test]
fn bracket_one_two() {
    let (out, v) = run(&["bracket", "--alpha", "1", "--beta", "2"]);
    assert!(out.status.success());
    assert_eq!(v["index"], 3);
    assert_eq!(v["poly"], "del + 3*lam");
    assert_eq!(v["command"], "bracket");
    assert!(v["failures"].as_array().unwrap().is_empty());
}

#[test]
fn negative_generators_parse() {
    let (out, v) = run(&["bracket", "--alpha", "-2", "--beta", "2"]);
    assert!(out.status.success());
    assert_eq!(v["index"], 0);
    assert_eq!(v["poly"], "-2*del");
}

#[test]
fn axioms_window_three() {
    let (out, v) = run(&["axioms", "--window", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(v["jacobi_checked"], 343);
    assert_eq!(v["skew_checked"], 49);
}

#[test]
fn module_check_vd() {
    let (out, v) = run(&[
        "module-check",
        "--family",
        "vd",
        "--D",
        "0",
        "--window",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(v["checked"], 125);
}

#[test]
fn module_check_random_params_is_deterministic() {
    let args = [
        "module-check",
        "--family",
        "vcd",
        "--random-params",
        "3",
        "--seed",
        "7",
        "--window",
        "2",
    ];
    let (o1, v1) = run(&args);
    let (_, v2) = run(&args);
    assert_eq!(o1.status.code(), Some(0));
    assert_eq!(v1["instances"].as_array().unwrap().len(), 3);
    assert_eq!(strip_timing(v1), strip_timing(v2));
}

#[test]
fn classify_is_deterministic_and_recovers_parameters() {
    let args = [
        "classify", "--family", "vcd", "--C", "1/2", "--D", "-3/4", "--gauge", "3^g", "--shift",
        "2",
    ];
    let (o1, v1) = run(&args);
    let (_, v2) = run(&args);
    assert_eq!(o1.status.code(), Some(0));
    assert_eq!(v1["family"]["family"], "vcd");
    assert_eq!(v1["family"]["C"], "1/2");
    assert_eq!(v1["D"], "-3/4");
    assert_eq!(v1["reconstructs"], true);
    assert_eq!(strip_timing(v1), strip_timing(v2));
}

#[test]
fn failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    // A vd:0 table with one entry bumped by a constant.
    let (_, _) = run(&[
        "table",
        "--family",
        "vd",
        "--D",
        "0",
        "--window",
        "3",
        "--out",
        path.to_str().unwrap(),
    ]);
    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    for e in doc["entries"].as_array_mut().unwrap() {
        if e["alpha"] == 1 && e["gamma"] == 0 {
            e["poly"] = Value::String(format!("{} + 1", e["poly"].as_str().unwrap()));
        }
    }
    std::fs::write(&path, doc.to_string()).unwrap();
    let (out, v) = run(&[
        "module-check",
        "--input",
        path.to_str().unwrap(),
        "--window",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!v["failures"].as_array().unwrap().is_empty());
    let (out, v) = run(&[
        "classify",
        "--input",
        path.to_str().unwrap(),
        "--window",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(v["module"], false);
}

#[test]
fn parse_errors_exit_two() {
    let (out, _) = run(&["module-check", "--family", "vcd", "--C", "x/2"]);
    assert_eq!(out.status.code(), Some(2));
    let (out, _) = run(&["module-check", "--input", "/nonexistent/table.json"]);
    assert_eq!(out.status.code(), Some(2));
    let (out, _) = run(&["module-iso", "--left", "vq:1", "--right", "vd:0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn duplicate_key_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dup.json");
    std::fs::write(
        &path,
        r#"[{"alpha":1,"gamma":2,"poly":"lam"},{"alpha":1,"gamma":2,"poly":"del"}]"#,
    )
    .unwrap();
    let (out, v) = run(&["module-check", "--input", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("(1, 2)"), "{stderr}");
    assert_eq!(v["error"]["kind"], "input");
}

#[test]
fn table_round_trip_through_module_iso() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    let p = path.to_str().unwrap();
    let out = bin()
        .args([
            "table", "--family", "vcd", "--C", "1/3", "--D", "2", "--window", "8", "--out", p,
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let (out, v) = run(&[
        "module-iso",
        "--left",
        p,
        "--right",
        "vcd:1/3:2",
        "--window",
        "4",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(v["isomorphic"], true);
    assert_eq!(v["witness"]["shift"], 0);
    let (out, v) = run(&["classify", "--input", p]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(v["family"]["family"], "vcd");
}

#[test]
fn trivial_from_empty_table() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.json");
    std::fs::write(&path, "[]").unwrap();
    let (out, v) = run(&[
        "classify",
        "--input",
        path.to_str().unwrap(),
        "--default-zero",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(v["family"]["family"], "trivial");
}

#[test]
fn text_format_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.txt");
    let out = bin()
        .args([
            "axioms",
            "--window",
            "1",
            "--format",
            "text",
            "--out",
            path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("jacobi_checked: 27"));
}

#[test]
fn bridge_single_pair_dump() {
    let (out, v) = run(&[
        "bridge", "--alpha", "1", "--beta", "-1", "--depth", "8", "--dump",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(v["commutator"].as_array().is_some());
    let (out, _) = run(&["bridge", "--guard", "2"]);
    assert_eq!(out.status.code(), Some(2));
}
