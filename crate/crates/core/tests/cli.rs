use std::fs;

use flopcalc::cli::{fixture, run_command, Config, FIXTURES};
use serde_json::Value;

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["flopcalc"];
    argv.extend_from_slice(args);
    run_command(argv)
}

fn report(args: &[&str]) -> (i32, Value, String) {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let mut argv = args.to_vec();
    let out_s = out.to_str().unwrap().to_string();
    argv.extend_from_slice(&["--out", &out_s]);
    let code = run(&argv);
    let text = fs::read_to_string(&out).unwrap();
    (code, serde_json::from_str(&text).unwrap(), text)
}

#[test]
fn defect_on_sf1() {
    let (code, v, _) = report(&["defect", "--fixture", "SF1"]);
    assert_eq!(code, 0);
    assert_eq!(v["check"], "defect");
    assert_eq!(v["fixture"], "SF1");
    assert_eq!(v["pass"], true);
    assert_eq!(v["details"]["triples_total"], 216);
    assert!(v["details"]["triples_checked"].as_u64().unwrap() > 0);
}

#[test]
fn extremal_single_nu() {
    let (code, v, _) = report(&["extremal", "--fixture", "SP2", "--nu", "1"]);
    assert_eq!(code, 0);
    let eqs = v["details"]["functional_equations"].as_array().unwrap();
    assert_eq!(eqs.len(), 1);
    assert_eq!(eqs[0]["nu"], 1);
    assert_eq!(eqs[0]["pass"], true);
}

#[test]
fn all_on_sf1() {
    let (code, v, _) = report(&["all", "--fixture", "SF1"]);
    assert_eq!(code, 0);
    let checks: Vec<&str> = v.as_array().unwrap().iter().map(|r| r["check"].as_str().unwrap()).collect();
    assert_eq!(checks, ["defect", "extremal", "ifun", "pf-check", "bf", "qlh", "invariance"]);
}

#[test]
fn reports_are_byte_stable() {
    let args = ["pf-check", "--fixture", "SP1-pos", "--window", "1,2,2"];
    let (_, _, a) = report(&args);
    let (_, _, b) = report(&args);
    assert_eq!(a, b);
}

#[test]
fn window_flag_is_recorded() {
    let (code, v, _) = report(&["bf", "--fixture", "SP1-neg", "--window", "1,2,1"]);
    assert_eq!(code, 0);
    assert_eq!(v["window"], serde_json::json!([1, 2, 1]));
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sp1.json");
    fs::write(
        &path,
        r#"{"base": {"projspace": 1}, "r": 1, "F_degrees": [[1], [0]], "Fp_degrees": [[1], [0]], "window": [1, 2, 2]}"#,
    )
    .unwrap();
    let (code, v, _) = report(&["ifun", "--config", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(v["fixture"], "sp1");
    assert_eq!(v["window"], serde_json::json!([1, 2, 2]));
}

#[test]
fn malformed_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = [
        r#"{"base": "point", "r": 1, "F_degrees": [[], []], "Fp_degrees": [[]]}"#,
        r#"{"base": "point", "r": 1.0, "F_degrees": [[], []], "Fp_degrees": [[], []]}"#,
        r#"{"base": "point", "r": 1, "F_degrees": [[], []], "Fp_degrees": [[], []], "checks": ["nope"]}"#,
        r#"{"base": {"projspace": 1}, "r": 1, "F_degrees": [[1, 2], [0]], "Fp_degrees": [[1], [0]]}"#,
        "not json",
    ];
    for (k, text) in bad.iter().enumerate() {
        let path = dir.path().join(format!("bad{k}.json"));
        fs::write(&path, text).unwrap();
        assert_eq!(run(&["defect", "--config", path.to_str().unwrap()]), 2, "{text}");
    }
    assert_eq!(run(&["defect", "--fixture", "SF9"]), 2);
    assert_eq!(run(&["defect"]), 2);
    assert_eq!(run(&["defect", "--fixture", "SF1", "--window", "1,2"]), 2);
    assert_eq!(run(&["frobnicate"]), 2);
}

#[test]
fn every_fixture_builds() {
    for name in FIXTURES {
        let c: Config = fixture(name).unwrap();
        let m = c.model().unwrap();
        assert_eq!(m.r, c.r);
    }
}
