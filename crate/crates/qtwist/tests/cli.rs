use std::process::{Command, Output};

use serde_json::{json, Value};

fn qtwist(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qtwist"));
    cmd.args(args);
    // keep the caller's environment from leaking into the flags
    for (k, _) in std::env::vars() {
        if k.starts_with("QTWIST_") {
            cmd.env_remove(k);
        }
    }
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("bad JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn cobracket_of_e_is_half_h_wedge_e() {
    let out = qtwist(&["cobracket", "sl2", "e"], &[]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(
        v["tensor"],
        json!({
            "algebra": "sl2",
            "arity": 2,
            "terms": [
                {"coeff": "1/2", "legs": ["h", "e"]},
                {"coeff": "-1/2", "legs": ["e", "h"]}
            ]
        })
    );
}

#[test]
fn cobracket_of_h_vanishes() {
    let out = qtwist(&["cobracket", "sl2", "h"], &[]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_of(&out)["tensor"]["terms"], json!([]));
}

#[test]
fn mix_on_two_factors() {
    let v = json_of(&qtwist(&["mix", "sl2", "2"], &[]));
    let mut terms: Vec<(String, String, String)> = v["tensor"]["terms"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| {
            (
                t["legs"][0].as_str().unwrap().into(),
                t["legs"][1].as_str().unwrap().into(),
                t["coeff"].as_str().unwrap().into(),
            )
        })
        .collect();
    terms.sort();
    let mut want: Vec<(String, String, String)> =
        [("(h)_1", "(h)_2", "1/4"), ("(h)_2", "(h)_1", "-1/4"), ("(e)_1", "(f)_2", "1"), ("(f)_2", "(e)_1", "-1")]
            .iter()
            .map(|(a, b, c)| (a.to_string(), b.to_string(), c.to_string()))
            .collect();
    want.sort();
    assert_eq!(terms, want);
}

#[test]
fn mix_on_one_factor_is_zero() {
    let v = json_of(&qtwist(&["mix", "sl2", "1"], &[]));
    assert_eq!(v["tensor"]["terms"], json!([]));
}

#[test]
fn twi_one_is_the_unit() {
    let v = json_of(&qtwist(&["twi", "1"], &[]));
    let terms = v["tensor"]["terms"].as_array().unwrap();
    assert_eq!(terms.len(), 1);
    assert_eq!(terms[0]["coeff"], json!(["1", "0", "0"]));
    assert_eq!(terms[0]["legs"], json!([[0, 0, 0], [0, 0, 0]]));
}

#[test]
fn coiso_check_borel_and_lower() {
    let v = json_of(&qtwist(&["coiso-check", "H,E"], &[]));
    assert_eq!(v["r_membership"]["verdict"]["status"], "true");
    assert_eq!(v["strongly_coisotropic"]["verdict"]["status"], "true");
    let v = json_of(&qtwist(&["coiso-check", "F"], &[]));
    assert_eq!(v["r_membership"]["verdict"]["status"], "false");
}

#[test]
fn unknown_algebra_is_a_config_error() {
    let out = qtwist(&["--algebra", "so5", "run"], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn env_override_is_read() {
    let out = qtwist(&["run"], &[("QTWIST_ALGEBRA", "so5")]);
    assert_eq!(out.status.code(), Some(2));
    // flags still beat the environment
    let out = qtwist(&["--hbar-order", "2", "--suite", "quantum", "run"], &[("QTWIST_HBAR_ORDER", "9")]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn out_of_range_parameters_are_rejected() {
    for args in [&["--m", "0"][..], &["--hbar-order", "1"], &["--form-scale", "0"], &["--weight-bound", "9"]] {
        let mut a = args.to_vec();
        a.push("run");
        assert_eq!(qtwist(&a, &[]).status.code(), Some(2), "{a:?}");
    }
}

#[test]
fn usage_error_exits_two() {
    assert_eq!(qtwist(&["--no-such-flag"], &[]).status.code(), Some(2));
    assert_eq!(qtwist(&["bracket", "mixed", "phi:x"], &[]).status.code(), Some(2));
}

#[test]
fn quantum_suite_report_shape() {
    let out = qtwist(&["--suite", "quantum", "--hbar-order", "2"], &[]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["schema"], "qtwist-report/1");
    assert_eq!(v["config"]["hbar_order"], 2);
    assert_eq!(v["config"]["form_scale"], "1");
    let checks = v["checks"].as_array().unwrap();
    let ids: Vec<&str> = checks.iter().map(|c| c["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["C09", "C10", "C11", "C12"]);
    for c in checks {
        assert_eq!(c["status"], "pass");
        assert_eq!(c["suite"], "quantum");
        assert_eq!(c["residual"], 0);
        assert!(c.get("wall_ms").is_none());
    }
    assert_eq!(v["summary"], json!({"pass": 4, "fail": 0, "inconclusive": 0}));
}

#[test]
fn classical_runs_are_byte_identical() {
    let args = ["--suite", "classical,determinism", "--m", "3"];
    let a = qtwist(&args, &[]);
    let b = qtwist(&args, &[]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v = json_of(&a);
    let ids: Vec<&str> = v["checks"].as_array().unwrap().iter().map(|c| c["id"].as_str().unwrap()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
    assert!(ids.contains(&"C14"));
}

#[test]
fn timings_are_opt_in() {
    let v = json_of(&qtwist(&["--suite", "classical", "--timings"], &[]));
    for c in v["checks"].as_array().unwrap() {
        assert!(c["wall_ms"].is_u64());
    }
}

#[test]
fn out_flag_writes_the_report() {
    let path = std::env::temp_dir().join(format!("qtwist-cli-{}.json", std::process::id()));
    let p = path.to_str().unwrap();
    let out = qtwist(&["--suite", "classical", "--out", p], &[]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).ok();
    assert!(text.ends_with('\n'));
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["summary"]["pass"], 8);
}

#[test]
fn sl3_quantum_is_inconclusive_not_failed() {
    let out = qtwist(&["--algebra", "sl3", "--suite", "quantum"], &[]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    for c in v["checks"].as_array().unwrap() {
        assert_eq!(c["status"], "inconclusive");
        assert!(c["reason"].is_string());
    }
}

#[test]
fn bracket_and_qmultiply_compute() {
    let out = qtwist(&["bracket", "twisted", "phi:1:0", "phi:1:1"], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(json_of(&out).is_object());
    let out = qtwist(&["qmultiply", "phi:1:0", "phi:1:1"], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(json_of(&out).is_object());
}
