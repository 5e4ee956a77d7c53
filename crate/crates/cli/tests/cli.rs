use std::path::PathBuf;
use std::process::Command;

use nlmot::solver::evaluate_j;
use nlmot::{Coupling, GainSpec, PieceMeasure};
use serde_json::Value;

fn instance(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../instances")
        .join(format!("{name}.json"))
}

fn run(args: &[&str], name: &str) -> (i32, Value, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_nlmot"))
        .args(args)
        .arg("--instance")
        .arg(instance(name))
        .output()
        .expect("binary runs");
    let stdout = String::from_utf8(out.stdout).unwrap();
    let json = if stdout.trim().is_empty() {
        Value::Null
    } else {
        serde_json::from_str(&stdout).unwrap()
    };
    (out.status.code().unwrap(), json, String::from_utf8(out.stderr).unwrap())
}

fn gain_of(name: &str) -> GainSpec {
    let text = std::fs::read_to_string(instance(name)).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    serde_json::from_value(v["gain"].clone()).unwrap()
}

fn mu2_of(name: &str) -> PieceMeasure {
    let text = std::fs::read_to_string(instance(name)).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    serde_json::from_value(v["mu2"].clone()).unwrap()
}

#[test]
fn check_reports_differing_means() {
    let (code, json, err) = run(&["check"], "not_convex_order");
    assert_eq!(code, 2);
    assert_eq!(json["convex_order"], false);
    assert!(json["reason"].as_str().unwrap().contains("means differ"));
    assert!(err.contains("means differ"));
}

#[test]
fn check_accepts_a_valid_instance() {
    let (code, json, _) = run(&["check"], "three_atoms");
    assert_eq!(code, 0);
    assert_eq!(json["convex_order"], true);
}

#[test]
fn enumerate_lists_six_couplings() {
    let (code, json, _) = run(&["enumerate"], "three_atoms");
    assert_eq!(code, 0);
    assert_eq!(json["count"], 6);
    assert_eq!(json["couplings"].as_array().unwrap().len(), 6);
}

#[test]
fn solve_on_the_flat_instance_attains_the_bound() {
    let (code, json, _) = run(&["solve", "--sense", "max"], "flat_two_by_four");
    assert_eq!(code, 0);
    assert_eq!(json["flat"], true);
    assert!(json["gap"].as_f64().unwrap() <= 1e-8);
    let value = json["value"].as_f64().unwrap();
    assert!((value - json["upper_bound"].as_f64().unwrap()).abs() <= 1e-12);
}

#[test]
fn solved_coupling_round_trips() {
    for name in ["flat_two_by_four", "three_atoms", "small_discrete"] {
        let (code, json, _) = run(&["solve"], name);
        assert_eq!(code, 0);
        let c: Coupling = serde_json::from_value(json["coupling"].clone()).unwrap();
        c.check_second_marginal(&mu2_of(name)).unwrap();
        let j = evaluate_j(&c, &gain_of(name)).unwrap();
        assert!((j - json["value"].as_f64().unwrap()).abs() <= 1e-12, "{name}");
    }
}

#[test]
fn solve_matches_the_direct_oracle() {
    let (_, solved, _) = run(&["solve"], "small_discrete");
    let (code, oracle, _) = run(&["oracle", "direct-concave", "--seed", "7"], "small_discrete");
    assert_eq!(code, 0);
    let (a, b) = (solved["value"].as_f64().unwrap(), oracle["value"].as_f64().unwrap());
    assert!((a - b).abs() <= 1e-5, "{a} vs {b}");
}

#[test]
fn output_is_deterministic() {
    let (_, a, _) = run(&["oracle", "--seed", "11"], "small_discrete");
    let (_, b, _) = run(&["oracle", "--seed", "11"], "small_discrete");
    assert_eq!(a, b);
    let (_, a, _) = run(&["solve", "--sense", "min"], "three_atoms");
    let (_, b, _) = run(&["solve", "--sense", "min"], "three_atoms");
    assert_eq!(a, b);
}

#[test]
fn cap_violation_exits_three() {
    let (code, _, err) = run(&["enumerate", "--enum-cap", "2"], "three_atoms");
    assert_eq!(code, 3);
    assert!(err.contains("cap"));
}

#[test]
fn two_point_rejects_three_atoms() {
    let (code, _, _) = run(&["two-point"], "three_atoms");
    assert_eq!(code, 2);
}

#[test]
fn two_point_writes_the_segment() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("segment.csv");
    let (code, json, _) = run(&["two-point", "--csv", csv.to_str().unwrap()], "flat_two_by_four");
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("t,x1,x2,G"));
    assert_eq!(text.lines().count(), 202);
    let best = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(best <= json["value"].as_f64().unwrap() + 1e-12);
}

#[test]
fn curtain_accepts_an_order() {
    let (code, json, _) = run(&["curtain", "--order", "2,0,1"], "three_atoms");
    assert_eq!(code, 0);
    assert_eq!(json["order"], serde_json::json!([2, 0, 1]));
    assert_eq!(json["windows"].as_array().unwrap().len(), 3);
    let (code, _, _) = run(&["curtain", "--order", "0,0,1"], "three_atoms");
    assert_eq!(code, 2);
}

#[test]
fn bound_reports_x0_for_discrete_mu1() {
    let (code, json, _) = run(&["bound"], "three_atoms");
    assert_eq!(code, 0);
    assert_eq!(json["x0"].as_array().unwrap().len(), 3);
    let spread = json["spread"].as_f64().unwrap();
    assert!((spread - (7.0 / 3.0 - 2.0 / 3.0)).abs() <= 1e-12);
}

#[test]
fn approx_is_monotone_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("levels.csv");
    let (code, json, _) = run(&["approx", "--levels", "1,2", "--csv", csv.to_str().unwrap()], "vix_uniform");
    assert_eq!(code, 0);
    assert_eq!(json["monotone"], true);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 3);
    let (code, _, _) = run(&["approx", "--levels", "2,1"], "vix_uniform");
    assert_eq!(code, 2);
}

#[test]
fn superrep_prices_at_the_bound() {
    let (code, json, _) = run(&["superrep", "--grid", "20"], "flat_two_by_four");
    assert_eq!(code, 0);
    assert_eq!(json["superreplicates"], true);
    let (_, solved, _) = run(&["solve"], "flat_two_by_four");
    let price = json["price"].as_f64().unwrap();
    assert!((price - solved["value"].as_f64().unwrap()).abs() <= 1e-12);
    let p = &json["portfolio"];
    assert!((p["b_star"].as_f64().unwrap() - 2.0 * price).abs() <= 1e-15);
    assert_eq!(p["delta"], 0.0);
    assert!(p["u1"]["const"].is_f64());
}

#[test]
fn missing_instance_is_a_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_nlmot")).arg("check").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_instance_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"mu1":{"atoms":[0.0],"weights":[0.5]},"mu2":{"pieces":[]},"gain":{}}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_nlmot"))
        .args(["check", "--instance"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
