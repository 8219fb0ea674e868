use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn model(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models").join(name)
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fmsilp-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn fmsilp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fmsilp")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn line<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines().find(|l| l.starts_with(key)).unwrap_or_else(|| panic!("no `{}` line in\n{}", key, text))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn analyze_reports_zero_gap_for_the_solvable_model() {
    let o = fmsilp(&["analyze", path(&model("primal_solvable.json"))]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(line(&out, "zero_gap").contains("yes"));
    assert!(line(&out, "primal_value").contains(" 0 "));
    assert!(line(&out, "dual_solvable").contains("yes"));
}

#[test]
fn json_on_stdout_is_pure_json() {
    let o = fmsilp(&["analyze", path(&model("lower_bound.json")), "--json", "-"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).expect("stdout parses as JSON");
    assert_eq!(v["report"], "analysis");
    assert_eq!(v["verdicts"]["dual_bounded"]["value"], "no");
    assert!(String::from_utf8_lossy(&o.stderr).contains("dual_bounded"));
}

#[test]
fn certify_accepts_an_untouched_report_and_names_a_tampered_multiplier() {
    let file = model("not_primal_optimal.json");
    let report = scratch("npo.json");
    assert_eq!(fmsilp(&["analyze", path(&file), "--json", path(&report)]).status.code(), Some(0));
    let ok = fmsilp(&["certify", path(&report), path(&file)]);
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));
    assert!(stdout(&ok).lines().all(|l| l.starts_with("ok")));

    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let cert = v["certificates"]
        .as_array_mut()
        .unwrap()
        .iter_mut()
        .find(|c| c["kind"] == "dual" && c["multiplier"].get("atom:nonneg").is_some())
        .expect("a dual certificate using the nonneg row");
    let name = cert["name"].as_str().unwrap().to_string();
    cert["multiplier"]["atom:nonneg"] = Value::String("2".into());
    let bad = scratch("npo-bad.json");
    std::fs::write(&bad, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    let o = fmsilp(&["certify", path(&bad), path(&file)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains(&format!("FAILED  {}", name)), "{}", stdout(&o));
}

#[test]
fn float_reports_certify_too() {
    let file = model("primal_infeasible_dual_solvable.json");
    let report = scratch("pids-float.json");
    let o = fmsilp(&["analyze", path(&file), "--mode", "float", "--json", path(&report)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fmsilp(&["certify", path(&report), path(&file)]).status.code(), Some(0));
}

#[test]
fn inconclusive_limit_leaves_zero_gap_unknown() {
    let o = fmsilp(&["analyze", path(&model("not_primal_optimal.json")), "--mode", "float"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(line(&stdout(&o), "zero_gap").contains("unknown"));
}

#[test]
fn farkas_closure_case_certifies() {
    let file = model("not_primal_optimal_free.json");
    let report = scratch("farkas.json");
    let o = fmsilp(&["farkas", path(&file), "--c", "1,0", "--d", "0", "--json", path(&report)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("yes_in_limit"));
    let c = fmsilp(&["certify", path(&report), path(&file)]);
    assert_eq!(c.status.code(), Some(0), "{}", stdout(&c));
}

#[test]
fn convex_pipeline_recovers_the_multiplier() {
    let o = fmsilp(&["convex", path(&model("convex_slater.json"))]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(line(&out, "lambda*").contains("\"1\""));
    assert!(line(&out, "tidy").contains("yes"));
}

#[test]
fn eliminate_dumps_rows_and_multipliers() {
    let file = scratch("four.json");
    std::fs::write(
        &file,
        r#"{"version": "1", "kind": "silp", "name": "four", "variables": ["x1", "x2"], "objective": {},
            "rows": [
              {"name": "b1", "coeffs": {"x1": "-2/3", "x2": "-1"}, "rhs": "1"},
              {"name": "b2", "coeffs": {"x1": "-1/2", "x2": "-1"}, "rhs": "1"},
              {"name": "b3", "coeffs": {"x1": "-1", "x2": "-1"}, "rhs": "1"},
              {"name": "b4", "coeffs": {"x1": "1", "x2": "3"}, "rhs": "1"}
            ]}"#,
    )
    .unwrap();
    let o = fmsilp(&["eliminate", path(&file), "--vars", "x1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows: Vec<(String, String)> = v["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| (r["coeffs"][1].as_str().unwrap().to_string(), r["rhs"].as_str().unwrap().to_string()))
        .collect();
    let want = [("3/2", "5/2"), ("1", "3"), ("2", "2")];
    assert_eq!(rows, want.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect::<Vec<_>>());
    assert_eq!(v["rows"][0]["multiplier"]["atom:b1"], "3/2");
}

#[test]
fn approx_prints_the_prefix_values() {
    let o = fmsilp(&["approx", path(&model("primal_solvable.json")), "--n", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(line(&out, "P_5"), "P_5\t0");
    assert_eq!(line(&out, "diverging"), "diverging\tfalse");
}

#[test]
fn input_errors_exit_with_two() {
    assert_eq!(fmsilp(&["analyze", "/nonexistent/model.json"]).status.code(), Some(2));
    let broken = scratch("broken.json");
    std::fs::write(&broken, "{\"version\": \"1\", \"kind\": ").unwrap();
    let o = fmsilp(&["analyze", path(&broken)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));
    let o = fmsilp(&["farkas", path(&model("lower_bound.json")), "--c", "1,2", "--d", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn budget_overrun_exits_with_three() {
    let o = Command::new(env!("CARGO_BIN_EXE_fmsilp"))
        .args(["analyze", path(&model("primal_solvable.json"))])
        .env("FMSILP_ROW_BUDGET", "50")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("budget"));
}
