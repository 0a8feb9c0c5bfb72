use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn handoff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_handoff"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn arm_files(dir: &Path) -> [PathBuf; 4] {
    let o = handoff(&["example", "arm", "--out-dir", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    ["ma", "mh", "att", "dra"].map(|n| dir.join(format!("{n}.json")))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn parse_csv(text: &str) -> Vec<Vec<f64>> {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("w1,w2,lambda1,lambda2,u1,u2"));
    lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn validate_accepts_generated_files() {
    let dir = TempDir::new().unwrap();
    let files = arm_files(dir.path());
    let args: Vec<&str> = std::iter::once("validate").chain(files.iter().map(|p| s(p))).collect();
    let o = handoff(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o).matches(": ok (").count(), 4);
}

#[test]
fn validate_reports_row_sum_defect() {
    let dir = TempDir::new().unwrap();
    let [ma, ..] = arm_files(dir.path());
    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(&ma).unwrap()).unwrap();
    doc["transitions"][0][3] = Value::from(0.5);
    std::fs::write(&ma, doc.to_string()).unwrap();
    let o = handoff(&["validate", s(&ma)]);
    assert_eq!(code(&o), 1);
    let out = stdout(&o);
    assert!(out.contains("((1,1), a)"), "{out}");
    assert!(out.contains("row-sum"), "{out}");
}

#[test]
fn validate_missing_file_and_unknown_field() {
    let dir = TempDir::new().unwrap();
    let o = handoff(&["validate", s(&dir.path().join("absent.json"))]);
    assert_eq!(code(&o), 2);

    let [ma, ..] = arm_files(dir.path());
    let text = std::fs::read_to_string(&ma).unwrap().replacen("\"ap\"", "\"apx\"", 1);
    std::fs::write(&ma, text).unwrap();
    let o = handoff(&["validate", s(&ma)]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("apx") && err.contains("line"), "{err}");
}

#[test]
fn synthesize_from_files_and_example_agree() {
    let dir = TempDir::new().unwrap();
    let [ma, mh, att, dra] = arm_files(dir.path());
    let from_files = dir.path().join("a.json");
    let from_example = dir.path().join("b.json");
    let o = handoff(&[
        "synthesize", "--ma", s(&ma), "--mh", s(&mh), "--att", s(&att), "--dra", s(&dra),
        "--weights", "0.8,0.2", "--out", s(&from_files),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = handoff(&["synthesize", "--example", "arm", "--weights", "0.8,0.2", "--out", s(&from_example)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let a: Value = serde_json::from_str(&std::fs::read_to_string(&from_files).unwrap()).unwrap();
    let b: Value = serde_json::from_str(&std::fs::read_to_string(&from_example).unwrap()).unwrap();
    assert_eq!(a["profile"], b["profile"]);
    assert_eq!(a["kind"], "bundle");
    let u1 = a["profile"]["u1"].as_f64().unwrap();
    assert!(u1 > 0.9 && u1 < 1.0);
}

#[test]
fn synthesize_pure_reach_weight() {
    let o = handoff(&["synthesize", "--example", "arm", "--weights", "1,0"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let b: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let ideal = b["ideal"][0].as_f64().unwrap();
    assert!((b["profile"]["u1"].as_f64().unwrap() - ideal).abs() < 1e-6);
}

#[test]
fn synthesize_rejects_bad_weights() {
    for w in ["0.8,0.1", "0.5", "a,b", "-0.5,1.5"] {
        let o = handoff(&["synthesize", "--example", "arm", "--weights", w]);
        assert_eq!(code(&o), 2, "weights {w}");
    }
}

#[test]
fn sweep_grid_is_non_dominated() {
    let o = handoff(&["sweep", "--example", "arm", "--grid", "9"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = parse_csv(&stdout(&o));
    assert_eq!(rows.len(), 9);
    for (k, r) in rows.iter().enumerate() {
        assert!((r[0] - (k + 1) as f64 / 10.0).abs() < 1e-12);
        assert!((r[0] + r[1] - 1.0).abs() < 1e-12);
    }
    for a in &rows {
        for b in &rows {
            let dominates = a[4] >= b[4] - 1e-9 && a[5] >= b[5] - 1e-9 && (a[4] > b[4] + 1e-7 || a[5] > b[5] + 1e-7);
            assert!(!dominates, "{a:?} dominates {b:?}");
        }
    }
}

#[test]
fn sweep_single_point_is_the_midpoint() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("front.csv");
    let svg = dir.path().join("front.svg");
    let o = handoff(&["sweep", "--example", "arm", "--grid", "1", "--out", s(&csv), "--svg", s(&svg)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = parse_csv(&std::fs::read_to_string(&csv).unwrap());
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][..2], &[0.5, 0.5]);
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<circle"));
}

#[test]
fn sweep_weights_file() {
    let dir = TempDir::new().unwrap();
    let good = dir.path().join("w.csv");
    std::fs::write(&good, "w1,w2\n0.3,0.7\n0.6,0.4\n").unwrap();
    let o = handoff(&["sweep", "--example", "arm", "--weights-file", s(&good)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(parse_csv(&stdout(&o)).len(), 2);

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "0.3;0.7\n").unwrap();
    let o = handoff(&["sweep", "--example", "arm", "--weights-file", s(&bad)]);
    assert_eq!(code(&o), 2);
    let o = handoff(&["sweep", "--example", "arm"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn example_writes_loadable_gridworld() {
    let dir = TempDir::new().unwrap();
    let params = dir.path().join("p.json");
    std::fs::write(&params, r#"{"gamma": 0.95}"#).unwrap();
    let o = handoff(&["example", "gridworld", "--params", s(&params), "--out-dir", s(dir.path())]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let ma: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("ma.json")).unwrap()).unwrap();
    assert_eq!(ma["states"].as_array().unwrap().len(), 25);
    assert_eq!(ma["gamma"], 0.95);

    std::fs::write(&params, r#"{"gama": 0.95}"#).unwrap();
    let o = handoff(&["example", "gridworld", "--params", s(&params), "--out-dir", s(dir.path())]);
    assert_eq!(code(&o), 2);
}

#[test]
fn simulate_matches_lp_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let bundle = dir.path().join("bundle.json");
    let o = handoff(&["synthesize", "--example", "arm", "--weights", "0.8,0.2", "--out", s(&bundle)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let run = |out: &Path, traces: &Path| {
        let o = handoff(&[
            "simulate", "--policy-bundle", s(&bundle), "--traces", "2000", "--seed", "7", "--horizon", "600",
            "--out", s(out), "--export-traces", s(traces), "--export-count", "3",
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        (std::fs::read_to_string(out).unwrap(), std::fs::read_to_string(traces).unwrap())
    };
    let a = run(&dir.path().join("e1.json"), &dir.path().join("t1.jsonl"));
    let b = run(&dir.path().join("e2.json"), &dir.path().join("t2.jsonl"));
    assert_eq!(a, b);

    let report: Value = serde_json::from_str(&a.0).unwrap();
    let reach = report["estimate"]["reach"].as_f64().unwrap();
    let se = report["estimate"]["reach_se"].as_f64().unwrap();
    let lp = report["lp_profile"]["u1"].as_f64().unwrap();
    assert!((reach - lp).abs() <= 3.0 * se + 1e-9, "reach {reach} se {se} lp {lp}");

    let lines: Vec<&str> = a.1.lines().collect();
    assert_eq!(lines.len(), 3);
    for l in lines {
        let rec: Value = serde_json::from_str(l).unwrap();
        assert_eq!(rec["steps"].as_array().unwrap().len(), 600);
    }
}

#[test]
fn simulate_rejects_bad_bundles() {
    let dir = TempDir::new().unwrap();
    let o = handoff(&["simulate", "--policy-bundle", s(&dir.path().join("none.json"))]);
    assert_eq!(code(&o), 2);
    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, r#"{"kind": "bundle", "what": 1}"#).unwrap();
    let o = handoff(&["simulate", "--policy-bundle", s(&junk)]);
    assert_eq!(code(&o), 2);
}
