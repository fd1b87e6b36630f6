use std::path::Path;
use std::process::{Command, Output};

use hartogs::cli::{config_from_args, paper_anchor, Report};
use serde_json::Value;

fn hartogs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hartogs"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_report(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn without_timestamp(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("generated_at");
    v
}

#[test]
fn passing_suite_exits_zero_with_anchored_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bergman.json");
    let o = hartogs(&["bergman", "--jmax", "8", "--kmax", "8", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Report = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(report.passed() && !report.rows.is_empty());
    for row in &report.rows {
        assert!(!row.paper_anchor.is_empty());
        assert_eq!(row.paper_anchor, paper_anchor(&row.check_id));
        let params: Value = serde_json::from_str(&row.parameter_json).unwrap();
        assert_eq!(params["jmax"], 8);
    }
}

#[test]
fn uniform_suite_on_t_stays_below_eighty() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("uniform.json");
    let o = hartogs(&[
        "uniform",
        "--domain",
        "T",
        "--pairs",
        "10000",
        "--seed",
        "7",
        "--lemma-pairs",
        "1000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_report(&out);
    let rows = report["rows"].as_array().unwrap();
    let t_rows: Vec<&Value> = rows
        .iter()
        .filter(|r| r["check_id"].as_str().unwrap().starts_with("uniform.T."))
        .collect();
    assert!(!t_rows.is_empty());
    for r in t_rows {
        assert!(r["observed"].as_f64().unwrap() < 80.0);
    }
}

#[test]
fn failing_check_exits_one_and_records_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dbar.json");
    // the ratio ‖∂̄u_δ‖/‖∂̄u₁‖ is √δ, so the "= δ" rows fail
    let o = hartogs(&[
        "dbar",
        "--deltas",
        "0.5",
        "--level",
        "12",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let report: Report = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let failed: Vec<_> = report.failures().collect();
    assert!(!failed.is_empty());
    assert!(failed.iter().all(|r| r.check_id.starts_with("dbar.")));
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL"));
}

#[test]
fn unknown_flag_is_a_usage_error_without_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never.json");
    let o = hartogs(&["bergman", "--frobnicate", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
}

#[test]
fn invalid_values_are_usage_errors() {
    assert_eq!(hartogs(&["bergman", "--kmax", "-3"]).status.code(), Some(2));
    assert_eq!(hartogs(&["dbar", "--deltas", "0,0.5"]).status.code(), Some(2));
    assert_eq!(hartogs(&["spectrum", "--grid", "4"]).status.code(), Some(2));
    assert_eq!(hartogs(&["nonsense"]).status.code(), Some(2));
    assert_eq!(hartogs(&["--help"]).status.code(), Some(0));
}

#[test]
fn unwritable_output_exits_two() {
    let o = hartogs(&[
        "bergman",
        "--jmax",
        "1",
        "--kmax",
        "1",
        "--out",
        "/nonexistent-dir/sub/report.json",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn same_config_gives_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = hartogs(&[
            "uniform",
            "--pairs",
            "300",
            "--lemma-pairs",
            "5000",
            "--seed",
            "11",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        without_timestamp(read_report(&out))
    };
    assert_eq!(run("a.json"), run("b.json"));
}

#[test]
fn csv_has_fixed_column_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.csv");
    let o = hartogs(&[
        "bergman",
        "--jmax",
        "2",
        "--kmax",
        "2",
        "--format",
        "csv",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let mut reader = csv::Reader::from_path(&out).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        [
            "check_id",
            "paper_anchor",
            "parameter_json",
            "observed",
            "expected",
            "tolerance",
            "pass"
        ]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| &r[6] == "true"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"command": "bergman", "jmax": 2, "kmax": 1, "seed": 5}"#).unwrap();
    let c = config_from_args(["hartogs", "--config", cfg.to_str().unwrap(), "bergman", "--jmax", "3"]).unwrap();
    assert_eq!((c.jmax, c.kmax, c.seed), (3, 1, 5));

    let out = dir.path().join("r.json");
    let o = hartogs(&[
        "--config",
        cfg.to_str().unwrap(),
        "bergman",
        "--jmax",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let report = read_report(&out);
    assert_eq!(report["seed"], 5);
    let params: Value = serde_json::from_str(report["rows"][0]["parameter_json"].as_str().unwrap()).unwrap();
    assert_eq!((params["jmax"].as_i64(), params["kmax"].as_i64()), (Some(3), Some(1)));
}

#[test]
fn unknown_config_fields_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"jmax": 2, "colour": "blue"}"#).unwrap();
    let o = hartogs(&["--config", cfg.to_str().unwrap(), "bergman"]);
    assert_eq!(o.status.code(), Some(2));
}
