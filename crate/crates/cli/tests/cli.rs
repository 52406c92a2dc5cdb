use std::process::{Command, Output};

use hdplab_core::stats::neumaier_sum;
use serde_json::Value;

fn hdplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdplab"))
        .args(args)
        .env_remove("HDPLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = hdplab(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Column names and data rows of a CSV table, comments dropped.
fn csv_body(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let columns = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (columns, rows)
}

fn footer(text: &str, key: &str) -> f64 {
    let prefix = format!("# {key}: ");
    text.lines()
        .find_map(|l| l.strip_prefix(prefix.as_str()))
        .unwrap()
        .parse()
        .unwrap()
}

#[test]
fn sample_repeats_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = hdplab(&["sample", "--alpha", "5", "--beta", "2", "--n", "40", "--seed", "9", "--out", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
        assert!(out.stdout.is_empty());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn sample_columns_are_sub_probabilities() {
    let text = stdout(&["sample", "--alpha", "3", "--c", "0.5", "--n", "60", "--base", "beta:2,5"]);
    let (columns, rows) = csv_body(&text);
    assert_eq!(columns, ["index", "atom", "v", "z"]);
    assert_eq!(rows.len(), 60);
    for col in [2, 3] {
        let sum = neumaier_sum(rows.iter().map(|r| r[col].parse::<f64>().unwrap()));
        assert!(sum <= 1.0, "column {col} sums to {sum}");
    }
    let v: f64 = rows.iter().map(|r| r[2].parse::<f64>().unwrap()).sum();
    assert!((v + footer(&text, "tail_v") - 1.0).abs() < 1e-12);
}

#[test]
fn sample_tolerance_sets_row_count() {
    let text = stdout(&["sample", "--alpha", "10", "--beta", "10", "--eps", "0.01"]);
    assert_eq!(csv_body(&text).1.len(), 49);
}

#[test]
fn usage_errors_exit_two() {
    let cases: &[&[&str]] = &[
        &["sample", "--alpha", "10"],
        &["sample", "--alpha", "-1", "--beta", "2", "--n", "3"],
        &["sample", "--alpha", "1", "--beta", "2", "--n", "3", "--eps", "0.1"],
        &["sample", "--alpha", "1", "--beta", "2", "--base", "gamma:1"],
        &["rate-i", "--z", "0.6,0.6"],
        &["rate-j", "--r", "0.5,0.5", "--p", "0.2,0.2,0.6"],
        &["ldp", "--center", "0.3"],
        &["ldp", "--gamma-grid", "200,100"],
        &["lln", "--threads", "0"],
        &["frobnicate"],
    ];
    for args in cases {
        assert_eq!(hdplab(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn header_echoes_parameters() {
    let text = stdout(&["rate-i", "--z", "0.2,0.1", "--c", "2", "--seed", "17"]);
    for line in ["# tool: hdplab ", "# command: rate-i", "# z: 2.0000000000000001e-1,1.0000000000000001e-1", "# c: 2.0000000000000000e0", "# seed: 17"] {
        assert!(text.lines().any(|l| l.starts_with(line)), "missing {line:?}");
    }
}

#[test]
fn rate_j_equal_cells_is_zero() {
    let text = stdout(&["rate-j", "--r", "0.2,0.3,0.5", "--p", "0.2,0.3,0.5", "--c", "2"]);
    let (columns, rows) = csv_body(&text);
    assert_eq!(columns, ["value", "q_1", "q_2", "q_3"]);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn rate_i_reports_series() {
    let text = stdout(&["rate-i", "--z", "0.5"]);
    let (_, rows) = csv_body(&text);
    let first: f64 = rows[0][1].parse().unwrap();
    assert!((first - 0.4148).abs() < 1e-3);
    assert_eq!(text.lines().find(|l| l.starts_with("# converged")), Some("# converged: true"));
}

#[test]
fn ldp_default_table_shape() {
    let text = stdout(&["ldp"]);
    let (columns, rows) = csv_body(&text);
    assert_eq!(columns[0], "kind");
    assert_eq!(rows.len(), 5);
    assert!(rows[..4].iter().all(|r| r[0] == "gamma"));
    assert_eq!(rows[4][0], "reference");
    let gammas: Vec<f64> = rows[..4].iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(gammas, [100.0, 200.0, 400.0, 800.0]);
}

#[test]
fn json_matches_csv() {
    let args = ["rate-j", "--r", "0.15,0.35,0.5", "--p", "0.4,0.4,0.2", "--c", "0.5"];
    let csv = stdout(&args);
    let json = stdout(&[&args[..], &["--format", "json"]].concat());
    let doc: Value = serde_json::from_str(&json).unwrap();
    let (columns, rows) = csv_body(&csv);
    let cols: Vec<&str> = doc["columns"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
    assert_eq!(cols, columns);
    for (c, name) in columns.iter().enumerate() {
        let from_csv: f64 = rows[0][c].parse().unwrap();
        let from_json = doc["rows"][0][name].as_f64().unwrap();
        assert!((from_csv - from_json).abs() <= 1e-15 * from_csv.abs().max(1.0), "{name}");
    }
    assert_eq!(doc["header"]["command"], "rate-j");
    assert_eq!(doc["header"]["seed"], 1);
}

#[test]
fn json_carries_infinite_rate() {
    let json = stdout(&["rate-j", "--r", "0.5,0.5", "--p", "1,0", "--format", "json"]);
    let doc: Value = serde_json::from_str(&json).unwrap();
    assert_eq!(doc["rows"][0]["value"], "inf");
    assert_eq!(doc["rows"][0]["q_1"], Value::Null);
}

#[test]
fn thread_count_does_not_change_output() {
    let args = ["sample", "--alpha", "4", "--beta", "4", "--n", "25", "--seed", "3"];
    let one = stdout(&[&args[..], &["--threads", "1"]].concat());
    let four = stdout(&[&args[..], &["--threads", "4"]].concat());
    assert_eq!(one, four);
    let env = Command::new(env!("CARGO_BIN_EXE_hdplab"))
        .args(args)
        .env("HDPLAB_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(String::from_utf8(env.stdout).unwrap(), one);
}

#[test]
fn moments_at_equal_concentrations_pass() {
    let out = hdplab(&["moments", "--alpha", "10", "--beta", "10"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let (columns, rows) = csv_body(&text);
    let flag = columns.iter().position(|c| c == "flagged").unwrap();
    assert_eq!(rows.len(), 11);
    assert!(rows.iter().all(|r| r[flag] == "false"));
}

#[test]
fn ldp_mc_cross_check_in_footer() {
    let text = stdout(&["ldp", "--gamma-grid", "100", "--mc-samples", "20000"]);
    assert_eq!(text.lines().find(|l| l.starts_with("# mc_flagged")), Some("# mc_flagged: false"));
    let q = footer(&text, "mc_quadrature");
    let m = footer(&text, "mc_estimate");
    let se = footer(&text, "mc_std_error");
    assert!((q - m).abs() <= 4.0 * se);
}
