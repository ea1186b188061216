use std::path::Path;
use std::process::{Command, Output};

use mdiew::MdiRunResult;
use serde_json::Value;

fn mdiew(args: &[&str]) -> Output {
    mdiew_in(args, None)
}

fn mdiew_in(args: &[&str], out_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mdiew"));
    cmd.args(args).env_remove("MDIEW_OUTPUT_DIR");
    if let Some(dir) = out_dir {
        cmd.env("MDIEW_OUTPUT_DIR", dir);
    }
    cmd.output().expect("binary runs")
}

fn json_stdout(args: &[&str]) -> Value {
    let out = mdiew(args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn error_of(out: &Output) -> Value {
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    err["error"].clone()
}

#[test]
fn evaluate_werner_half() {
    let v = json_stdout(&["evaluate", "--state", "werner", "--p", "0.5"]);
    assert!((v["i_true"].as_f64().unwrap() + 1.0 / 32.0).abs() < 1e-12);
    assert!((v["witness_over_dim"].as_f64().unwrap() + 1.0 / 32.0).abs() < 1e-12);
    assert!((v["pt_min_eigenvalue"].as_f64().unwrap() + 0.125).abs() < 1e-12);
    assert_eq!(v["entangled"], Value::Bool(true));
}

#[test]
fn evaluate_separable_werner_is_not_entangled() {
    let v = json_stdout(&["evaluate", "--p", "0.2"]);
    assert_eq!(v["entangled"], Value::Bool(false));
    assert!(v["pt_min_eigenvalue"].as_f64().unwrap() > 0.0);
}

#[test]
fn evaluate_ghz_uses_all_three_parties() {
    let v = json_stdout(&["evaluate", "--state", "ghz", "--q", "0.5"]);
    assert!((v["i_true"].as_f64().unwrap() - (3.0 - 3.5) / 64.0).abs() < 1e-12);
    assert_eq!(v["entangled"], Value::Bool(true));
}

#[test]
fn bound_worked_example() {
    let v = json_stdout(&[
        "bound",
        "--trw",
        "1",
        "--n",
        "2",
        "--xi-minus",
        "0.5",
        "--xi-plus",
        "1",
    ]);
    assert_eq!(v["bound"].as_f64().unwrap(), -0.25);
    assert_eq!(v["mdi"]["losses_only"].as_f64().unwrap(), -0.25);
    assert_eq!(v["standard"]["c0"].as_f64().unwrap(), 0.25);
}

#[test]
fn decompose_table() {
    let out = mdiew(&["decompose", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r,s,beta"));
    let rows: Vec<(usize, usize, f64)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (
                f[0].parse().unwrap(),
                f[1].parse().unwrap(),
                f[2].parse().unwrap(),
            )
        })
        .collect();
    assert_eq!(rows.len(), 16);
    for (r, s, b) in rows {
        let expected = if r == s { 0.625 } else { -0.125 };
        assert!((b - expected).abs() < 1e-10);
    }
    let v = json_stdout(&["decompose", "--state", "ghz"]);
    assert_eq!(v["beta"].as_array().unwrap().len(), 64);
    assert!(v["residual"].as_f64().unwrap() < 1e-8);
}

#[test]
fn sweep_csv_layout_and_sign_pattern() {
    let out = mdiew(&["sweep", "--trw", "1", "--grid", "51"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("xi_minus,xi_plus,bound,flag"));
    let mut n = 0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let (xm, xp, b): (f64, f64, f64) = (
            f[0].parse().unwrap(),
            f[1].parse().unwrap(),
            f[2].parse().unwrap(),
        );
        // 17 significant digits in scientific notation
        let mantissa = f[2].split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.len(), 18, "{line}");
        let s = xm + 1.0 / xp - 2.0;
        if s.abs() > 1e-9 {
            assert_eq!(b < 0.0, s < 0.0, "{line}");
            assert_eq!(f[3], if s < 0.0 { "negative" } else { "positive" });
        } else {
            assert_eq!(f[3], "boundary");
        }
        n += 1;
    }
    assert_eq!(n, 51 * 51);
}

#[test]
fn simulate_output_is_byte_identical_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let args = |name: &str| {
        vec![
            "simulate".to_string(),
            "--p".into(),
            "0.6".into(),
            "--xi-minus".into(),
            "0.95".into(),
            "--xi-plus".into(),
            "0.9".into(),
            "--mode".into(),
            "stochastic".into(),
            "--seed".into(),
            "11".into(),
            "--output".into(),
            name.into(),
        ]
    };
    for name in ["a.json", "b.json"] {
        let a: Vec<String> = args(name);
        let refs: Vec<&str> = a.iter().map(String::as_str).collect();
        assert!(mdiew_in(&refs, Some(dir.path())).status.success());
    }
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    let b = std::fs::read(dir.path().join("b.json")).unwrap();
    assert_eq!(a, b);

    let parsed: MdiRunResult = serde_json::from_slice(&a).unwrap();
    let original: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(serde_json::to_value(&parsed).unwrap(), original);
    assert!(parsed.statistical_error.is_some());
}

#[test]
fn output_dir_default_file_name() {
    let dir = tempfile::tempdir().unwrap();
    let out = mdiew_in(&["sweep", "--grid", "5"], Some(dir.path()));
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 26);
}

#[test]
fn invalid_parameters_exit_with_code_two() {
    let out = mdiew(&["evaluate", "--p", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["kind"], "parameter_out_of_range");

    let out = mdiew(&["evaluate", "--state", "ghz"]);
    assert_eq!(out.status.code(), Some(2));

    let out = mdiew(&["bound", "--xi-minus", "banana"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["kind"], "invalid_config");
}

#[test]
fn impossible_loss_request_exits_with_code_four() {
    let out = mdiew(&["simulate", "--p", "1", "--xi-minus", "0.5"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_of(&out)["kind"], "bin_underflow");
}
