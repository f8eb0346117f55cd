use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sqrt_sparse::io::{read_design, read_response};
use sqrt_sparse::{kkt_residual, sqrt_lasso_lambda, sqrt_slope_lambdas, Penalty, RegressionData};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqrt-sparse"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

/// Every numeric leaf agrees within `tol` (absolute, or relative above 1).
fn assert_close(a: &Value, b: &Value, tol: f64, path: &str) {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            assert!((x - y).abs() <= tol * y.abs().max(1.0), "{path}: {x} vs {y}");
        }
        (Value::Array(x), Value::Array(y)) => {
            assert_eq!(x.len(), y.len(), "{path}");
            for (i, (u, v)) in x.iter().zip(y).enumerate() {
                assert_close(u, v, tol, &format!("{path}[{i}]"));
            }
        }
        (Value::Object(x), Value::Object(y)) => {
            assert_eq!(x.keys().collect::<Vec<_>>(), y.keys().collect::<Vec<_>>(), "{path}");
            for (k, u) in x {
                assert_close(u, &y[k], tol, &format!("{path}.{k}"));
            }
        }
        _ => assert_eq!(a, b, "{path}"),
    }
}

fn fit_args<'a>(x: &'a str, y: &'a str, out: &'a str) -> Vec<&'a str> {
    vec!["fit", "--x", x, "--y", y, "--out", out]
}

#[test]
fn golden_lasso_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fit.json");
    let (x, y) = (fixture("x_20x50.csv"), fixture("y_20x50.csv"));
    let mut args = fit_args(x.to_str().unwrap(), y.to_str().unwrap(), out.to_str().unwrap());
    args.extend(["--method", "sqrt-lasso", "--gamma", "1", "--s", "3"]);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let got = read_json(&out);
    let golden = read_json(&fixture("golden_fit_lasso.json"));
    assert_close(&got, &golden, 1e-6, "");
    assert_eq!(got["format_version"], 1);

    // The committed coefficients satisfy the optimality conditions.
    let data = RegressionData::new(read_design(&x).unwrap(), read_response(&y).unwrap()).unwrap();
    let beta = ndarray::Array1::from(floats(&golden["beta"]));
    let pen = Penalty::l1(sqrt_lasso_lambda(20, 50, 3, 1.0).unwrap()).unwrap();
    assert!(kkt_residual(&data, beta.view(), &pen).unwrap() <= 1e-6);
}

#[test]
fn golden_slope_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fit.json");
    let (x, y) = (fixture("x_20x50.csv"), fixture("y_20x50.csv"));
    let mut args = fit_args(x.to_str().unwrap(), y.to_str().unwrap(), out.to_str().unwrap());
    args.extend(["--method", "sqrt-slope", "--gamma", "1"]);
    assert_eq!(code(&run(&args)), 0);
    let golden = read_json(&fixture("golden_fit_slope.json"));
    assert_close(&read_json(&out), &golden, 1e-6, "");

    let data = RegressionData::new(read_design(&x).unwrap(), read_response(&y).unwrap()).unwrap();
    let beta = ndarray::Array1::from(floats(&golden["beta"]));
    let pen = Penalty::Sorted(sqrt_slope_lambdas(20, 50, 1.0).unwrap());
    assert!(kkt_residual(&data, beta.view(), &pen).unwrap() <= 1e-6);
}

#[test]
fn zero_response_gives_zero_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fit.json");
    let (x, y) = (fixture("x_20x50.csv"), fixture("y_zero.csv"));
    let mut args = fit_args(x.to_str().unwrap(), y.to_str().unwrap(), out.to_str().unwrap());
    args.extend(["--method", "sqrt-lasso", "--s", "2"]);
    assert_eq!(code(&run(&args)), 0);
    let v = read_json(&out);
    assert!(floats(&v["beta"]).iter().all(|b| *b == 0.0));
    assert_eq!(v["sigma_hat"].as_f64(), Some(0.0));
    assert_eq!(v["degenerate"], true);
}

#[test]
fn data_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fit.json");
    let out = out.to_str().unwrap();
    for (x, y) in [
        ("x_malformed.csv", "y_20x50.csv"),
        ("x_20x50.csv", "y_short.csv"),
        ("x_raw.csv", "y_20x50.csv"),
        ("missing.csv", "y_20x50.csv"),
    ] {
        let (x, y) = (fixture(x), fixture(y));
        let mut args = fit_args(x.to_str().unwrap(), y.to_str().unwrap(), out);
        args.extend(["--method", "sqrt-slope"]);
        let o = run(&args);
        assert_eq!(code(&o), 3, "{x:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn normalize_flag_rescales_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fit.json");
    let (x, y) = (fixture("x_raw.csv"), fixture("y_20x50.csv"));
    let mut args = fit_args(x.to_str().unwrap(), y.to_str().unwrap(), out.to_str().unwrap());
    args.extend(["--method", "sqrt-lasso", "--gamma", "1", "--s", "3", "--normalize"]);
    assert_eq!(code(&run(&args)), 0);
    // x_raw is 3 × x_20x50, so the coefficients shrink by 3.
    let raw = floats(&read_json(&out)["beta"]);
    let golden = floats(&read_json(&fixture("golden_fit_lasso.json"))["beta"]);
    for (a, b) in raw.iter().zip(&golden) {
        assert!((3.0 * a - b).abs() < 1e-8);
    }
}

#[test]
fn usage_errors_exit_2() {
    let (x, y) = (fixture("x_20x50.csv"), fixture("y_20x50.csv"));
    let (x, y) = (x.to_str().unwrap(), y.to_str().unwrap());
    assert_eq!(
        code(&run(&[
            "fit",
            "--x",
            x,
            "--y",
            y,
            "--method",
            "bogus",
            "--out",
            "/dev/null"
        ])),
        2
    );
    assert_eq!(
        code(&run(&[
            "fit",
            "--x",
            x,
            "--y",
            y,
            "--method",
            "sqrt-lasso",
            "--out",
            "/dev/null"
        ])),
        2
    );
    assert_eq!(
        code(&run(&["check-design", "--x", x, "--s", "2"])),
        2,
        "seed is required"
    );
    assert_eq!(code(&run(&["nonsense"])), 2);
}

#[test]
fn non_convergence_exits_4_with_output() {
    // A single outer iteration cannot certify the simulated grid.
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"grid": {"n": [40], "p": [60], "s": [3], "sigma": [1], "gamma": [1]},
            "method": "sqrt-slope", "replicates": 2, "seed": 5,
            "solver": {"max_outer_iters": 1}}"#,
    )
    .unwrap();
    let csv = dir.path().join("r.csv");
    let o = run(&[
        "simulate",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 4);
    assert!(csv.exists());
}

#[test]
fn golden_adapt() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("adapt.json");
    let (x, y) = (fixture("x_20x50.csv"), fixture("y_20x50.csv"));
    let base = [
        "adapt",
        "--x",
        x.to_str().unwrap(),
        "--y",
        y.to_str().unwrap(),
        "--s-star",
        "8",
        "--out",
        out.to_str().unwrap(),
    ];
    let with = |extra: &[&str]| {
        let mut a = base.to_vec();
        a.extend(extra);
        assert_eq!(code(&run(&a)), 0);
        read_json(&out)
    };

    let v = with(&["--gamma", "1", "--c0", "0.87"]);
    assert_close(&v, &read_json(&fixture("golden_adapt.json")), 1e-6, "");
    assert_eq!(v["levels"].as_array().unwrap().len(), 4);

    // Huge γ: every level fits zero, all distances vanish.
    let v = with(&["--gamma", "1000", "--c0", "1"]);
    assert_eq!(v["s_tilde"], 2);

    // C₀ = 0: nothing is accepted and the largest compared level wins.
    let v = with(&["--gamma", "1", "--c0", "0"]);
    assert_eq!(v["selection_set_nonempty"], false);
    assert_eq!(v["s_tilde"].as_u64(), Some(1 << v["big_m"].as_u64().unwrap()));
}

#[test]
fn check_design_examples() {
    let ortho = fixture("x_orthonormal.csv");
    let o = run(&[
        "check-design",
        "--x",
        ortho.to_str().unwrap(),
        "--s",
        "2",
        "--seed",
        "1",
    ]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["kappa"].as_f64(), Some(1.0));
    assert_eq!(v["kind"], "exact");

    let dup = fixture("x_duplicated.csv");
    let o = run(&["check-design", "--x", dup.to_str().unwrap(), "--s", "2", "--seed", "1"]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["kappa"].as_f64().unwrap() <= 1e-6);
    assert_eq!(v["witness_check"]["in_cone"], true);
    assert!((v["witness_check"]["l2_norm"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let random = fixture("x_random.csv");
    let mut prev = f64::INFINITY;
    for s in 1..=5 {
        for cone in ["sre", "wre"] {
            let s_arg = s.to_string();
            let o = run(&[
                "check-design",
                "--x",
                random.to_str().unwrap(),
                "--s",
                &s_arg,
                "--cone",
                cone,
                "--seed",
                "3",
            ]);
            assert_eq!(code(&o), 0);
            let v: Value = serde_json::from_slice(&o.stdout).unwrap();
            if cone == "sre" {
                let k = v["kappa"].as_f64().unwrap();
                assert!(k <= prev);
                prev = k;
            }
            assert!(v["conditions"]["rate_lhs"].as_f64().unwrap() > 0.0);
        }
    }
}

#[test]
fn simulate_and_rates_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"grid": {"n": [40, 80], "p": [60], "s": [2], "sigma": [1], "gamma": [1]},
            "methods": ["sqrt-lasso", "sqrt-slope"], "replicates": 3, "seed": 7}"#,
    )
    .unwrap();
    let mut outputs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let csv = dir.path().join(name);
        let o = run(&[
            "simulate",
            "--spec",
            spec.to_str().unwrap(),
            "--out",
            csv.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push((
            std::fs::read(&csv).unwrap(),
            std::fs::read(csv.with_extension("json")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs[0].0.clone()).unwrap();
    assert!(text.starts_with("n,p,s,sigma,method,metric,median,iqr,normalized_ratio,failures\n"));

    let sidecar = dir.path().join("a.json");
    let o = run(&["rates", "--report", sidecar.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let spreads = v["rate_ratios"].as_array().unwrap();
    assert!(spreads.iter().all(|s| s["spread"].as_f64().unwrap() >= 1.0));
}

#[test]
fn malformed_spec_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, "{ not json").unwrap();
    let o = run(&["simulate", "--spec", spec.to_str().unwrap(), "--out", "/dev/null"]);
    assert_eq!(code(&o), 3);
}
