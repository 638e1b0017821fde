use std::f64::consts::LN_2;
use std::process::{Command, Output};

fn irdf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irdf"))
        .args(args)
        .output()
        .expect("spawn irdf")
}

fn irdf_env(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irdf"))
        .args(args)
        .env("IRDF_THREADS", threads)
        .output()
        .expect("spawn irdf")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn hb(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.ln() - (1.0 - p) * (1.0 - p).ln()
    }
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "D,f_of_D,rate_nats,rate_bits,slope_s,converged"
    );
    lines
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn bsc_curve_matches_entropy_formula() {
    let o = irdf(&[
        "curve", "--model", "bsc", "--beta", "0.15", "--f", "identity", "--points", "50",
    ]);
    assert!(o.status.success());
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 50);
    for r in &rows {
        let d: f64 = r[0].parse().unwrap();
        let rate: f64 = r[2].parse().unwrap();
        let want = (LN_2 - hb((d - 0.15) / 0.7)).max(0.0);
        assert!((rate - want).abs() < 1e-6, "D={d}: {rate} vs {want}");
        assert_eq!(r[5], "true");
        // 17 significant digits
        assert_eq!(r[0].split('e').next().unwrap().len(), 18);
    }
}

#[test]
fn bec_verify_passes() {
    let o = irdf(&[
        "verify", "--model", "bec", "--delta", "0.4", "--f", "identity",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["max_deviation_nats"].as_f64().unwrap() <= 1e-6);
    assert_eq!(v["pass"], true);
}

#[test]
fn verify_fails_below_rounding_level_tolerance() {
    let o = irdf(&[
        "verify", "--model", "bsc", "--beta", "0.01", "--f", "exp:9.2", "--tol", "1e-17",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn left_endpoint_in_bits_is_one() {
    let o = irdf(&[
        "point", "--model", "bsc", "--beta", "0.25", "--f", "identity", "--D", "0.25", "--bits",
    ]);
    assert!(o.status.success());
    let r: f64 = stdout(&o).trim().parse().unwrap();
    assert!((r - 1.0).abs() < 1e-9, "{r}");
}

#[test]
fn bits_are_nats_over_ln2() {
    let base = [
        "point", "--model", "bec", "--delta", "0.3", "--f", "sqrt", "--D", "0.1",
    ];
    let nats: f64 = stdout(&irdf(&base)).trim().parse().unwrap();
    let mut with_bits = base.to_vec();
    with_bits.push("--bits");
    let bits: f64 = stdout(&irdf(&with_bits)).trim().parse().unwrap();
    assert!(nats > 0.0);
    assert_eq!(bits, nats / LN_2);

    let o = irdf(&[
        "curve", "--model", "bsc", "--beta", "0.1", "--points", "10", "--format", "json",
    ]);
    // read the literals directly; JSON number parsing need not round-trip
    let field = |key: &str| -> Vec<f64> {
        stdout(&o)
            .lines()
            .filter_map(|l| l.trim().strip_prefix(&format!("\"{key}\": ")))
            .map(|v| v.trim_end_matches(',').parse().unwrap())
            .collect()
    };
    let (nats, bits) = (field("rate_nats"), field("rate_bits"));
    assert_eq!(nats.len(), 10);
    for (n, b) in nats.iter().zip(&bits) {
        assert_eq!(*b, n / LN_2);
    }
}

#[test]
fn output_is_byte_identical() {
    for fmt in ["csv", "json", "svg"] {
        let args = [
            "curve", "--model", "bec", "--delta", "0.2", "--f", "exp:3", "--points", "20",
            "--format", fmt,
        ];
        let a = irdf_env(&args, "1");
        let b = irdf_env(&args, "4");
        let c = irdf(&args);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout);
        assert_eq!(a.stdout, c.stdout);
    }
    let args = ["subadd", "--f", "sqrt", "--trials", "2000", "--seed", "11"];
    assert_eq!(irdf(&args).stdout, irdf(&args).stdout);
}

#[test]
fn domain_errors_exit_2() {
    let o = irdf(&["point", "--model", "bsc", "--beta", "0.25", "--D", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    let o = irdf(&["point", "--model", "bsc", "--D", "-0.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn above_max_is_zero_rate_with_warning() {
    let o = irdf(&["point", "--model", "bsc", "--beta", "0.25", "--D", "0.7"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim().parse::<f64>().unwrap(), 0.0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}

#[test]
fn non_convergence_exits_3() {
    let o = irdf(&["point", "--model", "bsc", "--D", "0.3", "--max-iters", "1"]);
    assert_eq!(o.status.code(), Some(3));
    let o = irdf(&[
        "curve",
        "--model",
        "bsc",
        "--points",
        "5",
        "--max-iters",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(csv_rows(&stdout(&o)).len(), 5);
}

#[test]
fn closed_form_schema_matches_curve() {
    let cf = irdf(&[
        "closed-form",
        "--model",
        "bsc",
        "--beta",
        "0.15",
        "--points",
        "8",
    ]);
    let cv = irdf(&["curve", "--model", "bsc", "--beta", "0.15", "--points", "8"]);
    let (a, b) = (csv_rows(&stdout(&cf)), csv_rows(&stdout(&cv)));
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        let (rx, ry): (f64, f64) = (x[2].parse().unwrap(), y[2].parse().unwrap());
        assert!((rx - ry).abs() < 1e-6);
        let (sx, sy): (f64, f64) = (x[4].parse().unwrap(), y[4].parse().unwrap());
        assert!((sx - sy).abs() < 1e-3 * sx.abs().max(1.0), "{sx} {sy}");
    }
    let o = irdf(&["closed-form", "--source", "nonexistent.json"]);
    assert!(!o.status.success());
}

#[test]
fn source_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("src.json");
    std::fs::write(
        &path,
        r#"{
            "x_alphabet": ["0", "1"],
            "z_alphabet": ["0", "1"],
            "prior": [0.5, 0.5],
            "channel": [[0.85, 0.15], [0.15, 0.85]],
            "distortion": {"kind": "hamming"},
            "f": {"kind": "identity"}
        }"#,
    )
    .unwrap();
    let p = path.to_str().unwrap();
    let a = irdf(&["point", "--source", p, "--D", "0.3"]);
    let b = irdf(&["point", "--model", "bsc", "--beta", "0.15", "--D", "0.3"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    let out = dir.path().join("curve.csv");
    let o = irdf(&[
        "curve",
        "--source",
        p,
        "--points",
        "6",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert_eq!(csv_rows(&std::fs::read_to_string(&out).unwrap()).len(), 6);
}

#[test]
fn brute_never_beats_the_curve() {
    let o = irdf(&[
        "brute", "--model", "bsc", "--beta", "0.15", "--n", "1,2", "--m", "1,2",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let entries = v.as_array().unwrap();
    assert_eq!(entries.len(), 4);
    for e in entries {
        let avg = e["avg_distortion"].as_f64().unwrap();
        let reference = e["reference_distortion"].as_f64().unwrap();
        assert!(avg >= reference - 1e-12, "{e}");
    }
}

#[test]
fn subadd_reports_counterexample_for_quadratic() {
    let o = irdf(&["subadd", "--f", "quadratic", "--trials", "5000"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["all_passed"], false);
    let o = irdf(&["subadd", "--f", "sqrt", "--trials", "5000"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["all_passed"], true);
}

#[test]
fn bad_arguments_are_rejected() {
    assert!(!irdf(&["curve", "--f", "bogus"]).status.success());
    assert!(!irdf(&["curve", "--beta", "0.7"]).status.success());
    assert!(!irdf(&["curve", "--points", "1"]).status.success());
    assert!(!irdf_env(&["curve", "--points", "3"], "zero")
        .status
        .success());
}
