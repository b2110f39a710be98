use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cyclic-bounds"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("bad json ({e}): {}", stdout(o)))
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

/// `(k/n) sum_i x_i / (x_{i+1} + ... + x_{i+k})`, straight from the definition.
fn normalized_sum(x: &[f64], k: usize) -> f64 {
    let n = x.len();
    let s: f64 = (0..n).map(|i| x[i] / (1..=k).map(|j| x[(i + j) % n]).sum::<f64>()).sum();
    s * k as f64 / n as f64
}

#[test]
fn bounds_csv_lower_column() {
    let o = run(&["bounds", "--k-max", "7", "--format", "csv"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(!text.contains('\r'));
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "k,lower,upper,gap");
    assert_eq!(lines.len(), 1 + 6 + 1);
    let want = [0.82843, 0.77976, 0.75683, 0.74349, 0.73477, 0.72863];
    for (line, w) in lines[1..7].iter().zip(want) {
        let lower: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((lower - w).abs() < 5e-6, "{line}");
    }
    assert!(lines[7].starts_with("inf,"));
}

#[test]
fn bounds_json_upper_column() {
    let v = json(&run(&["bounds", "--k-max", "4", "--format", "json"]));
    let uppers: Vec<f64> = v.as_array().unwrap().iter().map(|r| num(&r["upper"])).collect();
    for (u, w) in uppers.iter().zip([0.98913, 0.97793, 0.96994]) {
        assert!((u - w).abs() < 5e-6);
    }
    assert_eq!(v[3]["k"], "inf");
}

#[test]
fn bounds_usage_errors() {
    assert_eq!(run(&["bounds", "--k-max", "1"]).status.code(), Some(2));
    assert_eq!(run(&["bounds", "--k-max", "3", "--tol", "0.1"]).status.code(), Some(2));
    assert_eq!(run(&["bounds", "--k-max", "3", "--tol", "0"]).status.code(), Some(2));
    assert_eq!(run(&["bounds"]).status.code(), Some(2));
    assert_eq!(run(&["bounds", "--k-max", "3", "--format", "xml"]).status.code(), Some(2));
    assert_eq!(run(&["nonsense"]).status.code(), Some(2));
}

#[test]
fn tangent_outputs() {
    let v = json(&run(&["tangent", "--k", "2", "--format", "json"]));
    assert!((num(&v["gamma"]) - 0.989133).abs() < 1e-6);
    assert_eq!(v["residuals"].as_array().unwrap().len(), 4);
    let v = json(&run(&["tangent", "--k", "inf", "--format", "json"]));
    assert_eq!(v["idx"], "inf");
    assert!((num(&v["gamma"]) - 0.930498).abs() < 1e-6);

    let o = run(&["tangent", "--k", "3", "--tol", "1e-12"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let gamma_line = text.lines().find(|l| l.starts_with("gamma")).unwrap();
    let gamma: f64 = gamma_line.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!((gamma - 0.977927798177).abs() < 1e-12);
    for key in ["a ", "b ", "lambda", "mu", "residuals"] {
        assert!(text.lines().any(|l| l.starts_with(key)), "{key}");
    }

    let csv = stdout(&run(&["tangent", "--k", "4", "--format", "csv"]));
    assert!(csv.starts_with("k,a,b,gamma,lambda,mu\n4,"));
}

#[test]
fn tangent_usage_errors() {
    assert_eq!(run(&["tangent", "--k", "1"]).status.code(), Some(2));
    assert_eq!(run(&["tangent", "--k", "banana"]).status.code(), Some(2));
    assert_eq!(run(&["tangent", "--k", "-3"]).status.code(), Some(2));
}

#[test]
fn witness_file_recomputes() {
    let dir = tempfile::tempdir().unwrap();
    for (k, eps, limit) in [(2usize, "0.01", 0.99913), (3, "0.1", 1.07793)] {
        let path = dir.path().join(format!("w{k}.txt"));
        let o =
            run(&["witness", "--k", &k.to_string(), "--eps", eps, "--out", path.to_str().unwrap(), "--format", "json"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let v = json(&o);
        assert_eq!(v["out_encoding"], "linear");
        let text = std::fs::read_to_string(&path).unwrap();
        let x: Vec<f64> = text.lines().map(|l| l.parse().unwrap()).collect();
        assert_eq!(x.len() as u64, v["n"].as_u64().unwrap());
        let recomputed = normalized_sum(&x, k);
        assert!(recomputed < limit, "{recomputed}");
        let reported = num(&v["value"]);
        assert!((recomputed - reported).abs() < 1e-12, "{recomputed} vs {reported}");
        assert!(num(&v["value"]) <= num(&v["analytic_bound"]));
        assert_eq!(v["certified"], true);
    }
}

#[test]
fn witness_capacity_and_usage() {
    let o = run(&["witness", "--k", "2", "--eps", "1e-9"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("exceeds the cap"));
    assert_eq!(run(&["witness", "--k", "1", "--eps", "0.1"]).status.code(), Some(2));
    assert_eq!(run(&["witness", "--k", "2", "--eps", "0"]).status.code(), Some(2));
    assert_eq!(run(&["witness", "--k", "2", "--eps", "0.1", "--cap", "10"]).status.code(), Some(1));
}

#[test]
fn witness_log_encoding() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.txt");
    let o = run(&["witness", "--k", "4", "--eps", "1e-4", "--format", "json", "--out", path.to_str().unwrap()]);
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["route"], "log");
    assert_eq!(v["out_encoding"], "log");
    let lines = std::fs::read_to_string(&path).unwrap();
    assert_eq!(lines.lines().count() as u64, v["n"].as_u64().unwrap());
    assert_eq!(lines.lines().next(), Some("-inf"));
}

#[test]
fn minimize_examples() {
    let v = json(&run(&["minimize", "--n", "3", "--k", "2", "--seed", "7"]));
    assert!((num(&v["value"]) - 1.0).abs() < 1e-6);
    assert!((num(&v["certified_floor"]) - 0.828427).abs() < 1e-6);
    let v = json(&run(&["minimize", "--n", "5", "--k", "1"]));
    assert!((num(&v["value"]) - 1.0).abs() < 1e-6);
    let v = json(&run(&["minimize", "--n", "12", "--k", "2", "--restarts", "50"]));
    assert!((num(&v["value"]) - 1.0).abs() < 1e-4);
    assert_eq!(v["x_best"].as_array().unwrap().len(), 12);
}

#[test]
fn minimize_is_deterministic_across_thread_counts() {
    let args = ["minimize", "--n", "8", "--k", "3", "--restarts", "12", "--seed", "5"];
    let a = bin().args(args).env("CYCLIC_BOUNDS_THREADS", "1").output().unwrap();
    let b = bin().args(args).env("CYCLIC_BOUNDS_THREADS", "4").output().unwrap();
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
    let bad = bin().args(args).env("CYCLIC_BOUNDS_THREADS", "zero").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn minimize_usage_errors() {
    assert_eq!(run(&["minimize", "--n", "2", "--k", "3"]).status.code(), Some(2));
    assert_eq!(run(&["minimize", "--n", "2", "--k", "0"]).status.code(), Some(2));
}

#[test]
fn verify_suites() {
    let a = run(&["verify", "--suite", "fast", "--seed", "11"]);
    assert!(a.status.success());
    let v = json(&a);
    assert_eq!(v["passed"], true);
    assert!(v["groups"].as_array().unwrap().iter().any(|g| g["name"].as_str().unwrap().starts_with("g_monotone")));

    let b = run(&["verify", "--suite", "all", "--seed", "11"]);
    assert!(b.status.success());
    let v = json(&b);
    let names: Vec<_> =
        v["groups"].as_array().unwrap().iter().map(|g| g["name"].as_str().unwrap().to_string()).collect();
    assert!(names.iter().any(|n| n == "block_floor"));
    assert!(names.iter().any(|n| n == "gradient_vs_finite_difference"));
    assert!(v["total_cases"].as_u64().unwrap() >= 10_000);

    let again = run(&["verify", "--suite", "all", "--seed", "11"]);
    assert_eq!(b.stdout, again.stdout);
    assert_eq!(run(&["verify", "--suite", "slow"]).status.code(), Some(2));
}
