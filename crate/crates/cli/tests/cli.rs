use std::process::{Command, Output};

fn cqa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cqa"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn exact_polynomial_passes_check() {
    let o = cqa(&["check", "--k", "3", "--poly", "2,-1,5", "--noise", "none"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.starts_with("equation,k,max_residual,x,y,scale,pass\n"));
    assert!(out.trim_end().ends_with(",true"));
}

#[test]
fn quartic_fails_check() {
    let o = cqa(&["check", "--poly", "0,0,0", "--noise", "power_scaled:1:0", "--phi", "sum:4:0"]);
    // |x|^4 cos(ωx) is not a solution
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn invalid_input_exits_with_two() {
    for args in [
        &["check", "--k", "0"][..],
        &["experiment", "--p", "1.5"],
        &["experiment", "--grid", "5:-5:10"],
        &["experiment", "--noise", "loud:1:1"],
        &["experiment", "--poly", "1,2"],
        &["bounds", "--kind", "nonsense"],
        &["experiment", "--config", "/nonexistent/config.json"],
    ] {
        let o = cqa(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn default_experiment_passes_and_is_deterministic() {
    let args = ["experiment", "--noise", "bounded_smooth:0.01:7", "--grid", "-5:5:41"];
    let a = cqa(&args);
    let b = cqa(&args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let out = stdout(&a);
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "x,f,A,Q,C,residual,bound,margin");
    assert_eq!(lines.count(), 41);
}

#[test]
fn json_output_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let o = cqa(&[
        "experiment",
        "--grid",
        "-2:2:9",
        "--format",
        "json",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["pass"], true);
    assert_eq!(v["rows"].as_array().unwrap().len(), 9);
    assert_eq!(v["directions"], serde_json::json!([-1, -1, -1]));
    assert!(v["theta_used"].as_f64().unwrap() > 0.0);
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, r#"{"k": 3, "grid": {"count": 5}, "noise": {"kind": "none", "amplitude": 0.0}}"#).unwrap();
    let o = cqa(&[
        "decompose",
        "--k",
        "2",
        "--grid",
        "-1:1:101",
        "--format",
        "json",
        "--config",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["config"]["k"], 3);
    assert_eq!(v["config"]["grid"]["min"], -1.0);
    assert_eq!(v["rows"].as_array().unwrap().len(), 5);

    std::fs::write(&path, r#"{"bogus": 1}"#).unwrap();
    let o = cqa(&["decompose", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bounds_cross_check_table() {
    let o = cqa(&["bounds", "--k", "2", "--p", "1", "--phi", "constant", "--grid", "-1:1:3"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let delta_a = out.lines().find(|l| l.starts_with("delta_a,")).unwrap();
    let closed: f64 = delta_a.split(',').nth(2).unwrap().parse().unwrap();
    assert!((closed - 34.0).abs() < 1e-12);

    let o = cqa(&["bounds", "--phi", "sum:3:3", "--kind", "quadratic", "--format", "json", "--grid", "-1:1:3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let b = v["table"]["per_x"][0]["bound"].as_f64().unwrap();
    assert!((b - 0.125).abs() < 1e-14);
}

#[test]
fn f64_precision_flag() {
    let o = cqa(&["decompose", "--noise", "none", "--grid", "-3:3:7", "--precision", "f64"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("x,f,A,Q,C,residual\n"));
}
