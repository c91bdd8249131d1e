use std::path::PathBuf;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anticonc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout(o)).unwrap()
}

fn scratch(name: &str, text: &str) -> PathBuf {
    let p = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn exact_estimate_and_config_echo() {
    let o = run(&[
        "estimate",
        "--dist",
        "rademacher",
        "--alpha",
        "1,1",
        "--beta",
        "1,-1",
        "--method",
        "exact",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["result"]["value"].as_f64(), Some(0.5));
    assert_eq!(v["config"]["dist"]["family"], "rademacher");
    assert_eq!(v["config"]["enum_limit"], 16_777_216);
    assert_eq!(v["provenance"]["tool"], "anticonc");
    let text = stdout(&o);
    let pos: Vec<usize> = ["provenance", "command", "statement", "config", "result", "rows"]
        .iter()
        .map(|k| text.find(&format!("\n  \"{k}\":")).unwrap())
        .collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]), "{pos:?}");
}

#[test]
fn lcd_closed_case() {
    let o = run(&["lcd", "--alpha", "1,1", "--gamma", "0.5"]);
    assert!(o.status.success());
    let t = json(&o)["result"]["theta_star"].as_f64().unwrap();
    assert!((t - 10.0 / 11.0).abs() < 1e-8, "{t}");
}

#[test]
fn flags_override_config_file() {
    let cfg = scratch("override.toml", "alpha = [3.0, 4.0]\ngamma = 0.5\nnormalize = true\n");
    let o = run(&["lcd", "--config", cfg.to_str().unwrap(), "--gamma", "0.25"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["config"]["gamma"].as_f64(), Some(0.25));
    assert_eq!(v["config"]["normalize"], true);
    assert_eq!(v["config"]["alpha"][1].as_f64(), Some(4.0));
}

#[test]
fn unknown_config_key_is_exit_2_with_path() {
    let cfg = scratch("unknown.toml", "alpha = [1.0]\ngamma = 0.5\ngama = 1.0\n");
    let o = run(&["lcd", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.starts_with("error[config] exit=2:") && e.contains("gama"), "{e}");
    assert_eq!(e.lines().count(), 1);
}

#[test]
fn invalid_distribution_parameter_names_the_key() {
    let d = scratch("bad-laplace.toml", "family = \"laplace\"\nb = -1.0\n");
    let o = run(&["estimate", "--dist", d.to_str().unwrap(), "--alpha", "1", "--beta", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dist.b"), "{}", stderr(&o));
}

#[test]
fn bad_vector_entry_is_exit_2() {
    let o = run(&["lcd", "--alpha", "1,x", "--gamma", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alpha[1]"));
}

#[test]
fn infeasible_enumeration_is_exit_3() {
    let ones = vec!["1"; 40].join(",");
    let o = run(&[
        "estimate",
        "--dist",
        "rademacher",
        "--alpha",
        &ones,
        "--beta",
        &ones,
        "--method",
        "exact",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("--method mc"));
}

#[test]
fn coarse_grid_is_exit_4() {
    let o = run(&["levelset", "--density", "gaussian", "--grid", "11"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).starts_with("error[resolution] exit=4:"));
}

#[test]
fn monte_carlo_is_reproducible_and_thread_independent() {
    let args = [
        "estimate",
        "--dist",
        "gaussian",
        "--alpha",
        "1,0.5,-2",
        "--beta",
        "0.3,0.1,0.2",
        "--method",
        "mc",
        "--samples",
        "20000",
        "--seed",
        "9",
    ];
    let a = run(&args);
    let mut one = vec!["--threads", "1"];
    one.extend_from_slice(&args);
    let b = run(&one);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn report_aggregates_rows_into_csv() {
    let a = run(&["levelset", "--density", "gaussian", "--grid", "401"]);
    let b = run(&["levelset", "--density", "uniform-disk", "--grid", "401", "--theta", "0.3"]);
    assert!(a.status.success() && b.status.success());
    let pa = scratch("ls-a.json", &stdout(&a));
    let pb = scratch("ls-b.json", &stdout(&b));
    let o = run(&["report", "--format", "csv", pa.to_str().unwrap(), pb.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = stdout(&o);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "scenario,lhs,rhs,ratio,pass");
    assert_eq!(lines.len(), 1 + 3 + 4);
    assert!(lines[1].starts_with("gaussian/inradius,"));
    assert!(lines[7].starts_with("uniform-disk/sector,"));
}

#[test]
fn report_rejects_foreign_json() {
    let p = scratch("foreign.json", "{\"x\": 1}");
    let o = run(&["report", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(":rows"));
}

#[test]
fn stress_trace_is_monotone() {
    let o = run(&[
        "stress",
        "--dist",
        "rademacher",
        "--n",
        "4",
        "--theorem",
        "conjecture",
        "--restarts",
        "2",
        "--steps",
        "30",
        "--seed",
        "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(&o);
    let trace = v["result"]["trace"].as_array().unwrap();
    let r: Vec<f64> = trace.iter().map(|t| t["ratio"].as_f64().unwrap()).collect();
    assert!(r.windows(2).all(|w| w[1] >= w[0]), "{r:?}");
    assert_eq!(v["config"]["dist"]["family"], "rademacher");
}
