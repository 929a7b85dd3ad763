use std::process::{Command, Output};

fn ordresp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ordresp"))
        .args(args)
        .env_remove("ORDRESP_SEED")
        .output()
        .expect("run ordresp")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn number(args: &[&str]) -> f64 {
    let o = ordresp(args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    stdout(&o).trim().parse().unwrap()
}

#[test]
fn analytic_values() {
    let d = number(&["analytic", "--formula", "core-delta", "--n", "99", "--p", "0.999"]);
    assert!((d - 11.502_379_973_686).abs() < 1e-9);
    assert_eq!(number(&["analytic", "--formula", "psi", "--n", "114"]), 0.0);
    let h = number(&["analytic", "--formula", "harmonic", "--n", "99"]);
    assert!((h - 5.177_377_517_639_62).abs() < 1e-12);
    let c = number(&["analytic", "--formula", "cutoff", "--one-minus-p", "1e-9"]);
    assert_eq!(c, 24.0);
    let q = number(&["analytic", "--formula", "core-prob", "--n", "2", "--delta", "0.6931471805599453"]);
    assert!((q - 0.625).abs() < 1e-12);
}

#[test]
fn missing_formula_input_is_an_error() {
    let o = ordresp(&["analytic", "--formula", "core-delta", "--n", "5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--p"));
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(ordresp(&["simulate", "--protocol", "nope", "--n", "3"]).status.code(), Some(1));
    assert_eq!(ordresp(&["simulate", "--protocol", "core", "--n", "3"]).status.code(), Some(1));
    assert_eq!(ordresp(&["frobnicate"]).status.code(), Some(1));
    let help = ordresp(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(stdout(&help).contains("seconds"));
}

#[test]
fn single_run_record_and_trace() {
    let trace = std::env::temp_dir().join(format!("ordresp-trace-{}.tsv", std::process::id()));
    let o = ordresp(&[
        "simulate", "--protocol", "pa-core", "--n", "2", "--delta", "2", "--constant-delay", "1",
        "--offsets", "5,-3,100", "--trace", trace.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let rec: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(rec["messages_sent"], 9);
    let times = rec["action_times"].as_array().unwrap();
    assert!((times[2].as_f64().unwrap() - 3.960_516_286_937_094).abs() < 1e-9);
    let tsv = std::fs::read_to_string(&trace).unwrap();
    std::fs::remove_file(&trace).ok();
    assert_eq!(tsv.lines().next(), Some("1.000000000\t1\ttrigger"));
}

#[test]
fn pa_core_with_one_worker_warns() {
    let o = ordresp(&["simulate", "--protocol", "pa-core", "--n", "1", "--delta", "3"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}

#[test]
fn estimates_are_reproducible_across_workers() {
    let run = |w: &str| {
        let o = ordresp(&[
            "simulate", "--protocol", "core-hybrid", "--n", "10", "--p", "0.99", "--trials", "500", "--seed", "7",
            "--workers", w,
        ]);
        assert!(o.status.success());
        stdout(&o)
    };
    let one = run("1");
    assert_eq!(one, run("4"));
    assert!(one.starts_with("name,n,lambda,delta,trials,point,stderr,ci_low,ci_high,bound,verdict\n"));
    assert_eq!(one.lines().count(), 3);
}

#[test]
fn seed_comes_from_environment() {
    let args = ["simulate", "--protocol", "core", "--n", "4", "--delta", "1"];
    let with_env = Command::new(env!("CARGO_BIN_EXE_ordresp")).args(args).env("ORDRESP_SEED", "99").output().unwrap();
    let explicit = ordresp(&[&args[..], &["--seed", "99"]].concat());
    let default = ordresp(&args);
    assert_eq!(with_env.stdout, explicit.stdout);
    assert_ne!(with_env.stdout, default.stdout);
}

#[test]
fn compare_passes_and_reports_verdicts() {
    let o = ordresp(&["compare", "--protocol", "core", "--n", "20", "--p", "0.99", "--trials", "2000", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let rows: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r["verdict"] == "PASS"));
}

#[test]
fn compare_rejects_non_exponential_delays() {
    let o = ordresp(&["compare", "--protocol", "core", "--n", "20", "--delta", "5", "--constant-delay", "1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn cutoff_table() {
    let out = tempfile_path("cutoff.csv");
    let o = ordresp(&["cutoff", "--p", "0.5", "--one-minus-p", "1e-9", "--output", out.to_str().unwrap()]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(&out).unwrap();
    std::fs::remove_file(&out).ok();
    assert_eq!(csv, "one_minus_p,p,cutoff_n\n0.5,0.5,1\n1e-9,0.999999999,24\n");
}

#[test]
fn sync_experiment_rows() {
    let o = ordresp(&["sync-experiment", "--n", "500", "--trials", "200"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("sync-independent.pairwise,500,"));
    let o = ordresp(&["sync-experiment", "--n", "1", "--trials", "200"]);
    assert_eq!(o.status.code(), Some(1));
}

fn tempfile_path(name: &str) -> std::path::PathBuf {
    std::env::temp_dir().join(format!("ordresp-{}-{name}", std::process::id()))
}
