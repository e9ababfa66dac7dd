use std::path::PathBuf;
use std::process::{Command, Output};

use negmoment::qstate;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_negmoment"));
    c.env_remove("NEG_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn temp(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("negmoment-cli-{}-{name}", std::process::id()))
}

const SMALL: [&str; 10] = [
    "run",
    "--dims",
    "2x2",
    "--n-u",
    "4,8",
    "--n-m",
    "6,inf",
    "--repetitions",
    "3",
    "--p=0.2",
];

#[test]
fn plan_prints_budget() {
    let o = run(&["plan", "--dim", "25", "--epsilon", "0.1"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "quantity,value\nn_m,9\nn_u,100\nn_total,900\n");
}

#[test]
fn sweep_csv_is_reproducible_across_threads() {
    let a = run(&[&SMALL[..], &["--seed", "11", "--threads", "1"]].concat());
    let b = run(&[&SMALL[..], &["--seed", "11", "--threads", "3"]].concat());
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let mut lines = text.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("family,scheme,d_a,d_b,p,n_m,n_u"));
    assert_eq!(lines.count(), 4);
}

#[test]
fn seed_env_fallback() {
    let flag = run(&[&SMALL[..], &["--seed", "42"]].concat());
    let env = bin().args(SMALL).env("NEG_SEED", "42").output().unwrap();
    let other = run(&[&SMALL[..], &["--seed", "43"]].concat());
    assert_eq!(flag.stdout, env.stdout);
    assert_ne!(flag.stdout, other.stdout);
}

#[test]
fn config_file_with_flag_override() {
    let cfg = temp("sweep.cfg");
    std::fs::write(
        &cfg,
        "# sweep\n[sweep]\nscheme = correlation\ndims = 2x2\nn_u = 4\nn_m = 10\nrepetitions = 2\n[output]\nformat = jsonl\n",
    )
    .unwrap();
    let out = temp("rows.csv");
    let o = run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--format",
        "csv",
        "--n-u",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let row = text.lines().nth(1).unwrap();
    assert!(
        row.starts_with("noisy_bell,correlation,2,2,0.3,10,5,2,"),
        "{row}"
    );

    let o = run(&["run", "--config", cfg.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).lines().next().unwrap()).unwrap();
    assert_eq!(v["scheme"], "correlation");
    assert!(v["mean_abs_error"].as_f64().unwrap() >= 0.0);
    assert!(v.get("wall_time_s").is_none());
}

#[test]
fn invalid_spec_names_the_key() {
    let o = run(&["run", "--repetitions", "0"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("sweep.repetitions"));
    let o = run(&["run", "--n-m", "50,2"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("sweep.n_m[1]"));
}

#[test]
fn timing_column_is_optional() {
    let o = run(&[&SMALL[..], &["--timing"]].concat());
    assert!(stdout(&o).lines().next().unwrap().ends_with(",wall_time_s"));
}

#[test]
fn verify_exit_status() {
    let o = run(&["verify", "tables"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("[tables] PASS"));
    let o = run(&["verify", "nosuch"]);
    assert!(!o.status.success());
    let o = run(&["verify", "bell", "--format", "jsonl"]);
    assert!(o.status.success());
    for line in stdout(&o).lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["pass"], true);
    }
}

#[test]
fn oracle_reads_state_file() {
    let path = temp("bell.json");
    std::fs::write(&path, qstate::bell_state(2).unwrap().to_json()).unwrap();
    let o = run(&["oracle", path.to_str().unwrap(), "--format", "jsonl"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!((v["tr_rho3"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((v["tr_pt3"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    assert!((v["log2_negativity"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}
