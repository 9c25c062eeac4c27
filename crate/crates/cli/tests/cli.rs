use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cosetmac"))
        .args(args)
        .output()
        .expect("run binary")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn records(o: &Output) -> Vec<Value> {
    stdout(o)
        .lines()
        .map(|l| serde_json::from_str(l).expect("one JSON object per line"))
        .collect()
}

#[test]
fn rates_tables_show_quoted_constants() {
    let o = run(&["rates", "--example", "1"]);
    assert!(o.status.success());
    let t = stdout(&o);
    for needle in ["0.4096", "0.3413", "0.43067", "MATCH"] {
        assert!(t.contains(needle), "missing {needle} in\n{t}");
    }
    let t = stdout(&run(&["rates", "--example", "3"]));
    assert!(t.contains("0.479") && t.contains("0.3022"), "{t}");
    let t = stdout(&run(&["rates", "--example", "4"]));
    assert!(t.contains("0.4648") && t.contains("DIFFERS"), "{t}");
}

#[test]
fn rates_records_have_stable_keys() {
    let r = records(&run(&["rates", "--example", "2", "--format", "records"]));
    assert_eq!(r.len(), 1);
    let r = &r[0];
    for key in ["cmd", "params", "results", "reference"] {
        assert!(r.get(key).is_some(), "{key}");
    }
    assert_eq!(r["cmd"], "rates");
    assert_eq!(r["reference"]["lcc_rate"]["flag"], "MATCH");
    assert_eq!(r["reference"]["alpha"]["flag"], "DIFFERS");
}

#[test]
fn bad_inputs_exit_two() {
    let dir = std::env::temp_dir().join(format!("cosetmac-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.txt");
    std::fs::write(&bad, "[source]\nq = 4\n").unwrap();
    assert_eq!(run(&["rates", "--channel", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["rates", "--instance", "/nonexistent/file"]).status.code(), Some(2));
    assert_eq!(run(&["rates", "--example", "9"]).status.code(), Some(2));
    assert_eq!(run(&["rates"]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--preset", "nope"]).status.code(), Some(2));
    assert_eq!(
        run(&["simulate", "--preset", "adder", "--n", "8,12", "--l", "1,2,3"]).status.code(),
        Some(2)
    );
    assert_eq!(run(&["regions", "--example", "1", "--lambda", "-1"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn instance_files_round_trip_through_rates() {
    let dir = std::env::temp_dir().join(format!("cosetmac-rt-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("ex3.txt");
    std::fs::write(&path, cosetmac::model::save_instance(&cosetmac::model::builtin_example(3).unwrap())).unwrap();
    let from_file = records(&run(&["rates", "--instance", path.to_str().unwrap(), "--format", "records"]));
    let builtin = records(&run(&["rates", "--example", "3", "--format", "records"]));
    assert_eq!(from_file[0]["results"], builtin[0]["results"]);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn simulate_noiseless_adder_is_exact_and_repeatable() {
    let args = [
        "simulate", "--preset", "adder", "--n", "8", "--k", "0", "--l", "8", "--eta1", "2", "--trials", "500",
        "--seed", "7", "--format", "records",
    ];
    let a = run(&args);
    assert!(a.status.success());
    let r = records(&a);
    assert_eq!(r[0]["results"]["errors"], 0);
    assert_eq!(r[0]["params"]["seed"], 7);
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
    let mut jobs = args.to_vec();
    jobs.extend(["--jobs", "3"]);
    assert_eq!(run(&jobs).stdout, a.stdout);
}

#[test]
fn simulate_sweep_reports_trend() {
    let o = run(&[
        "simulate", "--preset", "bsc-adder", "--n", "8,12,16", "--k", "0", "--l", "4,6,8", "--eta1", "3",
        "--trials", "300", "--seed", "2", "--format", "records",
    ]);
    assert!(o.status.success());
    let r = records(&o);
    assert_eq!(r.len(), 4);
    let summary = &r[3];
    assert_eq!(summary["cmd"], "simulate-summary");
    let rates: Vec<f64> = summary["results"]["error_rates"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let expect = if rates.windows(2).all(|w| w[1] <= w[0]) { "nonincreasing" } else { "not monotone" };
    assert_eq!(summary["results"]["trend"], expect);
    for rec in &r[..3] {
        let cats = rec["results"]["categories"].as_object().unwrap();
        let total: u64 = cats.values().map(|v| v.as_u64().unwrap()).sum();
        assert_eq!(total, 300);
    }
}

#[test]
fn verify_exit_codes() {
    let o = run(&["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(run(&["verify", "--q", "3", "--n", "1", "--k", "1", "--l", "1"]).status.code(), Some(0));
    let bad = run(&["verify", "--corrupt-bias"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("FAIL"));
    assert_eq!(run(&["verify", "--n", "4", "--k", "2", "--l", "2"]).status.code(), Some(2));
    let r = records(&run(&["verify", "--format", "records"]));
    assert_eq!(r.len(), 2);
    assert!(r.iter().all(|x| x["results"]["passed"] == true));
}

#[test]
fn regions_verdicts() {
    let feasible = |args: &[&str]| {
        let mut a = vec!["regions", "--example", "1", "--format", "records"];
        a.extend_from_slice(args);
        let o = run(&a);
        assert!(o.status.success());
        records(&o)[0]["results"]["feasible"].as_bool().unwrap()
    };
    assert!(feasible(&["--lambda", "0.43"]));
    assert!(!feasible(&["--lambda", "0.50"]));
    assert!(feasible(&["--lambda", "0.3", "--mode", "separation"]));
    assert!(!feasible(&["--lambda", "0.4", "--mode", "separation"]));
    let t = stdout(&run(&["regions", "--example", "1", "--lambda", "0.43"]));
    assert!(t.contains("beta_S") && t.contains("beta_C") && t.contains("witness"), "{t}");
}
