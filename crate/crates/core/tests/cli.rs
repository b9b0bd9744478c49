use std::path::Path;
use std::process::{Command, Output};

use censored_lpb::experiment::{read_results, RESULT_HEADER, SUMMARY_HEADER};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_censored-lpb"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn results_header() -> String {
    RESULT_HEADER.join(",")
}

#[test]
fn simulate_shape_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"setting": 1, "n_train": 200, "n_calib": 200, "n_test": 200,
            "methods": ["IPCW"], "estimators": ["cox"], "replications": 2, "master_seed": 4}"#,
    );
    let a = run(&["simulate", "--config", &cfg]);
    let b = run(&["simulate", "--config", &cfg]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let rows = read_results(a.stdout.as_slice(), "stdout").unwrap();
    assert_eq!(rows.len(), 2);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r.replication, i);
        assert_eq!((r.method.as_str(), r.metric.as_str()), ("IPCW", "oracle"));
        assert!((0.0..=1.0).contains(&r.coverage.unwrap()));
    }

    let c = run(&["simulate", "--config", &cfg, "--seed", "5"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn zero_replications_give_an_empty_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"setting": 1, "methods": ["AIPCW"], "replications": 0}"#);
    let out = dir.path().join("r.csv");
    let o = run(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(out).unwrap(), results_header() + "\n");
}

#[test]
fn failures_become_error_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("x1,time,event\n");
    for i in 0..30 {
        csv.push_str(&format!("{},{},0\n", i % 3, 1.0 + i as f64));
    }
    let data = write(dir.path(), "d.csv", &csv);
    let cfg = write(
        dir.path(),
        "c.json",
        &format!(
            r#"{{"input_csv": "{data}", "methods": ["IPCW", "OR", "QR_T"], "estimators": ["cox"], "replications": 3}}"#
        ),
    );
    let o = run(&["evaluate", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_results(o.stdout.as_slice(), "stdout").unwrap();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.flag.starts_with("error:") && r.coverage.is_none()));
    for rep in 0..3 {
        for m in ["IPCW", "OR", "QR_T"] {
            assert!(rows.iter().any(|r| r.replication == rep && r.method == m), "{rep} {m}");
        }
    }
}

#[test]
fn invalid_configs_fail_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"setting": 1, "methods": ["NOPE"]}"#);
    let o = run(&["simulate", "--config", &cfg]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("NOPE"));
    let o = run(&["simulate", "--config", &dir.path().join("missing.json").to_string_lossy()]);
    assert!(!o.status.success());
}

#[test]
fn aggregate_examples() {
    let dir = tempfile::tempdir().unwrap();
    let h = results_header();
    let two = write(
        dir.path(),
        "a.csv",
        &format!("{h}\n0,1,IPCW,cox,oracle,0.1,0.2,0.88,1.0,1.0,100,\n1,1,IPCW,cox,oracle,0.1,0.2,0.92,3.0,3.0,100,\n"),
    );
    let o = run(&["aggregate", &two]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), SUMMARY_HEADER.join(","));
    let f: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&f[..4], &["IPCW", "cox", "oracle", "2"]);
    assert!((f[4].parse::<f64>().unwrap() - 0.90).abs() < 1e-12);
    assert!((f[5].parse::<f64>().unwrap() - 0.0283).abs() < 5e-5);
    assert_eq!(f[8].parse::<f64>().unwrap(), 2.0);
    assert!(lines.next().is_none());

    let one = write(dir.path(), "b.csv", &format!("{h}\n0,1,OR,cox,oracle,0.1,0.1,0.9,1.0,1.0,10,\n"));
    let text = String::from_utf8(run(&["aggregate", &one]).stdout).unwrap();
    let f: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!((f[4], f[5]), ("0.9", "0.0"));

    let empty = write(dir.path(), "e.csv", &format!("{h}\n"));
    let text = String::from_utf8(run(&["aggregate", &empty]).stdout).unwrap();
    assert_eq!(text, SUMMARY_HEADER.join(",") + "\n");

    let bad = write(dir.path(), "x.csv", "a,b\n1,2\n");
    let o = run(&["aggregate", &bad]);
    assert!(!o.status.success());
}

#[test]
fn generate_then_calibrate() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let o = run(&["generate", "--setting", "1", "--n", "600", "--seed", "3", "--out", data.to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&data).unwrap();
    assert_eq!(text.lines().next().unwrap(), "x1,x2,time,event");
    assert_eq!(text.lines().count(), 601);

    let result = dir.path().join("r.json");
    let o = run(&["calibrate", "--data", data.to_str().unwrap(), "--result", result.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let bounds = String::from_utf8(o.stdout).unwrap();
    assert_eq!(bounds.lines().next().unwrap(), "index,split,lpb");
    assert_eq!(bounds.lines().count(), 601);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(result).unwrap()).unwrap();
    assert_eq!(json["method"], "AIPCW");
    let b = json["beta_hat"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&b));
}
