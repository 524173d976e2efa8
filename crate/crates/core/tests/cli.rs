use std::fs;
use std::path::Path;
use std::process::Command;

use kfree_core::cli::{load_config, run, EXIT_NUMERICAL, EXIT_SIZE_CAP, EXIT_USAGE};
use serde_json::Value;

fn kfree(args: &[&str]) -> i32 {
    let mut full = vec!["kfree"];
    full.extend_from_slice(args);
    run(full)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn enumerate_smallest_ensemble() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("enum.json");
    assert_eq!(kfree(&["enumerate", "--k", "2", "--alpha", "1", "--N", "5", "--output", out.to_str().unwrap()]), 0);
    let v = read_json(&out);
    let result = &v["result"];
    assert_eq!(result["count"], 8);
    let values: Vec<u64> = result["elements"].as_array().unwrap().iter().map(|e| e["value"].as_u64().unwrap()).collect();
    assert_eq!(values, [1, 2, 3, 5, 6, 10, 15, 30]);
    assert_eq!(result["elements"][7]["omega"], 3);
    assert!(v["version"].is_string());
}

#[test]
fn charfn_at_zero_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("phi.json");
    assert_eq!(kfree(&["charfn", "--N", "1000", "--lambda", "0,1.5", "--output", out.to_str().unwrap()]), 0);
    let text = fs::read_to_string(&out).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    let first = &v["result"]["values"][0];
    assert_eq!(first[0].as_f64(), Some(0.0));
    assert_eq!(first[1][0].as_f64(), Some(1.0));
    assert_eq!(first[1][1].as_f64(), Some(0.0));
    // floats carry 17 significant digits
    assert!(text.contains("1.0000000000000000e0"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.json");
    let o = out.to_str().unwrap();
    assert_eq!(kfree(&["enumerate", "--k", "4", "--N", "200", "--output", o]), EXIT_SIZE_CAP);
    assert_eq!(kfree(&["sum", "--N", "30", "--cutoff", "indicator", "--method", "spectral", "--output", o]), EXIT_USAGE);
    assert_eq!(kfree(&["sum", "--N", "30", "--cutoff", "triangle", "--output", o]), EXIT_USAGE);
    assert_eq!(kfree(&["enumerate", "--N", "5", "--format", "csv", "--output", o]), EXIT_USAGE);
    assert_eq!(kfree(&["enumerate", "--bogus"]), EXIT_USAGE);
    assert_eq!(kfree(&[]), EXIT_USAGE);
    assert_eq!(kfree(&["charfn", "--k", "1", "--N", "100", "--lambda", "1", "--output", o]), EXIT_USAGE);
    assert_eq!(kfree(&["sum", "--N", "30", "--cutoff", "gaussian", "--method", "spectral", "--R", "3", "--output", o]), EXIT_NUMERICAL);
}

#[test]
fn json_config_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.json");
    let second = dir.path().join("second.json");
    assert_eq!(
        kfree(&["sum", "--k", "3", "--alpha-re", "1", "--alpha-im", "0.5", "--N", "29", "--cutoff", "bump01", "--output", first.to_str().unwrap()]),
        0
    );
    let config = load_config(&first).unwrap();
    assert!(config.output.is_some());
    assert_eq!(kfree(&["--config", first.to_str().unwrap(), "--output", second.to_str().unwrap()]), 0);
    let (a, b) = (read_json(&first), read_json(&second));
    assert_eq!(a["result"], b["result"]);
    assert_eq!(a["config"]["command"], b["config"]["command"]);
}

#[test]
fn csv_config_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("regions.csv");
    let second = dir.path().join("again.csv");
    let args = ["regions", "--delta", "0.5", "--tau-points", "5", "--eta-points", "4", "--format", "csv"];
    let mut with_out = args.to_vec();
    with_out.extend(["--output", first.to_str().unwrap()]);
    assert_eq!(kfree(&with_out), 0);
    let text = fs::read_to_string(&first).unwrap();
    assert!(text.starts_with("# version: "));
    assert!(text.lines().nth(1).unwrap().starts_with("# config: "));
    assert!(text.contains("tau,eta,case"));
    assert_eq!(kfree(&["--config", first.to_str().unwrap(), "--output", second.to_str().unwrap()]), 0);
    let body = |t: &str| t.lines().filter(|l| !l.starts_with('#')).map(str::to_string).collect::<Vec<_>>();
    assert_eq!(body(&text), body(&fs::read_to_string(&second).unwrap()));
}

#[test]
fn config_and_subcommand_are_exclusive() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    fs::write(&path, "{}").unwrap();
    assert_eq!(kfree(&["--config", path.to_str().unwrap(), "regions"]), EXIT_USAGE);
    assert_eq!(kfree(&["--config", path.to_str().unwrap()]), EXIT_USAGE);
}

#[test]
fn example_command_reports_the_chain() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("example.json");
    assert_eq!(kfree(&["example", "--output", out.to_str().unwrap()]), 0);
    let v = read_json(&out);
    let text = v.to_string();
    assert!(text.contains("\"pass\":true"));
    assert!(text.contains("midpoint_sum"));
}

#[test]
fn appendix_command_checks_every_case() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("appendix.json");
    assert_eq!(kfree(&["appendix", "--output", out.to_str().unwrap()]), 0);
    let checks = read_json(&out)["result"]["checks"].as_array().unwrap().len();
    assert!(checks >= 11, "{checks}");
    assert_eq!(kfree(&["appendix", "--case", "J9,9,9", "--output", out.to_str().unwrap()]), EXIT_USAGE);
}

#[test]
fn binary_writes_to_stdout() {
    let output = Command::new(env!("CARGO_BIN_EXE_kfree"))
        .args(["partition", "--N", "10,100"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let v: Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(v["result"].as_array().unwrap().len(), 2);
    assert_eq!(v["result"][0]["N"], 10);
    let failed = Command::new(env!("CARGO_BIN_EXE_kfree")).args(["enumerate", "--k", "4", "--N", "200"]).output().unwrap();
    assert_eq!(failed.status.code(), Some(EXIT_SIZE_CAP));
    assert!(!failed.stderr.is_empty());
}
