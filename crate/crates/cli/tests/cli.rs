use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bivex(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bivex"))
        .args(args)
        .current_dir(dir)
        .env_remove("BIVEX_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &TempDir, name: &str, json: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, json).unwrap();
    p.display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Data rows of the first table on stdout, split into fields.
fn rows(o: &Output) -> (Vec<String>, Vec<Vec<String>>) {
    let text = stdout(o);
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines.next().unwrap().split(',').map(str::to_string).collect();
    let body = lines.take_while(|l| !l.starts_with('#')).map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, body)
}

fn field(header: &[String], row: &[String], name: &str) -> f64 {
    let i = header.iter().position(|h| h == name).unwrap();
    row[i].parse().unwrap()
}

const VALID: &str = r#"{"model": {"nu1": 0.5, "nu2": 0.5, "nu12": 1.5, "rho": 0.4, "dim_n": 1}}"#;
const INVALID: &str = r#"{"model": {"nu1": 0.5, "nu2": 0.5, "nu12": 1.5, "rho": 0.6, "dim_n": 1}}"#;
const TOUCHING: &str = r#"{"domain": {"a1": [{"lo": [0], "hi": [1]}], "a2": [{"lo": [1], "hi": [2]}]}}"#;

#[test]
fn validate_exit_codes() {
    let d = TempDir::new().unwrap();
    let ok = bivex(d.path(), &["validate", "-c", &write_config(&d, "ok.json", VALID)]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));

    let bad = bivex(d.path(), &["validate", "-c", &write_config(&d, "bad.json", INVALID)]);
    assert_eq!(bad.status.code(), Some(1));
    let (h, body) = rows(&bad);
    let failed: Vec<&Vec<String>> = body.iter().filter(|r| r[h.iter().position(|c| c == "passed").unwrap()] == "false").collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0][0], "validity");
    assert!(String::from_utf8_lossy(&bad.stderr).contains("FAIL validity"));

    let malformed = bivex(d.path(), &["validate", "-c", &write_config(&d, "m.json", "{\"model\": ")]);
    assert_eq!(malformed.status.code(), Some(2));
    let unknown = bivex(d.path(), &["validate", "-c", &write_config(&d, "u.json", r#"{"model": {"nuu": 1}}"#)]);
    assert_eq!(unknown.status.code(), Some(2));
    let missing = bivex(d.path(), &["validate", "-c", "does-not-exist.json"]);
    assert_eq!(missing.status.code(), Some(2));
    let usage = bivex(d.path(), &["no-such-command"]);
    assert_eq!(usage.status.code(), Some(2));
}

#[test]
fn flags_override_json_and_are_revalidated() {
    let d = TempDir::new().unwrap();
    let c = write_config(&d, "ok.json", VALID);
    assert_eq!(bivex(d.path(), &["validate", "-c", &c, "--rho", "0.6"]).status.code(), Some(1));
    assert_eq!(bivex(d.path(), &["validate", "-c", &c, "--rho", "1.5"]).status.code(), Some(2));
    assert_eq!(bivex(d.path(), &["pickands", "--reps", "1"]).status.code(), Some(2));
}

#[test]
fn every_table_has_metadata_and_header() {
    let d = TempDir::new().unwrap();
    for cmd in ["validate", "matern-eval", "expansion", "theorem1"] {
        let o = bivex(d.path(), &[cmd, "--seed", "17"]);
        let text = stdout(&o);
        let mut lines = text.lines();
        let meta = lines.next().unwrap();
        assert!(meta.starts_with("# config_hash=") && meta.contains(" seed=17"), "{cmd}: {meta}");
        let hash = meta.trim_start_matches("# config_hash=").split(' ').next().unwrap();
        assert_eq!(hash.len(), 64);
        assert!(!lines.next().unwrap().starts_with('#'));
    }
}

#[test]
fn theorem_routing_follows_geometry() {
    let d = TempDir::new().unwrap();
    let touching = write_config(&d, "t.json", TOUCHING);
    assert_eq!(bivex(d.path(), &["theorem1"]).status.code(), Some(0));
    assert_eq!(bivex(d.path(), &["theorem2"]).status.code(), Some(1));
    assert_eq!(bivex(d.path(), &["theorem2", "-c", &touching]).status.code(), Some(0));
    assert_eq!(bivex(d.path(), &["theorem1", "-c", &touching]).status.code(), Some(1));
    let forced = write_config(
        &d,
        "f.json",
        r#"{"domain": {"a1": [{"lo": [0], "hi": [1]}], "a2": [{"lo": [1], "hi": [2]}], "split_m": 1}}"#,
    );
    assert_eq!(bivex(d.path(), &["theorem1", "-c", &forced]).status.code(), Some(1));

    for (cfg, cmd, power) in [(None, "theorem1", 1.0), (Some(&touching), "theorem2", 0.0)] {
        let mut args = vec![cmd];
        if let Some(c) = cfg {
            args.extend(["-c", c.as_str()]);
        }
        let o = bivex(d.path(), &args);
        let (h, body) = rows(&o);
        assert_eq!(body.len(), 4);
        for r in &body {
            let (u, value) = (field(&h, r, "u"), field(&h, r, "value"));
            let rebuilt = field(&h, r, "constant") * u.powf(field(&h, r, "u_power")) * (field(&h, r, "exp_rate") * u * u).exp();
            assert!((rebuilt / value - 1.0).abs() < 1e-12);
            assert_eq!(field(&h, r, "u_power"), power);
            assert_eq!(field(&h, r, "ratio"), 1.0);
        }
    }
}

#[test]
fn outputs_are_byte_identical_across_runs_and_threads() {
    let d = TempDir::new().unwrap();
    let base = ["mc-excursion", "--reps", "20000", "--points-per-axis", "40", "--seed", "5"];
    let a = bivex(d.path(), &base);
    let b = bivex(d.path(), &[&base[..], &["--threads", "1"]].concat());
    let c = bivex(d.path(), &[&base[..], &["--threads", "4"]].concat());
    assert_eq!(a.status.code(), Some(0));
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    let other = bivex(d.path(), &["mc-excursion", "--reps", "20000", "--points-per-axis", "40", "--seed", "6"]);
    assert_ne!(a.stdout, other.stdout);

    let p = ["pickands", "--reps", "3000", "--eta", "0.125", "--t-list", "1,2,4"];
    assert_eq!(bivex(d.path(), &[&p[..], &["--threads", "1"]].concat()).stdout, bivex(d.path(), &[&p[..], &["--threads", "3"]].concat()).stdout);
}

#[test]
fn json_format_mirrors_csv_rows() {
    let d = TempDir::new().unwrap();
    let csv = bivex(d.path(), &["matern-eval"]);
    let json = bivex(d.path(), &["matern-eval", "--format", "json"]);
    let (h, body) = rows(&csv);
    let lines: Vec<serde_json::Value> = stdout(&json).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(lines[0]["meta"]["config_hash"].is_string());
    assert_eq!(lines.len() - 1, body.len());
    for (obj, r) in lines[1..].iter().zip(&body) {
        for name in &h {
            assert_eq!(obj[name.as_str()].as_f64().unwrap(), field(&h, r, name));
        }
    }
}

#[test]
fn output_directory_from_env_flag_and_config() {
    let d = TempDir::new().unwrap();
    let env_dir = d.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_bivex"))
        .args(["expansion"])
        .current_dir(d.path())
        .env("BIVEX_OUT_DIR", &env_dir)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    assert!(env_dir.join("expansion.csv").exists());

    let flag_dir = d.path().join("from-flag");
    let o = Command::new(env!("CARGO_BIN_EXE_bivex"))
        .args(["expansion", "--format", "json", "--out-dir"])
        .arg(&flag_dir)
        .current_dir(d.path())
        .env("BIVEX_OUT_DIR", &env_dir)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(flag_dir.join("expansion.jsonl").exists());
    assert!(!env_dir.join("expansion.jsonl").exists());
}

#[test]
fn simulate_writes_a_readable_dump() {
    let d = TempDir::new().unwrap();
    let o = bivex(d.path(), &["simulate", "--count", "4", "--points-per-axis", "6", "--dump", "x.bgrf", "--out-dir", "out"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (nodes, reps) = bivex::fields::read_dump(std::fs::File::open(d.path().join("out/x.bgrf")).unwrap()).unwrap();
    assert_eq!(nodes, 12);
    assert_eq!(reps.len(), 4);
    let table = std::fs::read_to_string(d.path().join("out/simulate.csv")).unwrap();
    let first = table.lines().nth(2).unwrap();
    let max1: f64 = first.split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(max1, reps[0][..6].iter().copied().fold(f64::NEG_INFINITY, f64::max));
}

#[test]
fn pickands_joint_with_equal_sets_matches_single_set() {
    let d = TempDir::new().unwrap();
    let c = write_config(
        &d,
        "p.json",
        r#"{"estimation": {"reps": 4000, "eta": 0.0625, "t_list": [1, 2, 4], "joint": {"s": [0, 4], "t": [0, 4]}}}"#,
    );
    let o = bivex(d.path(), &["pickands", "-c", &c]);
    assert_eq!(o.status.code(), Some(0));
    let (h, body) = rows(&o);
    let kind = |r: &Vec<String>| r[0].clone();
    let single = body.iter().find(|r| kind(r) == "set" && field(&h, r, "T") == 4.0).unwrap();
    let joint = body.iter().find(|r| kind(r) == "joint").unwrap();
    assert_eq!(field(&h, single, "value").to_bits(), field(&h, joint, "value").to_bits());
    assert_eq!(field(&h, joint, "identity_residual"), 0.0);
    // The monotone T sequence is part of the schema.
    assert!(h.iter().any(|c| c == "h_over_t") && h.iter().any(|c| c == "non_monotone"));
    let ts: Vec<f64> = body.iter().filter(|r| kind(r) == "set").map(|r| field(&h, r, "T")).collect();
    assert_eq!(ts, vec![1.0, 2.0, 4.0]);
}

#[test]
fn pickands_alpha_one_final_row_near_one() {
    let d = TempDir::new().unwrap();
    let o = bivex(d.path(), &["pickands", "--alpha", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let (h, body) = rows(&o);
    let last = body.last().unwrap();
    assert_eq!(last[0], "constant");
    let v = field(&h, last, "value");
    assert!((v - 1.0).abs() <= 0.12, "H_1 estimate {v}");
}

#[test]
fn verify_default_config_passes() {
    let d = TempDir::new().unwrap();
    let o = bivex(d.path(), &["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let summary = text.split("table=verify_summary").nth(1).unwrap();
    let rate = summary.lines().find(|l| l.starts_with("rate,")).unwrap();
    let slope: f64 = rate.split(',').nth(1).unwrap().parse().unwrap();
    assert!((slope + 2.0 / 3.0).abs() <= 0.1 * 2.0 / 3.0);
    let r50 = summary.lines().find(|l| l.starts_with("riemann u=50,")).unwrap();
    let ratio: f64 = r50.split(',').nth(1).unwrap().parse().unwrap();
    assert!((ratio - 1.0).abs() <= 0.1);
}

#[test]
fn verify_with_too_few_replicates_fails() {
    let d = TempDir::new().unwrap();
    let o = bivex(d.path(), &["verify", "--reps", "10"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("FAIL hits") && err.contains("FAIL rate"), "{err}");
}
