use serde_json::Value;
use std::process::{Command, Output};

fn sandlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sandlab"))
        .args(args)
        .env_remove("SANDLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

#[test]
fn exact_gap_equals_search_on_two_torus() {
    let exact = json(&sandlab(&["gap", "--m", "2", "--exact"]));
    let search = json(&sandlab(&["gap", "--m", "2", "--search"]));
    let a = exact["result"]["gap"].as_f64().unwrap();
    let b = search["result"]["gap"].as_f64().unwrap();
    assert!((a - b).abs() < 1e-12);
    assert_eq!(exact["result"]["method"], "exact");
}

#[test]
fn artifact_carries_provenance() {
    let v = json(&sandlab(&["chain", "--m", "2", "--steps", "50", "--seed", "11"]));
    assert_eq!(v["sandlab_version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["command"], "chain");
    assert_eq!(v["seed"], 11);
    assert_eq!(v["config"]["steps"], 50);
    assert!(v["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let args = ["iid", "--law", "2:0.5,4:0.5", "--radius", "8", "--trials", "6", "--seed", "5", "--reproducible"];
    let a = sandlab(&args);
    let b = sandlab(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let one = Command::new(env!("CARGO_BIN_EXE_sandlab"))
        .args(args)
        .env("SANDLAB_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(a.stdout, one.stdout);
    let c = sandlab(&["chain", "--m", "3", "--steps", "1e4", "--seed", "7", "--reproducible"]);
    let d = sandlab(&["chain", "--m", "3", "--steps", "10000", "--seed", "7", "--reproducible"]);
    assert_eq!(c.stdout, d.stdout);
    let e = sandlab(&["chain", "--m", "3", "--steps", "10000", "--seed", "8", "--reproducible"]);
    assert_ne!(c.stdout, e.stdout);
}

#[test]
fn floats_are_written_with_seventeen_digits() {
    let out = sandlab(&["dual", "--m", "2", "--reproducible"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text.lines().find(|l| l.contains("\"gap\"")).unwrap();
    let number = line.split(':').nth(1).unwrap().trim().trim_end_matches(',');
    let mantissa = number.split('e').next().unwrap().replace(['-', '.'], "");
    assert_eq!(mantissa.len(), 17, "{number}");
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        vec!["bogus"],
        vec!["gap"],
        vec!["iid", "--law", "2:0.5"],
        vec!["dual", "--m", "5"],
        vec!["stabilize", "--m", "3"],
        vec!["greens", "--format", "bin"],
    ] {
        let out = sandlab(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
    }
    let out = Command::new(env!("CARGO_BIN_EXE_sandlab"))
        .args(["group", "--m", "3"])
        .env("SANDLAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(sandlab(&["--help"]).status.code(), Some(0));
}

#[test]
fn failed_guard_exits_two() {
    let out = sandlab(&["gamma", "--threshold", "2.0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("guard"));
}

#[test]
fn gamma_constant() {
    let v = json(&sandlab(&["gamma"]));
    let g = v["result"]["gamma"].as_f64().unwrap();
    let c = v["result"]["c0"].as_f64().unwrap();
    assert!((g - 2.868114013).abs() < 1e-6, "{g}");
    assert!((g * c - 1.0).abs() < 1e-12);
    assert_eq!(v["result"]["minimizer_is_delta12"], true);
}

#[test]
fn stabilize_reads_a_pile() {
    let dir = std::env::temp_dir().join(format!("sandlab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("pile.json");
    std::fs::write(&path, r#"{"m": 3, "heights": [[0, 5, 1], [2, 9, 0], [3, 3, 3]]}"#).unwrap();
    let v = json(&sandlab(&["stabilize", "--m", "3", "--in", path.to_str().unwrap()]));
    let r = &v["result"];
    let (i, f, l) = (
        r["initial_total"].as_u64().unwrap(),
        r["final_total"].as_u64().unwrap(),
        r["lost"].as_u64().unwrap(),
    );
    assert_eq!(i, 26);
    assert_eq!(i, f + l);
    let heights = r["state"]["heights"].as_array().unwrap();
    assert!(heights.iter().flat_map(|row| row.as_array().unwrap()).all(|h| h.as_u64().unwrap() <= 3));
    let mismatch = sandlab(&["stabilize", "--m", "4", "--in", path.to_str().unwrap()]);
    assert_eq!(mismatch.status.code(), Some(1));
    std::fs::write(&path, "{\"m\": 3}").unwrap();
    assert_eq!(sandlab(&["stabilize", "--in", path.to_str().unwrap()]).status.code(), Some(1));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn greens_binary_table() {
    let dir = std::env::temp_dir().join(format!("sandlab-bin-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("g.bin");
    let out = sandlab(&["greens", "--domain", "torus", "--m", "8", "--format", "bin", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..4], b"SLGF");
    assert_eq!(bytes[4], 0);
    assert_eq!(u64::from_le_bytes(bytes[5..13].try_into().unwrap()), 8);
    assert_eq!(u64::from_le_bytes(bytes[13..21].try_into().unwrap()), 64);
    let values: Vec<f64> = bytes[21..]
        .chunks(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    // mean-zero Green's function; the JSON table carries the same values
    assert!(values.iter().sum::<f64>().abs() < 1e-12);
    let v = json(&sandlab(&["greens", "--domain", "torus", "--m", "8"]));
    let from_json: Vec<f64> = v["result"]["values"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert_eq!(values, from_json);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn csv_export() {
    let out = sandlab(&["group", "--m", "4", "--snf", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("key,value\n"));
    assert!(text.contains("result.order,"));
    assert!(text.contains("result.invariant_factors.0,"));
}

#[test]
fn invariants_report_small_drift() {
    let v = json(&sandlab(&["invariants", "--radius", "8", "--trials", "20", "--seed", "3"]));
    assert!(v["result"]["max_drift"].as_f64().unwrap() < 1e-8);
    assert_eq!(v["seed"], 3);
}

#[test]
fn greens_reports_and_cutoff_run() {
    let v = json(&sandlab(&["greens-report", "--check", "asymptotics", "--radius", "64", "--json"]));
    assert!(v["result"]["log_bound"]["holds"].as_bool().unwrap());
    let v = json(&sandlab(&["cutoff", "--m", "12", "--B", "4", "--R", "2", "--N-grid", "10,100,1000"]));
    let rows = v["result"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    let v = json(&sandlab(&["group", "--m", "3", "--snf"]));
    assert_eq!(v["result"]["order"], "11664");
}
