use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn renewlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_renewlab")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn small_config(dir: &Path) -> String {
    let cfg = serde_json::json!({
        "seed": 7,
        "walk": {
            "tensor": { "g": 9, "n_max": 64 },
            "n_list": [16, 64],
            "mc_max_n": 3,
            "mc_replicas": 20000,
            "ladder_replicas": 2000,
            "duality_m": 3,
            "duality_replicas": 20000,
            "doney_n": 32,
            "doney_replicas": 100000,
            "renewal_replicas": 2000
        },
        "wetting": {
            "refine_g": null,
            "n": 64,
            "paths": 200,
            "estz_ns": [32, 48, 64],
            "scaling_ns": [16, 32, 64],
            "scaling_paths": 200,
            "oracle_samples": 2000
        }
    });
    let p = dir.join("small.json");
    fs::write(&p, cfg.to_string()).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn kernel_check_passes_and_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("k");
    let o = renewlab(&["kernel-check", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    for f in ["summary.json", "config.resolved.json", "kernel_rows.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s["pass"], true);
    assert_eq!(s["command"], "kernel-check");
    assert_eq!(s["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("bad.json");
    fs::write(&p, r#"{"walk": {"sigmaa": 1.0}}"#).unwrap();
    let o = renewlab(&["walk", "--config", p.to_str().unwrap(), "--out", tmp.path().join("w").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("sigmaa"));
}

#[test]
fn unknown_check_group_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = renewlab(&["kernel-check", "--check", "nope", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn missing_tensor_names_the_producer() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("runs").join("wetting-betac");
    let o = renewlab(&["wetting-betac", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("renewlab walk"));
}

#[test]
fn report_without_runs_is_missing() {
    let tmp = tempfile::tempdir().unwrap();
    let o = renewlab(&["report", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&o), 3);
}

#[test]
fn walk_is_deterministic_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let checks = "balance,thm-pr,kernel-mc,duality";
    let oa = renewlab(&["walk", "--config", &cfg, "--check", checks, "--out", a.to_str().unwrap()]);
    let ob = renewlab(&["walk", "--config", &cfg, "--check", checks, "--workers", "1", "--out", b.to_str().unwrap()]);
    assert!(code(&oa) <= 1 && code(&ob) <= 1, "{}", String::from_utf8_lossy(&oa.stderr));
    for f in ["defect.csv", "thm_pr.csv", "kernel_mc.csv", "duality.csv", "tensor.bin"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn wetting_pipeline_on_a_small_tensor() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let runs = tmp.path().join("runs");
    let dir = |c: &str| runs.join(c).to_str().unwrap().to_string();
    let o = renewlab(&["walk", "--config", &cfg, "--check", "balance", "--out", &dir("walk")]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));

    let o = renewlab(&["wetting-betac", "--config", &cfg, "--out", &dir("wetting-betac")]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(runs.join("wetting-betac/spectral.bin").is_file());
    assert!(runs.join("wetting-betac/eigenfunctions.csv").is_file());

    let o = renewlab(&["wetting-free-energy", "--config", &cfg, "--out", &dir("wetting-free-energy")]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));

    let o = renewlab(&["wetting-critical", "--config", &cfg, "--out", &dir("wetting-critical")]);
    assert!(code(&o) <= 1, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["partition.bin", "estz.csv", "contacts.csv", "summary.json"] {
        assert!(runs.join("wetting-critical").join(f).is_file(), "{f}");
    }

    let o = renewlab(&["report", "--out", runs.to_str().unwrap()]);
    assert!(code(&o) <= 1);
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(runs.join("report.json")).unwrap()).unwrap();
    let crit = r["criteria"].as_array().unwrap();
    assert_eq!(crit.len(), 12);
    assert_eq!(crit[11]["status"], "pass");
    assert_eq!(crit[0]["status"], "missing");
}
