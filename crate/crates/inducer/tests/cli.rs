use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_inducer");

const SMALL_LORENZ: &str = r#"{
  "family": "lorenz_singular",
  "seed": 7,
  "returns": {"delta_star": 0.36787944117144233},
  "inducing": {"branch_cap": 5000},
  "measure": {"method": "birkhoff", "n_iter": 20000, "n_seeds": 3},
  "uniqueness": {"n_clouds": 3, "n_iter": 30000}
}"#;

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("run.json");
    std::fs::write(&p, text).unwrap();
    p
}

fn inducer(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("INDUCER_OUT").output().unwrap()
}

fn artifacts(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(inducer(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(inducer(&["induce"]).status.code(), Some(2));
    assert_eq!(inducer(&["induce", "--config", "/nonexistent/run.json"]).status.code(), Some(2));
    assert_eq!(inducer(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_problems_are_reported_by_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"family": "lorenz_singular", "inducing": {"n_maxx": 10}}"#);
    let o = inducer(&["hypotheses", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_maxx"));

    let cfg = write_config(tmp.path(), "{\"family\": \"lorenz_singular\",\n \"seed\": }");
    let o = inducer(&["hypotheses", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn domain_errors_exit_one_and_name_the_operation() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"family": "lorenz_singular", "hypotheses": {"alpha": 0.35}}"#);
    let o = inducer(&["hypotheses", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    // most of the chebyshev base interval is still unresolved after 2000 branches
    let cfg = write_config(
        tmp.path(),
        r#"{"family": "chebyshev", "inducing": {"branch_cap": 2000}, "measure": {"method": "tower"}}"#,
    );
    let out = tmp.path().join("o");
    let o = inducer(&["density", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("measure-lab::tower_density"), "{err}");
}

#[test]
fn induce_writes_the_documented_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_LORENZ);
    let out = tmp.path().join("o");
    let o = inducer(&["induce", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let head = |name: &str| std::fs::read_to_string(out.join(name)).unwrap().lines().next().unwrap().to_string();
    assert_eq!(head("induced.csv"), "branch_id,left,right,T,E,t0,min_deriv,distortion_stat");
    assert_eq!(head("tail.csv"), "n,mass_T_gt_n,stratum_s,stratum_mass");
    assert!(out.join("itinerary.jsonl").exists());

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "induce");
    assert_eq!(manifest["seed"], 7);
    let induced = std::fs::read(out.join("induced.csv")).unwrap();
    let rec = manifest["artifacts"].as_array().unwrap().iter().find(|r| r["name"] == "induced.csv").unwrap();
    assert_eq!(rec["sha256"], inducer::output::sha256_hex(&induced));

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("induced.json")).unwrap()).unwrap();
    assert!(summary["conservation_error"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn output_directory_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"family": "chebyshev", "measure": {"cells": 64}}"#);
    let out = tmp.path().join("env_out");
    let o = Command::new(BIN)
        .args(["density", "--config", cfg.to_str().unwrap()])
        .env("INDUCER_OUT", &out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("density.csv").exists());
    assert!(out.join("residual.txt").exists());
}

#[test]
fn artifacts_do_not_depend_on_worker_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_LORENZ);
    for cmd in ["induce", "density", "uniqueness"] {
        let mut runs = Vec::new();
        for w in ["1", "3"] {
            let out = tmp.path().join(format!("{cmd}_{w}"));
            let o = inducer(&[cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", w]);
            assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
            runs.push(artifacts(&out));
        }
        assert!(!runs[0].is_empty());
        assert_eq!(runs[0], runs[1], "{cmd}");
    }
}
