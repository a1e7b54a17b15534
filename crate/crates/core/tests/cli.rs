//! End-to-end runs of the `kirchhoff` binary.

use std::path::Path;
use std::process::Command;

use kirchhoff::output::csv_body;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kirchhoff"))
}

fn configs() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs"))
}

fn run(args: &[&str], out: &Path) -> i32 {
    let status = bin()
        .args(args)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "error")
        .status()
        .expect("binary runs");
    status.code().expect("exit code")
}

fn manifest(out: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

fn rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap())
        .collect()
}

#[test]
fn missing_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(&["run", "--config", "/nonexistent/config.toml"], dir.path());
    assert_eq!(code, 2);
    assert_eq!(run(&["run"], dir.path()), 2);
}

#[test]
fn bad_config_values_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["sweep", "--set", "eps.values=[0.1]"], dir.path()), 2);
    assert_eq!(run(&["ground-state", "--set", "p=1.5"], dir.path()), 2);
    assert_eq!(run(&["ground-state", "--set", "nonsense"], dir.path()), 2);
    assert_eq!(run(&["ground-state", "--set", "colour=blue"], dir.path()), 2);
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn identity_sweep_has_delta_equal_eps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("sweep_identity.toml");
    assert_eq!(run(&["run", "--config", cfg.to_str().unwrap()], dir.path()), 0);
    let m = manifest(dir.path());
    assert_eq!(m["status"], "ok");
    assert_eq!(m["experiment"], "single_peak_sweep");
    for r in rows(&dir.path().join("sweep.csv")) {
        assert_eq!(&r[0], &r[1]);
    }
}

#[test]
fn roots_csv_has_two_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("roots_two.toml");
    assert_eq!(run(&["roots", "--config", cfg.to_str().unwrap()], dir.path()), 0);
    assert_eq!(rows(&dir.path().join("roots.csv")).len(), 2);
}

#[test]
fn overrides_reach_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(
        &["roots", "--set", "dim=5", "--set", "m.kind=affine", "--set", "m.a=0.05", "--set", "m.b=1", "--set", "roots.a=1", "--seed", "11"],
        dir.path(),
    );
    assert_eq!(code, 0);
    let m = manifest(dir.path());
    assert_eq!(m["seed"], 11);
    assert_eq!(m["config"]["dim"], 5);
    let text = std::fs::read_to_string(dir.path().join("roots.csv")).unwrap();
    assert!(text.contains("# seed=11"));
}

#[test]
fn constant_potential_sweep_ratio_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("sweep_constant_v.toml");
    assert_eq!(run(&["sweep", "--config", cfg.to_str().unwrap()], dir.path()), 0);
    let ratios: Vec<f64> = rows(&dir.path().join("sweep.csv")).iter().map(|r| r[2].parse().unwrap()).collect();
    assert_eq!(ratios.len(), 4);
    for r in &ratios {
        assert!((r - ratios[0]).abs() <= 1e-9 * ratios[0]);
    }
}

#[test]
fn numerical_sweep_is_deterministic_and_concentrates() {
    let cfg = configs().join("sweep_harmonic.toml");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run(&["sweep", "--config", cfg.to_str().unwrap(), "--jobs", "1"], a.path()), 0);
    assert_eq!(run(&["sweep", "--config", cfg.to_str().unwrap(), "--jobs", "3"], b.path()), 0);
    let ta = std::fs::read_to_string(a.path().join("sweep.csv")).unwrap();
    let tb = std::fs::read_to_string(b.path().join("sweep.csv")).unwrap();
    assert_eq!(csv_body(&ta), csv_body(&tb));
    let centers: Vec<f64> = rows(&a.path().join("sweep.csv")).iter().map(|r| r[4].parse::<f64>().unwrap().abs()).collect();
    assert!(centers.windows(2).all(|w| w[1] < w[0]), "{centers:?}");
}

#[test]
fn probe_reports_the_seeded_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("probe.toml");
    assert_eq!(run(&["probe", "--config", cfg.to_str().unwrap()], dir.path()), 1);
    let m = manifest(dir.path());
    assert_eq!(m["status"], "checks_failed");
    let checks = m["checks"].as_array().unwrap();
    let by_name = |prefix: &str| checks.iter().find(|c| c["name"].as_str().unwrap().starts_with(prefix)).unwrap();
    assert_eq!(by_name("collapse_above_threshold")["pass"], true);
    assert_eq!(by_name("seeded_nontrivial")["pass"], false);
}

#[test]
fn module_error_exits_one_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(&["multi-peak", "--set", "v=1+x^2", "--set", "multipeak.peaks=[[0.5]]"], dir.path());
    assert_eq!(code, 1);
    let m = manifest(dir.path());
    assert_eq!(m["status"], "error");
    assert_eq!(m["error"]["kind"], "not_critical");
}

#[test]
fn every_example_config_parses() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        kirchhoff::config::ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}

#[test]
fn zeros_and_threshold_write_their_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("zeros_harmonic.toml");
    assert_eq!(run(&["zeros", "--config", cfg.to_str().unwrap()], dir.path()), 0);
    let zs: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("zeros.json")).unwrap()).unwrap();
    assert_eq!(zs["count"], 1);
    assert!(dir.path().join("field.csv").exists());

    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("threshold.toml");
    assert_eq!(run(&["threshold", "--config", cfg.to_str().unwrap()], dir.path()), 0);
    assert_eq!(rows(&dir.path().join("battery.csv")).len(), 50);
}
