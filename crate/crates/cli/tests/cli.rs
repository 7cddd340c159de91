use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dpi-lab"))
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(format!("{name}.toml"))
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg("run").arg(config).arg("--out").arg(out).args(extra).output().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn stderr_line(out: &Output) -> String {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(text.lines().count(), 1, "expected a single-line reason, got {text:?}");
    text.trim_end().to_owned()
}

const BASE: &str = r#"
kind = "evolve"
[params]
u0 = -1.0
alpha_s = 1.0
alpha_l = 4.0
"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn malformed_config_exits_2_without_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "kind = \"gravity\"\n[params\nu0 = 1");
    let out_dir = tmp.path().join("out");
    let out = run(&config, &out_dir, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_line(&out).starts_with("error[parse]:"));
    assert!(!out_dir.exists());
}

#[test]
fn missing_file_is_a_parse_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&tmp.path().join("absent.toml"), &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn range_violation_exits_3_and_names_the_discriminant() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(example("gravity")).unwrap().replace("alpha_l = 4.0", "alpha_l = 1.5");
    let config = write_config(tmp.path(), &text);
    let out_dir = tmp.path().join("out");
    let out = run(&config, &out_dir, &[]);
    assert_eq!(out.status.code(), Some(3));
    let line = stderr_line(&out);
    assert!(line.starts_with("error[validation]:") && line.contains("discriminant"), "{line}");
    assert!(!out_dir.exists());
}

#[test]
fn close_approach_exits_4_without_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "{BASE}[evolve]\npositions = [[0.5, 0.0, 0.0], [-0.5, 0.0, 0.0]]\nvelocities = [[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]\nsteps = 4\ndt = 0.25\ngravity_weight = 0.0\n"
    );
    let config = write_config(tmp.path(), &text);
    let out_dir = tmp.path().join("out");
    let out = run(&config, &out_dir, &[]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr_line(&out).starts_with("error[numerical]:"));
    assert!(!out_dir.exists());
}

#[test]
fn compare_without_seed_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(example("compare")).unwrap().replace("seed = 2024\n", "");
    let config = write_config(tmp.path(), &text);
    assert_eq!(run(&config, &tmp.path().join("out"), &[]).status.code(), Some(3));
    // a seed on the command line fills the gap
    let out = bin().arg("describe").arg(&config).args(["--seed", "5"]).output().unwrap();
    assert!(out.status.success());
}

#[test]
fn describe_is_deterministic_and_echoes_derived_constants() {
    for name in ["verify", "compare", "gravity", "evolve", "cosmo"] {
        let first = bin().arg("describe").arg(example(name)).output().unwrap();
        let second = bin().arg("describe").arg(example(name)).output().unwrap();
        assert!(first.status.success(), "{name}");
        assert_eq!(first.stdout, second.stdout);
        let dry = bin().arg("run").arg(example(name)).arg("--dry-run").output().unwrap();
        assert_eq!(dry.stdout, first.stdout, "--dry-run is an alias of describe");
        let text = String::from_utf8(first.stdout).unwrap();
        assert!(text.contains("beta = 0.933013"), "{text}");
        assert!(text.contains(&format!("experiment: {name}")));
    }
}

#[test]
fn manifest_lists_every_artifact_with_its_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&example("cosmo"), tmp.path(), &[]);
    assert!(out.status.success());
    let manifest = read_json(&tmp.path().join("manifest.json"));
    let hash = manifest["config_hash"].as_str().unwrap();
    for entry in manifest["artifacts"].as_array().unwrap() {
        let name = entry["name"].as_str().unwrap();
        let text = std::fs::read_to_string(tmp.path().join(name)).unwrap();
        assert!(text.contains(hash), "{name} does not embed the config hash");
    }
    assert_eq!(manifest["derived"]["beta"].as_f64().unwrap(), 0.9330127018922193);
    assert!(manifest["created_unix"].as_u64().is_some());
}

#[test]
fn seed_override_changes_hash_and_results() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&example("compare"), &a, &[]).status.success());
    assert!(run(&example("compare"), &b, &["--seed", "99", "--threads", "2"]).status.success());
    let (sa, sb) = (read_json(&a.join("summary.json")), read_json(&b.join("summary.json")));
    assert_ne!(sa["config_hash"], sb["config_hash"]);
    assert_eq!(sb["seed"], 99);
    assert_ne!(std::fs::read(a.join("probes.csv")).unwrap(), std::fs::read(b.join("probes.csv")).unwrap());
}

#[test]
fn verify_example_passes() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run(&example("verify"), tmp.path(), &[]).status.success());
    let v = read_json(&tmp.path().join("verify.json"));
    assert_eq!(v["identity"]["cases"], 125);
    assert_eq!(v["pass"], true);
}

/// Reference run: u0 = -1, alpha_s = 1, alpha_l = 4, zeta = 1, xi = 1e-3 r_min,
/// 25 radii over [10, 100] grid units. Pinned from the first verified run.
#[test]
fn gravity_reference_run_matches_the_pinned_baseline() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run(&example("gravity"), tmp.path(), &[]).status.success());
    let fit = read_json(&tmp.path().join("fit.json"));
    let exponent = fit["fit"]["exponent"].as_f64().unwrap();
    let prefactor = fit["fit"]["prefactor"].as_f64().unwrap();
    assert!((exponent - -0.11701849831851163).abs() < 1e-9, "{exponent}");
    assert!((prefactor / -3.486208014171302 - 1.0).abs() < 1e-9, "{prefactor}");
    assert!(fit["effective_coupling"]["refused"].is_string());
    let tail = std::fs::read_to_string(tmp.path().join("tail.csv")).unwrap();
    assert!(tail.contains("\nr,r_grid_units,m,u,excluded_terms,fit_residual\n"));
    assert_eq!(tail.lines().filter(|l| !l.starts_with('#')).count(), 26);
}

#[test]
fn evolve_example_conserves_energy() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run(&example("evolve"), tmp.path(), &[]).status.success());
    let e = read_json(&tmp.path().join("evolve.json"));
    assert!(e["max_relative_energy_drift"].as_f64().unwrap() < 1e-8);
    assert!(e["leibnitz"]["max_relative_kinetic_gap"].as_f64().unwrap() < 1e-5);
    let traj = std::fs::read_to_string(tmp.path().join("trajectory.csv")).unwrap();
    assert!(traj.contains("\nstep,particle,x,y,z,vx,vy,vz\n"));
}
