use std::path::Path;
use std::process::{Command, Output};

fn gelrom(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gelrom")).args(args).current_dir(cwd).env("RUST_LOG", "warn").output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.json");
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL: &str = r#"{"scenario": {"id": "square", "n_h": 4}, "time": {"n_t": 5}, "sampler": {"n_train": 3, "n_test": 1}, "pod": {"rank": 3}}"#;

#[test]
fn fom_solve_succeeds_and_writes_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = gelrom(&["fom-solve", "--config", &cfg, "--out", "out", "--theta", "1500,4200", "--jobs", "2"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("out/manifest-fom-solve.json")).unwrap()).unwrap();
    assert_eq!(m["status"], "ok");
    assert_eq!(m["summary"]["theta"]["lambda"], 1500.0);
}

#[test]
fn empty_config_exits_with_validation_code_and_names_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let o = gelrom(&["snapshots", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("output_dir") && err.contains("scenario") && err.contains("seed"), "{err}");
}

#[test]
fn stochastic_mode_without_seed_is_a_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = gelrom(&["uq", "--config", &cfg, "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("out/manifest-uq.json").exists());
}

#[test]
fn degenerate_observations_are_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    // no swelling drive: the synthetic fields are identically zero
    let body = r#"{"scenario": {"id": "square", "n_h": 3}, "time": {"n_t": 4},
        "material": {"lambda": 1558.0, "A": 4000.0, "alpha_r": 1.0, "mu_0": 0.0, "mu_inf": 0.0},
        "identify": {"truth": {"lambda": 1500.0, "A": 4000.0}, "forward": "fom", "times": [0.25]}}"#;
    let cfg = write_config(dir.path(), body);
    let o = gelrom(&["identify", "--config", &cfg, "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("out/manifest-identify.json")).unwrap()).unwrap();
    assert_eq!(m["status"], "failed");
}

#[test]
fn reduced_pipeline_through_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    for args in [
        vec!["snapshots", "--config", &cfg, "--out", "out", "--seed", "7"],
        vec!["pod-train", "--config", &cfg, "--out", "out"],
        vec!["rom-solve", "--config", &cfg, "--out", "out", "--theta", "1600,3900"],
    ] {
        let o = gelrom(&args, dir.path());
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(dir.path().join("out/rom/rom.json").exists());
    assert!(dir.path().join("out/rom-solve/state_00005.vtk").exists());
}

#[test]
fn bad_theta_flag_is_rejected_by_the_parser() {
    let dir = tempfile::tempdir().unwrap();
    let o = gelrom(&["fom-solve", "--theta", "1500"], dir.path());
    assert!(!o.status.success());
    assert_ne!(o.status.code(), Some(0));
}
