use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gelrom::config::{validate_value, RunConfig};
use gelrom::pipeline::{load_manifest, manifest_path, run, verify_manifest, RunStatus};
use serde_json::{json, Value};

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

fn config(out: &Path, mode: &str, extra: Value) -> RunConfig {
    let mut v = json!({
        "mode": mode,
        "output_dir": out,
        "seed": 42,
        "scenario": {"id": "square", "n_h": 6},
        "time": {"n_t": 20},
        "sampler": {"n_train": 8, "n_test": 2},
        "pod": {"rank": 6},
        "uq": {"n_samples": 30},
    });
    for (k, val) in extra.as_object().unwrap() {
        v[k] = val.clone();
    }
    validate_value(&v).unwrap_or_else(|e| panic!("{e}"))
}

fn checksums(dir: &Path) -> BTreeMap<String, String> {
    files_under(dir)
        .into_iter()
        .filter(|p| !p.file_name().unwrap().to_string_lossy().starts_with("manifest-"))
        .map(|p| (p.strip_prefix(dir).unwrap().to_string_lossy().into_owned(), gelrom::io::sha256_file(&p).unwrap()))
        .collect()
}

#[test]
fn snapshots_train_and_solve_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    for mode in ["snapshots", "pod-train", "rom-solve"] {
        let m = run(&config(&out, mode, json!({}))).unwrap();
        assert_eq!(m.status, RunStatus::Ok);
        assert!(verify_manifest(&out, &m).is_empty());
    }
    let train = load_manifest(&manifest_path(&out, gelrom::config::Mode::PodTrain)).unwrap();
    assert!(train.file("rom/basis_u.bin").is_some() && train.file("rom/basis_mu.bin").is_some());
    assert_eq!(train.summary["r_u"], 6);
    assert_eq!(train.summary["r_mu"], 6);
    let solve = load_manifest(&manifest_path(&out, gelrom::config::Mode::RomSolve)).unwrap();
    assert_eq!(solve.summary["theta"], json!({"lambda": 1558.0, "A": 4000.0}));
    assert!(solve.file("rom-solve/probes.csv").is_some());
    // every file on disk except the manifests is inventoried somewhere
    let listed: Vec<String> = [&train, &solve, &load_manifest(&manifest_path(&out, gelrom::config::Mode::Snapshots)).unwrap()]
        .iter()
        .flat_map(|m| m.files.iter().map(|f| f.path.clone()))
        .collect();
    for path in checksums(&out).keys() {
        assert!(listed.contains(path), "{path} missing from the manifests");
    }
}

#[test]
fn zero_steps_write_a_single_state() {
    let dir = tempfile::tempdir().unwrap();
    let m = run(&config(dir.path(), "fom-solve", json!({"time": {"n_t": 0}}))).unwrap();
    let vtk: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).filter(|p| p.ends_with(".vtk")).collect();
    assert_eq!(vtk, ["fom-solve/state_00000.vtk"]);
    assert_eq!(m.summary["n_steps"], 0);
}

#[test]
fn replay_with_the_same_seed_gives_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<PathBuf> = (0..2).map(|i| dir.path().join(format!("r{i}"))).collect();
    for (i, out) in runs.iter().enumerate() {
        for mode in ["snapshots", "pod-train", "rom-solve", "uq", "rom-errors"] {
            let extra = json!({"jobs": 1 + 3 * i, "rom_errors": {"ranks": [2, 4]}});
            run(&config(out, mode, extra)).unwrap();
        }
        let mut id = config(out, "identify", json!({"identify": {"truth": {"lambda": 1300.0, "A": 4500.0}}}));
        id.identify.lbfgs.maxfun = 60;
        run(&id).unwrap();
    }
    let (a, b) = (checksums(&runs[0]), checksums(&runs[1]));
    assert!(a.len() > 20);
    assert_eq!(a, b);
}

#[test]
fn tampering_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    let m = run(&config(dir.path(), "fom-solve", json!({}))).unwrap();
    assert!(verify_manifest(dir.path(), &m).is_empty());
    let victim = dir.path().join("fom-solve/probes.csv");
    let mut text = std::fs::read_to_string(&victim).unwrap();
    text.push('0');
    std::fs::write(&victim, text).unwrap();
    std::fs::remove_file(dir.path().join("fom-solve/stress.csv")).unwrap();
    let mut bad = verify_manifest(dir.path(), &m);
    bad.sort();
    assert_eq!(bad, ["fom-solve/probes.csv", "fom-solve/stress.csv"]);
}

#[test]
fn nothing_is_written_outside_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested/out");
    std::fs::write(dir.path().join("sentinel"), "x").unwrap();
    for mode in ["fom-solve", "snapshots", "pod-train", "rom-solve", "uq", "convergence"] {
        let extra = json!({"convergence": {"levels": [2, 4, 8], "reference": 16, "fixed": 4}});
        run(&config(&out, mode, extra)).unwrap();
    }
    for p in files_under(dir.path()) {
        assert!(p.starts_with(&out) || p == dir.path().join("sentinel"), "stray file {}", p.display());
    }
    assert!(!out.join("uq/checkpoint.json").exists());
}

#[test]
fn a_failed_pipeline_leaves_a_failed_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let err = run(&config(dir.path(), "rom-solve", json!({}))).unwrap_err();
    let m = load_manifest(&manifest_path(dir.path(), gelrom::config::Mode::RomSolve)).unwrap();
    assert_eq!(m.status, RunStatus::Failed);
    assert_eq!(m.error.as_deref(), Some(err.to_string().as_str()));
    assert!(m.files.is_empty());
}

#[test]
fn package_from_another_scenario_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    run(&config(dir.path(), "snapshots", json!({}))).unwrap();
    run(&config(dir.path(), "pod-train", json!({}))).unwrap();
    let other = config(dir.path(), "rom-solve", json!({"scenario": {"id": "square", "n_h": 5}}));
    assert!(matches!(run(&other), Err(gelrom::Error::Config(_))));
}
