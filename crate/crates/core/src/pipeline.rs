//! Execution of one configured run, with every output checksummed in a
//! manifest.
//!
//! The manifest is written last, through an atomic rename, so a run that
//! died part-way leaves either no manifest or one marked as failed.

use std::path::{Component, Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::{rom_error_table, spatial_study, temporal_study, FieldId};
use crate::calibration::{identify, FomForward, ForwardModel, Observation, RomForward};
use crate::config::{ForwardKind, Mode, RunConfig, StudyKind};
use crate::error::{Error, Result};
use crate::fom::{assemble_affine, probe, solve_fom_with, FomState, NoForcing, StrainOperator, Theta};
use crate::io::{csv_string, probe_csv, sha256_file, vtk_string, write_atomic};
use crate::mesh::Discretization;
use crate::pod::{
    collect_snapshots, collect_trajectories, nested_spectra, pod_spectra, sample_parameters, PodMethod, PodSpectra, PodWeights,
    SnapshotSet, Truncation,
};
use crate::rom::{lift, save_rom_package, solve_rom, RomManifest, RomPackage};
use crate::uq::{ensemble_csv, propagate, qoi_stress_max, qoi_stress_mean};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub mode: Mode,
    pub status: RunStatus,
    pub error: Option<String>,
    pub config_hash: String,
    pub code_version: String,
    pub seed: Option<u64>,
    pub timings: Vec<StageTiming>,
    pub files: Vec<FileRecord>,
    /// Mode-specific headline numbers.
    pub summary: Value,
}

impl RunManifest {
    pub fn file(&self, path: &str) -> Option<&FileRecord> {
        self.files.iter().find(|f| f.path == path)
    }
}

pub fn manifest_path(output_dir: &Path, mode: Mode) -> PathBuf {
    output_dir.join(format!("manifest-{}.json", mode.name()))
}

/// Writer confined to the output directory.
struct Outputs {
    root: PathBuf,
    files: Vec<FileRecord>,
    timings: Vec<StageTiming>,
}

impl Outputs {
    fn path(&self, rel: &str) -> Result<PathBuf> {
        let p = Path::new(rel);
        if !p.components().all(|c| matches!(c, Component::Normal(_))) {
            return Err(Error::Config(format!("output path {rel} escapes the output directory")));
        }
        let full = self.root.join(p);
        if let Some(parent) = full.parent() {
            std::fs::create_dir_all(parent)?;
        }
        Ok(full)
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.path(rel)?, bytes)?;
        self.record(rel)
    }

    fn normalize(rel: &str) -> String {
        Path::new(rel).components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
    }

    /// Checksum a file some other writer produced under `rel`.
    fn record(&mut self, rel: &str) -> Result<()> {
        let rel = Self::normalize(rel);
        let full = self.root.join(&rel);
        let rec = FileRecord { path: rel.clone(), sha256: sha256_file(&full)?, bytes: std::fs::metadata(&full)?.len() };
        self.files.retain(|f| f.path != rel);
        self.files.push(rec);
        Ok(())
    }

    fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        log::info!("stage {name}");
        let t0 = Instant::now();
        let out = f(self);
        self.timings.push(StageTiming { stage: name.to_string(), seconds: t0.elapsed().as_secs_f64() });
        out
    }
}

/// Run the configured pipeline on a pool of `cfg.jobs` threads and write its
/// manifest. A failed pipeline still gets a manifest, marked as such.
pub fn run(cfg: &RunConfig) -> Result<RunManifest> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cfg.jobs {
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut out = Outputs { root: cfg.output_dir.clone(), files: Vec::new(), timings: Vec::new() };
    let result = pool.install(|| dispatch(cfg, &mut out));
    let (status, error, summary) = match &result {
        Ok(s) => (RunStatus::Ok, None, s.clone()),
        Err(e) => (RunStatus::Failed, Some(e.to_string()), Value::Null),
    };
    let manifest = RunManifest {
        mode: cfg.mode,
        status,
        error,
        config_hash: cfg.hash(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        timings: out.timings,
        files: out.files,
        summary,
    };
    write_atomic(&manifest_path(&cfg.output_dir, cfg.mode), &serde_json::to_vec_pretty(&manifest)?)?;
    result.map(|_| manifest)
}

pub fn load_manifest(path: &Path) -> Result<RunManifest> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

/// Files whose content no longer matches the manifest (or that vanished).
pub fn verify_manifest(output_dir: &Path, manifest: &RunManifest) -> Vec<String> {
    manifest
        .files
        .iter()
        .filter(|f| sha256_file(&output_dir.join(&f.path)).map_or(true, |h| h != f.sha256))
        .map(|f| f.path.clone())
        .collect()
}

fn dispatch(cfg: &RunConfig, out: &mut Outputs) -> Result<Value> {
    match cfg.mode {
        Mode::FomSolve => fom_solve(cfg, out),
        Mode::Snapshots => snapshots(cfg, out),
        Mode::PodTrain => pod_train(cfg, out),
        Mode::RomSolve => rom_solve(cfg, out),
        Mode::Identify => run_identify(cfg, out),
        Mode::Uq => run_uq(cfg, out),
        Mode::Convergence => convergence(cfg, out),
        Mode::RomErrors => rom_errors(cfg, out),
    }
}

fn discretize(cfg: &RunConfig) -> Result<Discretization> {
    Discretization::new(&cfg.scenario.spec())
}

fn package_dir(cfg: &RunConfig) -> PathBuf {
    cfg.solve.package.clone().unwrap_or_else(|| cfg.output_dir.join("rom"))
}

fn load_package(cfg: &RunConfig) -> Result<RomPackage> {
    let dir = package_dir(cfg);
    let pkg = RomPackage::load(&dir)?;
    if pkg.manifest.spec != cfg.scenario.spec() {
        return Err(Error::Config(format!("reduced model in {} was trained for a different scenario", dir.display())));
    }
    Ok(pkg)
}

/// VTK snapshots, probe traces and stress quantities of one trajectory,
/// shared by the full and reduced solves.
fn write_states(cfg: &RunConfig, out: &mut Outputs, dir: &str, disc: &Discretization, states: &[FomState]) -> Result<()> {
    let last = states.len() - 1;
    let every = cfg.solve.vtk_every.unwrap_or(last.max(1)).max(1);
    for (k, s) in states.iter().enumerate() {
        if k % every == 0 || k == last {
            out.write(&format!("{dir}/state_{k:05}.vtk"), vtk_string(disc, s).as_bytes())?;
        }
    }
    let times: Vec<f64> = states.iter().map(|s| s.t).collect();
    if !cfg.solve.probes.is_empty() {
        let values = states.iter().map(|s| probe(disc, s, &cfg.solve.probes)).collect::<Result<Vec<_>>>()?;
        out.write(&format!("{dir}/probes.csv"), probe_csv(&times, &values).as_bytes())?;
    }
    let op = StrainOperator::new(disc);
    let p = cfg.material.with_theta(cfg.theta());
    let rows: Vec<Vec<f64>> = states
        .iter()
        .map(|s| {
            let (m, x) = (qoi_stress_mean(&op, s, &p), qoi_stress_max(&op, s, &p));
            vec![s.t, m[0], m[1], x[0], x[1]]
        })
        .collect();
    let header: Vec<String> = ["T", "mean_xx", "mean_yy", "max_xx", "max_yy"].iter().map(|s| s.to_string()).collect();
    out.write(&format!("{dir}/stress.csv"), csv_string(&header, &rows).as_bytes())
}

fn fom_solve(cfg: &RunConfig, out: &mut Outputs) -> Result<Value> {
    let disc = out.stage("mesh", |_| discretize(cfg))?;
    let p = cfg.material.with_theta(cfg.theta());
    let tr = out.stage("solve", |_| {
        let ops = assemble_affine(&disc, &p);
        solve_fom_with(&disc, &ops, &p, cfg.time.n_t, cfg.time.t_final, &NoForcing)
    })?;
    out.stage("write", |o| write_states(cfg, o, "fom-solve", &disc, &tr.states))?;
    Ok(json!({"theta": p.theta(), "n_steps": tr.n_steps(), "n_u": disc.layout.n_u, "n_mu": disc.layout.n_mu}))
}

fn samples_csv(train: &[Theta], test: &[Theta]) -> String {
    let mut s = String::from("set,index,lambda,A\n");
    for (name, set) in [("train", train), ("test", test)] {
        for (i, t) in set.iter().enumerate() {
            s += &format!("{name},{i},{:?},{:?}\n", t.lambda, t.a);
        }
    }
    s
}

fn snapshots(cfg: &RunConfig, out: &mut Outputs) -> Result<Value> {
    let disc = out.stage("mesh", |_| discretize(cfg))?;
    let (train, test) = sample_parameters(&cfg.parameter_sampler())?;
    out.write("snapshots/samples.csv", samples_csv(&train, &test).as_bytes())?;
    let (n_t, t_final) = (cfg.time.n_t, cfg.time.t_final);
    let s = out.stage("train", |_| collect_snapshots(&disc, &cfg.material, &train, n_t, t_final))?;
    s.save(&out.path("snapshots/train.bin")?)?;
    out.record("snapshots/train.bin")?;
    if !test.is_empty() {
        let t = out.stage("test", |_| collect_snapshots(&disc, &cfg.material, &test, n_t, t_final))?;
        t.save(&out.path("snapshots/test.bin")?)?;
        out.record("snapshots/test.bin")?;
    }
    Ok(json!({"n_train": train.len(), "n_test": test.len(), "columns": s.n_columns()}))
}

fn spectra(cfg: &RunConfig, disc: &Discretization, s: &SnapshotSet, method: PodMethod) -> Result<PodSpectra> {
    let ops;
    let w = if cfg.pod.weighted {
        ops = assemble_affine(disc, &cfg.material);
        PodWeights { u: Some(&ops.mass_u), mu: Some(&ops.mass_mu) }
    } else {
        PodWeights::default()
    };
    match method {
        PodMethod::Pod => Ok(pod_spectra(s, w)),
        PodMethod::NestedPod => nested_spectra(s, cfg.pod.eta_time, w),
    }
}

fn sigma_csv(sigma: &[f64]) -> String {
    let total: f64 = sigma.iter().map(|s| s * s).sum();
    let mut acc = 0.0;
    let rows: Vec<Vec<f64>> = sigma
        .iter()
        .enumerate()
        .map(|(i, s)| {
            acc += s * s;
            vec![(i + 1) as f64, *s, if total > 0.0 { acc / total } else { 1.0 }]
        })
        .collect();
    csv_string(&["mode".into(), "sigma".into(), "retained_energy".into()], &rows)
}

fn pod_train(cfg: &RunConfig, out: &mut Outputs) -> Result<Value> {
    let disc = out.stage("mesh", |_| discretize(cfg))?;
    let path = cfg.pod.snapshots.clone().unwrap_or_else(|| cfg.output_dir.join("snapshots/train.bin"));
    let s = out.stage("load", |_| SnapshotSet::load(&path))?;
    if s.spec_hash != disc.spec.digest() {
        return Err(Error::Config(format!("snapshots in {} belong to a different scenario", path.display())));
    }
    let sp = out.stage("svd", |_| spectra(cfg, &disc, &s, cfg.pod.method))?;
    let t = cfg.pod.rank.map_or(Truncation::Energy(cfg.pod.eta), Truncation::Rank);
    let basis = sp.basis(t, t)?;
    let manifest = RomManifest {
        spec: disc.spec.clone(),
        spec_hash: disc.spec.digest(),
        base: cfg.material,
        bounds: cfg.bounds,
        eta: cfg.pod.eta,
        r_u: basis.u.rank(),
        r_mu: basis.mu.rank(),
    };
    out.stage("save", |o| {
        save_rom_package(&o.path("rom")?, &basis, &manifest)?;
        for f in ["rom/basis_u.bin", "rom/basis_mu.bin", "rom/rom.json"] {
            o.record(f)?;
        }
        o.write("pod-train/sigma_u.csv", sigma_csv(&sp.u.sigma).as_bytes())?;
        o.write("pod-train/sigma_mu.csv", sigma_csv(&sp.mu.sigma).as_bytes())
    })?;
    Ok(json!({
        "method": cfg.pod.method,
        "r_u": basis.u.rank(),
        "r_mu": basis.mu.rank(),
        "retained_energy_u": basis.u.retained_energy,
        "retained_energy_mu": basis.mu.retained_energy,
        "temporal_modes": basis.temporal_modes,
    }))
}

fn rom_solve(cfg: &RunConfig, out: &mut Outputs) -> Result<Value> {
    let pkg = out.stage("load", |_| load_package(cfg))?;
    let theta = cfg.theta();
    let t0 = Instant::now();
    let tr = out.stage("solve", |_| solve_rom(&pkg.reduced, theta, cfg.time.n_t, cfg.time.t_final))?;
    let online = t0.elapsed().as_secs_f64();
    let states: Vec<FomState> = out.stage("lift", |_| Ok(tr.states.iter().map(|s| lift(s, &pkg.basis)).collect()))?;
    out.stage("write", |o| write_states(cfg, o, "rom-solve", &pkg.disc, &states))?;
    Ok(json!({"theta": theta, "n_steps": tr.states.len() - 1, "r_u": pkg.basis.u.rank(), "r_mu": pkg.basis.mu.rank(), "online_seconds": online}))
}

fn run_identify(cfg: &RunConfig, out: &mut Outputs) -> Result<Value> {
    let disc = out.stage("mesh", |_| discretize(cfg))?;
    let (n_t, t_final) = (cfg.time.n_t, cfg.time.t_final);
    let obs = out.stage("observations", |o| match &cfg.identify.observations {
        Some(path) => Observation::load(path),
        None => {
            let truth = cfg.identify.truth.expect("validated: truth or observations");
            let p = cfg.material.with_theta(truth);
            let ops = assemble_affine(&disc, &p);
            let tr = solve_fom_with(&disc, &ops, &p, n_t, t_final, &NoForcing)?;
            let obs = Observation::from_trajectory(&tr, &cfg.identify.times, truth, &disc.spec.digest())?;
            obs.save(&o.path("identify/observations.bin")?)?;
            o.record("identify/observations.bin")?;
            Ok(obs)
        }
    })?;
    obs.validate(disc.layout.n_u, disc.layout.n_mu, t_final)?;
    let report = out.stage("optimize", |_| {
        let pkg;
        let ops;
        let forward: Box<dyn ForwardModel + '_> = match cfg.identify.forward {
            ForwardKind::Rom => {
                pkg = load_package(cfg)?;
                Box::new(RomForward { reduced: &pkg.reduced, basis: &pkg.basis, n_t, t_final })
            }
            ForwardKind::Fom => {
                ops = assemble_affine(&disc, &cfg.material);
                Box::new(FomForward { disc: &disc, ops: &ops, base: cfg.material, n_t, t_final })
            }
        };
        identify(&obs, forward.as_ref(), &cfg.optimizer())
    })?;
    // wall time belongs to the manifest; the report stays reproducible
    let mut body = serde_json::to_value(&report)?;
    if let Some(o) = body.as_object_mut() {
        o.remove("wall_seconds");
    }
    out.write("identify/report.json", &serde_json::to_vec_pretty(&body)?)?;
    out.write("identify/loss_trace.csv", report.trace_csv().as_bytes())?;
    Ok(json!({
        "theta_opt": report.theta_opt,
        "loss": report.loss,
        "n_evals": report.n_evals,
        "stop": report.stop,
        "rel_error": report.rel_error,
        "wall_seconds": report.wall_seconds,
    }))
}

fn run_uq(cfg: &RunConfig, out: &mut Outputs) -> Result<Value> {
    let pkg = out.stage("load", |_| load_package(cfg))?;
    let ucfg = cfg.uq_config();
    let checkpoint = out.path("uq/checkpoint.json")?;
    let ens = out.stage("propagate", |_| {
        propagate(&ucfg, &pkg.disc, &pkg.reduced, &pkg.basis, cfg.time.n_t, cfg.time.t_final, Some(&checkpoint))
    })?;
    // the checkpoint only matters for an interrupted run
    if checkpoint.exists() {
        std::fs::remove_file(&checkpoint)?;
    }
    out.stage("write", |o| {
        let times = &ens.summary.times;
        let mut samples = String::from("sample,lambda,A\n");
        for t in &ens.traces {
            samples += &format!("{},{:?},{:?}\n", t.sample, t.theta.lambda, t.theta.a);
        }
        o.write("uq/samples.csv", samples.as_bytes())?;
        for name in ens.summary.stats.keys() {
            if let Some(csv) = ensemble_csv(times, &ens.traces, name) {
                o.write(&format!("uq/ensemble_{name}.csv"), csv.as_bytes())?;
            }
            if let Some(csv) = ens.summary.csv(name) {
                o.write(&format!("uq/summary_{name}.csv"), csv.as_bytes())?;
            }
        }
        o.write("uq/summary.json", &serde_json::to_vec_pretty(&ens.summary)?)
    })?;
    Ok(json!({"n_samples": ens.summary.n_samples, "n_failed": ens.summary.n_failed}))
}

fn convergence(cfg: &RunConfig, out: &mut Outputs) -> Result<Value> {
    let study = cfg.study();
    let report = out.stage("study", |_| match cfg.convergence.kind {
        StudyKind::Spatial => spatial_study(&study),
        StudyKind::Temporal => temporal_study(&study),
    })?;
    out.write("convergence/report.csv", report.csv().as_bytes())?;
    out.write("convergence/report.json", &serde_json::to_vec_pretty(&report)?)?;
    Ok(json!({"orders": report.orders}))
}

fn rom_errors(cfg: &RunConfig, out: &mut Outputs) -> Result<Value> {
    let disc = out.stage("mesh", |_| discretize(cfg))?;
    let (train, test) = sample_parameters(&cfg.parameter_sampler())?;
    out.write("rom-errors/samples.csv", samples_csv(&train, &test).as_bytes())?;
    let (n_t, t_final) = (cfg.time.n_t, cfg.time.t_final);
    let s = out.stage("train", |_| collect_snapshots(&disc, &cfg.material, &train, n_t, t_final))?;
    let finals: Vec<FomState> = out.stage("test", |_| {
        Ok(collect_trajectories(&disc, &cfg.material, &test, n_t, t_final)?.into_iter().map(|t| t.final_state().clone()).collect())
    })?;
    let ops = assemble_affine(&disc, &cfg.material);
    let mut summary = serde_json::Map::new();
    for &method in &cfg.rom_errors.methods {
        let name = serde_json::to_value(method)?.as_str().unwrap_or("pod").to_string();
        let table = out.stage(&format!("table-{name}"), |_| {
            let sp = spectra(cfg, &disc, &s, method)?;
            rom_error_table(&disc, &ops, &cfg.material, &sp, &cfg.rom_errors.ranks, &test, &finals, n_t, t_final)
        })?;
        for field in [FieldId::U, FieldId::Mu] {
            out.write(&format!("rom-errors/{name}_{}.csv", field.name()), table.csv(field).as_bytes())?;
        }
        out.write(&format!("rom-errors/{name}.json"), &serde_json::to_vec_pretty(&table)?)?;
        let best = cfg.rom_errors.ranks.iter().max().and_then(|&r| table.row(r, FieldId::U)).map(|row| row.l2_mean);
        summary.insert(format!("{name}_u_l2_mean_at_max_rank"), json!(best));
    }
    Ok(Value::Object(summary))
}
