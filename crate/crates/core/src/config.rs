//! Declarative run configuration.
//!
//! A run is described by one JSON object with a section per module. Parsing
//! is done section by section so that a bad file reports every offending
//! field at once instead of stopping at the first.

use std::fmt;
use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::analysis::StudyConfig;
use crate::calibration::{LbfgsSettings, OptimizerSettings};
use crate::fom::{MaterialParams, Theta};
use crate::io::sha256_hex;
use crate::mesh::{Point, ScenarioId, ScenarioSpec};
use crate::pod::{ParamBox, ParameterSampler, PodMethod, SamplingDistribution};
use crate::uq::UqConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    FomSolve,
    Snapshots,
    PodTrain,
    RomSolve,
    Identify,
    Uq,
    Convergence,
    RomErrors,
}

impl Mode {
    pub const ALL: [Mode; 8] =
        [Mode::FomSolve, Mode::Snapshots, Mode::PodTrain, Mode::RomSolve, Mode::Identify, Mode::Uq, Mode::Convergence, Mode::RomErrors];

    pub fn name(self) -> &'static str {
        match self {
            Mode::FomSolve => "fom-solve",
            Mode::Snapshots => "snapshots",
            Mode::PodTrain => "pod-train",
            Mode::RomSolve => "rom-solve",
            Mode::Identify => "identify",
            Mode::Uq => "uq",
            Mode::Convergence => "convergence",
            Mode::RomErrors => "rom-errors",
        }
    }

    /// Modes that draw random numbers and therefore need a seed.
    pub fn is_stochastic(self) -> bool {
        matches!(self, Mode::Snapshots | Mode::Uq | Mode::RomErrors)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub id: ScenarioId,
    pub n_h: usize,
}

impl ScenarioConfig {
    pub fn spec(&self) -> ScenarioSpec {
        ScenarioSpec::from_id(self.id, self.n_h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    pub n_t: usize,
    pub t_final: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig { n_t: 100, t_final: 0.25 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub distribution: SamplingDistribution,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { n_train: 30, n_test: 10, distribution: SamplingDistribution::Uniform }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PodConfig {
    pub method: PodMethod,
    pub eta: f64,
    pub eta_time: f64,
    /// Fixed rank for both fields; overrides `eta` when set.
    pub rank: Option<usize>,
    /// Mass-matrix weighted inner product.
    pub weighted: bool,
    /// Snapshot file for `pod-train`; defaults to the one `snapshots` writes.
    pub snapshots: Option<PathBuf>,
}

impl Default for PodConfig {
    fn default() -> Self {
        PodConfig { method: PodMethod::Pod, eta: 0.999999, eta_time: 0.999999, rank: None, weighted: false, snapshots: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    /// Parameters of a single forward run; the material section's by default.
    pub theta: Option<Theta>,
    /// Reduced-model package directory; defaults to the one `pod-train` writes.
    pub package: Option<PathBuf>,
    pub probes: Vec<Point>,
    /// Write a VTK file every this many steps (the final state always).
    pub vtk_every: Option<usize>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig { theta: None, package: None, probes: vec![[0.0, 0.0]], vtk_every: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForwardKind {
    Rom,
    Fom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentifyConfig {
    /// Observation file. Without one, observations are synthesized from a
    /// full-order run at `truth`.
    pub observations: Option<PathBuf>,
    pub truth: Option<Theta>,
    pub times: Vec<f64>,
    pub forward: ForwardKind,
    pub theta0: Theta,
    #[serde(flatten)]
    pub lbfgs: LbfgsSettings,
}

impl Default for IdentifyConfig {
    fn default() -> Self {
        IdentifyConfig {
            observations: None,
            truth: None,
            times: vec![0.15, 0.25],
            forward: ForwardKind::Rom,
            theta0: Theta::new(1800.0, 3800.0),
            lbfgs: LbfgsSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UqSection {
    pub mean: Theta,
    pub rel_std: f64,
    pub n_samples: usize,
    pub probes: Vec<Point>,
    pub stress: bool,
}

impl Default for UqSection {
    fn default() -> Self {
        let d = UqConfig::default();
        UqSection { mean: d.mean, rel_std: d.rel_std, n_samples: d.n_samples, probes: d.probes, stress: d.stress }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyKind {
    Spatial,
    Temporal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub kind: StudyKind,
    pub levels: Vec<usize>,
    pub reference: usize,
    /// Resolution of the dimension held fixed.
    pub fixed: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig { kind: StudyKind::Spatial, levels: vec![10, 20, 40], reference: 80, fixed: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RomErrorsConfig {
    pub ranks: Vec<usize>,
    pub methods: Vec<PodMethod>,
}

impl Default for RomErrorsConfig {
    fn default() -> Self {
        RomErrorsConfig { ranks: (1..=8).collect(), methods: vec![PodMethod::Pod, PodMethod::NestedPod] }
    }
}

/// A fully typed, validated run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    /// Worker threads; all cores when absent.
    pub jobs: Option<usize>,
    pub scenario: ScenarioConfig,
    pub material: MaterialParams,
    pub time: TimeConfig,
    /// Admissible `(λ, A)`: sampling range, optimizer bounds and UQ box.
    pub bounds: ParamBox,
    pub sampler: SamplerConfig,
    pub pod: PodConfig,
    pub solve: SolveConfig,
    pub identify: IdentifyConfig,
    pub uq: UqSection,
    pub convergence: ConvergenceConfig,
    pub rom_errors: RomErrorsConfig,
}

/// One problem found while validating a configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    /// Dotted path of the offending field.
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Every issue found in one configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        f.write_str(&lines.join("\n"))
    }
}

impl std::error::Error for ConfigErrors {}

const SECTIONS: [&str; 15] = [
    "mode",
    "seed",
    "output_dir",
    "jobs",
    "scenario",
    "material",
    "time",
    "bounds",
    "sampler",
    "pod",
    "solve",
    "identify",
    "uq",
    "convergence",
    "rom_errors",
];

struct Collector<'a> {
    obj: &'a Map<String, Value>,
    issues: Vec<ConfigIssue>,
}

impl Collector<'_> {
    fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.issues.push(ConfigIssue { field: field.into(), message: message.into() });
    }

    fn required<T: DeserializeOwned>(&mut self, key: &str) -> Option<T> {
        match self.obj.get(key) {
            None | Some(Value::Null) => {
                self.push(key, "required field is missing");
                None
            }
            Some(v) => self.parse(key, v),
        }
    }

    fn optional<T: DeserializeOwned>(&mut self, key: &str) -> Option<Option<T>> {
        match self.obj.get(key) {
            None | Some(Value::Null) => Some(None),
            Some(v) => self.parse(key, v).map(Some),
        }
    }

    fn section<T: DeserializeOwned + Default>(&mut self, key: &str) -> Option<T> {
        self.optional(key).map(Option::unwrap_or_default)
    }

    fn parse<T: DeserializeOwned>(&mut self, key: &str, v: &Value) -> Option<T> {
        match serde_json::from_value(v.clone()) {
            Ok(t) => Some(t),
            Err(e) => {
                self.push(key, e.to_string());
                None
            }
        }
    }

    /// Record a semantic check, prefixing the section name.
    fn check(&mut self, key: &str, r: crate::Result<()>) {
        if let Err(e) = r {
            let msg = e.to_string();
            self.push(key, msg.strip_prefix("configuration error: ").unwrap_or(&msg).to_string());
        }
    }
}

/// Parse and validate configuration text. Empty text is an empty object.
pub fn validate(text: &str) -> Result<RunConfig, ConfigErrors> {
    let value: Value = if text.trim().is_empty() {
        Value::Object(Map::new())
    } else {
        serde_json::from_str(text)
            .map_err(|e| ConfigErrors(vec![ConfigIssue { field: "<file>".into(), message: format!("invalid JSON: {e}") }]))?
    };
    validate_value(&value)
}

pub fn validate_value(value: &Value) -> Result<RunConfig, ConfigErrors> {
    let Some(obj) = value.as_object() else {
        return Err(ConfigErrors(vec![ConfigIssue { field: "<file>".into(), message: "expected a JSON object".into() }]));
    };
    let mut c = Collector { obj, issues: Vec::new() };
    for k in obj.keys() {
        if !SECTIONS.contains(&k.as_str()) {
            c.push(k.clone(), "unknown field");
        }
    }

    let mode: Option<Mode> = c.required("mode");
    let output_dir: Option<PathBuf> = c.required("output_dir");
    let scenario: Option<ScenarioConfig> = c.required("scenario");
    let seed: Option<Option<u64>> = c.optional("seed");
    let jobs: Option<Option<usize>> = c.optional("jobs");
    let material: Option<MaterialParams> = c.section("material");
    let time: Option<TimeConfig> = c.section("time");
    let bounds: Option<ParamBox> = c.section("bounds");
    let sampler: Option<SamplerConfig> = c.section("sampler");
    let pod: Option<PodConfig> = c.section("pod");
    let solve: Option<SolveConfig> = c.section("solve");
    let identify: Option<IdentifyConfig> = c.section("identify");
    let uq: Option<UqSection> = c.section("uq");
    let convergence: Option<ConvergenceConfig> = c.section("convergence");
    let rom_errors: Option<RomErrorsConfig> = c.section("rom_errors");

    if let Some(dir) = &output_dir {
        if dir.as_os_str().is_empty() {
            c.push("output_dir", "must not be empty");
        }
    }
    if let Some(s) = &scenario {
        c.check("scenario", s.spec().validate());
    }
    if let Some(Some(0)) = jobs {
        c.push("jobs", "must be at least 1");
    }
    if let Some(m) = &material {
        c.check("material", m.validate());
    }
    if let Some(t) = &time {
        if !(t.t_final > 0.0 && t.t_final.is_finite()) {
            c.push("time.t_final", format!("must be positive, got {}", t.t_final));
        }
    }
    if let Some(b) = &bounds {
        c.check("bounds", b.validate());
    }
    if let Some(p) = &pod {
        for (name, eta) in [("pod.eta", p.eta), ("pod.eta_time", p.eta_time)] {
            if !(eta > 0.0 && eta <= 1.0) {
                c.push(name, format!("must lie in (0, 1], got {eta}"));
            }
        }
        if p.rank == Some(0) {
            c.push("pod.rank", "must be at least 1");
        }
    }
    if let Some(i) = &identify {
        c.check("identify", i.lbfgs.validate());
        if i.times.is_empty() {
            c.push("identify.times", "at least one observation time is needed");
        }
    }
    if let Some(u) = &uq {
        if !(u.rel_std >= 0.0 && u.rel_std.is_finite()) {
            c.push("uq.rel_std", format!("must be non-negative, got {}", u.rel_std));
        }
        if u.n_samples == 0 {
            c.push("uq.n_samples", "must be at least 1");
        }
    }
    // cross-section checks only make sense on a well-formed box
    let good_box = bounds.filter(|b| b.validate().is_ok());
    if let (Some(b), Some(i)) = (&good_box, &identify) {
        if !b.contains(&i.theta0) {
            c.push("identify.theta0", "initial guess lies outside the bounds");
        }
    }

    if let Some(mode) = mode {
        if mode.is_stochastic() && seed == Some(None) {
            c.push("seed", format!("required for mode {mode}"));
        }
        match mode {
            Mode::Snapshots | Mode::RomErrors => {
                if let Some(s) = &sampler {
                    if s.n_train == 0 {
                        c.push("sampler.n_train", "must be at least 1");
                    }
                    if mode == Mode::RomErrors && s.n_test == 0 {
                        c.push("sampler.n_test", "error tables need a test set");
                    }
                }
                if let Some(r) = &rom_errors {
                    if mode == Mode::RomErrors && (r.ranks.is_empty() || r.ranks.contains(&0)) {
                        c.push("rom_errors.ranks", "ranks must be a non-empty list of positive integers");
                    }
                }
            }
            Mode::Identify => {
                if let Some(i) = &identify {
                    if i.observations.is_none() && i.truth.is_none() {
                        c.push("identify.observations", "either an observation file or a synthetic truth is required");
                    }
                }
            }
            Mode::Uq => {
                if let (Some(b), Some(u)) = (&good_box, &uq) {
                    if !b.contains(&u.mean) {
                        c.push("uq.mean", "ensemble mean lies outside the bounds");
                    }
                }
            }
            Mode::Convergence => {
                if let Some(cv) = &convergence {
                    let study = StudyConfig {
                        scenario: ScenarioId::Square,
                        params: MaterialParams::nominal(),
                        levels: cv.levels.clone(),
                        reference: cv.reference,
                        fixed: cv.fixed,
                        t_final: 1.0,
                    };
                    c.check("convergence", study.validate());
                }
            }
            Mode::FomSolve | Mode::PodTrain | Mode::RomSolve => {}
        }
    }

    if !c.issues.is_empty() {
        return Err(ConfigErrors(c.issues));
    }
    // every option is Some once no issue was recorded
    Ok(RunConfig {
        mode: mode.unwrap(),
        seed: seed.unwrap(),
        output_dir: output_dir.unwrap(),
        jobs: jobs.unwrap(),
        scenario: scenario.unwrap(),
        material: material.unwrap(),
        time: time.unwrap(),
        bounds: bounds.unwrap(),
        sampler: sampler.unwrap(),
        pod: pod.unwrap(),
        solve: solve.unwrap(),
        identify: identify.unwrap(),
        uq: uq.unwrap(),
        convergence: convergence.unwrap(),
        rom_errors: rom_errors.unwrap(),
    })
}

/// SplitMix64 finalizer applied to `seed + stream·γ`: independent
/// per-module streams from one user seed.
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream ids for [`sub_seed`].
pub mod streams {
    pub const SAMPLER: u64 = 1;
    pub const UQ: u64 = 2;
}

impl RunConfig {
    /// Hash of the canonical JSON form, defaults included.
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }

    pub fn seed_for(&self, stream: u64) -> u64 {
        sub_seed(self.seed.unwrap_or(0), stream)
    }

    pub fn parameter_sampler(&self) -> ParameterSampler {
        ParameterSampler {
            bounds: self.bounds,
            n_train: self.sampler.n_train,
            n_test: self.sampler.n_test,
            seed: self.seed_for(streams::SAMPLER),
            distribution: self.sampler.distribution,
        }
    }

    pub fn optimizer(&self) -> OptimizerSettings {
        OptimizerSettings { bounds: self.bounds, theta0: self.identify.theta0, lbfgs: self.identify.lbfgs }
    }

    pub fn uq_config(&self) -> UqConfig {
        UqConfig {
            mean: self.uq.mean,
            rel_std: self.uq.rel_std,
            n_samples: self.uq.n_samples,
            seed: self.seed_for(streams::UQ),
            probes: self.uq.probes.clone(),
            stress: self.uq.stress,
            bounds: self.bounds,
        }
    }

    pub fn study(&self) -> StudyConfig {
        StudyConfig {
            scenario: self.scenario.id,
            params: self.material,
            levels: self.convergence.levels.clone(),
            reference: self.convergence.reference,
            fixed: self.convergence.fixed,
            t_final: self.time.t_final,
        }
    }

    /// Parameters of single forward runs.
    pub fn theta(&self) -> Theta {
        self.solve.theta.unwrap_or(self.material.theta())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn minimal() -> Value {
        json!({"mode": "fom-solve", "output_dir": "out", "scenario": {"id": "square", "n_h": 4}})
    }

    fn fields(e: &ConfigErrors) -> Vec<&str> {
        e.0.iter().map(|i| i.field.as_str()).collect()
    }

    #[test]
    fn empty_file_names_required_fields() {
        let e = validate("").unwrap_err();
        assert_eq!(fields(&e), ["mode", "output_dir", "scenario"]);
    }

    #[test]
    fn defaults_are_filled() {
        let c = validate_value(&minimal()).unwrap();
        assert!((c.identify.lbfgs.ftol - 2.22e-9).abs() < 1e-11);
        assert_eq!(c.pod.eta, 0.999999);
        assert_eq!(c.bounds, ParamBox::TRAINING);
        assert_eq!(c.material, MaterialParams::nominal());
        assert_eq!(c.time, TimeConfig { n_t: 100, t_final: 0.25 });
    }

    #[test]
    fn reversed_range_is_one_error() {
        let mut v = minimal();
        v["bounds"] = json!({"lambda": [2000.0, 1000.0], "A": [2000.0, 6000.0]});
        let e = validate_value(&v).unwrap_err();
        assert_eq!(e.0.len(), 1, "{e}");
        assert_eq!(e.0[0].field, "bounds");
        assert!(e.0[0].message.contains("lambda"));
    }

    #[test]
    fn every_bad_field_is_listed() {
        let v = json!({
            "mode": "uq",
            "output_dir": "out",
            "scenario": {"id": "square", "n_h": 4},
            "time": {"t_final": -1.0},
            "pod": {"eta": 2.0},
            "uq": {"n_samples": 0},
            "extra": 1
        });
        let e = validate_value(&v).unwrap_err();
        let f = fields(&e);
        for want in ["extra", "time.t_final", "pod.eta", "uq.n_samples", "seed"] {
            assert!(f.contains(&want), "{want} missing from {f:?}");
        }
    }

    #[test]
    fn type_errors_name_the_section() {
        let mut v = minimal();
        v["scenario"] = json!({"id": "circle", "n_h": 4});
        v["time"] = json!({"n_t": "ten"});
        let e = validate_value(&v).unwrap_err();
        assert_eq!(fields(&e), ["scenario", "time"]);
    }

    #[test]
    fn identify_needs_data() {
        let mut v = minimal();
        v["mode"] = json!("identify");
        assert_eq!(fields(&validate_value(&v).unwrap_err()), ["identify.observations"]);
        v["identify"] = json!({"truth": {"lambda": 1558.0, "A": 4000.0}, "ftol": 1e-6});
        let c = validate_value(&v).unwrap();
        assert_eq!(c.identify.lbfgs.ftol, 1e-6);
        assert_eq!(c.identify.lbfgs.maxls, 20);
    }

    #[test]
    fn sub_seeds_differ_per_stream() {
        assert_ne!(sub_seed(7, streams::SAMPLER), sub_seed(7, streams::UQ));
        assert_ne!(sub_seed(7, streams::SAMPLER), sub_seed(8, streams::SAMPLER));
        assert_eq!(sub_seed(7, streams::UQ), sub_seed(7, streams::UQ));
    }

    #[test]
    fn hash_tracks_content() {
        let a = validate_value(&minimal()).unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.time.n_t = 10;
        assert_ne!(a.hash(), b.hash());
    }
}
