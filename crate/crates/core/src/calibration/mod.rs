//! Parameter identification from full-field observations.

mod optimizer;

pub use optimizer::{minimize_box, minimize_box_nonneg, LbfgsSettings, Minimum, StopReason};

use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::fom::{AffineOperators, FomSolver, MaterialParams, NoForcing, Theta, Trajectory};
use crate::io::{read_container, write_container, SNAPSHOT_MAGIC};
use crate::mesh::Discretization;
use crate::pod::{ColumnKey, ParamBox, ReducedBasis, SnapshotSet};
use crate::rom::{lift, solve_rom, ReducedOperators};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    SyntheticFom,
    External,
}

/// Full fields at a handful of times.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub times: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub mu: Vec<Vec<f64>>,
    pub provenance: Provenance,
    /// Generating parameters, when known.
    pub truth: Option<Theta>,
    pub spec_hash: String,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

impl Observation {
    /// Pick the states of a full-order trajectory at `times`.
    pub fn from_trajectory(tr: &Trajectory, times: &[f64], truth: Theta, spec_hash: &str) -> Result<Self> {
        let mut u = Vec::with_capacity(times.len());
        let mut mu = Vec::with_capacity(times.len());
        for &t in times {
            let s = tr
                .states
                .iter()
                .find(|s| close(s.t, t))
                .ok_or_else(|| Error::Config(format!("observation time {t} is not on the time grid")))?;
            u.push(s.u.clone());
            mu.push(s.mu.clone());
        }
        Ok(Observation {
            times: times.to_vec(),
            u,
            mu,
            provenance: Provenance::SyntheticFom,
            truth: Some(truth),
            spec_hash: spec_hash.to_string(),
        })
    }

    /// Columns of one snapshot sample at `times`.
    pub fn from_snapshots(set: &SnapshotSet, sample: usize, times: &[f64]) -> Result<Self> {
        let mut u = Vec::new();
        let mut mu = Vec::new();
        for &t in times {
            let j = set
                .columns
                .iter()
                .position(|k| k.sample == sample && close(k.time, t))
                .ok_or_else(|| Error::Config(format!("sample {sample} has no snapshot at T = {t}")))?;
            u.push(set.u.column(j).iter().copied().collect());
            mu.push(set.mu.column(j).iter().copied().collect());
        }
        Ok(Observation {
            times: times.to_vec(),
            u,
            mu,
            provenance: Provenance::SyntheticFom,
            truth: set.thetas.get(sample).copied(),
            spec_hash: set.spec_hash.clone(),
        })
    }

    pub fn validate(&self, n_u: usize, n_mu: usize, t_final: f64) -> Result<()> {
        if self.times.is_empty() || self.u.len() != self.times.len() || self.mu.len() != self.times.len() {
            return Err(Error::Config("observation needs one u and one μ field per time".into()));
        }
        for (i, &t) in self.times.iter().enumerate() {
            if !(t > 0.0 && t <= t_final * (1.0 + 1e-12)) {
                return Err(Error::Config(format!("observation time {t} outside (0, {t_final}]")));
            }
            if self.u[i].len() != n_u {
                return Err(Error::DimensionMismatch { context: "observed u", expected: n_u, found: self.u[i].len() });
            }
            if self.mu[i].len() != n_mu {
                return Err(Error::DimensionMismatch { context: "observed μ", expected: n_mu, found: self.mu[i].len() });
            }
        }
        Ok(())
    }

    /// Stored in the snapshot container, one column per time, so a snapshot
    /// file restricted to the observation times reads back as well.
    pub fn save(&self, path: &Path) -> Result<()> {
        let n_u = self.u.first().map_or(0, Vec::len);
        let n_mu = self.mu.first().map_or(0, Vec::len);
        let mut m = DMatrix::zeros(n_u + n_mu, self.times.len());
        for j in 0..self.times.len() {
            m.view_mut((0, j), (n_u, 1)).copy_from_slice(&self.u[j]);
            m.view_mut((n_u, j), (n_mu, 1)).copy_from_slice(&self.mu[j]);
        }
        let columns: Vec<ColumnKey> =
            self.times.iter().enumerate().map(|(j, &t)| ColumnKey { sample: 0, step: j, time: t }).collect();
        let footer = json!({
            "fields": [{"name": "u", "rows": n_u}, {"name": "mu", "rows": n_mu}],
            "columns": columns,
            "params": self.truth.into_iter().collect::<Vec<_>>(),
            "spec_hash": self.spec_hash,
            "provenance": self.provenance,
        });
        write_container(path, SNAPSHOT_MAGIC, &m, None, &footer)
    }

    /// Read an observation file. Snapshot files with several samples are
    /// rejected; pass them through [`Observation::from_snapshots`] instead.
    pub fn load(path: &Path) -> Result<Self> {
        let c = read_container(path)?;
        #[derive(Deserialize)]
        struct FieldRows {
            name: String,
            rows: usize,
        }
        #[derive(Deserialize)]
        struct Footer {
            fields: Vec<FieldRows>,
            columns: Vec<ColumnKey>,
            #[serde(default)]
            params: Vec<Theta>,
            #[serde(default)]
            spec_hash: String,
            provenance: Option<Provenance>,
        }
        let f: Footer = serde_json::from_value(c.footer)?;
        let rows = |name: &str| {
            f.fields.iter().find(|r| r.name == name).map(|r| r.rows).ok_or_else(|| Error::Format(format!("missing field {name}")))
        };
        let (n_u, n_mu) = (rows("u")?, rows("mu")?);
        if n_u + n_mu != c.matrix.nrows() || f.columns.len() != c.matrix.ncols() {
            return Err(Error::Format("footer does not match matrix shape".into()));
        }
        if f.columns.iter().any(|k| k.sample != f.columns[0].sample) {
            return Err(Error::Format("observation file holds more than one sample".into()));
        }
        let col = |j: usize, r0: usize, n: usize| c.matrix.view((r0, j), (n, 1)).iter().copied().collect::<Vec<_>>();
        let truth = f.columns.first().and_then(|k| f.params.get(k.sample).copied());
        Ok(Observation {
            times: f.columns.iter().map(|k| k.time).collect(),
            u: (0..f.columns.len()).map(|j| col(j, 0, n_u)).collect(),
            mu: (0..f.columns.len()).map(|j| col(j, n_u, n_mu)).collect(),
            provenance: f.provenance.unwrap_or(if truth.is_some() { Provenance::SyntheticFom } else { Provenance::External }),
            truth,
            spec_hash: f.spec_hash,
        })
    }
}

/// A model that predicts full fields at given times.
pub trait ForwardModel: Sync {
    /// `(u, μ)` at each requested time, in the order given.
    fn predict(&self, theta: Theta, times: &[f64]) -> Result<Vec<(Vec<f64>, Vec<f64>)>>;
}

fn step_indices(times: &[f64], n_t: usize, t_final: f64) -> Result<Vec<usize>> {
    let dt = t_final / n_t as f64;
    times
        .iter()
        .map(|&t| {
            let k = (t / dt).round();
            if k < 1.0 || k > n_t as f64 || !close(k * dt, t) {
                Err(Error::Config(format!("observation time {t} is not a multiple of Δt = {dt} within (0, {t_final}]")))
            } else {
                Ok(k as usize)
            }
        })
        .collect()
}

/// Full-order forward model; operators are assembled once.
pub struct FomForward<'a> {
    pub disc: &'a Discretization,
    pub ops: &'a AffineOperators,
    pub base: MaterialParams,
    pub n_t: usize,
    pub t_final: f64,
}

impl ForwardModel for FomForward<'_> {
    fn predict(&self, theta: Theta, times: &[f64]) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        let ks = step_indices(times, self.n_t, self.t_final)?;
        let last = ks.iter().copied().max().unwrap_or(0);
        let p = self.base.with_theta(theta);
        let solver = FomSolver::new(self.disc, self.ops, &p, self.t_final / self.n_t as f64)?;
        let mut states = vec![solver.initial_state(&NoForcing)?];
        for n in 0..last {
            let next = solver.step(&states[n], &NoForcing)?;
            states.push(next);
        }
        Ok(ks.iter().map(|&k| (states[k].u.clone(), states[k].mu.clone())).collect())
    }
}

/// Reduced forward model, lifted to full fields at the requested times.
pub struct RomForward<'a> {
    pub reduced: &'a ReducedOperators,
    pub basis: &'a ReducedBasis,
    pub n_t: usize,
    pub t_final: f64,
}

impl ForwardModel for RomForward<'_> {
    fn predict(&self, theta: Theta, times: &[f64]) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        let ks = step_indices(times, self.n_t, self.t_final)?;
        let tr = solve_rom(self.reduced, theta, self.n_t, self.t_final)?;
        Ok(ks
            .iter()
            .map(|&k| {
                let s = lift(&tr.states[k], self.basis);
                (s.u, s.mu)
            })
            .collect())
    }
}

fn rel(a: &[f64], b: &[f64], denom: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt() / denom
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Sum over observation times of the relative Euclidean misfits of `u` and
/// `μ`. Times are visited in sorted order so the value does not depend on
/// how the observation lists them.
pub fn loss(theta: Theta, obs: &Observation, forward: &dyn ForwardModel) -> Result<f64> {
    let mut order: Vec<usize> = (0..obs.times.len()).collect();
    order.sort_by(|&a, &b| obs.times[a].total_cmp(&obs.times[b]));
    let mut norms = Vec::with_capacity(order.len());
    for &i in &order {
        let (nu, nm) = (norm(&obs.u[i]), norm(&obs.mu[i]));
        if nu == 0.0 {
            return Err(Error::DegenerateObservation { time: obs.times[i], field: "u" });
        }
        if nm == 0.0 {
            return Err(Error::DegenerateObservation { time: obs.times[i], field: "mu" });
        }
        norms.push((nu, nm));
    }
    let times: Vec<f64> = order.iter().map(|&i| obs.times[i]).collect();
    let pred = forward.predict(theta, &times)?;
    let mut total = 0.0;
    for ((&i, (u, mu)), (nu, nm)) in order.iter().zip(&pred).zip(&norms) {
        if u.len() != obs.u[i].len() || mu.len() != obs.mu[i].len() {
            return Err(Error::DimensionMismatch { context: "forward prediction", expected: obs.u[i].len(), found: u.len() });
        }
        total += rel(&obs.u[i], u, *nu) + rel(&obs.mu[i], mu, *nm);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSettings {
    pub bounds: ParamBox,
    pub theta0: Theta,
    #[serde(flatten)]
    pub lbfgs: LbfgsSettings,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings { bounds: ParamBox::TRAINING, theta0: Theta::new(1800.0, 3800.0), lbfgs: LbfgsSettings::default() }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        self.lbfgs.validate()?;
        if !self.bounds.contains(&self.theta0) {
            return Err(Error::Config(format!("initial guess ({}, {}) lies outside the bounds", self.theta0.lambda, self.theta0.a)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentReport {
    pub theta_opt: Theta,
    pub loss: f64,
    pub initial_loss: f64,
    pub loss_trace: Vec<f64>,
    pub n_evals: usize,
    pub n_iter: usize,
    pub stop: StopReason,
    pub wall_seconds: f64,
    /// `|θ_opt − θ_true| / θ_true` per parameter, when the truth is known.
    pub rel_error: Option<[f64; 2]>,
}

impl IdentReport {
    /// `iteration,loss` lines.
    pub fn trace_csv(&self) -> String {
        let rows: Vec<Vec<f64>> = self.loss_trace.iter().enumerate().map(|(i, l)| vec![i as f64, *l]).collect();
        crate::io::csv_string(&["iteration".into(), "loss".into()], &rows)
    }
}

pub fn identify(obs: &Observation, forward: &dyn ForwardModel, settings: &OptimizerSettings) -> Result<IdentReport> {
    settings.validate()?;
    let start = Instant::now();
    // the loss has a cone-shaped zero when the data is noise free
    let f = |x: &[f64]| loss(Theta::new(x[0], x[1]), obs, forward);
    let b = &settings.bounds;
    let m = minimize_box_nonneg(&f, &settings.theta0.as_array(), &b.lower(), &b.upper(), &settings.lbfgs)?;
    let theta_opt = Theta::new(m.x[0], m.x[1]);
    let rel_error = obs
        .truth
        .map(|t| [((theta_opt.lambda - t.lambda) / t.lambda).abs(), ((theta_opt.a - t.a) / t.a).abs()]);
    Ok(IdentReport {
        theta_opt,
        loss: m.f,
        initial_loss: m.trace[0],
        loss_trace: m.trace,
        n_evals: m.n_evals,
        n_iter: m.n_iter,
        stop: m.stop,
        wall_seconds: start.elapsed().as_secs_f64(),
        rel_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: Theta,
    pub best_loss: f64,
    /// Every grid point with its loss, λ-major.
    pub surface: Vec<(Theta, f64)>,
}

/// Exhaustive loss evaluation on the tensor grid `lambdas × a_values`.
pub fn grid_oracle(obs: &Observation, forward: &dyn ForwardModel, lambdas: &[f64], a_values: &[f64]) -> Result<GridResult> {
    if lambdas.is_empty() || a_values.is_empty() {
        return Err(Error::Config("grid needs at least one value per parameter".into()));
    }
    let points: Vec<Theta> = lambdas.iter().flat_map(|&l| a_values.iter().map(move |&a| Theta::new(l, a))).collect();
    let losses: Vec<f64> = points.par_iter().map(|&t| loss(t, obs, forward)).collect::<Result<_>>()?;
    let (k, &best_loss) = losses.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("grid is not empty");
    Ok(GridResult { best: points[k], best_loss, surface: points.into_iter().zip(losses).collect() })
}

/// Evenly spaced values spanning `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fom::{assemble_affine, solve_fom_with};
    use crate::mesh::ScenarioSpec;

    fn setup() -> (Discretization, MaterialParams) {
        (Discretization::new(&ScenarioSpec::square(3)).unwrap(), MaterialParams::nominal())
    }

    #[test]
    fn truth_gives_zero_loss_and_scaling_is_neutral() {
        let (disc, p) = setup();
        let ops = assemble_affine(&disc, &p);
        let tr = solve_fom_with(&disc, &ops, &p, 10, 0.25, &NoForcing).unwrap();
        let mut obs = Observation::from_trajectory(&tr, &[0.15, 0.25], Theta::NOMINAL, "").unwrap();
        let fwd = FomForward { disc: &disc, ops: &ops, base: p, n_t: 10, t_final: 0.25 };
        assert!(loss(Theta::NOMINAL, &obs, &fwd).unwrap() < 1e-12);

        let off = Theta::new(1300.0, 4500.0);
        let l = loss(off, &obs, &fwd).unwrap();
        assert!(l > 1e-4);
        // fields measured in units ten times smaller on both sides
        struct Scaled<'a>(&'a dyn ForwardModel);
        impl ForwardModel for Scaled<'_> {
            fn predict(&self, theta: Theta, times: &[f64]) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
                let scale = |v: Vec<f64>| v.into_iter().map(|x| 10.0 * x).collect();
                Ok(self.0.predict(theta, times)?.into_iter().map(|(u, m)| (scale(u), scale(m))).collect())
            }
        }
        let mut scaled = obs.clone();
        scaled.u.iter_mut().chain(scaled.mu.iter_mut()).flatten().for_each(|v| *v *= 10.0);
        let ls = loss(off, &scaled, &Scaled(&fwd)).unwrap();
        assert!((ls - l).abs() < 1e-13 * l);

        obs.times.reverse();
        obs.u.reverse();
        obs.mu.reverse();
        assert_eq!(loss(off, &obs, &fwd).unwrap().to_bits(), l.to_bits());
    }

    #[test]
    fn zero_field_is_degenerate() {
        let (disc, p) = setup();
        let ops = assemble_affine(&disc, &p);
        let tr = solve_fom_with(&disc, &ops, &p, 10, 0.25, &NoForcing).unwrap();
        let mut obs = Observation::from_trajectory(&tr, &[0.25], Theta::NOMINAL, "").unwrap();
        obs.u[0].fill(0.0);
        let fwd = FomForward { disc: &disc, ops: &ops, base: p, n_t: 10, t_final: 0.25 };
        assert!(matches!(loss(Theta::NOMINAL, &obs, &fwd), Err(Error::DegenerateObservation { field: "u", .. })));
    }

    #[test]
    fn off_grid_time_is_rejected() {
        assert!(step_indices(&[0.13], 10, 0.25).is_err());
        assert_eq!(step_indices(&[0.15, 0.25], 10, 0.25).unwrap(), vec![6, 10]);
    }

    #[test]
    fn observation_round_trip() {
        let (disc, p) = setup();
        let tr = crate::fom::solve_fom(&disc, &p, 4, 0.2).unwrap();
        let obs = Observation::from_trajectory(&tr, &[0.1, 0.2], Theta::NOMINAL, "h").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("obs.bin");
        obs.save(&path).unwrap();
        assert_eq!(Observation::load(&path).unwrap(), obs);
    }

    #[test]
    fn single_point_grid() {
        let (disc, p) = setup();
        let ops = assemble_affine(&disc, &p);
        let tr = solve_fom_with(&disc, &ops, &p, 5, 0.25, &NoForcing).unwrap();
        let obs = Observation::from_trajectory(&tr, &[0.25], Theta::NOMINAL, "").unwrap();
        let fwd = FomForward { disc: &disc, ops: &ops, base: p, n_t: 5, t_final: 0.25 };
        let g = grid_oracle(&obs, &fwd, &[1200.0], &[5000.0]).unwrap();
        assert_eq!(g.best, Theta::new(1200.0, 5000.0));
        assert_eq!(g.surface.len(), 1);
    }
}
