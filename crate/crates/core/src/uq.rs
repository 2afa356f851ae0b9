//! Monte Carlo propagation of normally distributed `(λ, A)` through a
//! reduced model.
//!
//! Every quantity of interest is linear in the reduced coordinates for a
//! fixed θ, so the probe and stress maps are projected onto the basis once
//! and each sample only touches small dense matrices.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fom::{eval_at, FomState, MaterialParams, StrainOperator, Theta};
use crate::io::{csv_string, write_atomic};
use crate::mesh::{Discretization, Point};
use crate::pod::{draw_normal_in_box, ParamBox, ReducedBasis};
use crate::rom::{solve_rom, ReducedOperators, RomState};

/// Samples between progress checkpoints.
pub const CHECKPOINT_EVERY: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UqConfig {
    pub mean: Theta,
    /// Standard deviation as a fraction of the mean, per parameter.
    pub rel_std: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub probes: Vec<Point>,
    pub stress: bool,
    /// Draws outside this box are redrawn.
    pub bounds: ParamBox,
}

impl Default for UqConfig {
    fn default() -> Self {
        UqConfig {
            mean: Theta::NOMINAL,
            rel_std: 0.1,
            n_samples: 1000,
            seed: 0,
            probes: vec![[0.0, 0.0], [0.5, 0.0]],
            stress: true,
            bounds: ParamBox::TRAINING,
        }
    }
}

impl UqConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_std >= 0.0 && self.rel_std.is_finite()) {
            return Err(Error::Config(format!("relative std must be non-negative, got {}", self.rel_std)));
        }
        if self.n_samples == 0 {
            return Err(Error::Config("sample count must be at least 1".into()));
        }
        self.bounds.validate()?;
        if !self.bounds.contains(&self.mean) {
            return Err(Error::Config("ensemble mean lies outside the parameter box".into()));
        }
        Ok(())
    }

    pub fn std(&self) -> [f64; 2] {
        [self.rel_std * self.mean.lambda.abs(), self.rel_std * self.mean.a.abs()]
    }
}

/// Independent normal draws, redrawn until inside the box.
pub fn draw_samples(cfg: &UqConfig) -> Result<Vec<Theta>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.n_samples).map(|_| draw_normal_in_box(&mut rng, cfg.mean, cfg.std(), &cfg.bounds)).collect()
}

/// Domain average of `σ_xx` and `σ_yy`.
pub fn qoi_stress_mean(op: &StrainOperator, state: &FomState, params: &MaterialParams) -> [f64; 2] {
    let s = op.stress(&state.u, &state.mu, params);
    [s.mean_xx(), s.mean_yy()]
}

/// Largest `σ_xx` and `σ_yy` over all quadrature points.
pub fn qoi_stress_max(op: &StrainOperator, state: &FomState, params: &MaterialParams) -> [f64; 2] {
    let s = op.stress(&state.u, &state.mu, params);
    [s.max_xx(), s.max_yy()]
}

/// Time series of the quantities of interest for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QoiTrace {
    pub sample: usize,
    pub theta: Theta,
    /// `probe_mu[p][n]`: μ at probe `p` after step `n`.
    pub probe_mu: Vec<Vec<f64>>,
    pub mean_xx: Vec<f64>,
    pub mean_yy: Vec<f64>,
    pub max_xx: Vec<f64>,
    pub max_yy: Vec<f64>,
}

impl QoiTrace {
    /// Named series in a fixed order.
    pub fn series(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> =
            self.probe_mu.iter().enumerate().map(|(p, v)| (format!("mu_probe_{p}"), v.as_slice())).collect();
        if !self.mean_xx.is_empty() {
            out.push(("stress_mean_xx".into(), &self.mean_xx));
            out.push(("stress_mean_yy".into(), &self.mean_yy));
            out.push(("stress_max_xx".into(), &self.max_xx));
            out.push(("stress_max_yy".into(), &self.max_yy));
        }
        out
    }
}

/// Probe and stress maps restricted to the span of a basis.
pub struct ReducedQoi {
    probes: Vec<DVector<f64>>,
    /// `σ_xx = (2 + λ)·exx ξ_u + λ·eyy ξ_u − A(m ξ_μ − μ0)`, likewise for yy.
    exx: DMatrix<f64>,
    eyy: DMatrix<f64>,
    m: DMatrix<f64>,
    weights: DVector<f64>,
    area: f64,
    stress: bool,
}

impl ReducedQoi {
    pub fn new(disc: &Discretization, basis: &ReducedBasis, probes: &[Point], stress: bool) -> Result<Self> {
        let zero_u = vec![0.0; basis.u.dim()];
        let mut rows = Vec::with_capacity(probes.len());
        for &p in probes {
            let loc = disc.mesh.locate_point(p)?;
            let row: Vec<f64> = (0..basis.mu.rank())
                .map(|j| {
                    let mode: Vec<f64> = basis.mu.modes.column(j).iter().copied().collect();
                    eval_at(disc, &zero_u, &mode, &loc).mu
                })
                .collect();
            rows.push(DVector::from_vec(row));
        }
        let (exx, eyy, m, weights) = if stress {
            let op = StrainOperator::new(disc);
            (
                op.exx.mul_dense(&basis.u.modes),
                op.eyy.mul_dense(&basis.u.modes),
                op.mu.mul_dense(&basis.mu.modes),
                DVector::from_vec(op.weights.clone()),
            )
        } else {
            (DMatrix::zeros(0, 0), DMatrix::zeros(0, 0), DMatrix::zeros(0, 0), DVector::zeros(0))
        };
        let area = weights.sum();
        Ok(ReducedQoi { probes: rows, exx, eyy, m, weights, area, stress })
    }

    pub fn trace(&self, sample: usize, theta: Theta, states: &[RomState], params: &MaterialParams) -> QoiTrace {
        let n = states.len();
        let mut probe_mu = vec![Vec::with_capacity(n); self.probes.len()];
        let cap = if self.stress { n } else { 0 };
        let (mut mean_xx, mut mean_yy, mut max_xx, mut max_yy) =
            (Vec::with_capacity(cap), Vec::with_capacity(cap), Vec::with_capacity(cap), Vec::with_capacity(cap));
        for s in states {
            for (p, row) in self.probes.iter().enumerate() {
                probe_mu[p].push(row.dot(&s.xi_mu));
            }
            if self.stress {
                let ex = &self.exx * &s.xi_u;
                let ey = &self.eyy * &s.xi_u;
                let m = &self.m * &s.xi_mu;
                let iso = params.lambda * (&ex + &ey) - params.a * m.add_scalar(-params.mu_0);
                let xx = 2.0 * ex + &iso;
                let yy = 2.0 * ey + iso;
                mean_xx.push(self.weights.dot(&xx) / self.area);
                mean_yy.push(self.weights.dot(&yy) / self.area);
                max_xx.push(xx.max());
                max_yy.push(yy.max());
            }
        }
        QoiTrace { sample, theta, probe_mu, mean_xx, mean_yy, max_xx, max_yy }
    }
}

/// Pointwise-in-time statistics of one quantity over the ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub times: Vec<f64>,
    pub n_samples: usize,
    pub n_failed: usize,
    pub stats: BTreeMap<String, TraceStats>,
}

impl EnsembleSummary {
    /// Summary statistics in sample order, so a fixed ensemble always gives
    /// the same bits.
    pub fn from_traces(times: &[f64], traces: &[QoiTrace], n_failed: usize) -> Self {
        let mut stats = BTreeMap::new();
        if let Some(first) = traces.first() {
            for (k, (name, _)) in first.series().into_iter().enumerate() {
                let columns: Vec<&[f64]> = traces.iter().map(|t| t.series()[k].1).collect();
                let nt = times.len();
                let n = columns.len() as f64;
                let mut s = TraceStats { mean: vec![0.0; nt], std: vec![0.0; nt], min: vec![f64::INFINITY; nt], max: vec![f64::NEG_INFINITY; nt] };
                for i in 0..nt {
                    let mean = columns.iter().map(|c| c[i]).sum::<f64>() / n;
                    let var = if columns.len() > 1 {
                        columns.iter().map(|c| (c[i] - mean).powi(2)).sum::<f64>() / (n - 1.0)
                    } else {
                        0.0
                    };
                    s.mean[i] = mean;
                    s.std[i] = var.sqrt();
                    for c in &columns {
                        s.min[i] = s.min[i].min(c[i]);
                        s.max[i] = s.max[i].max(c[i]);
                    }
                    // rounding in the mean can step just outside the envelope
                    s.mean[i] = s.mean[i].clamp(s.min[i], s.max[i]);
                }
                stats.insert(name, s);
            }
        }
        EnsembleSummary { times: times.to_vec(), n_samples: traces.len(), n_failed, stats }
    }

    /// `T, mean, std, min, max` for one quantity.
    pub fn csv(&self, name: &str) -> Option<String> {
        let s = self.stats.get(name)?;
        let rows: Vec<Vec<f64>> =
            (0..self.times.len()).map(|i| vec![self.times[i], s.mean[i], s.std[i], s.min[i], s.max[i]]).collect();
        Some(csv_string(&["T".into(), "mean".into(), "std".into(), "min".into(), "max".into()], &rows))
    }
}

/// `T, sample_0, …` for one quantity.
pub fn ensemble_csv(times: &[f64], traces: &[QoiTrace], name: &str) -> Option<String> {
    let k = traces.first()?.series().iter().position(|(n, _)| n == name)?;
    let mut header = vec!["T".to_string()];
    header.extend(traces.iter().map(|t| format!("sample_{}", t.sample)));
    let rows: Vec<Vec<f64>> = (0..times.len())
        .map(|i| std::iter::once(times[i]).chain(traces.iter().map(|t| t.series()[k].1[i])).collect())
        .collect();
    Some(csv_string(&header, &rows))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub traces: Vec<QoiTrace>,
    pub summary: EnsembleSummary,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    config: UqConfig,
    n_t: usize,
    t_final: f64,
    done: usize,
    traces: Vec<QoiTrace>,
    failed: Vec<usize>,
}

/// One reduced solve per sample, in parallel, merged by sample index.
/// With `checkpoint` set, progress is saved every [`CHECKPOINT_EVERY`]
/// samples and a matching checkpoint left by an interrupted run is resumed.
pub fn propagate(
    cfg: &UqConfig,
    disc: &Discretization,
    reduced: &ReducedOperators,
    basis: &ReducedBasis,
    n_t: usize,
    t_final: f64,
    checkpoint: Option<&Path>,
) -> Result<Ensemble> {
    let thetas = draw_samples(cfg)?;
    let qoi = ReducedQoi::new(disc, basis, &cfg.probes, cfg.stress)?;
    let dt = if n_t == 0 { t_final } else { t_final / n_t as f64 };
    let times: Vec<f64> = (0..=n_t).map(|n| n as f64 * dt).collect();
    let total = thetas.len();
    let limit = total / 100; // more than 1% failures aborts

    let (mut done, mut traces, mut failed) = (0, Vec::with_capacity(total), Vec::new());
    if let Some(path) = checkpoint.filter(|p| p.exists()) {
        let ck: Checkpoint = serde_json::from_slice(&std::fs::read(path)?)?;
        if ck.config == *cfg && ck.n_t == n_t && ck.t_final == t_final {
            log::info!("resuming ensemble after {} samples", ck.done);
            (done, traces, failed) = (ck.done, ck.traces, ck.failed);
        }
    }

    while done < total {
        let end = (done + CHECKPOINT_EVERY).min(total);
        let results: Vec<(usize, Result<QoiTrace>)> = (done..end)
            .into_par_iter()
            .map(|i| {
                let theta = thetas[i];
                let r = solve_rom(reduced, theta, n_t, t_final).map(|tr| qoi.trace(i, theta, &tr.states, &reduced.base.with_theta(theta)));
                (i, r)
            })
            .collect();
        for (i, r) in results {
            match r {
                Ok(t) => traces.push(t),
                Err(e) => {
                    log::warn!("sample {i} skipped: {e}");
                    failed.push(i);
                }
            }
        }
        if failed.len() > limit {
            return Err(Error::EnsembleFailure { failed: failed.len(), total });
        }
        done = end;
        log::info!("ensemble progress {done}/{total}");
        if let Some(path) = checkpoint {
            let ck = Checkpoint { config: cfg.clone(), n_t, t_final, done, traces, failed };
            write_atomic(path, &serde_json::to_vec(&ck)?)?;
            (traces, failed) = (ck.traces, ck.failed);
        }
    }
    let summary = EnsembleSummary::from_traces(&times, &traces, failed.len());
    Ok(Ensemble { traces, summary })
}
