use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::io::{read_container, write_container, BASIS_MAGIC};
use crate::sparse::CsrMatrix;

use super::snapshots::{Field, SnapshotSet};
use super::svd::{svd_snapshots_weighted, truncate, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PodMethod {
    Pod,
    NestedPod,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    Energy(f64),
    Rank(usize),
}

/// Orthonormal modes of one field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldBasis {
    pub modes: DMatrix<f64>,
    /// Full singular spectrum of the final stage, not only the kept part.
    pub sigma: Vec<f64>,
    pub retained_energy: f64,
}

impl FieldBasis {
    pub fn rank(&self) -> usize {
        self.modes.ncols()
    }

    pub fn dim(&self) -> usize {
        self.modes.nrows()
    }

    pub fn save(&self, path: &Path, footer: serde_json::Value) -> Result<()> {
        write_container(path, BASIS_MAGIC, &self.modes, Some(&self.sigma), &footer)
    }

    pub fn load(path: &Path) -> Result<(Self, serde_json::Value)> {
        let c = read_container(path)?;
        let sigma = c.singular_values.ok_or_else(|| Error::Format(format!("{} is not a basis file", path.display())))?;
        let retained_energy = c.footer.get("retained_energy").and_then(|v| v.as_f64()).unwrap_or(f64::NAN);
        Ok((FieldBasis { modes: c.matrix, sigma, retained_energy }, c.footer))
    }
}

/// Spectra of both fields, from which bases of any rank can be cut.
#[derive(Debug, Clone)]
pub struct PodSpectra {
    pub u: Spectrum,
    pub mu: Spectrum,
    pub method: PodMethod,
    /// Temporal modes kept per sample (`[u, mu]`) by the nested variant.
    pub temporal_modes: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedBasis {
    pub u: FieldBasis,
    pub mu: FieldBasis,
    pub method: PodMethod,
    pub temporal_modes: Vec<[usize; 2]>,
}

fn cut(sp: &Spectrum, t: Truncation) -> Result<FieldBasis> {
    let r = match t {
        Truncation::Energy(eta) => truncate(&sp.sigma, eta)?,
        Truncation::Rank(r) => {
            if r > sp.rank() {
                log::warn!("requested rank {r} exceeds numerical rank {}; using {}", sp.rank(), sp.rank());
            }
            r.min(sp.rank())
        }
    };
    Ok(FieldBasis { modes: sp.modes.columns(0, r).into_owned(), sigma: sp.sigma.clone(), retained_energy: sp.retained_energy(r) })
}

impl PodSpectra {
    pub fn basis(&self, u: Truncation, mu: Truncation) -> Result<ReducedBasis> {
        Ok(ReducedBasis { u: cut(&self.u, u)?, mu: cut(&self.mu, mu)?, method: self.method, temporal_modes: self.temporal_modes.clone() })
    }
}

/// Optional mass matrices for the weighted inner product.
#[derive(Debug, Clone, Copy, Default)]
pub struct PodWeights<'a> {
    pub u: Option<&'a CsrMatrix>,
    pub mu: Option<&'a CsrMatrix>,
}

/// Partitioned POD of the complete snapshot matrices.
pub fn pod_spectra(s: &SnapshotSet, w: PodWeights) -> PodSpectra {
    let (u, mu) = rayon::join(|| svd_snapshots_weighted(&s.u, w.u), || svd_snapshots_weighted(&s.mu, w.mu));
    PodSpectra { u, mu, method: PodMethod::Pod, temporal_modes: Vec::new() }
}

pub fn pod(s: &SnapshotSet, eta: f64) -> Result<ReducedBasis> {
    pod_spectra(s, PodWeights::default()).basis(Truncation::Energy(eta), Truncation::Energy(eta))
}

/// Two-stage reduction: each sample's time history is compressed to its
/// leading singular-value-scaled modes, then the stacked compressed matrices
/// are reduced in space.
pub fn nested_spectra(s: &SnapshotSet, eta_time: f64, w: PodWeights) -> Result<PodSpectra> {
    let n_samples = s.thetas.len();
    let mut temporal_modes = vec![[0usize; 2]; n_samples];
    let mut stage = |field: Field, weight: Option<&CsrMatrix>, slot: usize| -> Result<DMatrix<f64>> {
        let blocks: Vec<DMatrix<f64>> = (0..n_samples)
            .map(|i| -> Result<DMatrix<f64>> {
                let sp = svd_snapshots_weighted(&s.sample_matrix(field, i), weight);
                let n_t = truncate(&sp.sigma, eta_time)?;
                if n_t == 0 {
                    return Err(Error::DegenerateSample { sample: i });
                }
                let mut b = sp.modes.columns(0, n_t).into_owned();
                for (k, mut c) in b.column_iter_mut().enumerate() {
                    c *= sp.sigma[k];
                }
                Ok(b)
            })
            .collect::<Result<_>>()?;
        for (i, b) in blocks.iter().enumerate() {
            temporal_modes[i][slot] = b.ncols();
        }
        let rows = s.field(field).nrows();
        let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
        let mut stacked = DMatrix::zeros(rows, cols);
        let mut at = 0;
        for b in &blocks {
            stacked.columns_mut(at, b.ncols()).copy_from(b);
            at += b.ncols();
        }
        Ok(stacked)
    };
    let su = stage(Field::U, w.u, 0)?;
    let smu = stage(Field::Mu, w.mu, 1)?;
    let (u, mu) = rayon::join(|| svd_snapshots_weighted(&su, w.u), || svd_snapshots_weighted(&smu, w.mu));
    Ok(PodSpectra { u, mu, method: PodMethod::NestedPod, temporal_modes })
}

pub fn nested_pod(s: &SnapshotSet, eta_time: f64, eta_space: f64) -> Result<ReducedBasis> {
    nested_spectra(s, eta_time, PodWeights::default())?.basis(Truncation::Energy(eta_space), Truncation::Energy(eta_space))
}

impl ReducedBasis {
    pub fn save(&self, dir: &Path, spec_hash: &str) -> Result<()> {
        for (name, fb) in [("u", &self.u), ("mu", &self.mu)] {
            let footer = json!({
                "field": name,
                "method": self.method,
                "r": fb.rank(),
                "retained_energy": fb.retained_energy,
                "temporal_modes": self.temporal_modes,
                "spec_hash": spec_hash,
            });
            fb.save(&dir.join(format!("basis_{name}.bin")), footer)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<(Self, String)> {
        let (u, fu) = FieldBasis::load(&dir.join("basis_u.bin"))?;
        let (mu, fm) = FieldBasis::load(&dir.join("basis_mu.bin"))?;
        let method: PodMethod = serde_json::from_value(fu["method"].clone())?;
        let temporal_modes: Vec<[usize; 2]> = serde_json::from_value(fu["temporal_modes"].clone())?;
        let hash = fu["spec_hash"].as_str().unwrap_or_default().to_string();
        if fm["spec_hash"].as_str() != Some(hash.as_str()) {
            return Err(Error::Format("basis files come from different scenarios".into()));
        }
        Ok((ReducedBasis { u, mu, method, temporal_modes }, hash))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pod::ColumnKey;
    use crate::fom::Theta;

    fn synthetic(samples: usize, steps: usize) -> SnapshotSet {
        let n = 12;
        let mut columns = Vec::new();
        let mut u = DMatrix::zeros(n, samples * steps);
        let mut mu = DMatrix::zeros(n / 2, samples * steps);
        for i in 0..samples {
            for k in 0..steps {
                let j = i * steps + k;
                let t = (k + 1) as f64 / steps as f64;
                let p = 1.0 + i as f64;
                for r in 0..n {
                    let x = r as f64 / n as f64;
                    u[(r, j)] = (1.0 - (-p * t).exp()) * x + t * t * (x * 3.0).sin() / p;
                }
                for r in 0..n / 2 {
                    let x = r as f64 / n as f64;
                    mu[(r, j)] = -0.3 + t * x * p + (p * x).cos() * t;
                }
                columns.push(ColumnKey { sample: i, step: k + 1, time: t });
            }
        }
        SnapshotSet { u, mu, columns, thetas: vec![Theta::NOMINAL; samples], spec_hash: String::new() }
    }

    #[test]
    fn single_sample_nested_matches_pod_subspace() {
        let s = synthetic(1, 9);
        let a = pod(&s, 1.0).unwrap();
        let b = nested_pod(&s, 1.0, 1.0).unwrap();
        for (x, y) in [(&a.u, &b.u), (&a.mu, &b.mu)] {
            assert_eq!(x.rank(), y.rank());
            // cosines of principal angles are the singular values of XᵀY
            let c = x.modes.tr_mul(&y.modes).singular_values();
            assert!(c.iter().all(|v| (1.0 - v).abs() < 1e-8), "{c:?}");
        }
    }

    #[test]
    fn degenerate_sample_is_reported() {
        let mut s = synthetic(2, 4);
        for j in s.sample_columns(1) {
            s.mu.column_mut(j).fill(0.0);
        }
        assert!(matches!(nested_pod(&s, 0.99, 0.99), Err(Error::DegenerateSample { sample: 1 })));
    }

    #[test]
    fn basis_round_trip() {
        let s = synthetic(3, 5);
        let b = nested_pod(&s, 0.9999, 0.9999).unwrap();
        let dir = tempfile::tempdir().unwrap();
        b.save(dir.path(), "abc").unwrap();
        let (back, hash) = ReducedBasis::load(dir.path()).unwrap();
        assert_eq!(hash, "abc");
        assert_eq!(back, b);
    }
}
