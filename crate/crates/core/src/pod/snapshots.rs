use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::fom::{assemble_affine, solve_fom_with, MaterialParams, NoForcing, Theta, Trajectory};
use crate::io::{read_container, write_container, SNAPSHOT_MAGIC};
use crate::mesh::Discretization;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnKey {
    pub sample: usize,
    pub step: usize,
    pub time: f64,
}

/// Full-order states arranged column-wise, sample-major then time.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    pub u: DMatrix<f64>,
    pub mu: DMatrix<f64>,
    pub columns: Vec<ColumnKey>,
    pub thetas: Vec<Theta>,
    pub spec_hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    U,
    Mu,
}

impl SnapshotSet {
    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn field(&self, f: Field) -> &DMatrix<f64> {
        match f {
            Field::U => &self.u,
            Field::Mu => &self.mu,
        }
    }

    /// Column indices belonging to one parameter sample, in time order.
    pub fn sample_columns(&self, sample: usize) -> Vec<usize> {
        self.columns.iter().enumerate().filter(|(_, k)| k.sample == sample).map(|(j, _)| j).collect()
    }

    /// The temporal snapshot matrix of one sample.
    pub fn sample_matrix(&self, f: Field, sample: usize) -> DMatrix<f64> {
        self.field(f).select_columns(self.sample_columns(sample).iter())
    }

    /// Assemble from trajectories, dropping each initial state.
    pub fn from_trajectories(trajectories: &[Trajectory], thetas: &[Theta], spec_hash: String) -> Self {
        Self::from_selected(trajectories, thetas, spec_hash, |_, step| step > 0)
    }

    pub(crate) fn from_selected(
        trajectories: &[Trajectory],
        thetas: &[Theta],
        spec_hash: String,
        keep: impl Fn(f64, usize) -> bool,
    ) -> Self {
        let mut columns = Vec::new();
        for (i, tr) in trajectories.iter().enumerate() {
            for (n, s) in tr.states.iter().enumerate() {
                if keep(s.t, n) {
                    columns.push(ColumnKey { sample: i, step: n, time: s.t });
                }
            }
        }
        let n_u = trajectories.first().map_or(0, |t| t.states[0].u.len());
        let n_mu = trajectories.first().map_or(0, |t| t.states[0].mu.len());
        let mut u = DMatrix::zeros(n_u, columns.len());
        let mut mu = DMatrix::zeros(n_mu, columns.len());
        for (j, k) in columns.iter().enumerate() {
            let s = &trajectories[k.sample].states[k.step];
            u.column_mut(j).copy_from_slice(&s.u);
            mu.column_mut(j).copy_from_slice(&s.mu);
        }
        SnapshotSet { u, mu, columns, thetas: thetas.to_vec(), spec_hash }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let n_u = self.u.nrows();
        let mut stacked = DMatrix::zeros(n_u + self.mu.nrows(), self.n_columns());
        stacked.rows_mut(0, n_u).copy_from(&self.u);
        stacked.rows_mut(n_u, self.mu.nrows()).copy_from(&self.mu);
        let footer = json!({
            "fields": [{"name": "u", "rows": n_u}, {"name": "mu", "rows": self.mu.nrows()}],
            "columns": self.columns,
            "params": self.thetas,
            "spec_hash": self.spec_hash,
        });
        write_container(path, SNAPSHOT_MAGIC, &stacked, None, &footer)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c = read_container(path)?;
        if c.singular_values.is_some() {
            return Err(Error::Format(format!("{} is a basis file, not snapshots", path.display())));
        }
        #[derive(Deserialize)]
        struct FieldRows {
            name: String,
            rows: usize,
        }
        #[derive(Deserialize)]
        struct Footer {
            fields: Vec<FieldRows>,
            columns: Vec<ColumnKey>,
            params: Vec<Theta>,
            spec_hash: String,
        }
        let f: Footer = serde_json::from_value(c.footer)?;
        let rows = |name: &str| {
            f.fields
                .iter()
                .find(|r| r.name == name)
                .map(|r| r.rows)
                .ok_or_else(|| Error::Format(format!("missing field {name} in footer")))
        };
        let (n_u, n_mu) = (rows("u")?, rows("mu")?);
        if n_u + n_mu != c.matrix.nrows() || f.columns.len() != c.matrix.ncols() {
            return Err(Error::Format("footer does not match matrix shape".into()));
        }
        Ok(SnapshotSet {
            u: c.matrix.rows(0, n_u).into_owned(),
            mu: c.matrix.rows(n_u, n_mu).into_owned(),
            columns: f.columns,
            thetas: f.params,
            spec_hash: f.spec_hash,
        })
    }
}

/// Run the full-order model at every parameter sample. Samples are solved
/// concurrently against shared operators and merged in sample order.
pub fn collect_trajectories(
    disc: &Discretization,
    base: &MaterialParams,
    thetas: &[Theta],
    n_t: usize,
    t_final: f64,
) -> Result<Vec<Trajectory>> {
    let ops = assemble_affine(disc, base);
    thetas
        .par_iter()
        .enumerate()
        .map(|(i, th)| solve_fom_with(disc, &ops, &base.with_theta(*th), n_t, t_final, &NoForcing).map_err(|e| e.in_sample(i)))
        .collect()
}

pub fn collect_snapshots(
    disc: &Discretization,
    base: &MaterialParams,
    thetas: &[Theta],
    n_t: usize,
    t_final: f64,
) -> Result<SnapshotSet> {
    if thetas.is_empty() {
        return Err(Error::Config("no parameter samples given".into()));
    }
    let trajectories = collect_trajectories(disc, base, thetas, n_t, t_final)?;
    Ok(SnapshotSet::from_trajectories(&trajectories, thetas, disc.spec.digest()))
}
