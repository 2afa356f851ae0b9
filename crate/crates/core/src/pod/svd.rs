//! Method of snapshots: the left singular vectors of a tall snapshot matrix
//! are recovered from the eigenvectors of its small Gram matrix.

use faer::{Mat, MatRef, Side};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Gram eigenvalues below this fraction of the largest are treated as zero.
pub const DROP_TOLERANCE: f64 = 1e-14;

/// Orthonormal modes with their singular values, largest first.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub sigma: Vec<f64>,
    pub modes: DMatrix<f64>,
    /// `‖S − V Vᵀ S‖²` over all retained modes: the energy of the discarded
    /// directions, evaluated directly rather than by subtraction.
    pub dropped_energy: f64,
}

impl Spectrum {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn total_energy(&self) -> f64 {
        self.sigma.iter().map(|s| s * s).sum::<f64>() + self.dropped_energy
    }

    /// Fraction of energy captured by the first `r` modes.
    pub fn retained_energy(&self, r: usize) -> f64 {
        let total = self.total_energy();
        if total == 0.0 {
            return 1.0;
        }
        self.sigma[..r.min(self.rank())].iter().map(|s| s * s).sum::<f64>() / total
    }

    /// Energy left out by the first `r` modes.
    pub fn tail_energy(&self, r: usize) -> f64 {
        self.sigma[r.min(self.rank())..].iter().map(|s| s * s).sum::<f64>() + self.dropped_energy
    }
}

/// Smallest `r` whose leading squared singular values reach the fraction `eta`
/// of the total.
pub fn truncate(sigma: &[f64], eta: f64) -> Result<usize> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Config(format!("energy target must lie in (0, 1], got {eta}")));
    }
    let total: f64 = sigma.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return Ok(0);
    }
    let mut acc = 0.0;
    for (i, s) in sigma.iter().enumerate() {
        acc += s * s;
        if acc / total >= eta {
            return Ok(i + 1);
        }
    }
    Ok(sigma.len())
}

pub fn svd_snapshots(s: &DMatrix<f64>) -> Spectrum {
    svd_snapshots_weighted(s, None)
}

/// Snapshot POD in the inner product `xᵀ W y` (Euclidean when `weight` is
/// `None`).
pub fn svd_snapshots_weighted(s: &DMatrix<f64>, weight: Option<&CsrMatrix>) -> Spectrum {
    let (n, m) = s.shape();
    let empty = Spectrum { sigma: Vec::new(), modes: DMatrix::zeros(n, 0), dropped_energy: 0.0 };
    if m == 0 || n == 0 {
        return empty;
    }
    let ws = weight.map(|w| w.mul_dense(s));
    let sf = to_faer(s);
    let gram = match &ws {
        Some(ws) => sf.transpose() * to_faer(ws),
        None => sf.transpose() * &sf,
    };
    let gram = Mat::from_fn(m, m, |i, j| 0.5 * (gram[(i, j)] + gram[(j, i)]));
    let Ok(eig) = gram.self_adjoint_eigen(Side::Lower) else {
        return empty;
    };
    let values: Vec<f64> = (0..m).map(|k| eig.S()[k]).collect();
    let lmax = values.iter().copied().fold(0.0, f64::max);
    if lmax <= 0.0 {
        return empty;
    }

    // eigenvalues come in nondecreasing order
    let order: Vec<usize> = (0..m).rev().filter(|&k| values[k] >= DROP_TOLERANCE * lmax).collect();
    let u = eig.U();
    let w = Mat::from_fn(m, order.len(), |i, j| u[(i, order[j])]);
    let mut modes = from_faer((&sf * &w).as_ref());

    let dot = |a: &DVector<f64>, b: &DVector<f64>| match weight {
        Some(wm) => a.dot(&DVector::from_vec(wm.mul_vec(b.as_slice()))),
        None => a.dot(b),
    };
    // two passes of modified Gram–Schmidt restore orthonormality that the
    // squared condition number of the Gram matrix erodes
    let mut kept = Vec::with_capacity(order.len());
    for j in 0..modes.ncols() {
        let mut v = modes.column(j).into_owned();
        let norm0 = dot(&v, &v).sqrt();
        for _ in 0..2 {
            for q in &kept {
                let c = dot(q, &v);
                v.axpy(-c, q, 1.0);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-8 * norm0 && norm > 0.0 {
            kept.push(v / norm);
        }
    }
    modes = if kept.is_empty() { DMatrix::zeros(n, 0) } else { DMatrix::from_columns(&kept) };

    // singular values as the energy each final mode captures
    let mf = to_faer(&modes);
    let coeff = from_faer(
        match &ws {
            Some(ws) => mf.transpose() * to_faer(ws),
            None => mf.transpose() * &sf,
        }
        .as_ref(),
    );
    let mut sigma: Vec<f64> = (0..modes.ncols()).map(|i| coeff.row(i).norm()).collect();
    let mut idx: Vec<usize> = (0..sigma.len()).collect();
    idx.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
    if idx.iter().enumerate().any(|(i, &k)| i != k) {
        modes = DMatrix::from_columns(&idx.iter().map(|&k| modes.column(k).into_owned()).collect::<Vec<_>>());
        sigma = idx.iter().map(|&k| sigma[k]).collect();
    }

    let dropped_energy = residual_energy(s, &modes, weight);
    Spectrum { sigma, modes, dropped_energy }
}

/// `‖S − V Vᵀ S‖²` in the chosen inner product, computed from the residual
/// itself so small values keep their relative accuracy.
pub fn residual_energy(s: &DMatrix<f64>, v: &DMatrix<f64>, weight: Option<&CsrMatrix>) -> f64 {
    let (sf, vf) = (to_faer(s), to_faer(v));
    let proj = match weight {
        Some(w) => &vf * (vf.transpose() * to_faer(&w.mul_dense(s))),
        None => &vf * (vf.transpose() * &sf),
    };
    let r = from_faer((sf - proj).as_ref());
    match weight {
        Some(w) => r.dot(&w.mul_dense(&r)),
        None => r.norm_squared(),
    }
}

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}
