//! Online phase: Galerkin projection of the affine blocks and the reduced
//! implicit Euler march.

use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fom::{assemble_affine, solve_fom_with, AffineOperators, FomState, MaterialParams, NoForcing, Theta};
use crate::io::write_atomic;
use crate::mesh::{Discretization, ScenarioSpec};
use crate::pod::{ParamBox, ReducedBasis};
use crate::sparse::CsrMatrix;

/// Projected operator blocks. Everything that does not depend on `θ` is
/// precomputed here, once.
#[derive(Debug, Clone)]
pub struct ReducedOperators {
    pub a1: DMatrix<f64>,
    pub a2: DMatrix<f64>,
    pub a3: DMatrix<f64>,
    pub c1: DMatrix<f64>,
    pub c2: DMatrix<f64>,
    pub c3: DMatrix<f64>,
    pub b: DVector<f64>,
    pub a3_ones: DVector<f64>,
    pub d: DVector<f64>,
    /// Coefficients of the unit potential field in the potential basis.
    pub mu_unit: DVector<f64>,
    pub base: MaterialParams,
    pub bounds: Option<ParamBox>,
}

fn congruence(m: &CsrMatrix, left: &DMatrix<f64>, right: &DMatrix<f64>) -> DMatrix<f64> {
    left.tr_mul(&m.mul_dense(right))
}

fn max_dev_from_identity(v: &DMatrix<f64>) -> f64 {
    (v.tr_mul(v) - DMatrix::identity(v.ncols(), v.ncols())).amax()
}

pub fn project(ops: &AffineOperators, basis: &ReducedBasis, base: &MaterialParams) -> Result<ReducedOperators> {
    let (vu, vm) = (&basis.u.modes, &basis.mu.modes);
    if vu.nrows() != ops.n_u {
        return Err(Error::DimensionMismatch { context: "displacement basis", expected: ops.n_u, found: vu.nrows() });
    }
    if vm.nrows() != ops.n_mu {
        return Err(Error::DimensionMismatch { context: "potential basis", expected: ops.n_mu, found: vm.nrows() });
    }
    let vec = |v: &[f64], m: &DMatrix<f64>| m.tr_mul(&DVector::from_column_slice(v));

    // the Galerkin system needs no basis Gram matrix; only the initial
    // projection does, and it falls back to least squares for
    // non-orthonormal (weighted) bases
    let ones = DVector::from_element(ops.n_mu, 1.0);
    let mu_unit = if max_dev_from_identity(vm) < 1e-10 {
        vm.tr_mul(&ones)
    } else {
        log::warn!("potential basis is not Euclidean-orthonormal; projecting the initial state by least squares");
        let g = vm.tr_mul(vm);
        g.lu().solve(&vm.tr_mul(&ones)).ok_or(Error::Singular { equation: 0 })?
    };

    Ok(ReducedOperators {
        a1: congruence(&ops.a1, vu, vu),
        a2: congruence(&ops.a2, vu, vu),
        a3: congruence(&ops.a3, vu, vm),
        c1: congruence(&ops.c1, vm, vu),
        c2: congruence(&ops.c2, vm, vm),
        c3: congruence(&ops.c3, vm, vm),
        b: vec(&ops.b_vec, vu),
        a3_ones: vec(&ops.a3_ones, vu),
        d: vec(&ops.d_vec, vm),
        mu_unit,
        base: *base,
        bounds: None,
    })
}

impl ReducedOperators {
    pub fn r_u(&self) -> usize {
        self.a1.nrows()
    }

    pub fn r_mu(&self) -> usize {
        self.c2.nrows()
    }

    pub fn with_bounds(mut self, bounds: ParamBox) -> Self {
        self.bounds = Some(bounds);
        self
    }

    /// Dimension of the online system: independent of the mesh.
    pub fn system_dim(&self) -> usize {
        self.r_u() + self.r_mu()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RomState {
    pub xi_u: DVector<f64>,
    pub xi_mu: DVector<f64>,
    pub t: f64,
}

#[derive(Debug, Clone)]
pub struct RomTrajectory {
    pub dt: f64,
    pub states: Vec<RomState>,
}

/// Reduced implicit Euler march; the dense system is factored once.
pub fn solve_rom(red: &ReducedOperators, theta: Theta, n_t: usize, t_final: f64) -> Result<RomTrajectory> {
    let p = red.base.with_theta(theta);
    p.validate()?;
    if let Some(b) = &red.bounds {
        if !b.contains(&theta) {
            log::warn!("θ = ({}, {}) lies outside the trained box; the reduced model extrapolates", theta.lambda, theta.a);
        }
    }
    if !(t_final > 0.0) {
        return Err(Error::Config(format!("final time must be positive, got {t_final}")));
    }
    let dt = if n_t == 0 { t_final } else { t_final / n_t as f64 };
    let (ru, rm) = (red.r_u(), red.r_mu());

    let mut k = DMatrix::zeros(ru + rm, ru + rm);
    k.view_mut((0, 0), (ru, ru)).copy_from(&(2.0 * &red.a1 + p.lambda * &red.a2));
    k.view_mut((0, ru), (ru, rm)).copy_from(&(p.a * &red.a3));
    k.view_mut((ru, 0), (rm, ru)).copy_from(&red.c1);
    k.view_mut((ru, ru), (rm, rm)).copy_from(&(dt * (&red.c2 + &red.c3)));
    let lu = k.lu();
    if ru + rm > 0 && !lu.is_invertible() {
        return Err(Error::Singular { equation: 0 });
    }
    let momentum = &red.b + p.a * p.mu_0 * &red.a3_ones;
    let mass_load = dt * &red.d;

    let mut states = Vec::with_capacity(n_t + 1);
    states.push(RomState { xi_u: DVector::zeros(ru), xi_mu: p.mu_0 * &red.mu_unit, t: 0.0 });
    let mut rhs = DVector::zeros(ru + rm);
    for n in 0..n_t {
        let prev = &states[n];
        rhs.rows_mut(0, ru).copy_from(&momentum);
        let mass = &red.c1 * &prev.xi_u + &mass_load;
        rhs.rows_mut(ru, rm).copy_from(&mass);
        let x = lu.solve(&rhs).ok_or(Error::Singular { equation: 0 })?;
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Singular { equation: i });
        }
        states.push(RomState { xi_u: x.rows(0, ru).into_owned(), xi_mu: x.rows(ru, rm).into_owned(), t: (n + 1) as f64 * dt });
    }
    Ok(RomTrajectory { dt, states })
}

pub fn lift(state: &RomState, basis: &ReducedBasis) -> FomState {
    FomState {
        u: (&basis.u.modes * &state.xi_u).data.into(),
        mu: (&basis.mu.modes * &state.xi_mu).data.into(),
        t: state.t,
    }
}

/// Wall-clock comparison of one full-order and one reduced forward solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRecord {
    pub n_h: usize,
    pub fom_seconds: f64,
    pub rom_seconds: f64,
    pub ratio: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Medians over `reps` repetitions. The full-order time covers assembly,
/// factorization and stepping; the reduced time covers the online solve
/// only (no lifting).
pub fn speedup_report(
    disc: &Discretization,
    red: &ReducedOperators,
    theta: Theta,
    n_t: usize,
    t_final: f64,
    reps: usize,
) -> Result<SpeedupRecord> {
    let reps = reps.max(1);
    let p = red.base.with_theta(theta);
    let mut fom = Vec::with_capacity(reps);
    let mut rom = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t0 = Instant::now();
        let ops = assemble_affine(disc, &p);
        let tr = solve_fom_with(disc, &ops, &p, n_t, t_final, &NoForcing)?;
        fom.push(t0.elapsed().as_secs_f64());
        std::hint::black_box(tr);

        let t0 = Instant::now();
        let tr = solve_rom(red, theta, n_t, t_final)?;
        rom.push(t0.elapsed().as_secs_f64());
        std::hint::black_box(tr);
    }
    let (f, r) = (median(fom), median(rom));
    Ok(SpeedupRecord { n_h: disc.spec.n_h, fom_seconds: f, rom_seconds: r, ratio: f / r })
}

/// Everything needed to rebuild a reduced model on another run: the basis
/// files plus `rom.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RomManifest {
    pub spec: ScenarioSpec,
    pub spec_hash: String,
    pub base: MaterialParams,
    pub bounds: ParamBox,
    pub eta: f64,
    pub r_u: usize,
    pub r_mu: usize,
}

pub fn save_rom_package(dir: &Path, basis: &ReducedBasis, manifest: &RomManifest) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    basis.save(dir, &manifest.spec_hash)?;
    write_atomic(&dir.join("rom.json"), serde_json::to_string_pretty(manifest)?.as_bytes())
}

/// A reduced model ready for online use.
#[derive(Debug, Clone)]
pub struct RomPackage {
    pub manifest: RomManifest,
    pub basis: ReducedBasis,
    pub disc: Discretization,
    pub reduced: ReducedOperators,
}

impl RomPackage {
    pub fn build(disc: Discretization, basis: ReducedBasis, manifest: RomManifest) -> Result<Self> {
        let ops = assemble_affine(&disc, &manifest.base);
        let reduced = project(&ops, &basis, &manifest.base)?.with_bounds(manifest.bounds);
        Ok(RomPackage { manifest, basis, disc, reduced })
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: RomManifest = serde_json::from_slice(&std::fs::read(dir.join("rom.json"))?)?;
        let (basis, hash) = ReducedBasis::load(dir)?;
        if hash != manifest.spec_hash || manifest.spec.digest() != hash {
            return Err(Error::Format("basis files do not match the package scenario".into()));
        }
        let disc = Discretization::new(&manifest.spec)?;
        Self::build(disc, basis, manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pod::{FieldBasis, PodMethod};

    fn tiny() -> (Discretization, AffineOperators, MaterialParams) {
        let disc = Discretization::new(&ScenarioSpec::square(2)).unwrap();
        let p = MaterialParams::nominal();
        let ops = assemble_affine(&disc, &p);
        (disc, ops, p)
    }

    fn random_orthonormal(n: usize, r: usize, seed: u64) -> DMatrix<f64> {
        let mut s = seed;
        let m = DMatrix::from_fn(n, r, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        });
        m.qr().q()
    }

    fn basis(u: DMatrix<f64>, mu: DMatrix<f64>) -> ReducedBasis {
        ReducedBasis {
            u: FieldBasis { modes: u, sigma: vec![], retained_energy: 1.0 },
            mu: FieldBasis { modes: mu, sigma: vec![], retained_energy: 1.0 },
            method: PodMethod::Pod,
            temporal_modes: vec![],
        }
    }

    #[test]
    fn projected_blocks_match_dense_triple_products() {
        let (_, ops, p) = tiny();
        let b = basis(random_orthonormal(ops.n_u, 4, 1), random_orthonormal(ops.n_mu, 3, 2));
        let red = project(&ops, &b, &p).unwrap();
        // oracle: column-by-column dense products
        let a3 = ops.a3.to_dense();
        for j in 0..3 {
            let col = &a3 * b.mu.modes.column(j);
            for i in 0..4 {
                assert!((red.a3[(i, j)] - b.u.modes.column(i).dot(&col)).abs() < 1e-12);
            }
        }
        assert!((&red.a1 - red.a1.transpose()).amax() < 1e-12);
        assert!((&red.a2 - red.a2.transpose()).amax() < 1e-12);
        assert!((&red.c2 - red.c2.transpose()).amax() < 1e-12);
        assert_eq!(red.system_dim(), 7);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let (_, ops, p) = tiny();
        let b = basis(DMatrix::zeros(ops.n_u + 1, 2), DMatrix::zeros(ops.n_mu, 2));
        assert!(matches!(project(&ops, &b, &p), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn equilibrium_is_preserved() {
        let (disc, _, mut p) = tiny();
        p.mu_inf = p.mu_0;
        let ops = assemble_affine(&disc, &p);
        // a basis containing the constant potential
        let mu = DMatrix::from_element(ops.n_mu, 1, 1.0 / (ops.n_mu as f64).sqrt());
        let b = basis(random_orthonormal(ops.n_u, 3, 5), mu);
        let red = project(&ops, &b, &p).unwrap();
        let tr = solve_rom(&red, Theta::NOMINAL, 5, 0.25).unwrap();
        for s in &tr.states {
            let f = lift(s, &b);
            assert!(f.mu.iter().all(|v| (v - p.mu_0).abs() < 1e-12));
            assert!(s.xi_u.amax() < 1e-10);
        }
    }

    #[test]
    fn lift_of_unit_coefficients_is_the_mode() {
        let (_, ops, _) = tiny();
        let b = basis(random_orthonormal(ops.n_u, 3, 3), random_orthonormal(ops.n_mu, 2, 4));
        let mut xi_u = DVector::zeros(3);
        xi_u[1] = 1.0;
        let f = lift(&RomState { xi_u, xi_mu: DVector::zeros(2), t: 0.0 }, &b);
        assert_eq!(&f.u[..], b.u.modes.column(1).as_slice());
        assert!(f.mu.iter().all(|&v| v == 0.0));
    }
}
