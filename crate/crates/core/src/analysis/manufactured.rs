//! Manufactured solutions with matching body force, mass source and Robin
//! data, injected through the solver's forcing hooks.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fom::{assemble_affine, robin_blocks, scalar_load, solve_fom_with, vector_load, Forcing, MaterialParams, PointEval};
use crate::mesh::{Discretization, Point, ScenarioSpec};

use super::{exact_error, ConvergenceReport, FieldId, Norm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManufacturedKind {
    /// `u = (x², xy)`, `μ = x + y`: inside the discrete spaces.
    InSpace,
    /// `u = (x³, x²y)`, `μ = x + y`: displacement one degree beyond P2.
    CubicU,
    /// `u = (x³, x²y)`, `μ = x² + y²`: both fields beyond their spaces.
    Smooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeProfile {
    /// `g(T) = 1`
    Steady,
    /// `g(T) = e^{−T}`
    Decay,
}

/// Exact fields `u(x)·g(T)`, `μ(x)·g(T)` and the data that makes them
/// solve the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Manufactured {
    pub kind: ManufacturedKind,
    pub time: TimeProfile,
    pub params: MaterialParams,
}

impl Manufactured {
    pub fn new(kind: ManufacturedKind, time: TimeProfile, params: MaterialParams) -> Self {
        Manufactured { kind, time, params }
    }

    pub fn g(&self, t: f64) -> f64 {
        match self.time {
            TimeProfile::Steady => 1.0,
            TimeProfile::Decay => (-t).exp(),
        }
    }

    pub fn dg(&self, t: f64) -> f64 {
        match self.time {
            TimeProfile::Steady => 0.0,
            TimeProfile::Decay => -(-t).exp(),
        }
    }

    /// Spatial profiles: `(u, ∇u, μ, ∇μ)`.
    pub fn spatial(&self, p: Point) -> PointEval {
        let [x, y] = p;
        match self.kind {
            ManufacturedKind::InSpace => PointEval {
                u: [x * x, x * y],
                grad_u: [[2.0 * x, 0.0], [y, x]],
                mu: x + y,
                grad_mu: [1.0, 1.0],
            },
            ManufacturedKind::CubicU => PointEval {
                u: [x * x * x, x * x * y],
                grad_u: [[3.0 * x * x, 0.0], [2.0 * x * y, x * x]],
                mu: x + y,
                grad_mu: [1.0, 1.0],
            },
            ManufacturedKind::Smooth => PointEval {
                u: [x * x * x, x * x * y],
                grad_u: [[3.0 * x * x, 0.0], [2.0 * x * y, x * x]],
                mu: x * x + y * y,
                grad_mu: [2.0 * x, 2.0 * y],
            },
        }
    }

    pub fn exact(&self, p: Point, t: f64) -> PointEval {
        let s = self.spatial(p);
        let g = self.g(t);
        PointEval {
            u: s.u.map(|v| v * g),
            grad_u: s.grad_u.map(|r| r.map(|v| v * g)),
            mu: s.mu * g,
            grad_mu: s.grad_mu.map(|v| v * g),
        }
    }

    /// `(Δu, ∇(div u), Δμ)` of the spatial profiles.
    fn second_derivatives(&self, p: Point) -> ([f64; 2], [f64; 2], f64) {
        let [x, y] = p;
        match self.kind {
            ManufacturedKind::InSpace => ([2.0, 0.0], [3.0, 0.0], 0.0),
            ManufacturedKind::CubicU => ([6.0 * x, 2.0 * y], [8.0 * x, 0.0], 0.0),
            ManufacturedKind::Smooth => ([6.0 * x, 2.0 * y], [8.0 * x, 0.0], 4.0),
        }
    }

    /// Spatial body force, multiplied by `g(T)`:
    /// `−Δu − (1 + λ)∇(div u) + A∇μ`.
    pub fn body_force(&self, p: Point) -> [f64; 2] {
        let (lap, gdiv, _) = self.second_derivatives(p);
        let gm = self.spatial(p).grad_mu;
        let (l, a) = (self.params.lambda, self.params.a);
        [0, 1].map(|c| -lap[c] - (1.0 + l) * gdiv[c] + a * gm[c])
    }

    /// Mass source `div u̇ − Δμ` as the pair of spatial parts multiplying
    /// `g'(T)` and `g(T)`.
    pub fn mass_source(&self, p: Point) -> (f64, f64) {
        let s = self.spatial(p);
        let (_, _, lap_mu) = self.second_derivatives(p);
        (s.grad_u[0][0] + s.grad_u[1][1], -lap_mu)
    }

    /// Far-field potential `μ + (∇μ·n)/α` on the boundary of the unit square,
    /// spatial part.
    pub fn robin_data(&self, p: Point) -> f64 {
        let s = self.spatial(p);
        let n = unit_square_normal(p);
        s.mu + (s.grad_mu[0] * n[0] + s.grad_mu[1] * n[1]) / self.params.alpha_r
    }
}

/// Outward normal of the unit square at a boundary point away from corners.
fn unit_square_normal(p: Point) -> [f64; 2] {
    const TOL: f64 = 1e-12;
    if p[0] < TOL {
        [-1.0, 0.0]
    } else if p[0] > 1.0 - TOL {
        [1.0, 0.0]
    } else if p[1] < TOL {
        [0.0, -1.0]
    } else {
        [0.0, 1.0]
    }
}

/// Loads of a manufactured solution on one discretization.
pub struct ManufacturedForcing<'a> {
    sol: Manufactured,
    disc: &'a Discretization,
    body: Vec<f64>,
    source_rate: Vec<f64>,
    source_value: Vec<f64>,
}

impl<'a> ManufacturedForcing<'a> {
    pub fn new(sol: Manufactured, disc: &'a Discretization) -> Self {
        let body = vector_load(disc, |p| sol.body_force(p));
        let source_rate = scalar_load(disc, |p| sol.mass_source(p).0);
        let mut source_value = scalar_load(disc, |p| sol.mass_source(p).1);
        let (_, robin) = robin_blocks(disc, sol.params.alpha_r, |p| sol.robin_data(p));
        for (s, r) in source_value.iter_mut().zip(robin) {
            *s += r;
        }
        ManufacturedForcing { sol, disc, body, source_rate, source_value }
    }
}

impl Forcing for ManufacturedForcing<'_> {
    fn momentum_load(&self, t: f64, out: &mut [f64]) {
        let g = self.sol.g(t);
        for (o, b) in out.iter_mut().zip(&self.body) {
            *o += g * b;
        }
    }

    fn mass_load(&self, t: f64, out: &mut [f64]) {
        let (g, dg) = (self.sol.g(t), self.sol.dg(t));
        for ((o, r), v) in out.iter_mut().zip(&self.source_rate).zip(&self.source_value) {
            *o += dg * r + g * v;
        }
    }

    fn dirichlet_value(&self, t: f64, at: Point, component: usize, _default: f64) -> f64 {
        self.sol.exact(at, t).u[component]
    }

    fn initial_mu(&self, disc: &Discretization) -> Option<Vec<f64>> {
        let layout = &disc.layout;
        let mut mu = vec![0.0; layout.n_mu];
        for (v, &p) in self.disc.mesh.vertices.iter().enumerate() {
            mu[layout.vertex_mu_dof[v]] = self.sol.exact(p, 0.0).mu;
        }
        Some(mu)
    }
}

const NORMS: [Norm; 3] = [Norm::L2, Norm::H1, Norm::Linf];

/// Solve the manufactured problem at every `(N_h, N_t)` pair and report
/// errors against the exact fields at `t_final`. `levels` are the varying
/// resolutions, coarse to fine; `spatial` selects which dimension varies.
pub fn manufactured_verification(
    sol: &Manufactured,
    levels: &[usize],
    fixed: usize,
    spatial: bool,
    t_final: f64,
) -> Result<ConvergenceReport> {
    let mut params = sol.params;
    params.mu_inf = 0.0;
    params.body_force = [0.0, 0.0];
    let sol = Manufactured { params, ..*sol };
    let rows: Vec<Vec<(String, f64)>> = levels
        .par_iter()
        .map(|&level| -> Result<Vec<(String, f64)>> {
            let (n_h, n_t) = if spatial { (level, fixed) } else { (fixed, level) };
            let disc = Discretization::new(&ScenarioSpec::manufactured(n_h))?;
            let ops = assemble_affine(&disc, &params);
            let forcing = ManufacturedForcing::new(sol, &disc);
            let tr = solve_fom_with(&disc, &ops, &params, n_t, t_final, &forcing)?;
            let last = tr.final_state();
            let mut out = Vec::new();
            for field in [FieldId::U, FieldId::Mu] {
                for norm in NORMS {
                    let e = exact_error(&disc, last, field, norm, |p| sol.exact(p, last.t));
                    out.push((ConvergenceReport::key(field, norm), e));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut errors: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for row in rows {
        for (k, e) in row {
            errors.entry(k).or_default().push(e);
        }
    }
    Ok(ConvergenceReport::from_errors(levels.to_vec(), errors))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(sol: &Manufactured) {
        let h = 1e-4;
        let (l, a) = (sol.params.lambda, sol.params.a);
        for p in [[0.3, 0.7], [0.81, 0.12]] {
            let at = |dx: f64, dy: f64| sol.spatial([p[0] + dx, p[1] + dy]);
            let e = at(0.0, 0.0);
            // gradients against central differences of the values
            for c in 0..2 {
                let gx = (at(h, 0.0).u[c] - at(-h, 0.0).u[c]) / (2.0 * h);
                let gy = (at(0.0, h).u[c] - at(0.0, -h).u[c]) / (2.0 * h);
                assert!((gx - e.grad_u[c][0]).abs() < 1e-7 && (gy - e.grad_u[c][1]).abs() < 1e-7);
            }
            // div σ by differencing the stress of the exact fields
            let stress = |dx: f64, dy: f64| {
                let s = at(dx, dy);
                let div = s.grad_u[0][0] + s.grad_u[1][1];
                let iso = l * div - a * s.mu;
                [[2.0 * s.grad_u[0][0] + iso, s.grad_u[0][1] + s.grad_u[1][0]], [s.grad_u[0][1] + s.grad_u[1][0], 2.0 * s.grad_u[1][1] + iso]]
            };
            let b = sol.body_force(p);
            for c in 0..2 {
                let dsx = (stress(h, 0.0)[c][0] - stress(-h, 0.0)[c][0]) / (2.0 * h);
                let dsy = (stress(0.0, h)[c][1] - stress(0.0, -h)[c][1]) / (2.0 * h);
                assert!((-(dsx + dsy) - b[c]).abs() < 1e-4 * (1.0 + b[c].abs()), "{c}: {} vs {}", -(dsx + dsy), b[c]);
            }
            let lap = (at(h, 0.0).mu + at(-h, 0.0).mu + at(0.0, h).mu + at(0.0, -h).mu - 4.0 * e.mu) / (h * h);
            assert!((sol.mass_source(p).1 + lap).abs() < 1e-5);
        }
    }

    #[test]
    fn sources_match_finite_differences() {
        for kind in [ManufacturedKind::InSpace, ManufacturedKind::CubicU, ManufacturedKind::Smooth] {
            fd_check(&Manufactured::new(kind, TimeProfile::Steady, MaterialParams::nominal()));
        }
    }

    #[test]
    fn robin_data_on_each_side() {
        let s = Manufactured::new(ManufacturedKind::InSpace, TimeProfile::Steady, MaterialParams::nominal());
        let alpha = s.params.alpha_r;
        assert!((s.robin_data([1.0, 0.5]) - (1.5 + 1.0 / alpha)).abs() < 1e-15);
        assert!((s.robin_data([0.0, 0.5]) - (0.5 - 1.0 / alpha)).abs() < 1e-15);
        assert!((s.robin_data([0.5, 0.0]) - (0.5 - 1.0 / alpha)).abs() < 1e-15);
    }

    #[test]
    fn in_space_steady_solution_is_reproduced() {
        let sol = Manufactured::new(ManufacturedKind::InSpace, TimeProfile::Steady, MaterialParams::nominal());
        let r = manufactured_verification(&sol, &[2, 3], 4, true, 0.1).unwrap();
        for (k, e) in &r.errors {
            // the coupling scales the momentum equation by ~10³
            assert!(e.iter().all(|v| *v < 1e-9), "{k}: {e:?}");
        }
    }
}
