//! Point evaluation of finite-element fields and the stress recovered at
//! quadrature points.

use crate::element::{p2_values, ElementGeometry};
use crate::error::Result;
use crate::mesh::{Discretization, Location, Point};
use crate::quadrature::TRI_DEGREE4;
use crate::sparse::CsrMatrix;

use super::params::MaterialParams;
use super::solver::FomState;

/// Values and gradients of both fields at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEval {
    pub mu: f64,
    pub grad_mu: [f64; 2],
    pub u: [f64; 2],
    /// `grad_u[c][d] = ∂u_c/∂x_d`
    pub grad_u: [[f64; 2]; 2],
}

pub fn eval_at(disc: &Discretization, u: &[f64], mu: &[f64], loc: &Location) -> PointEval {
    let (mesh, layout) = (&disc.mesh, &disc.layout);
    let geo = ElementGeometry::new(mesh.triangle_coords(loc.triangle));
    let mdofs = layout.tri_mu_dofs(mesh, loc.triangle);
    let udofs = layout.tri_u_dofs(loc.triangle);
    let n = p2_values(loc.bary);
    let g = geo.p2_grads(loc.bary);

    let mut out = PointEval { mu: 0.0, grad_mu: [0.0; 2], u: [0.0; 2], grad_u: [[0.0; 2]; 2] };
    for k in 0..3 {
        let m = mu[mdofs[k]];
        out.mu += loc.bary[k] * m;
        out.grad_mu[0] += geo.grad_bary[k][0] * m;
        out.grad_mu[1] += geo.grad_bary[k][1] * m;
    }
    for i in 0..6 {
        for c in 0..2 {
            let v = u[udofs[2 * i + c]];
            out.u[c] += n[i] * v;
            out.grad_u[c][0] += g[i][0] * v;
            out.grad_u[c][1] += g[i][1] * v;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeValue {
    pub mu: f64,
    pub u: [f64; 2],
}

pub fn probe(disc: &Discretization, state: &FomState, points: &[Point]) -> Result<Vec<ProbeValue>> {
    points
        .iter()
        .map(|&p| {
            let loc = disc.mesh.locate_point(p)?;
            let e = eval_at(disc, &state.u, &state.mu, &loc);
            Ok(ProbeValue { mu: e.mu, u: e.u })
        })
        .collect()
}

/// Linear maps from dof vectors to strain components and potential at every
/// quadrature point, in triangle-major order.
#[derive(Debug, Clone)]
pub struct StrainOperator {
    pub exx: CsrMatrix,
    pub eyy: CsrMatrix,
    pub exy: CsrMatrix,
    pub mu: CsrMatrix,
    /// Quadrature weight times element area.
    pub weights: Vec<f64>,
    pub points: Vec<Point>,
}

impl StrainOperator {
    pub fn new(disc: &Discretization) -> Self {
        let (mesh, layout) = (&disc.mesh, &disc.layout);
        let nq = mesh.triangles.len() * TRI_DEGREE4.len();
        let (mut exx, mut eyy, mut exy, mut mu) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let mut weights = Vec::with_capacity(nq);
        let mut points = Vec::with_capacity(nq);
        for t in 0..mesh.triangles.len() {
            let geo = ElementGeometry::new(mesh.triangle_coords(t));
            let udofs = layout.tri_u_dofs(t);
            let mdofs = layout.tri_mu_dofs(mesh, t);
            for qp in TRI_DEGREE4.iter() {
                let row = weights.len();
                let g = geo.p2_grads(qp.bary);
                for i in 0..6 {
                    let (dx, dy) = (udofs[2 * i], udofs[2 * i + 1]);
                    exx.push((row, dx, g[i][0]));
                    eyy.push((row, dy, g[i][1]));
                    exy.push((row, dx, 0.5 * g[i][1]));
                    exy.push((row, dy, 0.5 * g[i][0]));
                }
                for k in 0..3 {
                    mu.push((row, mdofs[k], qp.bary[k]));
                }
                weights.push(qp.weight * geo.area);
                points.push(geo.point(qp.bary));
            }
        }
        StrainOperator {
            exx: CsrMatrix::from_triplets(nq, layout.n_u, exx),
            eyy: CsrMatrix::from_triplets(nq, layout.n_u, eyy),
            exy: CsrMatrix::from_triplets(nq, layout.n_u, exy),
            mu: CsrMatrix::from_triplets(nq, layout.n_mu, mu),
            weights,
            points,
        }
    }

    pub fn n_points(&self) -> usize {
        self.weights.len()
    }

    pub fn stress(&self, u: &[f64], mu: &[f64], params: &MaterialParams) -> StressField {
        let exx = self.exx.mul_vec(u);
        let eyy = self.eyy.mul_vec(u);
        let exy = self.exy.mul_vec(u);
        let m = self.mu.mul_vec(mu);
        let n = self.n_points();
        let (mut xx, mut yy) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for q in 0..n {
            let iso = params.lambda * (exx[q] + eyy[q]) - params.a * (m[q] - params.mu_0);
            xx.push(2.0 * exx[q] + iso);
            yy.push(2.0 * eyy[q] + iso);
        }
        let xy = exy.iter().map(|e| 2.0 * e).collect();
        StressField { xx, yy, xy, weights: self.weights.clone() }
    }
}

/// Stress components at quadrature points. The tensor is stored once per
/// point with a single shear entry, so symmetry holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct StressField {
    pub xx: Vec<f64>,
    pub yy: Vec<f64>,
    pub xy: Vec<f64>,
    pub weights: Vec<f64>,
}

impl StressField {
    pub fn tensor(&self, q: usize) -> [[f64; 2]; 2] {
        [[self.xx[q], self.xy[q]], [self.xy[q], self.yy[q]]]
    }

    fn mean(&self, v: &[f64]) -> f64 {
        let area: f64 = self.weights.iter().sum();
        v.iter().zip(&self.weights).map(|(s, w)| s * w).sum::<f64>() / area
    }

    pub fn mean_xx(&self) -> f64 {
        self.mean(&self.xx)
    }

    pub fn mean_yy(&self) -> f64 {
        self.mean(&self.yy)
    }

    pub fn max_xx(&self) -> f64 {
        self.xx.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_yy(&self) -> f64 {
        self.yy.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn stress_field(disc: &Discretization, state: &FomState, params: &MaterialParams) -> StressField {
    StrainOperator::new(disc).stress(&state.u, &state.mu, params)
}
