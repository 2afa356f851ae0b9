//! Parameter-independent operator blocks of the semi-discrete problem.
//!
//! The momentum rows are `2 A1 u + λ A2 u + A A3 (μ - μ0) = b` and the mass
//! rows are `C1 du/dT + (C2 + C3) μ = d`, so every parameter enters as a
//! scalar weight on a fixed block.

use crate::element::{p2_values, ElementGeometry};
use crate::mesh::{Discretization, Point};
use crate::quadrature::{edge_gauss3, TRI_DEGREE4};
use crate::sparse::CsrMatrix;

use super::params::MaterialParams;

#[derive(Debug, Clone)]
pub struct AffineOperators {
    pub n_u: usize,
    pub n_mu: usize,
    /// `∫ ε(u) : ε(v)`
    pub a1: CsrMatrix,
    /// `∫ div u div v`
    pub a2: CsrMatrix,
    /// `-∫ μ div v` (rows: displacement, columns: potential)
    pub a3: CsrMatrix,
    /// `∫ div u q` (rows: potential, columns: displacement)
    pub c1: CsrMatrix,
    /// `∫ grad μ · grad q`
    pub c2: CsrMatrix,
    /// `α_R ∫_R μ q`
    pub c3: CsrMatrix,
    /// `∫ b · v`
    pub b_vec: Vec<f64>,
    /// `α_R ∫_R μ∞ q`
    pub d_vec: Vec<f64>,
    /// `A3 · 1`, the coupling of a unit uniform potential.
    pub a3_ones: Vec<f64>,
    /// Displacement mass matrix, for weighted inner products.
    pub mass_u: CsrMatrix,
    /// Potential mass matrix.
    pub mass_mu: CsrMatrix,
}

pub fn assemble_affine(disc: &Discretization, params: &MaterialParams) -> AffineOperators {
    let (mesh, layout) = (&disc.mesh, &disc.layout);
    let (n_u, n_mu) = (layout.n_u, layout.n_mu);
    let nt = mesh.triangles.len();

    let mut a1 = Vec::with_capacity(nt * 144);
    let mut a2 = Vec::with_capacity(nt * 144);
    let mut a3 = Vec::with_capacity(nt * 36);
    let mut c2 = Vec::with_capacity(nt * 9);
    let mut mu_mass = Vec::with_capacity(nt * 9);
    let mut u_mass = Vec::with_capacity(nt * 72);
    let mut b_vec = vec![0.0; n_u];

    for t in 0..nt {
        let geo = ElementGeometry::new(mesh.triangle_coords(t));
        let udofs = layout.tri_u_dofs(t);
        let mdofs = layout.tri_mu_dofs(mesh, t);

        let mut ka1 = [[0.0; 12]; 12];
        let mut ka2 = [[0.0; 12]; 12];
        let mut ka3 = [[0.0; 3]; 12];
        let mut km = [[0.0; 6]; 6];
        let mut kmu = [[0.0; 3]; 3];
        for qp in TRI_DEGREE4.iter() {
            let w = qp.weight * geo.area;
            let g = geo.p2_grads(qp.bary);
            let n = p2_values(qp.bary);
            let psi = qp.bary;
            for i in 0..6 {
                for c in 0..2 {
                    let a = 2 * i + c;
                    for j in 0..6 {
                        let gij = g[i][0] * g[j][0] + g[i][1] * g[j][1];
                        for d in 0..2 {
                            let b = 2 * j + d;
                            let delta = if c == d { gij } else { 0.0 };
                            ka1[a][b] += w * 0.5 * (delta + g[i][d] * g[j][c]);
                            ka2[a][b] += w * g[i][c] * g[j][d];
                        }
                    }
                    for k in 0..3 {
                        ka3[a][k] -= w * psi[k] * g[i][c];
                    }
                    b_vec[udofs[a]] += w * params.body_force[c] * n[i];
                }
                for j in 0..6 {
                    km[i][j] += w * n[i] * n[j];
                }
            }
            for k in 0..3 {
                for l in 0..3 {
                    kmu[k][l] += w * psi[k] * psi[l];
                }
            }
        }
        // P1 stiffness is constant on the element
        for k in 0..3 {
            for l in 0..3 {
                let gk = geo.grad_bary[k];
                let gl = geo.grad_bary[l];
                c2.push((mdofs[k], mdofs[l], geo.area * (gk[0] * gl[0] + gk[1] * gl[1])));
                mu_mass.push((mdofs[k], mdofs[l], kmu[k][l]));
            }
        }
        for a in 0..12 {
            for b in 0..12 {
                a1.push((udofs[a], udofs[b], ka1[a][b]));
                a2.push((udofs[a], udofs[b], ka2[a][b]));
            }
            for k in 0..3 {
                a3.push((udofs[a], mdofs[k], ka3[a][k]));
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                for c in 0..2 {
                    u_mass.push((udofs[2 * i + c], udofs[2 * j + c], km[i][j]));
                }
            }
        }
    }

    let (c3, d_vec) = robin_blocks(disc, params.alpha_r, |_| params.mu_inf);

    let a3 = CsrMatrix::from_triplets(n_u, n_mu, a3);
    let c1 = {
        let mut t = a3.transpose();
        t = CsrMatrix::from_triplets(n_mu, n_u, t.triplets().map(|(r, c, v)| (r, c, -v)).collect());
        t
    };
    let a3_ones = a3.mul_vec(&vec![1.0; n_mu]);

    AffineOperators {
        n_u,
        n_mu,
        a1: CsrMatrix::from_triplets(n_u, n_u, a1),
        a2: CsrMatrix::from_triplets(n_u, n_u, a2),
        a3,
        c1,
        c2: CsrMatrix::from_triplets(n_mu, n_mu, c2),
        c3,
        b_vec,
        d_vec,
        a3_ones,
        mass_u: CsrMatrix::from_triplets(n_u, n_u, u_mass),
        mass_mu: CsrMatrix::from_triplets(n_mu, n_mu, mu_mass),
    }
}

/// Robin boundary mass `α ∫_R μ q` and load `α ∫_R μ∞ q` for a possibly
/// position-dependent ambient potential.
pub fn robin_blocks(disc: &Discretization, alpha: f64, mu_inf: impl Fn(Point) -> f64) -> (CsrMatrix, Vec<f64>) {
    let (mesh, layout) = (&disc.mesh, &disc.layout);
    let mut trip = Vec::with_capacity(layout.robin_edges.len() * 4);
    let mut load = vec![0.0; layout.n_mu];
    for edge in &layout.robin_edges {
        let [a, b] = edge.vertices;
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
        let dofs = [layout.vertex_mu_dof[a], layout.vertex_mu_dof[b]];
        let mut m = [[0.0; 2]; 2];
        let mut f = [0.0; 2];
        for (s, w) in edge_gauss3() {
            let phi = [1.0 - s, s];
            let p = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
            let ext = mu_inf(p);
            for k in 0..2 {
                f[k] += w * len * alpha * ext * phi[k];
                for l in 0..2 {
                    m[k][l] += w * len * alpha * phi[k] * phi[l];
                }
            }
        }
        for k in 0..2 {
            load[dofs[k]] += f[k];
            for l in 0..2 {
                trip.push((dofs[k], dofs[l], m[k][l]));
            }
        }
    }
    (CsrMatrix::from_triplets(layout.n_mu, layout.n_mu, trip), load)
}

/// `∫ f · v` for a vector field `f` against the quadratic basis.
pub fn vector_load(disc: &Discretization, f: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
    let (mesh, layout) = (&disc.mesh, &disc.layout);
    let mut out = vec![0.0; layout.n_u];
    for t in 0..mesh.triangles.len() {
        let geo = ElementGeometry::new(mesh.triangle_coords(t));
        let dofs = layout.tri_u_dofs(t);
        for qp in TRI_DEGREE4.iter() {
            let w = qp.weight * geo.area;
            let val = f(geo.point(qp.bary));
            let n = p2_values(qp.bary);
            for i in 0..6 {
                out[dofs[2 * i]] += w * val[0] * n[i];
                out[dofs[2 * i + 1]] += w * val[1] * n[i];
            }
        }
    }
    out
}

/// `∫ f q` for a scalar field `f` against the linear basis.
pub fn scalar_load(disc: &Discretization, f: impl Fn(Point) -> f64) -> Vec<f64> {
    let (mesh, layout) = (&disc.mesh, &disc.layout);
    let mut out = vec![0.0; layout.n_mu];
    for t in 0..mesh.triangles.len() {
        let geo = ElementGeometry::new(mesh.triangle_coords(t));
        let dofs = layout.tri_mu_dofs(mesh, t);
        for qp in TRI_DEGREE4.iter() {
            let w = qp.weight * geo.area;
            let val = f(geo.point(qp.bary));
            for k in 0..3 {
                out[dofs[k]] += w * val * qp.bary[k];
            }
        }
    }
    out
}
