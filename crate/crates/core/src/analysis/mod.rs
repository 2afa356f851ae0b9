//! Error norms of finite-element fields, convergence orders, reduced-model
//! error tables and the manufactured-solution harness.

mod manufactured;
mod study;

pub use manufactured::{manufactured_verification, Manufactured, ManufacturedKind, TimeProfile};
pub use study::{rom_error_table, spatial_study, temporal_study, ErrorRow, ErrorTable, StudyConfig};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::element::ElementGeometry;
use crate::error::{Error, Result};
use crate::fom::{eval_at, FomState, PointEval};
use crate::mesh::{Discretization, Location, Point};
use crate::quadrature::TRI_DEGREE4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldId {
    U,
    Mu,
}

impl FieldId {
    pub fn name(self) -> &'static str {
        match self {
            FieldId::U => "u",
            FieldId::Mu => "mu",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Norm {
    L1,
    L2,
    Linf,
    /// Full `H¹` norm, `(‖v‖²_L2 + ‖∇v‖²_L2)^½`.
    H1,
    H1Semi,
}

impl Norm {
    pub fn name(self) -> &'static str {
        match self {
            Norm::L1 => "L1",
            Norm::L2 => "L2",
            Norm::Linf => "Linf",
            Norm::H1 => "H1",
            Norm::H1Semi => "H1semi",
        }
    }
}

/// Integrals accumulated over quadrature points: `∫|v|`, `∫|v|²`, `∫|∇v|²`.
#[derive(Debug, Default, Clone, Copy)]
struct Moments {
    abs: f64,
    sq: f64,
    grad_sq: f64,
}

impl Moments {
    fn add(&mut self, w: f64, value: &[f64], grad: &[[f64; 2]]) {
        let sq: f64 = value.iter().map(|v| v * v).sum();
        self.abs += w * sq.sqrt();
        self.sq += w * sq;
        self.grad_sq += w * grad.iter().map(|g| g[0] * g[0] + g[1] * g[1]).sum::<f64>();
    }

    fn norm(&self, n: Norm) -> f64 {
        match n {
            Norm::L1 => self.abs,
            Norm::L2 => self.sq.sqrt(),
            Norm::H1 => (self.sq + self.grad_sq).sqrt(),
            Norm::H1Semi => self.grad_sq.sqrt(),
            Norm::Linf => unreachable!("maximum norms are not integrals"),
        }
    }
}

fn select(e: &PointEval, field: FieldId) -> (Vec<f64>, Vec<[f64; 2]>) {
    match field {
        FieldId::U => (e.u.to_vec(), e.grad_u.to_vec()),
        FieldId::Mu => (vec![e.mu], vec![e.grad_mu]),
    }
}

/// Integrate `f(point, location)` against the degree-four rule over every
/// triangle; the closure returns the integrand value and gradient.
fn integrate(disc: &Discretization, mut f: impl FnMut(Point, &Location) -> (Vec<f64>, Vec<[f64; 2]>)) -> Moments {
    let mesh = &disc.mesh;
    let mut m = Moments::default();
    for t in 0..mesh.triangles.len() {
        let geo = ElementGeometry::new(mesh.triangle_coords(t));
        for qp in TRI_DEGREE4.iter() {
            let loc = Location { triangle: t, bary: qp.bary };
            let (v, g) = f(geo.point(qp.bary), &loc);
            m.add(qp.weight * geo.area, &v, &g);
        }
    }
    m
}

/// Norm of one field of a state, as a finite-element function. `L∞` is the
/// largest absolute dof value.
pub fn field_norm(disc: &Discretization, state: &FomState, field: FieldId, norm: Norm) -> f64 {
    let values = match field {
        FieldId::U => &state.u,
        FieldId::Mu => &state.mu,
    };
    if norm == Norm::Linf {
        return values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    }
    integrate(disc, |_, loc| select(&eval_at(disc, &state.u, &state.mu, loc), field)).norm(norm)
}

/// Norm of `a − b` for two states on the same layout.
pub fn difference_norm(disc: &Discretization, a: &FomState, b: &FomState, field: FieldId, norm: Norm) -> Result<f64> {
    if a.u.len() != b.u.len() || a.mu.len() != b.mu.len() {
        return Err(Error::DimensionMismatch { context: "state difference", expected: a.u.len() + a.mu.len(), found: b.u.len() + b.mu.len() });
    }
    let diff = FomState {
        u: a.u.iter().zip(&b.u).map(|(x, y)| x - y).collect(),
        mu: a.mu.iter().zip(&b.mu).map(|(x, y)| x - y).collect(),
        t: a.t,
    };
    Ok(field_norm(disc, &diff, field, norm))
}

/// Norm of `fine − coarse` on the fine mesh, evaluating the coarse field by
/// point location. Exact up to quadrature when the meshes are nested. `L∞`
/// is taken over the fine dof locations.
pub fn cross_mesh_error(
    fine: &Discretization,
    fine_state: &FomState,
    coarse: &Discretization,
    coarse_state: &FomState,
    field: FieldId,
    norm: Norm,
) -> Result<f64> {
    if norm == Norm::Linf {
        let layout = &fine.layout;
        let mut worst = 0.0f64;
        match field {
            FieldId::U => {
                for (i, &p) in layout.nodes.iter().enumerate() {
                    let c = eval_at(coarse, &coarse_state.u, &coarse_state.mu, &coarse.mesh.locate_point(p)?);
                    for k in 0..2 {
                        worst = worst.max((fine_state.u[2 * i + k] - c.u[k]).abs());
                    }
                }
            }
            FieldId::Mu => {
                for (v, &p) in fine.mesh.vertices.iter().enumerate() {
                    let c = eval_at(coarse, &coarse_state.u, &coarse_state.mu, &coarse.mesh.locate_point(p)?);
                    worst = worst.max((fine_state.mu[layout.vertex_mu_dof[v]] - c.mu).abs());
                }
            }
        }
        return Ok(worst);
    }
    let mut failure = None;
    let m = integrate(fine, |p, loc| {
        let f = select(&eval_at(fine, &fine_state.u, &fine_state.mu, loc), field);
        let c = match coarse.mesh.locate_point(p) {
            Ok(cl) => select(&eval_at(coarse, &coarse_state.u, &coarse_state.mu, &cl), field),
            Err(e) => {
                failure.get_or_insert(e);
                return (vec![0.0], vec![[0.0; 2]]);
            }
        };
        let v = f.0.iter().zip(&c.0).map(|(a, b)| a - b).collect();
        let g = f.1.iter().zip(&c.1).map(|(a, b)| [a[0] - b[0], a[1] - b[1]]).collect();
        (v, g)
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(m.norm(norm)),
    }
}

/// Norm of `state − exact` for analytic fields `exact(p) = (u, ∇u, μ, ∇μ)`.
pub fn exact_error(
    disc: &Discretization,
    state: &FomState,
    field: FieldId,
    norm: Norm,
    exact: impl Fn(Point) -> PointEval,
) -> f64 {
    if norm == Norm::Linf {
        let layout = &disc.layout;
        return match field {
            FieldId::U => layout
                .nodes
                .iter()
                .enumerate()
                .flat_map(|(i, &p)| {
                    let e = exact(p).u;
                    [(state.u[2 * i] - e[0]).abs(), (state.u[2 * i + 1] - e[1]).abs()]
                })
                .fold(0.0, f64::max),
            FieldId::Mu => disc
                .mesh
                .vertices
                .iter()
                .enumerate()
                .map(|(v, &p)| (state.mu[layout.vertex_mu_dof[v]] - exact(p).mu).abs())
                .fold(0.0, f64::max),
        };
    }
    integrate(disc, |p, loc| {
        let h = select(&eval_at(disc, &state.u, &state.mu, loc), field);
        let e = select(&exact(p), field);
        (
            h.0.iter().zip(&e.0).map(|(a, b)| a - b).collect(),
            h.1.iter().zip(&e.1).map(|(a, b)| [a[0] - b[0], a[1] - b[1]]).collect(),
        )
    })
    .norm(norm)
}

/// Observed order from three errors on successively halved resolutions:
/// `log₂ |(E_h − E_{h/2}) / (E_{h/2} − E_{h/4})|`.
pub fn convergence_order(e: [f64; 3]) -> Result<f64> {
    if e.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Config(format!("errors must be positive and finite, got {e:?}")));
    }
    let (num, den) = (e[0] - e[1], e[1] - e[2]);
    if den == 0.0 || num == 0.0 {
        return Err(Error::UndefinedOrder);
    }
    Ok((num / den).abs().log2())
}

/// Errors per level and the order estimated from the last three.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// `N_h` or `N_t` per level, coarse to fine.
    pub levels: Vec<usize>,
    /// Keyed by `"<field>_<norm>"`.
    pub errors: BTreeMap<String, Vec<f64>>,
    pub orders: BTreeMap<String, f64>,
}

impl ConvergenceReport {
    pub fn key(field: FieldId, norm: Norm) -> String {
        format!("{}_{}", field.name(), norm.name())
    }

    pub fn from_errors(levels: Vec<usize>, errors: BTreeMap<String, Vec<f64>>) -> Self {
        let mut orders = BTreeMap::new();
        for (k, e) in &errors {
            if e.len() >= 3 {
                let n = e.len();
                match convergence_order([e[n - 3], e[n - 2], e[n - 1]]) {
                    Ok(p) => {
                        orders.insert(k.clone(), p);
                    }
                    Err(err) => log::warn!("{k}: {err}"),
                }
            }
        }
        ConvergenceReport { levels, errors, orders }
    }

    pub fn order(&self, field: FieldId, norm: Norm) -> Option<f64> {
        self.orders.get(&Self::key(field, norm)).copied()
    }

    /// One row per level: `level, <key>…`, then an `order` row.
    pub fn csv(&self) -> String {
        let keys: Vec<&String> = self.errors.keys().collect();
        let mut header = vec!["level".to_string()];
        header.extend(keys.iter().map(|k| k.to_string()));
        let mut out = header.join(",") + "\n";
        for (i, l) in self.levels.iter().enumerate() {
            let row: Vec<String> =
                std::iter::once(l.to_string()).chain(keys.iter().map(|k| format!("{:?}", self.errors[*k][i]))).collect();
            out += &(row.join(",") + "\n");
        }
        let row: Vec<String> = std::iter::once("order".to_string())
            .chain(keys.iter().map(|k| self.orders.get(*k).map_or("nan".into(), |p| format!("{p:?}"))))
            .collect();
        out + &row.join(",") + "\n"
    }
}

/// Interpolate analytic fields into the finite-element space.
pub fn interpolate(disc: &Discretization, u: impl Fn(Point) -> [f64; 2], mu: impl Fn(Point) -> f64) -> FomState {
    let layout = &disc.layout;
    let uu = layout.nodes.iter().flat_map(|&p| u(p)).collect();
    let mut mm = vec![0.0; layout.n_mu];
    for (v, &p) in disc.mesh.vertices.iter().enumerate() {
        mm[layout.vertex_mu_dof[v]] = mu(p);
    }
    FomState { u: uu, mu: mm, t: 0.0 }
}
