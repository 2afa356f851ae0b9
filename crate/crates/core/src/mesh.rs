//! Structured triangulations of the two scenario rectangles and the
//! Taylor–Hood degree-of-freedom layout built on top of them.
//!
//! Each grid cell `[x_i, x_{i+1}] × [y_j, y_{j+1}]` is split along the
//! diagonal from `(x_i, y_j)` to `(x_{i+1}, y_{j+1})`, so a unit square with
//! density `N_h` carries exactly `2 N_h²` triangles and refining by two
//! yields nested meshes.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Sides of the rectangle, listed counter-clockwise from the bottom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];

    /// Coordinate that varies along the side.
    fn tangential(self, p: Point) -> f64 {
        match self {
            Side::Bottom | Side::Top => p[0],
            Side::Left | Side::Right => p[1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioId {
    /// Quarter of a free-swelling square block.
    Square,
    /// Half of a co-axially printed bar.
    Bar,
    /// Fully clamped, fully exposed unit square used for manufactured solutions.
    Manufactured,
}

/// Mechanical condition on a side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechBc {
    TractionFree,
    FixX,
    FixY,
    Clamped,
}

impl MechBc {
    fn components(self) -> &'static [usize] {
        match self {
            MechBc::TractionFree => &[],
            MechBc::FixX => &[0],
            MechBc::FixY => &[1],
            MechBc::Clamped => &[0, 1],
        }
    }
}

/// Robin (solvent-exposed) portion of a side, as a tangential coordinate
/// interval. Everything outside Robin segments is zero-flux.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobinSegment {
    pub side: Side,
    pub from: f64,
    pub to: f64,
}

/// A single displacement component pinned at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointPin {
    pub at: Point,
    pub component: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: ScenarioId,
    pub n_h: usize,
    pub width: f64,
    pub height: f64,
    /// Mechanical condition per side in `Side::ALL` order.
    pub mechanical: [MechBc; 4],
    pub robin: Vec<RobinSegment>,
    pub pins: Vec<PointPin>,
    /// Fraction of the exposed side that is in contact with solvent.
    pub exposed_fraction: f64,
}

impl ScenarioSpec {
    pub fn square(n_h: usize) -> Self {
        ScenarioSpec {
            id: ScenarioId::Square,
            n_h,
            width: 1.0,
            height: 1.0,
            mechanical: [MechBc::FixY, MechBc::TractionFree, MechBc::TractionFree, MechBc::FixX],
            robin: vec![
                RobinSegment { side: Side::Right, from: 0.0, to: 1.0 },
                RobinSegment { side: Side::Top, from: 0.0, to: 1.0 },
            ],
            pins: Vec::new(),
            exposed_fraction: 1.0,
        }
    }

    /// Half bar `[0, 0.5] × [0, 4]`: the right side is the symmetry axis,
    /// the nozzle tip is at `y = 0` and the lower 75% of the left side is
    /// exposed to solvent.
    pub fn bar(n_h: usize) -> Self {
        let height = 4.0;
        let exposed = 0.75;
        ScenarioSpec {
            id: ScenarioId::Bar,
            n_h,
            width: 0.5,
            height,
            mechanical: [MechBc::TractionFree, MechBc::FixX, MechBc::TractionFree, MechBc::TractionFree],
            robin: vec![RobinSegment { side: Side::Left, from: 0.0, to: exposed * height }],
            pins: vec![PointPin { at: [0.5, 0.0], component: 1 }],
            exposed_fraction: exposed,
        }
    }

    pub fn manufactured(n_h: usize) -> Self {
        ScenarioSpec {
            id: ScenarioId::Manufactured,
            n_h,
            width: 1.0,
            height: 1.0,
            mechanical: [MechBc::Clamped; 4],
            robin: Side::ALL
                .iter()
                .map(|&side| RobinSegment { side, from: 0.0, to: 1.0 })
                .collect(),
            pins: Vec::new(),
            exposed_fraction: 1.0,
        }
    }

    pub fn from_id(id: ScenarioId, n_h: usize) -> Self {
        match id {
            ScenarioId::Square => Self::square(n_h),
            ScenarioId::Bar => Self::bar(n_h),
            ScenarioId::Manufactured => Self::manufactured(n_h),
        }
    }

    pub fn cells_x(&self) -> usize {
        self.n_h
    }

    pub fn cells_y(&self) -> usize {
        (self.n_h as f64 * self.height / self.width).round() as usize
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_h < 1 {
            return Err(Error::Config("n_h must be at least 1".into()));
        }
        if !(self.width > 0.0 && self.height > 0.0) || !self.width.is_finite() || !self.height.is_finite() {
            return Err(Error::Config(format!(
                "geometry ratios must be positive, got {} x {}",
                self.width, self.height
            )));
        }
        let ratio = self.n_h as f64 * self.height / self.width;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "height/width ratio {} does not give an integer cell count for n_h = {}",
                self.height / self.width,
                self.n_h
            )));
        }
        if !(0.0..=1.0).contains(&self.exposed_fraction) {
            return Err(Error::Config("exposed_fraction must lie in [0, 1]".into()));
        }
        for seg in &self.robin {
            if seg.from > seg.to {
                return Err(Error::Config(format!("Robin segment on {:?} is reversed", seg.side)));
            }
        }
        for pin in &self.pins {
            if pin.component > 1 {
                return Err(Error::Config("pinned component must be 0 or 1".into()));
            }
        }
        Ok(())
    }

    /// Stable digest of the scenario, used to tie persisted artifacts to
    /// the geometry they were computed on.
    pub fn digest(&self) -> String {
        crate::io::sha256_hex(serde_json::to_string(self).expect("spec serializes").as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    /// Vertex indices, oriented counter-clockwise around the domain.
    pub vertices: [usize; 2],
    pub side: Side,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub width: f64,
    pub height: f64,
    cells_x: usize,
    cells_y: usize,
}

/// Triangle containing a point, with barycentric coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub triangle: usize,
    pub bary: [f64; 3],
}

pub fn build_mesh(spec: &ScenarioSpec) -> Result<Mesh> {
    spec.validate()?;
    let (nx, ny) = (spec.cells_x(), spec.cells_y());
    let vid = |i: usize, j: usize| i * (ny + 1) + j;

    // vertex order is lexicographic in (x, y)
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for i in 0..=nx {
        for j in 0..=ny {
            vertices.push([
                spec.width * i as f64 / nx as f64,
                spec.height * j as f64 / ny as f64,
            ]);
        }
    }

    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            triangles.push([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)]);
            triangles.push([vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)]);
        }
    }

    let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        boundary_edges.push(BoundaryEdge { vertices: [vid(i, 0), vid(i + 1, 0)], side: Side::Bottom });
    }
    for j in 0..ny {
        boundary_edges.push(BoundaryEdge { vertices: [vid(nx, j), vid(nx, j + 1)], side: Side::Right });
    }
    for i in (0..nx).rev() {
        boundary_edges.push(BoundaryEdge { vertices: [vid(i + 1, ny), vid(i, ny)], side: Side::Top });
    }
    for j in (0..ny).rev() {
        boundary_edges.push(BoundaryEdge { vertices: [vid(0, j + 1), vid(0, j)], side: Side::Left });
    }

    Ok(Mesh {
        vertices,
        triangles,
        boundary_edges,
        width: spec.width,
        height: spec.height,
        cells_x: nx,
        cells_y: ny,
    })
}

impl Mesh {
    pub fn triangle_coords(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_coords(t);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn cells(&self) -> (usize, usize) {
        (self.cells_x, self.cells_y)
    }

    /// Find the triangle containing `p`. Points within `1e-12` of the
    /// bounding box are snapped onto it.
    pub fn locate_point(&self, p: Point) -> Result<Location> {
        const TOL: f64 = 1e-12;
        let [x, y] = p;
        if !(x >= -TOL && x <= self.width + TOL && y >= -TOL && y <= self.height + TOL) {
            return Err(Error::PointOutside { x, y });
        }
        let (nx, ny) = (self.cells_x, self.cells_y);
        let dx = self.width / nx as f64;
        let dy = self.height / ny as f64;
        let i = ((x / dx).floor().max(0.0) as usize).min(nx - 1);
        let j = ((y / dy).floor().max(0.0) as usize).min(ny - 1);
        let xi = ((x - i as f64 * dx) / dx).clamp(0.0, 1.0);
        let eta = ((y - j as f64 * dy) / dy).clamp(0.0, 1.0);
        let cell = 2 * (i * ny + j);
        if xi >= eta {
            Ok(Location { triangle: cell, bary: [1.0 - xi, xi - eta, eta] })
        } else {
            Ok(Location { triangle: cell + 1, bary: [1.0 - eta, xi, eta - xi] })
        }
    }

    /// Cartesian coordinates of a barycentric location.
    pub fn point_at(&self, loc: &Location) -> Point {
        let c = self.triangle_coords(loc.triangle);
        let mut p = [0.0; 2];
        for (k, v) in c.iter().enumerate() {
            p[0] += loc.bary[k] * v[0];
            p[1] += loc.bary[k] * v[1];
        }
        p
    }
}

/// A Dirichlet-constrained displacement dof.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirichletDof {
    pub dof: usize,
    pub node: usize,
    pub component: usize,
    pub value: f64,
}

/// A boundary edge carrying the Robin exchange condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobinEdge {
    /// Mesh vertex indices (equal to chemical-potential dofs).
    pub vertices: [usize; 2],
    pub side: Side,
}

/// Taylor–Hood dof maps: quadratic displacement on vertices plus edge
/// midpoints, linear chemical potential on vertices.
#[derive(Debug, Clone)]
pub struct FieldLayout {
    /// Quadratic nodes, sorted lexicographically by `(x, y)`.
    pub nodes: Vec<Point>,
    /// Per triangle: three vertex nodes, then midpoints of edges 01, 12, 20.
    pub tri_nodes: Vec<[usize; 6]>,
    /// Chemical-potential dof of each mesh vertex.
    pub vertex_mu_dof: Vec<usize>,
    /// Quadratic node sitting on each mesh vertex.
    pub vertex_node: Vec<usize>,
    pub n_u: usize,
    pub n_mu: usize,
    pub dirichlet: Vec<DirichletDof>,
    pub robin_edges: Vec<RobinEdge>,
}

fn lex_cmp(a: &Point, b: &Point) -> std::cmp::Ordering {
    a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1]))
}

pub fn build_layout(mesh: &Mesh, spec: &ScenarioSpec) -> Result<FieldLayout> {
    spec.validate()?;

    // chemical potential dofs: vertices in lexicographic order
    let mut vorder: Vec<usize> = (0..mesh.vertices.len()).collect();
    vorder.sort_by(|&a, &b| lex_cmp(&mesh.vertices[a], &mesh.vertices[b]));
    let mut vertex_mu_dof = vec![0; mesh.vertices.len()];
    for (dof, &v) in vorder.iter().enumerate() {
        vertex_mu_dof[v] = dof;
    }

    // quadratic nodes: vertices plus one midpoint per unique edge
    let mut raw_nodes: Vec<Point> = mesh.vertices.clone();
    let mut edge_mid: HashMap<(usize, usize), usize> = HashMap::new();
    let mut raw_tri = Vec::with_capacity(mesh.triangles.len());
    for tri in &mesh.triangles {
        let mut local = [tri[0], tri[1], tri[2], 0, 0, 0];
        for (k, (a, b)) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])].into_iter().enumerate() {
            let key = (a.min(b), a.max(b));
            let id = *edge_mid.entry(key).or_insert_with(|| {
                let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
                raw_nodes.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                raw_nodes.len() - 1
            });
            local[3 + k] = id;
        }
        raw_tri.push(local);
    }

    let mut order: Vec<usize> = (0..raw_nodes.len()).collect();
    order.sort_by(|&a, &b| lex_cmp(&raw_nodes[a], &raw_nodes[b]));
    let mut renumber = vec![0; raw_nodes.len()];
    for (new, &old) in order.iter().enumerate() {
        renumber[old] = new;
    }
    let nodes: Vec<Point> = order.iter().map(|&old| raw_nodes[old]).collect();
    let tri_nodes: Vec<[usize; 6]> = raw_tri.iter().map(|t| t.map(|n| renumber[n])).collect();
    let vertex_node: Vec<usize> = (0..mesh.vertices.len()).map(|v| renumber[v]).collect();

    // displacement constraints, keyed by dof so each appears once
    let mut constrained: BTreeMap<usize, DirichletDof> = BTreeMap::new();
    let mut add = |node: usize, component: usize| {
        let dof = 2 * node + component;
        constrained.entry(dof).or_insert(DirichletDof { dof, node, component, value: 0.0 });
    };
    for edge in &mesh.boundary_edges {
        let bc = spec.mechanical[Side::ALL.iter().position(|&s| s == edge.side).unwrap()];
        if bc.components().is_empty() {
            continue;
        }
        let [a, b] = edge.vertices;
        let mid = edge_mid[&(a.min(b), a.max(b))];
        for node in [renumber[a], renumber[b], renumber[mid]] {
            for &c in bc.components() {
                add(node, c);
            }
        }
    }
    for pin in &spec.pins {
        let node = nodes
            .iter()
            .position(|n| (n[0] - pin.at[0]).abs() < 1e-12 && (n[1] - pin.at[1]).abs() < 1e-12)
            .ok_or_else(|| Error::Config(format!("pinned point {:?} is not a mesh node", pin.at)))?;
        add(node, pin.component);
    }

    let mut robin_edges = Vec::new();
    for edge in &mesh.boundary_edges {
        let [a, b] = edge.vertices;
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        let t = edge.side.tangential([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
        let exposed = spec
            .robin
            .iter()
            .any(|seg| seg.side == edge.side && t >= seg.from - 1e-12 && t <= seg.to + 1e-12);
        if exposed {
            robin_edges.push(RobinEdge { vertices: [a, b], side: edge.side });
        }
    }

    Ok(FieldLayout {
        n_u: 2 * nodes.len(),
        n_mu: mesh.vertices.len(),
        nodes,
        tri_nodes,
        vertex_mu_dof,
        vertex_node,
        dirichlet: constrained.into_values().collect(),
        robin_edges,
    })
}

impl FieldLayout {
    /// Chemical-potential dofs of a triangle's vertices.
    pub fn tri_mu_dofs(&self, mesh: &Mesh, t: usize) -> [usize; 3] {
        mesh.triangles[t].map(|v| self.vertex_mu_dof[v])
    }

    /// Displacement dofs of a triangle, interleaved `(x, y)` per local node.
    pub fn tri_u_dofs(&self, t: usize) -> [usize; 12] {
        let n = self.tri_nodes[t];
        let mut d = [0; 12];
        for k in 0..6 {
            d[2 * k] = 2 * n[k];
            d[2 * k + 1] = 2 * n[k] + 1;
        }
        d
    }

    pub fn is_constrained(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n_u];
        for d in &self.dirichlet {
            mask[d.dof] = true;
        }
        mask
    }
}

/// A mesh together with its dof layout; immutable once built and shared
/// across solver instances.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub spec: ScenarioSpec,
    pub mesh: Mesh,
    pub layout: FieldLayout,
}

impl Discretization {
    pub fn new(spec: &ScenarioSpec) -> Result<Self> {
        let mesh = build_mesh(spec)?;
        let layout = build_layout(&mesh, spec)?;
        Ok(Discretization { spec: spec.clone(), mesh, layout })
    }
}
