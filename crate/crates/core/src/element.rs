//! Linear and quadratic Lagrange shape functions on straight triangles.
//!
//! Quadratic local nodes follow the layout convention: the three vertices,
//! then the midpoints of edges 01, 12 and 20.

use crate::mesh::Point;

#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub coords: [Point; 3],
    pub area: f64,
    /// Constant gradients of the barycentric coordinates.
    pub grad_bary: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn new(coords: [Point; 3]) -> Self {
        let [p0, p1, p2] = coords;
        let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let inv = 1.0 / det;
        let grad_bary = [
            [(p1[1] - p2[1]) * inv, (p2[0] - p1[0]) * inv],
            [(p2[1] - p0[1]) * inv, (p0[0] - p2[0]) * inv],
            [(p0[1] - p1[1]) * inv, (p1[0] - p0[0]) * inv],
        ];
        ElementGeometry { coords, area: 0.5 * det, grad_bary }
    }

    pub fn point(&self, bary: [f64; 3]) -> Point {
        let mut p = [0.0; 2];
        for k in 0..3 {
            p[0] += bary[k] * self.coords[k][0];
            p[1] += bary[k] * self.coords[k][1];
        }
        p
    }

    pub fn p2_grads(&self, bary: [f64; 3]) -> [[f64; 2]; 6] {
        p2_grads(bary, &self.grad_bary)
    }
}

pub fn p2_values(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

pub fn p2_grads(l: [f64; 3], g: &[[f64; 2]; 3]) -> [[f64; 2]; 6] {
    let mut out = [[0.0; 2]; 6];
    for k in 0..3 {
        let s = 4.0 * l[k] - 1.0;
        out[k] = [s * g[k][0], s * g[k][1]];
    }
    for (m, (i, j)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
        out[3 + m] = [
            4.0 * (l[j] * g[i][0] + l[i] * g[j][0]),
            4.0 * (l[j] * g[i][1] + l[i] * g[j][1]),
        ];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p2_is_nodal() {
        let nodes = [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.5, 0.5, 0.0],
            [0.0, 0.5, 0.5],
            [0.5, 0.0, 0.5],
        ];
        for (i, n) in nodes.iter().enumerate() {
            let v = p2_values(*n);
            for (j, vj) in v.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((vj - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn p2_gradients_match_finite_differences() {
        let geo = ElementGeometry::new([[0.1, 0.2], [1.3, 0.4], [0.5, 1.1]]);
        let bary_of = |p: Point| {
            // invert the affine map
            let [p0, p1, p2] = geo.coords;
            let det = 2.0 * geo.area;
            let l1 = ((p[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p[1] - p0[1])) / det;
            let l2 = ((p1[0] - p0[0]) * (p[1] - p0[1]) - (p[0] - p0[0]) * (p1[1] - p0[1])) / det;
            [1.0 - l1 - l2, l1, l2]
        };
        let bary = [0.2, 0.3, 0.5];
        let p = geo.point(bary);
        let grads = geo.p2_grads(bary);
        let h = 1e-6;
        for k in 0..6 {
            for d in 0..2 {
                let mut pp = p;
                let mut pm = p;
                pp[d] += h;
                pm[d] -= h;
                let fd = (p2_values(bary_of(pp))[k] - p2_values(bary_of(pm))[k]) / (2.0 * h);
                assert!((fd - grads[k][d]).abs() < 1e-8, "node {k} dir {d}");
            }
        }
    }
}
