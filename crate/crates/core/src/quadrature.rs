//! Fixed quadrature rules on the reference triangle and reference edge.

/// A point in barycentric coordinates with its weight, normalized so the
/// weights sum to one (multiply by the element area).
#[derive(Debug, Clone, Copy)]
pub struct TriPoint {
    pub bary: [f64; 3],
    pub weight: f64,
}

const A1: f64 = 0.445_948_490_915_964_886;
const W1: f64 = 0.223_381_589_678_011_466;
const A2: f64 = 0.091_576_213_509_770_743;
const W2: f64 = 0.109_951_743_655_321_868;

/// Six-point rule exact for polynomials of degree four.
pub const TRI_DEGREE4: [TriPoint; 6] = [
    TriPoint { bary: [A1, A1, 1.0 - 2.0 * A1], weight: W1 },
    TriPoint { bary: [A1, 1.0 - 2.0 * A1, A1], weight: W1 },
    TriPoint { bary: [1.0 - 2.0 * A1, A1, A1], weight: W1 },
    TriPoint { bary: [A2, A2, 1.0 - 2.0 * A2], weight: W2 },
    TriPoint { bary: [A2, 1.0 - 2.0 * A2, A2], weight: W2 },
    TriPoint { bary: [1.0 - 2.0 * A2, A2, A2], weight: W2 },
];

/// Three-point Gauss–Legendre rule on `[0, 1]`: `(parameter, weight)` pairs
/// with weights summing to one (multiply by the edge length).
pub fn edge_gauss3() -> [(f64, f64); 3] {
    let d = 0.5 * (0.6f64).sqrt();
    [(0.5 - d, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + d, 5.0 / 18.0)]
}
