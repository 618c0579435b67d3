//! Quadrature rules on the reference interval [0, 1] and the reference
//! triangle {(x, y) : x, y >= 0, x + y <= 1}, both exact to polynomial
//! degree (at least) 4. Weights sum to the reference cell measure.

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    /// Reference coordinates; second component unused in 1D.
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub degree: u32,
}

/// Three-point Gauss-Legendre rule on [0, 1] (exact to degree 5).
pub fn interval_rule() -> QuadratureRule {
    let s = (0.6f64).sqrt(); // sqrt(3/5)
    QuadratureRule {
        points: vec![
            [0.5 * (1.0 - s), 0.0],
            [0.5, 0.0],
            [0.5 * (1.0 + s), 0.0],
        ],
        weights: vec![5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0],
        degree: 5,
    }
}

/// Six-point symmetric rule on the reference triangle (exact to degree 4);
/// weights sum to the reference area 1/2.
pub fn triangle_rule() -> QuadratureRule {
    let a1 = 0.445_948_490_915_965;
    let w1 = 0.223_381_589_678_011 / 2.0;
    let a2 = 0.091_576_213_509_771;
    let w2 = 0.109_951_743_655_322 / 2.0;
    let mut points = Vec::with_capacity(6);
    let mut weights = Vec::with_capacity(6);
    for (a, w) in [(a1, w1), (a2, w2)] {
        // Barycentric (a, a, 1 - 2a) and its two rotations, mapped to
        // reference coordinates (lambda_2, lambda_3).
        for bary in [
            [1.0 - 2.0 * a, a, a],
            [a, 1.0 - 2.0 * a, a],
            [a, a, 1.0 - 2.0 * a],
        ] {
            points.push([bary[1], bary[2]]);
            weights.push(w);
        }
    }
    QuadratureRule {
        points,
        weights,
        degree: 4,
    }
}
