//! Quadrature rules.

/// Symmetric 6-point rule, exact for polynomials of degree 4 on triangles:
/// (barycentric coordinates, weight relative to the triangle area).
pub const TRIANGLE: [([f64; 3], f64); 6] = {
    const A1: f64 = 0.445_948_490_915_964_886_32;
    const W1: f64 = 0.223_381_589_678_011_465_70;
    const A2: f64 = 0.091_576_213_509_770_743_460;
    const W2: f64 = 0.109_951_743_655_321_867_64;
    const B1: f64 = 1.0 - 2.0 * A1;
    const B2: f64 = 1.0 - 2.0 * A2;
    [
        ([A1, A1, B1], W1),
        ([A1, B1, A1], W1),
        ([B1, A1, A1], W1),
        ([A2, A2, B2], W2),
        ([A2, B2, A2], W2),
        ([B2, A2, A2], W2),
    ]
};

/// 3-point Gauss–Legendre rule on [0, 1] (exact to degree 5): (t, weight).
pub const EDGE: [(f64, f64); 3] = [
    (0.112_701_665_379_258_311_48, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_688_52, 5.0 / 18.0),
];

#[cfg(test)]
mod tests {
    use super::*;

    fn monomial(i: i32, j: i32) -> f64 {
        // ∫ over the reference triangle of x^i y^j = i! j! / (i + j + 2)!
        let f = |n: i32| (1..=n).map(|k| k as f64).product::<f64>();
        f(i) * f(j) / f(i + j + 2)
    }

    #[test]
    fn triangle_rule_is_degree_four() {
        for i in 0..=4 {
            for j in 0..=(4 - i) {
                let q: f64 = TRIANGLE.iter().map(|(b, w)| 0.5 * w * b[1].powi(i) * b[2].powi(j)).sum();
                assert!((q - monomial(i, j)).abs() < 1e-15, "x^{i} y^{j}");
            }
        }
    }

    #[test]
    fn edge_rule_is_degree_five() {
        for k in 0..=5 {
            let q: f64 = EDGE.iter().map(|(t, w)| w * t.powi(k)).sum();
            assert!((q - 1.0 / (k + 1) as f64).abs() < 1e-15);
        }
    }
}
