//! Interior vertex placement: centres of quadtree leaves refined until the
//! leaf side is below the local spacing, with a small deterministic jitter.
//!
//! The jitter is odd under reflection through the root centre, so a
//! point-symmetric size field yields a point-symmetric vertex cloud.

use super::geom;
use super::geometry::Circle;
use super::sizing::SizeField;
use crate::Point;

#[derive(Clone, Debug)]
pub(crate) enum Outer {
    Rectangle { min: Point, max: Point },
    Circle(Circle),
    /// First quadrant of the disk of this radius about the origin.
    Quarter(f64),
}

impl Outer {
    fn cell_outside(&self, c: Point, h: f64) -> bool {
        match self {
            Outer::Rectangle { min, max } => c[0] + h < min[0] || c[0] - h > max[0] || c[1] + h < min[1] || c[1] - h > max[1],
            Outer::Circle(k) => geom::dist(c, k.center) - h * std::f64::consts::SQRT_2 > k.radius,
            Outer::Quarter(r) => c[0] + h < 0.0 || c[1] + h < 0.0 || geom::norm(c) - h * std::f64::consts::SQRT_2 > *r,
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        match self {
            Outer::Rectangle { min, max } => p[0] > min[0] && p[0] < max[0] && p[1] > min[1] && p[1] < max[1],
            Outer::Circle(k) => geom::dist(p, k.center) < k.radius,
            Outer::Quarter(r) => p[0] > 0.0 && p[1] > 0.0 && geom::norm(p) < *r,
        }
    }
}

/// Leaves are split while their side exceeds this multiple of σ.
const SPLIT: f64 = 1.0;

fn cell_in_hole(holes: &[Circle], c: Point, h: f64) -> bool {
    holes.iter().any(|k| geom::dist(c, k.center) + h * std::f64::consts::SQRT_2 < k.radius)
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Jitter vector in [−1,1]² that is odd in the local coordinate `c`.
fn odd_jitter(c: Point) -> Point {
    if c == [0.0, 0.0] {
        return [0.0, 0.0];
    }
    let canonical = c[1] > 0.0 || (c[1] == 0.0 && c[0] > 0.0);
    let (q, s) = if canonical { (c, 1.0) } else { ([-c[0], -c[1]], -1.0) };
    let h = splitmix(q[0].to_bits() ^ splitmix(q[1].to_bits()));
    let u = (h >> 11) as f64 / (1u64 << 53) as f64;
    let v = (splitmix(h) >> 11) as f64 / (1u64 << 53) as f64;
    [s * (2.0 * u - 1.0), s * (2.0 * v - 1.0)]
}

/// Leaf centres (jittered) and leaf sides.
pub(crate) fn leaf_points(
    root_center: Point,
    root_half: f64,
    field: &SizeField,
    outer: &Outer,
    holes: &[Circle],
    jitter: f64,
) -> Vec<(Point, f64)> {
    let mut out = Vec::new();
    // Cells are stored in local coordinates relative to the root centre.
    let mut stack = vec![([0.0f64, 0.0f64], root_half)];
    while let Some((c, h)) = stack.pop() {
        let x = geom::add(root_center, c);
        if outer.cell_outside(x, h) || cell_in_hole(holes, x, h) {
            continue;
        }
        let side = 2.0 * h;
        if side > SPLIT * field.spacing(x) && side > field.min_spacing {
            let q = 0.5 * h;
            for (dx, dy) in [(-q, -q), (q, -q), (-q, q), (q, q)] {
                stack.push(([c[0] + dx, c[1] + dy], q));
            }
            continue;
        }
        let j = odd_jitter(c);
        let p = geom::add(root_center, [c[0] + jitter * side * j[0], c[1] + jitter * side * j[1]]);
        if outer.contains(p) && !holes.iter().any(|k| k.contains(p)) {
            out.push((p, side));
        }
    }
    // Deterministic order independent of traversal details.
    out.sort_by(|a, b| a.0[0].total_cmp(&b.0[0]).then(a.0[1].total_cmp(&b.0[1])));
    out
}
