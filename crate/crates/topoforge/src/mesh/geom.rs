//! Small planar geometry helpers.

use crate::Point;

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s]
}

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    norm(sub(a, b))
}

/// Twice the signed area of (a, b, c); positive for counter-clockwise order.
#[inline]
pub fn orient(a: Point, b: Point, c: Point) -> f64 {
    cross(sub(b, a), sub(c, a))
}

pub fn dist_to_segment(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let l2 = dot(ab, ab);
    if l2 == 0.0 {
        return dist(p, a);
    }
    let t = (dot(sub(p, a), ab) / l2).clamp(0.0, 1.0);
    dist(p, add(a, scale(ab, t)))
}

/// Shoelace area of a closed polygon (positive if counter-clockwise).
pub fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        s += cross(poly[i], poly[(i + 1) % n]);
    }
    0.5 * s
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(p: Point, poly: &[Point]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Distance from `p` to the boundary of a closed polygon.
pub fn dist_to_polygon(p: Point, poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| dist_to_segment(p, poly[i], poly[(i + 1) % n])).fold(f64::INFINITY, f64::min)
}

/// Smallest interior angle of a triangle, in degrees.
pub fn min_angle_deg(a: Point, b: Point, c: Point) -> f64 {
    let ang = |p: Point, q: Point, r: Point| {
        let u = sub(q, p);
        let v = sub(r, p);
        cross(u, v).abs().atan2(dot(u, v))
    };
    ang(a, b, c).min(ang(b, c, a)).min(ang(c, a, b)).to_degrees()
}

pub fn diameter(a: Point, b: Point, c: Point) -> f64 {
    dist(a, b).max(dist(b, c)).max(dist(c, a))
}

/// Points on a circle with `n` (even) samples, angle offset `phase` (radians).
/// The second half is the exact negation of the first about the centre, so
/// samples are point-symmetric bit for bit.
pub fn circle_points(center: Point, radius: f64, n: usize, phase: f64) -> Vec<Point> {
    assert!(n >= 4 && n % 2 == 0, "circle sampling needs an even count ≥ 4");
    let half: Vec<Point> = (0..n / 2)
        .map(|i| {
            let t = phase + std::f64::consts::TAU * i as f64 / n as f64;
            [radius * t.cos(), radius * t.sin()]
        })
        .collect();
    half.iter()
        .chain(half.iter().map(|p| [-p[0], -p[1]]).collect::<Vec<_>>().iter())
        .map(|p| add(center, *p))
        .collect()
}

/// Closed loop of `n` (multiple of 4) samples of a curve θ ↦ f(θ) that is
/// symmetric about both axes, at angles (i + ½·`half_step`)·2π/n.
///
/// Only the first quadrant is evaluated; the rest is mirrored, so the loop
/// is symmetric bit for bit and axis samples lie exactly on the axes.
pub fn symmetric_loop(n: usize, half_step: bool, f: impl Fn(f64) -> Point) -> Vec<Point> {
    assert!(n >= 4 && n % 4 == 0, "symmetric sampling needs a multiple of 4");
    // Angles in units of half a step: a ∈ [0, 2n).
    let s = usize::from(half_step);
    let quarter = |a: usize| -> Point {
        // a ∈ [0, n/2] covers [0, π/2].
        if a == 0 {
            let p = f(0.0);
            return [p[0], 0.0];
        }
        if 2 * a == n {
            let p = f(std::f64::consts::FRAC_PI_2);
            return [0.0, p[1]];
        }
        f(std::f64::consts::PI * a as f64 / n as f64)
    };
    (0..n)
        .map(|i| {
            let a = 2 * i + s;
            let (a, neg) = if a >= n { (a - n, true) } else { (a, false) };
            let p = if 2 * a <= n {
                quarter(a)
            } else {
                let q = quarter(n - a);
                [-q[0], q[1]]
            };
            if neg {
                [-p[0] + 0.0, -p[1] + 0.0]
            } else {
                p
            }
        })
        .collect()
}

/// Doubly symmetric circle samples, see [`symmetric_loop`].
pub fn symmetric_circle(center: Point, radius: f64, n: usize, half_step: bool) -> Vec<Point> {
    symmetric_loop(n, half_step, |t| [radius * t.cos(), radius * t.sin()])
        .into_iter()
        .map(|p| add(center, p))
        .collect()
}

/// Round up to a multiple of 4 that is at least `min`.
pub fn multiple_of_four_at_least(x: f64, min: usize) -> usize {
    let n = x.ceil().max(min as f64) as usize;
    n.div_ceil(4) * 4
}

/// Round up to an even integer ≥ `min`.
pub fn even_at_least(x: f64, min: usize) -> usize {
    let n = x.ceil().max(min as f64) as usize;
    n + n % 2
}
