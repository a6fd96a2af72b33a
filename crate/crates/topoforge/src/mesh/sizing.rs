//! Target vertex-spacing fields σ(x). Each source prescribes σ0 on a set and
//! grows linearly with the distance from it; the field is the minimum over
//! sources, capped from above.

use super::geom;
use super::geometry::Circle;
use crate::Point;

#[derive(Clone, Debug)]
pub enum SourceShape {
    Point(Point),
    /// Solid disk (distance 0 inside).
    Disk(Circle),
    /// Circle curve (distance to the circle line).
    CircleLine(Circle),
    /// Closed polygon boundary (distance to the boundary, both sides).
    PolygonLine(Vec<Point>),
}

#[derive(Clone, Debug)]
pub struct SizeSource {
    pub shape: SourceShape,
    pub spacing: f64,
    pub rate: f64,
}

impl SizeSource {
    fn distance(&self, x: Point) -> f64 {
        match &self.shape {
            SourceShape::Point(p) => geom::dist(x, *p),
            SourceShape::Disk(c) => (geom::dist(x, c.center) - c.radius).max(0.0),
            SourceShape::CircleLine(c) => (geom::dist(x, c.center) - c.radius).abs(),
            SourceShape::PolygonLine(poly) => geom::dist_to_polygon(x, poly),
        }
    }

    #[inline]
    pub fn spacing_at(&self, x: Point) -> f64 {
        self.spacing + self.rate * self.distance(x)
    }
}

#[derive(Clone, Debug)]
pub struct SizeField {
    pub max_spacing: f64,
    /// Lower bound guaranteeing termination of the quadtree.
    pub min_spacing: f64,
    pub sources: Vec<SizeSource>,
}

impl SizeField {
    pub fn uniform(spacing: f64) -> Self {
        SizeField { max_spacing: spacing, min_spacing: spacing, sources: vec![] }
    }

    pub fn spacing(&self, x: Point) -> f64 {
        self.sources
            .iter()
            .map(|s| s.spacing_at(x))
            .fold(self.max_spacing, f64::min)
            .max(self.min_spacing)
    }

    /// Points on the open segment [a, b) placed with equal increments of ∫ ds/σ.
    pub fn sample_segment(&self, a: Point, b: Point) -> Vec<Point> {
        const SUB: usize = 256;
        let len = geom::dist(a, b);
        let mut cum = vec![0.0; SUB + 1];
        for i in 0..SUB {
            let t = (i as f64 + 0.5) / SUB as f64;
            let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            cum[i + 1] = cum[i] + len / SUB as f64 / self.spacing(x);
        }
        let n = cum[SUB].round().max(1.0) as usize;
        let mut out = Vec::with_capacity(n);
        let mut j = 0;
        for k in 0..n {
            let target = cum[SUB] * k as f64 / n as f64;
            while j + 1 < SUB && cum[j + 1] < target {
                j += 1;
            }
            let frac = if cum[j + 1] > cum[j] { (target - cum[j]) / (cum[j + 1] - cum[j]) } else { 0.0 };
            let t = ((j as f64 + frac) / SUB as f64).clamp(0.0, 1.0);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
        out
    }
}
