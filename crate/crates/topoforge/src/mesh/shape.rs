//! Inclusion shapes ω (reference configuration, containing the origin).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::geom;
use crate::error::{Error, Result};
use crate::Point;

/// Shape of the nucleated inclusion. `LShape` is
/// ([−a,a]² \ [0,a]²) + shift·a with a = √(area/3).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InclusionShape {
    Disk { center: Point, radius: f64 },
    /// `a`, `b` are semi-axes along x1, x2.
    Ellipse { center: Point, a: f64, b: f64 },
    LShape { area: f64, shift: Point },
}

impl InclusionShape {
    pub fn unit_disk() -> Self {
        InclusionShape::Disk { center: [0.0, 0.0], radius: 1.0 }
    }

    /// The five reference shapes by catalogue id (1-based).
    pub fn catalog(id: usize) -> Result<Self> {
        Ok(match id {
            1 => InclusionShape::Disk { center: [0.0, 0.0], radius: 1.0 },
            2 => InclusionShape::Disk { center: [0.5, 0.5], radius: 1.0 },
            3 => InclusionShape::Ellipse { center: [0.0, 0.0], a: 1.5, b: 2.0 / 3.0 },
            4 => InclusionShape::Ellipse { center: [0.5, 0.5], a: 1.5, b: 2.0 / 3.0 },
            5 => InclusionShape::LShape { area: PI, shift: [0.25, 0.25] },
            _ => return Err(Error::InvalidInput(format!("no catalogue shape with id {id}"))),
        })
    }

    /// Catalogue shape by name (`disk`, `shifted_disk`, `ellipse`, `shifted_ellipse`, `lshape`).
    pub fn by_name(name: &str) -> Result<Self> {
        let id = SHAPE_NAMES
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown shape `{name}` (expected one of {SHAPE_NAMES:?})")))?;
        Self::catalog(id + 1)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            InclusionShape::Disk { radius, .. } => *radius > 0.0,
            InclusionShape::Ellipse { a, b, .. } => *a > 0.0 && *b > 0.0,
            InclusionShape::LShape { area, .. } => *area > 0.0,
        };
        if !ok {
            return Err(Error::Geometry(format!("degenerate inclusion {self:?}")));
        }
        if !self.contains([0.0, 0.0]) {
            return Err(Error::Geometry(format!("inclusion {self:?} does not contain the origin")));
        }
        Ok(())
    }

    /// Exact area |ω|.
    pub fn area(&self) -> f64 {
        match self {
            InclusionShape::Disk { radius, .. } => PI * radius * radius,
            InclusionShape::Ellipse { a, b, .. } => PI * a * b,
            InclusionShape::LShape { area, .. } => *area,
        }
    }

    fn lshape_side(area: f64) -> f64 {
        (area / 3.0).sqrt()
    }

    pub fn contains(&self, p: Point) -> bool {
        match self {
            InclusionShape::Disk { center, radius } => geom::dist(p, *center) < *radius,
            InclusionShape::Ellipse { center, a, b } => {
                let d = geom::sub(p, *center);
                (d[0] / a).powi(2) + (d[1] / b).powi(2) < 1.0
            }
            InclusionShape::LShape { area, shift } => {
                let s = Self::lshape_side(*area);
                let q = [p[0] - shift[0] * s, p[1] - shift[1] * s];
                let in_square = q[0].abs() < s && q[1].abs() < s;
                in_square && !(q[0] >= 0.0 && q[1] >= 0.0)
            }
        }
    }

    /// Whether ω is symmetric about both coordinate axes through the origin.
    pub fn is_doubly_symmetric(&self) -> bool {
        match self {
            InclusionShape::Disk { center, .. } | InclusionShape::Ellipse { center, .. } => *center == [0.0, 0.0],
            InclusionShape::LShape { .. } => false,
        }
    }

    /// Counter-clockwise boundary polygon with edge length ≈ `spacing`.
    ///
    /// Smooth shapes are sampled with a count divisible by four (symmetric about
    /// both axes through their centre) and scaled radially about the centre
    /// so the polygon area equals the exact area; the L-shape polygon is exact.
    pub fn polygon(&self, spacing: f64) -> Vec<Point> {
        match self {
            InclusionShape::Disk { center, radius } => {
                let n = geom::multiple_of_four_at_least(2.0 * PI * radius / spacing, 16);
                let unit = geom::symmetric_circle([0.0, 0.0], *radius, n, false);
                area_matched(&unit, self.area(), *center)
            }
            InclusionShape::Ellipse { center, a, b } => {
                let n = geom::multiple_of_four_at_least(2.0 * PI * a.max(*b) / spacing, 16);
                let unit = geom::symmetric_loop(n, false, |t| [a * t.cos(), b * t.sin()]);
                area_matched(&unit, self.area(), *center)
            }
            InclusionShape::LShape { area, shift } => {
                let s = Self::lshape_side(*area);
                let o = [shift[0] * s, shift[1] * s];
                let corners = [[-s, -s], [s, -s], [s, 0.0], [0.0, 0.0], [0.0, s], [-s, s]];
                let mut out = Vec::new();
                for i in 0..corners.len() {
                    let a = corners[i];
                    let b = corners[(i + 1) % corners.len()];
                    let k = (geom::dist(a, b) / spacing).ceil().max(1.0) as usize;
                    for j in 0..k {
                        let t = j as f64 / k as f64;
                        out.push([a[0] + t * (b[0] - a[0]) + o[0], a[1] + t * (b[1] - a[1]) + o[1]]);
                    }
                }
                out
            }
        }
    }

    /// Largest distance of ω from the origin.
    pub fn extent(&self) -> f64 {
        match self {
            InclusionShape::Disk { center, radius } => geom::norm(*center) + radius,
            InclusionShape::Ellipse { center, a, b } => geom::norm(*center) + a.max(*b),
            InclusionShape::LShape { .. } => self.polygon(f64::INFINITY).iter().map(|p| geom::norm(*p)).fold(0.0, f64::max),
        }
    }

    /// Radius of the disk with the same area (length scale of ω).
    pub fn equivalent_radius(&self) -> f64 {
        (self.area() / PI).sqrt()
    }

    /// The scaled shape s·ω.
    pub fn scaled(&self, s: f64) -> InclusionShape {
        match self {
            InclusionShape::Disk { center, radius } => InclusionShape::Disk { center: geom::scale(*center, s), radius: radius * s },
            InclusionShape::Ellipse { center, a, b } => InclusionShape::Ellipse { center: geom::scale(*center, s), a: a * s, b: b * s },
            InclusionShape::LShape { area, shift } => InclusionShape::LShape { area: area * s * s, shift: *shift },
        }
    }
}

pub const SHAPE_NAMES: [&str; 5] = ["disk", "shifted_disk", "ellipse", "shifted_ellipse", "lshape"];

fn area_matched(unit: &[Point], exact: f64, center: Point) -> Vec<Point> {
    let f = (exact / geom::polygon_area(unit)).sqrt();
    unit.iter().map(|p| [center[0] + f * p[0], center[1] + f * p[1]]).collect()
}

/// ω placed at z with scale ε: the set z + εω.
#[derive(Clone, Debug, PartialEq)]
pub struct PlacedInclusion {
    pub shape: InclusionShape,
    pub z: Point,
    pub eps: f64,
}

impl PlacedInclusion {
    pub fn contains(&self, x: Point) -> bool {
        self.shape.contains([(x[0] - self.z[0]) / self.eps, (x[1] - self.z[1]) / self.eps])
    }

    pub fn polygon(&self, spacing: f64) -> Vec<Point> {
        self.shape
            .polygon(spacing / self.eps)
            .into_iter()
            .map(|p| [self.z[0] + self.eps * p[0], self.z[1] + self.eps * p[1]])
            .collect()
    }

    pub fn area(&self) -> f64 {
        self.eps * self.eps * self.shape.area()
    }

    pub fn extent(&self) -> f64 {
        self.eps * self.shape.extent()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalogue_areas_are_pi() {
        for id in 1..=5 {
            let s = InclusionShape::catalog(id).unwrap();
            assert!((s.area() - PI).abs() < 1e-14, "shape {id}");
            s.validate().unwrap();
        }
    }

    #[test]
    fn polygons_have_exact_area() {
        for id in 1..=5 {
            let s = InclusionShape::catalog(id).unwrap();
            let poly = s.polygon(0.05);
            assert!((geom::polygon_area(&poly) - PI).abs() < 1e-12, "shape {id}");
        }
    }

    #[test]
    fn lshape_contains_origin_strictly() {
        let s = InclusionShape::catalog(5).unwrap();
        assert!(s.contains([0.0, 0.0]));
        let unshifted = InclusionShape::LShape { area: PI, shift: [-0.25, -0.25] };
        assert!(!unshifted.contains([0.0, 0.0]));
    }

    #[test]
    fn shifted_disk_placement() {
        let p = PlacedInclusion { shape: InclusionShape::catalog(2).unwrap(), z: [0.0, 0.5], eps: 0.1 };
        assert!(p.contains([0.05, 0.55]));
        assert!(p.contains([0.05 + 0.099, 0.55]));
        assert!(!p.contains([0.05 + 0.101, 0.55]));
    }
}
