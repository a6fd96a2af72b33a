//! Description of the hold-all domain D, the material set Ω and boundary parts.

use serde::{Deserialize, Serialize};

use super::geom;
use super::BoundaryMarker;
use crate::error::{Error, Result};
use crate::Point;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: Point,
    pub radius: f64,
}

impl Circle {
    pub fn contains(&self, p: Point) -> bool {
        geom::dist(p, self.center) < self.radius
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    pub fn new(a: Point, b: Point) -> Self {
        Segment { a, b }
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        geom::dist_to_segment(p, self.a, self.b) <= tol
    }

    pub fn length(&self) -> f64 {
        geom::dist(self.a, self.b)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainShape {
    Rectangle { min: Point, max: Point },
    Disk { center: Point, radius: f64 },
}

/// D with Ω given as a union of disks, homogeneous Dirichlet parts of ∂D
/// (the rest of ∂D is Neumann) and optional load segments. A load segment on
/// ∂D only forces mesh breakpoints at its ends; one inside D is meshed as an
/// interior line carrying the traction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainGeometry {
    pub domain: DomainShape,
    pub subdomains: Vec<Circle>,
    pub dirichlet: Vec<Segment>,
    #[serde(default)]
    pub load_segments: Vec<Segment>,
}

impl DomainGeometry {
    pub fn rectangle(min: Point, max: Point) -> Self {
        DomainGeometry { domain: DomainShape::Rectangle { min, max }, subdomains: vec![], dirichlet: vec![], load_segments: vec![] }
    }

    pub fn scale(&self) -> f64 {
        match &self.domain {
            DomainShape::Rectangle { min, max } => (max[0] - min[0]).max(max[1] - min[1]),
            DomainShape::Disk { radius, .. } => 2.0 * radius,
        }
    }

    fn tol(&self) -> f64 {
        1e-9 * self.scale()
    }

    /// Ω indicator.
    pub fn in_omega(&self, x: Point) -> bool {
        self.subdomains.iter().any(|c| c.contains(x))
    }

    /// Closed domain membership.
    pub fn contains(&self, x: Point) -> bool {
        let t = self.tol();
        match &self.domain {
            DomainShape::Rectangle { min, max } => x[0] >= min[0] - t && x[0] <= max[0] + t && x[1] >= min[1] - t && x[1] <= max[1] + t,
            DomainShape::Disk { center, radius } => geom::dist(x, *center) <= radius + t,
        }
    }

    /// Distance from x to ∂D (positive inside).
    pub fn dist_to_boundary(&self, x: Point) -> f64 {
        match &self.domain {
            DomainShape::Rectangle { min, max } => (x[0] - min[0]).min(max[0] - x[0]).min(x[1] - min[1]).min(max[1] - x[1]),
            DomainShape::Disk { center, radius } => radius - geom::dist(x, *center),
        }
    }

    /// Distance from z to ∂D ∪ ∂Ω.
    pub fn clearance(&self, z: Point) -> f64 {
        self.subdomains
            .iter()
            .map(|c| (geom::dist(z, c.center) - c.radius).abs())
            .fold(self.dist_to_boundary(z), f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.domain {
            DomainShape::Rectangle { min, max } => {
                if !(max[0] > min[0] && max[1] > min[1]) {
                    return Err(Error::Geometry(format!("degenerate rectangle {min:?}..{max:?}")));
                }
            }
            DomainShape::Disk { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(Error::Geometry("degenerate disk domain".into()));
                }
            }
        }
        for c in &self.subdomains {
            if !(c.radius > 0.0) {
                return Err(Error::Geometry(format!("subdomain {c:?} has zero area")));
            }
            if self.dist_to_boundary(c.center) <= c.radius {
                return Err(Error::Geometry(format!("subdomain {c:?} is not strictly inside D")));
            }
        }
        for (i, a) in self.subdomains.iter().enumerate() {
            for b in &self.subdomains[i + 1..] {
                if geom::dist(a.center, b.center) <= a.radius + b.radius {
                    return Err(Error::Geometry(format!("subdomains {a:?} and {b:?} overlap")));
                }
            }
        }
        Ok(())
    }

    /// Marker of a boundary edge from its midpoint.
    pub fn marker_for(&self, a: Point, b: Point) -> BoundaryMarker {
        let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        let t = self.tol();
        if self.dirichlet.iter().any(|s| s.contains(mid, t) && s.contains(a, t) && s.contains(b, t)) {
            BoundaryMarker::Dirichlet
        } else {
            BoundaryMarker::Neumann
        }
    }

    /// Points of ∂D that must be mesh vertices (ends of Dirichlet / load parts).
    pub fn breakpoints(&self) -> Vec<Point> {
        let t = self.tol();
        let mut pts: Vec<Point> = Vec::new();
        for s in self.dirichlet.iter().chain(self.load_segments.iter()) {
            for p in [s.a, s.b] {
                if self.dist_to_boundary(p).abs() <= t && !pts.iter().any(|q| geom::dist(*q, p) <= t) {
                    pts.push(p);
                }
            }
        }
        pts
    }

    /// Load segments lying in the interior of D.
    pub fn interior_load_segments(&self) -> Vec<Segment> {
        let t = self.tol();
        self.load_segments
            .iter()
            .filter(|s| self.dist_to_boundary(s.a) > t || self.dist_to_boundary(s.b) > t)
            .copied()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlapping_subdomain_rejected() {
        let mut g = DomainGeometry::rectangle([-1.0, -1.0], [1.0, 1.0]);
        g.subdomains.push(Circle { center: [0.9, 0.0], radius: 0.2 });
        assert!(g.validate().is_err());
    }

    #[test]
    fn clearance_to_disk_and_edge() {
        let mut g = DomainGeometry::rectangle([-1.0, -1.0], [1.0, 1.0]);
        g.subdomains.push(Circle { center: [0.0, -0.5], radius: 0.3 });
        assert!((g.clearance([0.0, 0.5]) - 0.5).abs() < 1e-15);
        assert!((g.clearance([0.0, 0.0]) - 0.2).abs() < 1e-15);
    }
}
