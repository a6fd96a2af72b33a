//! Conforming, interface-fitted triangulations of D, perturbed domains and
//! the truncated corrector ball.

pub mod ball;
pub mod cache;
mod cdt;
pub mod generate;
pub mod geom;
pub mod geometry;
pub mod locate;
pub mod patch;
mod quadtree;
pub mod shape;
pub mod sizing;
pub mod vtk;

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use ball::{triangulate_ball, triangulate_ball_with, BallMesh, BallOptions};
pub use generate::{perturb_domain, triangulate_domain, triangulate_domain_with, DomainMeshOptions, Refinement};
pub use geometry::{Circle, DomainGeometry, DomainShape, Segment};
pub use patch::{PatchFamily, PatchedMesh};
pub use shape::{InclusionShape, PlacedInclusion, SHAPE_NAMES};

use crate::error::{Error, Result};
use crate::Point;
use locate::Locator;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Inside,
    Outside,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMarker {
    Dirichlet,
    Neumann,
    OuterBall,
}

impl BoundaryMarker {
    /// Homogeneous Dirichlet data is imposed on these edges.
    pub fn is_constrained(self) -> bool {
        matches!(self, BoundaryMarker::Dirichlet | BoundaryMarker::OuterBall)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub marker: BoundaryMarker,
}

/// Target element size per region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicSize {
    pub inside: f64,
    pub outside: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub regions: Vec<Region>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Interior edges carrying a line traction (only for interior load segments).
    #[serde(default)]
    pub load_edges: Vec<[usize; 2]>,
    pub characteristic_size: CharacteristicSize,
    #[serde(skip)]
    locator: OnceLock<Locator>,
}

impl Clone for Mesh {
    fn clone(&self) -> Self {
        Mesh {
            vertices: self.vertices.clone(),
            triangles: self.triangles.clone(),
            regions: self.regions.clone(),
            boundary_edges: self.boundary_edges.clone(),
            load_edges: self.load_edges.clone(),
            characteristic_size: self.characteristic_size,
            locator: OnceLock::new(),
        }
    }
}

impl PartialEq for Mesh {
    fn eq(&self, o: &Mesh) -> bool {
        self.vertices == o.vertices
            && self.triangles == o.triangles
            && self.regions == o.regions
            && self.boundary_edges == o.boundary_edges
            && self.load_edges == o.load_edges
    }
}

/// Summary of element quality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Quality {
    pub min_angle_deg: f64,
    pub min_diameter: f64,
    pub max_diameter: f64,
}

impl Mesh {
    /// Build a mesh and check its structural invariants.
    pub fn new(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        regions: Vec<Region>,
        boundary_edges: Vec<BoundaryEdge>,
        load_edges: Vec<[usize; 2]>,
        characteristic_size: CharacteristicSize,
    ) -> Result<Mesh> {
        let mesh = Mesh { vertices, triangles, regions, boundary_edges, load_edges, characteristic_size, locator: OnceLock::new() };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    #[inline]
    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    #[inline]
    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        0.5 * geom::orient(a, b, c)
    }

    #[inline]
    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangle_points(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        geom::diameter(a, b, c)
    }

    pub fn region_area(&self, region: Region) -> f64 {
        (0..self.num_triangles()).filter(|&t| self.regions[t] == region).map(|t| self.area(t)).sum()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.area(t)).sum()
    }

    pub fn quality(&self) -> Quality {
        let mut q = Quality { min_angle_deg: 180.0, min_diameter: f64::INFINITY, max_diameter: 0.0 };
        for t in 0..self.num_triangles() {
            let [a, b, c] = self.triangle_points(t);
            q.min_angle_deg = q.min_angle_deg.min(geom::min_angle_deg(a, b, c));
            let d = geom::diameter(a, b, c);
            q.min_diameter = q.min_diameter.min(d);
            q.max_diameter = q.max_diameter.max(d);
        }
        q
    }

    /// Undirected edges with their incident triangle counts.
    pub fn edge_counts(&self) -> HashMap<[usize; 2], usize> {
        let mut edges: HashMap<[usize; 2], usize> = HashMap::with_capacity(3 * self.num_triangles());
        for tri in &self.triangles {
            for k in 0..3 {
                *edges.entry(sorted_edge(tri[k], tri[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        edges
    }

    /// Checks: valid indices, positive orientation, conformity (each edge in
    /// ≤ 2 triangles, no hanging vertices) and that the boundary edges are
    /// exactly the edges with one incident triangle.
    pub fn validate(&self) -> Result<()> {
        let nv = self.num_vertices();
        if self.regions.len() != self.num_triangles() {
            return Err(Error::Mesh("region marker count differs from triangle count".into()));
        }
        let mut used = vec![false; nv];
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::Mesh(format!("triangle {t} has an out-of-range vertex")));
            }
            if !(self.area(t) > 0.0) {
                return Err(Error::Mesh(format!("triangle {t} is not positively oriented (area {})", self.area(t))));
            }
            for &v in tri {
                used[v] = true;
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::Mesh(format!("vertex {v} belongs to no triangle")));
        }
        let edges = self.edge_counts();
        if let Some((e, _)) = edges.iter().find(|(_, &c)| c > 2) {
            return Err(Error::Mesh(format!("edge {e:?} shared by more than two triangles")));
        }
        let topo: std::collections::HashSet<[usize; 2]> = edges.iter().filter(|(_, &c)| c == 1).map(|(e, _)| *e).collect();
        let marked: std::collections::HashSet<[usize; 2]> =
            self.boundary_edges.iter().map(|b| sorted_edge(b.vertices[0], b.vertices[1])).collect();
        if marked.len() != self.boundary_edges.len() || topo != marked {
            return Err(Error::Mesh(format!(
                "boundary edges ({}) do not match the topological boundary ({})",
                marked.len(),
                topo.len()
            )));
        }
        for e in &self.load_edges {
            if edges.get(&sorted_edge(e[0], e[1])) != Some(&2) {
                return Err(Error::Mesh(format!("load edge {e:?} is not an interior edge")));
            }
        }
        Ok(())
    }

    pub(crate) fn locator(&self) -> &Locator {
        self.locator.get_or_init(|| Locator::new(self))
    }

    /// Triangles containing x (several on shared edges/vertices) with barycentric coordinates.
    pub fn locate(&self, x: Point) -> Vec<(usize, [f64; 3])> {
        self.locator().locate(self, x)
    }

    /// Copy with new region markers.
    pub fn with_regions(&self, regions: Vec<Region>) -> Result<Mesh> {
        if regions.len() != self.num_triangles() {
            return Err(Error::Mesh("region marker count differs from triangle count".into()));
        }
        let mut m = self.clone();
        m.regions = regions;
        Ok(m)
    }

    /// SHA-256 of the binary serialisation (vertices, triangles, markers).
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.vertices {
            h.update(p[0].to_le_bytes());
            h.update(p[1].to_le_bytes());
        }
        for (t, r) in self.triangles.iter().zip(&self.regions) {
            for v in t {
                h.update((*v as u64).to_le_bytes());
            }
            h.update([*r as u8]);
        }
        for b in &self.boundary_edges {
            h.update((b.vertices[0] as u64).to_le_bytes());
            h.update((b.vertices[1] as u64).to_le_bytes());
            h.update([b.marker as u8]);
        }
        hex::encode(h.finalize())
    }

    /// Vertices lying on constrained (Dirichlet / outer-ball) boundary edges.
    pub fn constrained_vertices(&self) -> Vec<bool> {
        let mut c = vec![false; self.num_vertices()];
        for b in &self.boundary_edges {
            if b.marker.is_constrained() {
                c[b.vertices[0]] = true;
                c[b.vertices[1]] = true;
            }
        }
        c
    }
}

#[inline]
pub(crate) fn sorted_edge(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

/// Boundary edges (oriented as in their triangle) of a triangle set.
pub(crate) fn topological_boundary(triangles: &[[usize; 3]]) -> Vec<[usize; 2]> {
    let mut count: HashMap<[usize; 2], (usize, [usize; 2])> = HashMap::with_capacity(3 * triangles.len());
    for tri in triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            count.entry(sorted_edge(a, b)).or_insert((0, [a, b])).0 += 1;
        }
    }
    let mut out: Vec<[usize; 2]> = count.into_values().filter(|(c, _)| *c == 1).map(|(_, e)| e).collect();
    out.sort_unstable();
    out
}
