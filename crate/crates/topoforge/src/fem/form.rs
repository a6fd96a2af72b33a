//! Weak forms ∫ V(x,u,Du)·ψ + M(x,u,Du):Dψ dx − ∫_Γ g·ψ dS.

use crate::autodiff::{const_mat, const_vec, DMat, DVec, RVec};
use crate::mesh::{BoundaryMarker, DomainGeometry, Mesh, Region};
use crate::problem::ProblemSpec;
use crate::Point;

/// A residual form. `volume` returns the pair (vector part tested with ψ,
/// matrix part tested with Dψ) with loads already subtracted and scaled by
/// the load factor; the Jacobian is obtained by forward-mode seeding of it.
pub trait WeakForm: Sync {
    fn m(&self) -> usize;

    fn volume(&self, region: Region, x: Point, y1: &DVec, y2: &DMat, load: f64) -> (DVec, DMat);

    /// Traction g(x) on the edges returned by [`WeakForm::traction_edges`];
    /// it enters the residual with a minus sign.
    fn traction(&self, _x: Point, _load: f64) -> RVec {
        [0.0; 2]
    }

    fn traction_edges(&self, _mesh: &Mesh) -> Vec<[usize; 2]> {
        Vec::new()
    }
}

/// The state equation of a [`ProblemSpec`]: V = A1 − s·F1, M = A2 − s·F2,
/// traction s·g_N.
pub struct StateForm<'a> {
    pub spec: &'a ProblemSpec,
}

impl<'a> StateForm<'a> {
    pub fn new(spec: &'a ProblemSpec) -> Self {
        StateForm { spec }
    }
}

impl WeakForm for StateForm<'_> {
    fn m(&self) -> usize {
        self.spec.m
    }

    fn volume(&self, region: Region, x: Point, y1: &DVec, y2: &DMat, load: f64) -> (DVec, DMat) {
        let side = self.spec.side(region);
        let mut v = (side.a1)(x, y1, y2);
        let mut m = (side.a2)(x, y1, y2);
        let f1 = const_vec(&(side.f1)(x));
        let f2 = const_mat(&(side.f2)(x));
        for i in 0..2 {
            v[i] -= f1[i] * load;
            for k in 0..2 {
                m[i][k] -= f2[i][k] * load;
            }
        }
        (v, m)
    }

    fn traction(&self, x: Point, load: f64) -> RVec {
        let g = (self.spec.g_n)(x);
        [g[0] * load, g[1] * load]
    }

    fn traction_edges(&self, mesh: &Mesh) -> Vec<[usize; 2]> {
        neumann_load_edges(&self.spec.geometry, mesh)
    }
}

/// Edges carrying g_N: all Neumann boundary edges when the geometry has no
/// load segments, otherwise the Neumann edges lying on a load segment plus
/// the interior load edges.
pub fn neumann_load_edges(geometry: &DomainGeometry, mesh: &Mesh) -> Vec<[usize; 2]> {
    let tol = 1e-9 * geometry.scale();
    let on_segment = |a: Point, b: Point| geometry.load_segments.iter().any(|s| s.contains(a, tol) && s.contains(b, tol));
    let mut edges: Vec<[usize; 2]> = mesh
        .boundary_edges
        .iter()
        .filter(|e| e.marker == BoundaryMarker::Neumann)
        .filter(|e| geometry.load_segments.is_empty() || on_segment(mesh.vertices[e.vertices[0]], mesh.vertices[e.vertices[1]]))
        .map(|e| e.vertices)
        .collect();
    edges.extend(mesh.load_edges.iter().copied());
    edges
}
