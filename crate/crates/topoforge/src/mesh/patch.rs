//! Meshes of D with the inclusion z + εω for a geometric sequence of ε.
//!
//! The neighbourhood B(z, ρ) is filled with the ball mesh restricted to the
//! ring whose scaled radius equals ρ, and D∖B(z, ρ) is meshed once per
//! family with a fixed size field. Every member therefore has the same
//! outer mesh and a self-similar patch, so the discretisation error is
//! (nearly) the same for all ε and cancels in J(Ω_ε) − J(Ω).

use std::sync::Arc;

use super::ball::BallMesh;
use super::generate::{check_placement, mesh_domain, perturbed_with_baseline, DomainMeshOptions, Extras};
use super::geometry::{Circle, DomainGeometry};
use super::shape::PlacedInclusion;
use super::sizing::{SizeSource, SourceShape};
use super::{CharacteristicSize, Mesh, Region};
use crate::error::{Error, Result};
use crate::Point;

/// Fraction of the clearance dist(z, ∂D ∪ ∂Ω) the patch may occupy.
pub const PATCH_CLEARANCE: f64 = 0.9;

#[derive(Clone, Debug)]
pub struct PatchFamily {
    pub geometry: DomainGeometry,
    pub mesh_options: DomainMeshOptions,
    pub z: Point,
    pub ball: Arc<BallMesh>,
    /// Reference scale ε0 of the sequence ε_k = ε0·δ^k.
    pub eps_ref: f64,
    /// Ratio δ = q^L.
    pub ratio: f64,
    pub layers: usize,
    /// Ball ring matching the patch radius at ε0.
    pub anchor_ring: usize,
    /// Physical patch radius.
    pub rho: f64,
}

/// A member of the family: the mesh with the inclusion and the same mesh
/// with the inclusion switched off.
#[derive(Clone, Debug)]
pub struct PatchedMesh {
    pub eps: f64,
    pub mesh: Mesh,
    pub baseline: Mesh,
    /// False when ε is off the sequence (or too large) and a generic fitted
    /// mesh was produced instead.
    pub patched: bool,
}

impl PatchFamily {
    /// `ratio` must be an integer power of the ball grading.
    pub fn new(
        geometry: DomainGeometry,
        mesh_options: DomainMeshOptions,
        z: Point,
        ball: Arc<BallMesh>,
        eps_ref: f64,
        ratio: f64,
    ) -> Result<PatchFamily> {
        geometry.validate()?;
        if !(eps_ref > 0.0 && ratio > 1.0) {
            return Err(Error::Geometry(format!("invalid ε sequence ε0 = {eps_ref}, ratio = {ratio}")));
        }
        let q = ball.ring_ratio;
        let layers = (ratio.ln() / q.ln()).round() as usize;
        if layers == 0 || ((q.powi(layers as i32) - ratio) / ratio).abs() > 1e-9 {
            return Err(Error::Geometry(format!("ε ratio {ratio} is not an integer power of the ball grading {q}")));
        }
        if geometry.in_omega(z) || !geometry.contains(z) {
            return Err(Error::Geometry(format!("z = {z:?} must lie in D outside Ω")));
        }
        let rho_max = PATCH_CLEARANCE * geometry.clearance(z);
        let regular = ball.rings.len() - 1;
        let anchor_ring = (0..regular)
            .rev()
            .find(|&j| eps_ref * ball.rings[j].radius <= rho_max)
            .ok_or_else(|| Error::Geometry(format!("inclusion at ε0 = {eps_ref} does not fit around z = {z:?}")))?;
        let rho = eps_ref * ball.rings[anchor_ring].radius;
        Ok(PatchFamily { geometry, mesh_options, z, ball, eps_ref, ratio, layers, anchor_ring, rho })
    }

    /// Ball ring used for ε, if ε is on the sequence and the core fits.
    pub fn ring_for(&self, eps: f64) -> Option<usize> {
        let k = (eps / self.eps_ref).ln() / self.ratio.ln();
        let kr = k.round();
        if (k - kr).abs() > 1e-6 {
            return None;
        }
        let j = self.anchor_ring as i64 - self.layers as i64 * kr as i64;
        (j >= 0 && (j as usize) < self.ball.rings.len() - 1).then_some(j as usize)
    }

    /// The sequence member ε0·δ^k.
    pub fn eps(&self, k: i32) -> f64 {
        self.eps_ref * self.ratio.powi(k)
    }

    pub fn mesh(&self, eps: f64) -> Result<PatchedMesh> {
        match self.ring_for(eps) {
            Some(j) => self.patched(eps, j),
            None => {
                let (mesh, baseline) = perturbed_with_baseline(&self.geometry, &self.mesh_options, self.z, eps, &self.ball.shape)?;
                Ok(PatchedMesh { eps, mesh, baseline, patched: false })
            }
        }
    }

    /// Unperturbed mesh of the family: the member `below` steps under ε0
    /// with the inclusion switched off.
    pub fn unperturbed(&self, below: i32) -> Result<Mesh> {
        Ok(self.mesh(self.eps(-below))?.baseline)
    }

    fn outer_extras(&self, hole: Vec<Point>) -> Extras {
        let n = self.ball.ring_points as f64;
        let dtheta = std::f64::consts::TAU / n;
        Extras {
            inclusions: vec![],
            hole: Some((Circle { center: self.z, radius: self.rho }, hole)),
            sources: vec![SizeSource {
                shape: SourceShape::Disk(Circle { center: self.z, radius: self.rho }),
                spacing: dtheta * self.rho,
                rate: dtheta,
            }],
            min_spacing: Some(0.25 * dtheta * self.rho),
        }
    }

    fn patched(&self, eps: f64, j: usize) -> Result<PatchedMesh> {
        let ball = &self.ball;
        let bm = &ball.mesh;
        let placed = PlacedInclusion { shape: ball.shape.clone(), z: self.z, eps };
        let map = |p: Point| [self.z[0] + eps * p[0], self.z[1] + eps * p[1]];
        let ring = &ball.rings[j];
        let hole: Vec<Point> = ring.vertices.iter().map(|&v| map(bm.vertices[v])).collect();
        check_placement(&self.geometry, &placed, &hole)?;
        let outer = mesh_domain(&self.geometry, &self.mesh_options, self.outer_extras(hole))?;
        if outer.hole_ids.len() != ring.vertices.len() {
            return Err(Error::Mesh("patch seam lost vertices".into()));
        }

        let ntri = ring.triangles_inside;
        let mut vmap = vec![usize::MAX; bm.num_vertices()];
        for (&b, &o) in ring.vertices.iter().zip(&outer.hole_ids) {
            vmap[b] = o;
        }
        let mut vertices = outer.vertices;
        let mut triangles = outer.triangles;
        let mut on: Vec<Region> = outer.inside.iter().map(|&i| if i { Region::Inside } else { Region::Outside }).collect();
        let mut off = on.clone();
        for t in 0..ntri {
            let mut tri = bm.triangles[t];
            for v in tri.iter_mut() {
                if vmap[*v] == usize::MAX {
                    vmap[*v] = vertices.len();
                    vertices.push(map(bm.vertices[*v]));
                }
                *v = vmap[*v];
            }
            triangles.push(tri);
            on.push(bm.regions[t]);
            off.push(Region::Outside);
        }
        let size = CharacteristicSize { inside: eps * ball.options.h_inclusion, outside: self.mesh_options.h_coarse };
        let mesh = Mesh::new(vertices, triangles, on, outer.boundary_edges, outer.load_edges, size)?;
        let baseline = mesh.with_regions(off)?;
        Ok(PatchedMesh { eps, mesh, baseline, patched: true })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{triangulate_ball, InclusionShape};

    fn family() -> PatchFamily {
        let mut g = DomainGeometry::rectangle([-1.0, -1.0], [1.0, 1.0]);
        g.subdomains.push(Circle { center: [-0.5, 0.0], radius: 0.25 });
        let ball = triangulate_ball(1000.0, &InclusionShape::catalog(2).unwrap(), 0.25, 1.5f64.powf(0.125)).unwrap();
        PatchFamily::new(g, DomainMeshOptions::new(0.2), [0.4, 0.1], Arc::new(ball), 0.05, 1.5).unwrap()
    }

    #[test]
    fn members_share_the_outer_mesh() {
        let f = family();
        let a = f.mesh(f.eps(0)).unwrap();
        let b = f.mesh(f.eps(-1)).unwrap();
        assert!(a.patched && b.patched);
        let pa = (a.mesh.total_area(), a.mesh.region_area(Region::Inside));
        assert!((pa.0 - 4.0).abs() < 1e-12);
        let incl = std::f64::consts::PI * f.eps(0).powi(2);
        let omega = a.baseline.region_area(Region::Inside);
        assert!((pa.1 - omega - incl).abs() < 1e-12 * incl.max(1.0));
        // Identical vertex count outside the patch; patch grows by L rings.
        let extra = b.mesh.num_vertices() as i64 - a.mesh.num_vertices() as i64;
        assert_eq!(extra, (f.layers * f.ball.ring_points) as i64);
        assert!(a.mesh.quality().min_angle_deg > 15.0);
    }

    #[test]
    fn off_sequence_falls_back() {
        let f = family();
        let m = f.mesh(0.0123).unwrap();
        assert!(!m.patched);
        let incl = m.mesh.region_area(Region::Inside) - m.baseline.region_area(Region::Inside);
        assert!((incl - std::f64::consts::PI * 0.0123f64.powi(2)).abs() < 1e-10);
    }
}
