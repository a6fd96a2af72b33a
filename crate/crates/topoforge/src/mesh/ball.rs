//! Mesh of the truncated ball B_R containing the inclusion ω.
//!
//! An unstructured core of radius ρ_a (slightly larger than ω) is surrounded
//! by structured rings at radii ρ_a·q^j, each carrying the same number of
//! vertices, with every other ring rotated by half a step. The last ring sits
//! exactly at R. Since the ring layers are self-similar, the ball restricted
//! to ring j is the ball restricted to ring j + L scaled by q^{−L}: meshes of
//! z + εω patched into D reuse identical local geometry for every ε on a
//! geometric sequence with ratio q^L.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::cdt::{build_planar, Curve, CurveKind, Planar};
use super::geom;
use super::geometry::Circle;
use super::quadtree::Outer;
use super::shape::InclusionShape;
use super::sizing::{SizeField, SizeSource, SourceShape};
use super::{BoundaryEdge, BoundaryMarker, CharacteristicSize, Mesh, Region};
use crate::error::{Error, Result};
use crate::Point;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallOptions {
    /// Truncation radius R.
    pub radius: f64,
    /// Element size along ∂ω.
    pub h_inclusion: f64,
    /// Radius ratio q > 1 of consecutive rings.
    pub grading: f64,
    /// Core radius relative to the extent of ω.
    #[serde(default = "default_core_factor")]
    pub core_factor: f64,
    /// Growth of the element size away from ∂ω inside the core.
    #[serde(default = "default_core_rate")]
    pub core_rate: f64,
}

fn default_core_factor() -> f64 {
    1.15
}

fn default_core_rate() -> f64 {
    0.2
}

impl BallOptions {
    pub fn new(radius: f64, h_inclusion: f64, grading: f64) -> Self {
        BallOptions { radius, h_inclusion, grading, core_factor: default_core_factor(), core_rate: default_core_rate() }
    }

    /// Vertices per ring: the largest multiple of four not above 2π/(q − 1),
    /// so ring elements have aspect ratio near one and q itself is usable,
    /// but at least enough to keep the element size on ∂B_R below R/5.
    pub fn ring_points(&self) -> usize {
        let n = TAU / (self.grading - 1.0);
        (4 * ((n / 4.0).floor() as usize)).max(MIN_RING_POINTS)
    }

    /// Radius ratio actually used between rings: the requested grading,
    /// limited so ring elements stay near-isotropic with [`Self::ring_points`].
    pub fn ring_ratio(&self) -> f64 {
        self.grading.min(1.0 + TAU / self.ring_points() as f64)
    }
}

/// 2R·sin(π/32) < R/5.
const MIN_RING_POINTS: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ring {
    pub radius: f64,
    pub vertices: Vec<usize>,
    /// Number of leading mesh triangles inside this ring.
    pub triangles_inside: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BallMesh {
    pub mesh: Arc<Mesh>,
    pub shape: InclusionShape,
    pub options: BallOptions,
    pub core_radius: f64,
    pub ring_points: usize,
    /// Radius ratio q of consecutive regular rings.
    pub ring_ratio: f64,
    /// Rings from the core boundary outwards; the last one lies on ∂B_R.
    pub rings: Vec<Ring>,
}

impl BallMesh {
    pub fn radius(&self) -> f64 {
        self.options.radius
    }

    /// Radius of the regular ring j (core radius times q^j).
    pub fn regular_ring_radius(&self, j: usize) -> f64 {
        self.core_radius * self.ring_ratio.powi(j as i32)
    }
}

/// Mesh of B_R with ω resolved at size `h_inclusion`, rings graded by
/// ratio `grading`, and homogeneous Dirichlet markers on ∂B_R.
pub fn triangulate_ball(radius: f64, inclusion: &InclusionShape, h_inclusion: f64, grading: f64) -> Result<BallMesh> {
    triangulate_ball_with(inclusion, &BallOptions::new(radius, h_inclusion, grading))
}

pub fn triangulate_ball_with(shape: &InclusionShape, opts: &BallOptions) -> Result<BallMesh> {
    shape.validate()?;
    if !(opts.grading > 1.0) || !opts.grading.is_finite() {
        return Err(Error::Geometry(format!("ball grading must exceed 1, got {}", opts.grading)));
    }
    if !(opts.h_inclusion > 0.0) {
        return Err(Error::Geometry("ball h_inclusion must be positive".into()));
    }
    if !(opts.core_factor > 1.0) {
        return Err(Error::Geometry("ball core_factor must exceed 1".into()));
    }
    let extent = shape.extent();
    let n = opts.ring_points();
    let q = opts.ring_ratio();
    let dtheta = TAU / n as f64;
    let sigma_incl = 0.5 * opts.h_inclusion.min(extent);
    // The core grades from σ on ∂ω to the ring spacing dθ·ρ_a; for coarse
    // gradings the core is enlarged until that transition is gentle.
    let rate = opts.core_rate.max(1.5 * dtheta);
    let core_radius = (opts.core_factor * extent).max((rate * extent - sigma_incl) / (rate - dtheta));
    if !(opts.radius >= 4.0 * core_radius) {
        return Err(Error::Geometry(format!("ball radius {} too small for an inclusion of extent {extent}", opts.radius)));
    }

    // Core: unstructured, fitted to ∂ω, bounded by ring 0.
    let poly = shape.polygon(sigma_incl);
    let ring0 = geom::symmetric_circle([0.0, 0.0], core_radius, n, false);
    let field = SizeField {
        max_spacing: dtheta * core_radius,
        min_spacing: 0.25 * sigma_incl,
        sources: vec![
            SizeSource { shape: SourceShape::PolygonLine(poly.clone()), spacing: sigma_incl, rate },
            // Matches the ring spacing at the core boundary.
            SizeSource { shape: SourceShape::Disk(Circle { center: [0.0, 0.0], radius: extent }), spacing: dtheta * extent, rate: dtheta },
        ],
    };
    let (core_vertices, core_triangles, core_inside) = if shape.is_doubly_symmetric() {
        symmetric_core(&poly, &ring0, &field, core_radius)?
    } else {
        let core = build_planar(&Planar {
            outer: Outer::Circle(Circle { center: [0.0, 0.0], radius: core_radius }),
            holes: vec![],
            curves: vec![
                Curve { points: ring0.clone(), closed: true, kind: CurveKind::Boundary },
                Curve { points: poly, closed: true, kind: CurveKind::Interface },
            ],
            field: &field,
            root_center: [0.0, 0.0],
            root_half: core_radius,
            jitter: super::generate::JITTER,
            inside_test: None,
        })?;
        (core.vertices, core.triangles, core.inside)
    };
    let index: HashMap<(u64, u64), usize> = core_vertices.iter().enumerate().map(|(i, p)| (key(*p), i)).collect();
    let ring0_ids = ring0
        .iter()
        .map(|p| index.get(&key(*p)).copied().ok_or_else(|| Error::Mesh("core boundary lost vertices".into())))
        .collect::<Result<Vec<usize>>>()?;

    let mut vertices = core_vertices;
    let mut triangles = core_triangles;
    let mut regions: Vec<Region> = core_inside.iter().map(|&i| if i { Region::Inside } else { Region::Outside }).collect();
    let mut rings = vec![Ring { radius: core_radius, vertices: ring0_ids, triangles_inside: triangles.len() }];

    let mut j = 1usize;
    loop {
        let mut r = core_radius * q.powi(j as i32);
        // The final layer's ratio stays within [√q, q^{3/2}).
        let last = opts.radius / r < q.sqrt();
        if last {
            r = opts.radius;
        }
        let pts = geom::symmetric_circle([0.0, 0.0], r, n, j % 2 == 1);
        let start = vertices.len();
        vertices.extend(pts);
        let outer: Vec<usize> = (start..start + n).collect();
        stitch(&vertices, &rings[j - 1].vertices, &outer, j % 2 == 1, &mut triangles)?;
        regions.resize(triangles.len(), Region::Outside);
        rings.push(Ring { radius: r, vertices: outer, triangles_inside: triangles.len() });
        if last {
            break;
        }
        j += 1;
    }

    let outer_ids = &rings.last().unwrap().vertices;
    let boundary_edges = (0..n)
        .map(|i| BoundaryEdge { vertices: [outer_ids[i], outer_ids[(i + 1) % n]], marker: BoundaryMarker::OuterBall })
        .collect();
    let mesh = Mesh::new(
        vertices,
        triangles,
        regions,
        boundary_edges,
        vec![],
        CharacteristicSize { inside: opts.h_inclusion, outside: opts.h_inclusion },
    )?;
    Ok(BallMesh { mesh: Arc::new(mesh), shape: shape.clone(), options: opts.clone(), core_radius, ring_points: n, ring_ratio: q, rings })
}

fn key(p: Point) -> (u64, u64) {
    ((p[0] + 0.0).to_bits(), (p[1] + 0.0).to_bits())
}

/// Core mesh of a shape symmetric about both axes: the first quadrant is
/// meshed and mirrored, so the result is symmetric bit for bit.
fn symmetric_core(poly: &[Point], ring0: &[Point], field: &SizeField, radius: f64) -> Result<(Vec<Point>, Vec<[usize; 3]>, Vec<bool>)> {
    let (np, n) = (poly.len(), ring0.len());
    let arc = &poly[..=np / 4];
    let rarc = &ring0[..=n / 4];
    let origin = [0.0, 0.0];
    let mut boundary = field.sample_segment(origin, arc[0]);
    boundary.extend(field.sample_segment(arc[0], rarc[0]));
    boundary.extend_from_slice(&rarc[..n / 4]);
    boundary.extend(field.sample_segment(rarc[n / 4], arc[np / 4]));
    boundary.extend(field.sample_segment(arc[np / 4], origin));
    let inside = |g: Point| geom::point_in_polygon(g, poly);
    let q = build_planar(&Planar {
        outer: Outer::Quarter(radius),
        holes: vec![],
        curves: vec![
            Curve { points: boundary, closed: true, kind: CurveKind::Boundary },
            Curve { points: arc.to_vec(), closed: false, kind: CurveKind::Constraint },
        ],
        field,
        root_center: [0.5 * radius, 0.5 * radius],
        root_half: 0.5 * radius,
        jitter: super::generate::JITTER,
        inside_test: Some(&inside),
    })?;

    let mut vertices: Vec<Point> = Vec::with_capacity(4 * q.vertices.len());
    let mut index: HashMap<(u64, u64), usize> = HashMap::with_capacity(4 * q.vertices.len());
    let mut triangles = Vec::with_capacity(4 * q.triangles.len());
    let mut inside_flags = Vec::with_capacity(4 * q.triangles.len());
    for (sx, sy) in [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)] {
        let ids: Vec<usize> = q
            .vertices
            .iter()
            .map(|p| {
                let m = [sx * p[0] + 0.0, sy * p[1] + 0.0];
                *index.entry(key(m)).or_insert_with(|| {
                    vertices.push(m);
                    vertices.len() - 1
                })
            })
            .collect();
        let flip = sx * sy < 0.0;
        for (t, &ins) in q.triangles.iter().zip(&q.inside) {
            let t = [ids[t[0]], ids[t[1]], ids[t[2]]];
            triangles.push(if flip { [t[0], t[2], t[1]] } else { t });
            inside_flags.push(ins);
        }
    }
    Ok((vertices, triangles, inside_flags))
}

/// Triangulate the annulus between two rings of n vertices each; the outer
/// ring is rotated by +½ step (`outer_ahead`) or −½ step relative to the inner.
fn stitch(v: &[Point], inner: &[usize], outer: &[usize], outer_ahead: bool, out: &mut Vec<[usize; 3]>) -> Result<()> {
    let n = inner.len();
    for i in 0..n {
        let i1 = (i + 1) % n;
        let pair = if outer_ahead {
            // outer[i] lies between inner[i] and inner[i+1].
            [[inner[i], inner[i1], outer[i]], [outer[i], inner[i1], outer[i1]]]
        } else {
            // inner[i] lies between outer[i] and outer[i+1].
            [[outer[i], outer[i1], inner[i]], [inner[i], outer[i1], inner[i1]]]
        };
        for t in pair {
            let o = geom::orient(v[t[0]], v[t[1]], v[t[2]]);
            let t = if o < 0.0 { [t[0], t[2], t[1]] } else { t };
            if o == 0.0 {
                return Err(Error::Mesh("degenerate ring triangle".into()));
            }
            out.push(t);
        }
    }
    Ok(())
}
