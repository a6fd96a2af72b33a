//! Meshes of the hold-all domain D, optionally refined at a point or
//! carrying an inclusion z + εω.

use serde::{Deserialize, Serialize};

use super::cdt::{build_planar, Curve, CurveKind, Planar};
use super::geom;
use super::geometry::{Circle, DomainGeometry, DomainShape};
use super::quadtree::Outer;
use super::shape::{InclusionShape, PlacedInclusion};
use super::sizing::{SizeField, SizeSource, SourceShape};
use super::{topological_boundary, BoundaryEdge, CharacteristicSize, Mesh, Region};
use crate::error::{Error, Result};
use crate::Point;

/// Local refinement: element size ≤ `h_fine` within `radius` of `z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub z: Point,
    pub h_fine: f64,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainMeshOptions {
    /// Target element size away from all refinement sources.
    pub h_coarse: f64,
    /// Element size along ∂Ω (defaults to `h_coarse`).
    #[serde(default)]
    pub h_omega: Option<f64>,
    #[serde(default)]
    pub refine: Option<Refinement>,
    /// Growth of the element size per unit distance from a refinement source.
    #[serde(default = "default_rate")]
    pub grading_rate: f64,
}

fn default_rate() -> f64 {
    0.25
}

impl DomainMeshOptions {
    pub fn new(h_coarse: f64) -> Self {
        DomainMeshOptions { h_coarse, h_omega: None, refine: None, grading_rate: default_rate() }
    }
}

/// Jitter amplitude of interior points relative to the quadtree leaf side.
pub(crate) const JITTER: f64 = 0.12;

/// Extra features inserted into a D-mesh.
#[derive(Default)]
pub(crate) struct Extras {
    /// Closed polygons whose interior is marked inside.
    pub inclusions: Vec<Vec<Point>>,
    /// Removed disk: (pruning circle, exact boundary vertices).
    pub hole: Option<(Circle, Vec<Point>)>,
    pub sources: Vec<SizeSource>,
    pub min_spacing: Option<f64>,
}

pub(crate) struct DomainRaw {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub inside: Vec<bool>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub load_edges: Vec<[usize; 2]>,
    pub hole_ids: Vec<usize>,
}

/// Mesh D with the given options (no inclusion).
pub fn triangulate_domain(geometry: &DomainGeometry, h_coarse: f64, refine_at: Option<Refinement>) -> Result<Mesh> {
    let mut opts = DomainMeshOptions::new(h_coarse);
    opts.refine = refine_at;
    triangulate_domain_with(geometry, &opts)
}

pub fn triangulate_domain_with(geometry: &DomainGeometry, opts: &DomainMeshOptions) -> Result<Mesh> {
    let raw = mesh_domain(geometry, opts, Extras::default())?;
    finish(raw, opts, opts.h_omega.unwrap_or(opts.h_coarse))
}

fn finish(raw: DomainRaw, opts: &DomainMeshOptions, h_inside: f64) -> Result<Mesh> {
    let regions = raw.inside.iter().map(|&i| if i { Region::Inside } else { Region::Outside }).collect();
    Mesh::new(
        raw.vertices,
        raw.triangles,
        regions,
        raw.boundary_edges,
        raw.load_edges,
        CharacteristicSize { inside: h_inside, outside: opts.h_coarse },
    )
}

pub(crate) fn size_field(geometry: &DomainGeometry, opts: &DomainMeshOptions, extras: &Extras) -> SizeField {
    let sigma = 0.5 * opts.h_coarse;
    let sigma_omega = 0.5 * opts.h_omega.unwrap_or(opts.h_coarse).min(opts.h_coarse);
    let mut sources: Vec<SizeSource> = geometry
        .subdomains
        .iter()
        .map(|c| SizeSource { shape: SourceShape::CircleLine(*c), spacing: sigma_omega, rate: opts.grading_rate })
        .collect();
    if let Some(r) = &opts.refine {
        sources.push(SizeSource {
            shape: SourceShape::Disk(Circle { center: r.z, radius: r.radius }),
            spacing: 0.5 * r.h_fine,
            rate: opts.grading_rate,
        });
    }
    sources.extend(extras.sources.iter().cloned());
    let min_source = sources.iter().map(|s| s.spacing).fold(sigma, f64::min);
    let min_spacing = extras.min_spacing.unwrap_or(0.5 * min_source).min(min_source);
    SizeField { max_spacing: sigma, min_spacing, sources }
}

pub(crate) fn mesh_domain(geometry: &DomainGeometry, opts: &DomainMeshOptions, extras: Extras) -> Result<DomainRaw> {
    geometry.validate()?;
    if !(opts.h_coarse > 0.0) {
        return Err(Error::Geometry("h_coarse must be positive".into()));
    }
    if let Some(r) = &opts.refine {
        if !(r.h_fine > 0.0 && r.h_fine <= opts.h_coarse) {
            return Err(Error::Geometry(format!("h_fine = {} must lie in (0, h_coarse]", r.h_fine)));
        }
    }
    let field = size_field(geometry, opts, &extras);

    let mut curves = Vec::new();
    let (outer, root_center, root_half) = match &geometry.domain {
        DomainShape::Rectangle { min, max } => {
            let corners = [*min, [max[0], min[1]], *max, [min[0], max[1]]];
            let breaks = geometry.breakpoints();
            let mut pts = Vec::new();
            for i in 0..4 {
                let (a, b) = (corners[i], corners[(i + 1) % 4]);
                let len = geom::dist(a, b);
                let mut stops: Vec<(f64, Point)> = breaks
                    .iter()
                    .filter(|p| geom::dist_to_segment(**p, a, b) <= 1e-9 * len)
                    .map(|p| (geom::dist(a, *p), *p))
                    .filter(|(t, _)| *t > 1e-9 * len && *t < len * (1.0 - 1e-9))
                    .collect();
                stops.sort_by(|x, y| x.0.total_cmp(&y.0));
                let mut from = a;
                for (_, p) in stops.iter().chain(std::iter::once(&(len, b))) {
                    pts.extend(field.sample_segment(from, *p));
                    from = *p;
                }
            }
            let c = [0.5 * (min[0] + max[0]), 0.5 * (min[1] + max[1])];
            let half = 0.5 * (max[0] - min[0]).max(max[1] - min[1]);
            curves.push(Curve { points: pts, closed: true, kind: CurveKind::Boundary });
            (Outer::Rectangle { min: *min, max: *max }, c, half)
        }
        DomainShape::Disk { center, radius } => {
            let s = (0..64)
                .map(|i| {
                    let t = std::f64::consts::TAU * i as f64 / 64.0;
                    field.spacing([center[0] + radius * t.cos(), center[1] + radius * t.sin()])
                })
                .fold(f64::INFINITY, f64::min);
            let n = geom::even_at_least(std::f64::consts::TAU * radius / s, 16);
            curves.push(Curve { points: geom::circle_points(*center, *radius, n, 0.0), closed: true, kind: CurveKind::Boundary });
            (Outer::Circle(Circle { center: *center, radius: *radius }), *center, *radius)
        }
    };

    for c in &geometry.subdomains {
        let s = field.spacing([c.center[0] + c.radius, c.center[1]]);
        let n = geom::even_at_least(std::f64::consts::TAU * c.radius / s, 16);
        curves.push(Curve { points: geom::circle_points(c.center, c.radius, n, 0.0), closed: true, kind: CurveKind::Interface });
    }
    let first_load = curves.len();
    let loads = geometry.interior_load_segments();
    for s in &loads {
        let mut pts = field.sample_segment(s.a, s.b);
        pts.push(s.b);
        curves.push(Curve { points: pts, closed: false, kind: CurveKind::LoadLine });
    }
    for poly in &extras.inclusions {
        curves.push(Curve { points: poly.clone(), closed: true, kind: CurveKind::Interface });
    }
    let mut holes = Vec::new();
    let hole_curve = extras.hole.as_ref().map(|(circle, pts)| {
        holes.push(*circle);
        curves.push(Curve { points: pts.clone(), closed: true, kind: CurveKind::Hole });
        curves.len() - 1
    });

    let raw = build_planar(&Planar { outer, holes, curves, field: &field, root_center, root_half, jitter: JITTER, inside_test: None })?;

    let hole_ids = hole_curve.map(|i| raw.curve_ids[i].clone()).unwrap_or_default();
    let hole_set: std::collections::HashSet<[usize; 2]> = (0..hole_ids.len())
        .map(|i| super::sorted_edge(hole_ids[i], hole_ids[(i + 1) % hole_ids.len()]))
        .collect();
    let mut boundary_edges = Vec::new();
    for e in topological_boundary(&raw.triangles) {
        if hole_set.contains(&super::sorted_edge(e[0], e[1])) {
            continue;
        }
        let (a, b) = (raw.vertices[e[0]], raw.vertices[e[1]]);
        if geometry.dist_to_boundary(a).abs() > 1e-9 * geometry.scale() || geometry.dist_to_boundary(b).abs() > 1e-9 * geometry.scale() {
            // Disk domains are polygonal approximations; accept their chords.
            if !matches!(geometry.domain, DomainShape::Disk { .. }) {
                return Err(Error::Mesh(format!("unexpected boundary edge {e:?} inside D")));
            }
        }
        boundary_edges.push(BoundaryEdge { vertices: e, marker: geometry.marker_for(a, b) });
    }
    let mut load_edges = Vec::new();
    for k in 0..loads.len() {
        let ids = &raw.curve_ids[first_load + k];
        for w in ids.windows(2) {
            load_edges.push([w[0], w[1]]);
        }
    }
    Ok(DomainRaw { vertices: raw.vertices, triangles: raw.triangles, inside: raw.inside, boundary_edges, load_edges, hole_ids })
}

/// Check that z + εω is strictly inside D and disjoint from Ω.
pub(crate) fn check_placement(geometry: &DomainGeometry, placed: &PlacedInclusion, poly: &[Point]) -> Result<()> {
    let z = placed.z;
    if !geometry.contains(z) || geometry.dist_to_boundary(z) <= 0.0 {
        return Err(Error::Geometry(format!("z = {z:?} is not inside D")));
    }
    for c in &geometry.subdomains {
        if (geom::dist(z, c.center) - c.radius).abs() < 1e-12 {
            return Err(Error::Geometry(format!("z = {z:?} lies on ∂Ω")));
        }
        if geom::point_in_polygon(c.center, poly) || geom::dist_to_polygon(c.center, poly) <= c.radius {
            return Err(Error::Geometry(format!("inclusion z + εω (ε = {}) overlaps Ω", placed.eps)));
        }
    }
    if poly.iter().any(|p| geometry.dist_to_boundary(*p) <= 0.0) {
        return Err(Error::Geometry(format!("inclusion z + εω (ε = {}) reaches ∂D", placed.eps)));
    }
    Ok(())
}

/// Mesh of D whose inside marker is Ω ∪ (z + εω), fitted to both interfaces.
/// The inclusion boundary is resolved with spacing ≤ ε·r/16, r the
/// equivalent radius of ω.
pub fn perturb_domain(geometry: &DomainGeometry, opts: &DomainMeshOptions, z: Point, eps: f64, shape: &InclusionShape) -> Result<Mesh> {
    Ok(perturbed_with_baseline(geometry, opts, z, eps, shape)?.0)
}

/// Perturbed mesh plus the same mesh with the inclusion switched off.
pub(crate) fn perturbed_with_baseline(
    geometry: &DomainGeometry,
    opts: &DomainMeshOptions,
    z: Point,
    eps: f64,
    shape: &InclusionShape,
) -> Result<(Mesh, Mesh)> {
    shape.validate()?;
    if !(eps > 0.0) {
        return Err(Error::Geometry(format!("ε = {eps} must be positive")));
    }
    let placed = PlacedInclusion { shape: shape.clone(), z, eps };
    let h_incl = (eps * shape.equivalent_radius() / 8.0).min(opts.h_coarse);
    let spacing = 0.5 * h_incl;
    let poly = placed.polygon(spacing);
    check_placement(geometry, &placed, &poly)?;
    let extras = Extras {
        inclusions: vec![poly.clone()],
        sources: vec![SizeSource { shape: SourceShape::PolygonLine(poly.clone()), spacing, rate: opts.grading_rate }],
        ..Default::default()
    };
    let raw = mesh_domain(geometry, opts, extras)?;
    let baseline_inside: Vec<bool> = raw
        .triangles
        .iter()
        .zip(&raw.inside)
        .map(|(t, &ins)| {
            let g = centroid(&raw.vertices, t);
            ins && !geom::point_in_polygon(g, &poly)
        })
        .collect();
    let base_regions = baseline_inside.iter().map(|&i| if i { Region::Inside } else { Region::Outside }).collect();
    let mesh = finish(raw, opts, h_incl)?;
    let baseline = mesh.with_regions(base_regions)?;
    Ok((mesh, baseline))
}

pub(crate) fn centroid(v: &[Point], t: &[usize; 3]) -> Point {
    [(v[t[0]][0] + v[t[1]][0] + v[t[2]][0]) / 3.0, (v[t[0]][1] + v[t[1]][1] + v[t[2]][1]) / 3.0]
}
