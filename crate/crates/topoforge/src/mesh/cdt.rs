//! Constrained Delaunay triangulation (spade) plus the planar straight-line
//! graph driver shared by all generators.

use std::collections::HashMap;

use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

use super::geom;
use super::geometry::Circle;
use super::locate::{Aabb, BoxTree};
use super::quadtree::{leaf_points, Outer};
use super::sizing::SizeField;
use crate::error::{Error, Result};
use crate::Point;

/// Minimum angle requested from Delaunay refinement. Constraint edges are
/// never split, so the achieved bound near constraints depends on their
/// sampling; meshes are checked against the hard limit afterwards.
const REFINE_ANGLE_DEG: f64 = 28.0;

/// Constrained Delaunay triangulation of `points` honouring `constraints`,
/// followed by angle-driven refinement (Steiner points are appended after
/// the input points, whose indices are preserved). Triangles are
/// counter-clockwise.
pub(crate) fn triangulate(points: &[Point], constraints: Vec<[usize; 2]>) -> Result<(Vec<Point>, Vec<[usize; 3]>)> {
    let verts: Vec<Point2<f64>> = points.iter().map(|p| Point2::new(p[0], p[1])).collect();
    let mut conflicts = 0usize;
    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> =
        ConstrainedDelaunayTriangulation::try_bulk_load_cdt(verts, constraints, |_| conflicts += 1)
            .map_err(|e| Error::Mesh(format!("triangulation failed: {e:?}")))?;
    if cdt.num_vertices() != points.len() {
        return Err(Error::Mesh(format!("{} duplicate vertices in triangulation input", points.len() - cdt.num_vertices())));
    }
    if conflicts > 0 {
        return Err(Error::Mesh(format!("{conflicts} intersecting constraint edges")));
    }
    let params = RefinementParameters::<f64>::new()
        .keep_constraint_edges()
        .with_angle_limit(AngleLimit::from_deg(REFINE_ANGLE_DEG))
        .with_max_additional_vertices(2 * points.len() + 1000);
    cdt.refine(params);
    let vertices = cdt.vertices().map(|v| [v.position().x, v.position().y]).collect();
    let tris = cdt
        .inner_faces()
        .map(|f| {
            let v = f.vertices();
            [v[0].fix().index(), v[1].fix().index(), v[2].fix().index()]
        })
        .collect();
    Ok((vertices, tris))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum CurveKind {
    /// Part of the outer boundary of the meshed region.
    Boundary,
    /// Boundary of a removed hole.
    Hole,
    /// Closed interface; triangles inside are marked inside.
    Interface,
    /// Constraint polyline without marker meaning.
    Constraint,
    /// Open polyline carrying a line load.
    LoadLine,
}

#[derive(Clone, Debug)]
pub(crate) struct Curve {
    pub points: Vec<Point>,
    pub closed: bool,
    pub kind: CurveKind,
}

pub(crate) struct Planar<'a> {
    pub outer: Outer,
    pub holes: Vec<Circle>,
    pub curves: Vec<Curve>,
    pub field: &'a SizeField,
    pub root_center: Point,
    pub root_half: f64,
    pub jitter: f64,
    /// Replaces the Interface-polygon test for marking triangles inside.
    pub inside_test: Option<&'a dyn Fn(Point) -> bool>,
}

pub(crate) struct RawMesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub inside: Vec<bool>,
    /// Vertex ids of each input curve, in input order.
    pub curve_ids: Vec<Vec<usize>>,
}

/// Leaf points closer than this multiple of max(leaf side, segment length)
/// to a constraint segment are dropped.
const CLEARANCE: f64 = 0.55;

pub(crate) fn build_planar(p: &Planar) -> Result<RawMesh> {
    let mut vertices: Vec<Point> = Vec::new();
    let mut index: HashMap<(u64, u64), usize> = HashMap::new();
    let mut curve_ids = Vec::with_capacity(p.curves.len());
    let mut constraints: Vec<[usize; 2]> = Vec::new();
    let mut segs: Vec<(Point, Point)> = Vec::new();
    for c in &p.curves {
        let ids: Vec<usize> = c
            .points
            .iter()
            .map(|q| {
                *index.entry((q[0].to_bits(), q[1].to_bits())).or_insert_with(|| {
                    vertices.push(*q);
                    vertices.len() - 1
                })
            })
            .collect();
        let n = ids.len();
        let m = if c.closed { n } else { n.saturating_sub(1) };
        for i in 0..m {
            let (a, b) = (ids[i], ids[(i + 1) % n]);
            if a != b {
                constraints.push([a, b]);
                segs.push((vertices[a], vertices[b]));
            }
        }
        curve_ids.push(ids);
    }

    let boxes: Vec<Aabb> = segs
        .iter()
        .map(|(a, b)| Aabb::of_points(&[*a, *b]).inflate(CLEARANCE * geom::dist(*a, *b)))
        .collect();
    let tree = BoxTree::new(boxes);
    for (q, side) in leaf_points(p.root_center, p.root_half, p.field, &p.outer, &p.holes, p.jitter) {
        let probe = Aabb { min: q, max: q }.inflate(CLEARANCE * side);
        let mut keep = true;
        tree.query(&probe, |s| {
            if keep {
                let (a, b) = segs[s];
                if geom::dist_to_segment(q, a, b) < CLEARANCE * side.max(geom::dist(a, b)) {
                    keep = false;
                }
            }
        });
        if keep {
            vertices.push(q);
        }
    }

    let (vertices, all) = triangulate(&vertices, constraints)?;

    let hole_polys: Vec<&Vec<Point>> = p.curves.iter().filter(|c| c.kind == CurveKind::Hole).map(|c| &c.points).collect();
    let interface_polys: Vec<&Vec<Point>> = p.curves.iter().filter(|c| c.kind == CurveKind::Interface).map(|c| &c.points).collect();
    let boundary: Vec<Point> = p.curves.iter().filter(|c| c.kind == CurveKind::Boundary).flat_map(|c| c.points.iter().copied()).collect();
    let mut triangles = Vec::with_capacity(all.len());
    let mut inside = Vec::with_capacity(all.len());
    for t in all {
        let [a, b, c] = [vertices[t[0]], vertices[t[1]], vertices[t[2]]];
        let g = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0];
        if !boundary.is_empty() && !geom::point_in_polygon(g, &boundary) {
            continue;
        }
        if hole_polys.iter().any(|h| geom::point_in_polygon(g, h)) {
            continue;
        }
        if geom::orient(a, b, c) <= 0.0 {
            return Err(Error::Mesh("degenerate triangle in constrained triangulation".into()));
        }
        inside.push(match p.inside_test {
            Some(f) => f(g),
            None => interface_polys.iter().any(|h| geom::point_in_polygon(g, h)),
        });
        triangles.push(t);
    }

    // Drop vertices not used by any remaining triangle (outside the boundary).
    let mut used = vec![false; vertices.len()];
    for t in &triangles {
        for &v in t {
            used[v] = true;
        }
    }
    let mut remap = vec![usize::MAX; vertices.len()];
    let mut kept = Vec::with_capacity(vertices.len());
    for (i, v) in vertices.iter().enumerate() {
        if used[i] {
            remap[i] = kept.len();
            kept.push(*v);
        }
    }
    for t in &mut triangles {
        for v in t.iter_mut() {
            *v = remap[*v];
        }
    }
    let curve_ids = curve_ids.into_iter().map(|ids| ids.into_iter().map(|i| remap[i]).collect()).collect();
    Ok(RawMesh { vertices: kept, triangles, inside, curve_ids })
}
