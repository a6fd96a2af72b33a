//! Legacy VTK (ASCII, unstructured grid) export and import.
//!
//! Triangles are written as VTK_TRIANGLE cells followed by boundary and load
//! edges as VTK_LINE cells, so markers survive a round trip: the cell scalar
//! `region` is 0/1 on triangles (outside/inside) and −1 on lines, and
//! `edge_marker` is −1 on triangles, 0/1/2 on boundary edges
//! (dirichlet/neumann/outer_ball) and 3 on load edges.

use std::fmt::Write as _;
use std::path::Path;

use super::{BoundaryEdge, BoundaryMarker, CharacteristicSize, Mesh, Region};
use crate::error::{Error, Result};

/// Data attached to points or cells.
#[derive(Clone, Copy, Debug)]
pub enum VtkData<'a> {
    Scalars(&'a [f64]),
    Vectors(&'a [[f64; 2]]),
}

impl VtkData<'_> {
    fn len(&self) -> usize {
        match self {
            VtkData::Scalars(v) => v.len(),
            VtkData::Vectors(v) => v.len(),
        }
    }
}

fn marker_code(m: BoundaryMarker) -> i32 {
    match m {
        BoundaryMarker::Dirichlet => 0,
        BoundaryMarker::Neumann => 1,
        BoundaryMarker::OuterBall => 2,
    }
}

fn write_data(out: &mut String, name: &str, data: &VtkData, pad: usize) {
    match data {
        VtkData::Scalars(v) => {
            let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for x in v.iter() {
                let _ = writeln!(out, "{x}");
            }
            for _ in 0..pad {
                out.push_str("nan\n");
            }
        }
        VtkData::Vectors(v) => {
            let _ = writeln!(out, "VECTORS {name} double");
            for x in v.iter() {
                let _ = writeln!(out, "{} {} 0", x[0], x[1]);
            }
            for _ in 0..pad {
                out.push_str("nan nan 0\n");
            }
        }
    }
}

/// Render the mesh with optional point data (one value per vertex) and cell
/// data (one value per triangle).
pub fn to_vtk_string(mesh: &Mesh, title: &str, point_data: &[(&str, VtkData)], cell_data: &[(&str, VtkData)]) -> Result<String> {
    let nv = mesh.num_vertices();
    let nt = mesh.num_triangles();
    for (name, d) in point_data {
        if d.len() != nv {
            return Err(Error::InvalidInput(format!("point data '{name}' has {} values for {nv} vertices", d.len())));
        }
    }
    for (name, d) in cell_data {
        if d.len() != nt {
            return Err(Error::InvalidInput(format!("cell data '{name}' has {} values for {nt} triangles", d.len())));
        }
    }
    let lines: Vec<([usize; 2], i32)> = mesh
        .boundary_edges
        .iter()
        .map(|b| (b.vertices, marker_code(b.marker)))
        .chain(mesh.load_edges.iter().map(|e| (*e, 3)))
        .collect();
    let nc = nt + lines.len();
    let mut s = String::with_capacity(64 * (nv + nc));
    let title = title.replace('\n', " ");
    let _ = writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {nv} double");
    for p in &mesh.vertices {
        let _ = writeln!(s, "{} {} 0", p[0], p[1]);
    }
    let _ = writeln!(s, "CELLS {nc} {}", 4 * nt + 3 * lines.len());
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    for (e, _) in &lines {
        let _ = writeln!(s, "2 {} {}", e[0], e[1]);
    }
    let _ = writeln!(s, "CELL_TYPES {nc}");
    for _ in 0..nt {
        s.push_str("5\n");
    }
    for _ in &lines {
        s.push_str("3\n");
    }
    let _ = writeln!(s, "CELL_DATA {nc}\nSCALARS region int 1\nLOOKUP_TABLE default");
    for r in &mesh.regions {
        s.push_str(if *r == Region::Inside { "1\n" } else { "0\n" });
    }
    for _ in &lines {
        s.push_str("-1\n");
    }
    s.push_str("SCALARS edge_marker int 1\nLOOKUP_TABLE default\n");
    for _ in 0..nt {
        s.push_str("-1\n");
    }
    for (_, c) in &lines {
        let _ = writeln!(s, "{c}");
    }
    for (name, d) in cell_data {
        write_data(&mut s, name, d, lines.len());
    }
    if !point_data.is_empty() {
        let _ = writeln!(s, "POINT_DATA {nv}");
        for (name, d) in point_data {
            write_data(&mut s, name, d, 0);
        }
    }
    Ok(s)
}

pub fn write_vtk(path: &Path, mesh: &Mesh, title: &str, point_data: &[(&str, VtkData)], cell_data: &[(&str, VtkData)]) -> Result<()> {
    let s = to_vtk_string(mesh, title, point_data, cell_data)?;
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Parse a mesh written by [`to_vtk_string`] (geometry and markers only).
pub fn from_vtk_str(text: &str, origin: &str) -> Result<Mesh> {
    let fmt = |m: String| Error::Format { path: origin.into(), message: m };
    let mut tok = text.lines().skip(4).flat_map(|l| l.split_whitespace());
    let mut next = |what: &str| tok.next().ok_or_else(|| fmt(format!("unexpected end of file reading {what}")));
    fn num<T: std::str::FromStr>(s: &str, what: &str, origin: &str) -> Result<T> {
        s.parse().map_err(|_| Error::Format { path: origin.into(), message: format!("bad {what}: '{s}'") })
    }
    if next("POINTS")? != "POINTS" {
        return Err(fmt("expected POINTS".into()));
    }
    let nv: usize = num(next("count")?, "point count", origin)?;
    next("type")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let x = num(next("x")?, "coordinate", origin)?;
        let y = num(next("y")?, "coordinate", origin)?;
        next("z")?;
        vertices.push([x, y]);
    }
    if next("CELLS")? != "CELLS" {
        return Err(fmt("expected CELLS".into()));
    }
    let nc: usize = num(next("count")?, "cell count", origin)?;
    next("size")?;
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let k: usize = num(next("cell")?, "cell size", origin)?;
        let mut c = Vec::with_capacity(k);
        for _ in 0..k {
            c.push(num::<usize>(next("cell")?, "vertex index", origin)?);
        }
        cells.push(c);
    }
    if next("CELL_TYPES")? != "CELL_TYPES" {
        return Err(fmt("expected CELL_TYPES".into()));
    }
    next("count")?;
    for _ in 0..nc {
        next("type")?;
    }
    let mut region = None;
    let mut marker = None;
    while let Ok(t) = next("section") {
        if t == "SCALARS" {
            let name = next("name")?.to_string();
            next("type")?;
            next("ncomp")?;
            next("LOOKUP_TABLE")?;
            next("table")?;
            let mut vals = Vec::with_capacity(nc);
            for _ in 0..nc {
                vals.push(next("value")?.to_string());
            }
            match name.as_str() {
                "region" => region = Some(vals),
                "edge_marker" => marker = Some(vals),
                _ => {}
            }
        }
        if region.is_some() && marker.is_some() {
            break;
        }
    }
    let region = region.ok_or_else(|| fmt("missing region cell data".into()))?;
    let marker = marker.ok_or_else(|| fmt("missing edge_marker cell data".into()))?;
    let mut triangles = Vec::new();
    let mut regions = Vec::new();
    let mut boundary_edges = Vec::new();
    let mut load_edges = Vec::new();
    for (i, c) in cells.iter().enumerate() {
        match c.len() {
            3 => {
                triangles.push([c[0], c[1], c[2]]);
                regions.push(if region[i] == "1" { Region::Inside } else { Region::Outside });
            }
            2 => match marker[i].as_str() {
                "0" => boundary_edges.push(BoundaryEdge { vertices: [c[0], c[1]], marker: BoundaryMarker::Dirichlet }),
                "1" => boundary_edges.push(BoundaryEdge { vertices: [c[0], c[1]], marker: BoundaryMarker::Neumann }),
                "2" => boundary_edges.push(BoundaryEdge { vertices: [c[0], c[1]], marker: BoundaryMarker::OuterBall }),
                "3" => load_edges.push([c[0], c[1]]),
                m => return Err(fmt(format!("unknown edge marker {m}"))),
            },
            k => return Err(fmt(format!("unsupported cell with {k} vertices"))),
        }
    }
    Mesh::new(vertices, triangles, regions, boundary_edges, load_edges, CharacteristicSize { inside: f64::NAN, outside: f64::NAN })
}

pub fn read_vtk(path: &Path) -> Result<Mesh> {
    let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_vtk_str(&s, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{triangulate_domain, Circle, DomainGeometry, Segment};

    #[test]
    fn round_trip_preserves_markers() {
        let mut g = DomainGeometry::rectangle([0.0, 0.0], [1.0, 1.0]);
        g.subdomains.push(Circle { center: [0.5, 0.5], radius: 0.2 });
        g.dirichlet.push(Segment::new([0.0, 0.0], [0.0, 1.0]));
        let m = triangulate_domain(&g, 0.2, None).unwrap();
        let u: Vec<f64> = m.vertices.iter().map(|p| p[0]).collect();
        let s = to_vtk_string(&m, "t", &[("u", VtkData::Scalars(&u))], &[]).unwrap();
        let back = from_vtk_str(&s, "mem").unwrap();
        assert_eq!(back, m);
    }
}
