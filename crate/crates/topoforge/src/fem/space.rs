//! Piecewise-linear fields with homogeneous Dirichlet constraints.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use super::ElementGeometry;
use crate::autodiff::{RMat, RVec};
use crate::error::{Error, Result};
use crate::mesh::vtk::{write_vtk, VtkData};
use crate::mesh::Mesh;
use crate::Point;

/// P1 field with `m` components; dof of (vertex v, component c) is v·m + c.
/// Constrained dofs carry the (homogeneous) Dirichlet value 0.
#[derive(Clone, Debug)]
pub struct FieldFunction {
    pub mesh: Arc<Mesh>,
    pub m: usize,
    pub values: Vec<f64>,
    pub constrained: Vec<bool>,
}

impl FieldFunction {
    /// Zero field constrained on Dirichlet and outer-ball edges.
    pub fn zeros(mesh: Arc<Mesh>, m: usize) -> Self {
        assert!(m == 1 || m == 2, "only m = 1, 2 supported");
        let cv = mesh.constrained_vertices();
        let constrained = cv.iter().flat_map(|&c| std::iter::repeat(c).take(m)).collect();
        FieldFunction { values: vec![0.0; m * mesh.num_vertices()], constrained, mesh, m }
    }

    /// Nodal interpolant of f (constrained dofs forced to zero).
    pub fn interpolate(mesh: Arc<Mesh>, m: usize, f: impl Fn(Point) -> RVec) -> Self {
        let mut u = Self::zeros(mesh, m);
        for (v, p) in u.mesh.vertices.iter().enumerate() {
            let val = f(*p);
            for c in 0..m {
                if !u.constrained[v * m + c] {
                    u.values[v * m + c] = val[c];
                }
            }
        }
        u
    }

    /// Same layout, new values (must have matching length).
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::InvalidInput(format!("{} values for {} dofs", values.len(), self.values.len())));
        }
        Ok(FieldFunction { values, ..self.clone() })
    }

    pub fn num_dofs(&self) -> usize {
        self.values.len()
    }

    /// Same mesh and m.
    pub fn compatible(&self, o: &FieldFunction) -> bool {
        self.m == o.m && (Arc::ptr_eq(&self.mesh, &o.mesh) || *self.mesh == *o.mesh)
    }

    pub fn vertex_value(&self, v: usize) -> RVec {
        let mut r = [0.0; 2];
        r[..self.m].copy_from_slice(&self.values[v * self.m..(v + 1) * self.m]);
        r
    }

    /// Values at the triangle's vertices.
    pub fn element_values(&self, t: usize) -> [RVec; 3] {
        let tri = self.mesh.triangles[t];
        [self.vertex_value(tri[0]), self.vertex_value(tri[1]), self.vertex_value(tri[2])]
    }

    /// Constant gradient on triangle t (row i = gradient of component i).
    pub fn element_gradient(&self, t: usize) -> RMat {
        let eg = ElementGeometry::new(&self.mesh, t);
        self.gradient_with(&eg, &self.element_values(t))
    }

    pub(crate) fn gradient_with(&self, eg: &ElementGeometry, vals: &[RVec; 3]) -> RMat {
        let mut g = [[0.0; 2]; 2];
        for (a, val) in vals.iter().enumerate() {
            for i in 0..self.m {
                for k in 0..2 {
                    g[i][k] += val[i] * eg.grads[a][k];
                }
            }
        }
        g
    }

    /// Euclidean norm of the dof vector.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// L² norm of (self − f) using the degree-4 triangle rule.
    pub fn l2_error(&self, f: impl Fn(Point) -> RVec) -> f64 {
        let mut s = 0.0;
        for t in 0..self.mesh.num_triangles() {
            let eg = ElementGeometry::new(&self.mesh, t);
            let vals = self.element_values(t);
            for (b, w) in super::quadrature::TRIANGLE {
                let x = eg.map(&b);
                let ex = f(x);
                for i in 0..self.m {
                    let uh = b[0] * vals[0][i] + b[1] * vals[1][i] + b[2] * vals[2][i];
                    s += w * eg.area * (uh - ex[i]).powi(2);
                }
            }
        }
        s.sqrt()
    }

    /// CSV dump `dof,vertex,component,x,y,value` (shortest round-trip floats).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("dof,vertex,component,x,y,value\n");
        for (d, v) in self.values.iter().enumerate() {
            let vert = d / self.m;
            let p = self.mesh.vertices[vert];
            let _ = writeln!(s, "{d},{vert},{},{},{},{v}", d % self.m, p[0], p[1]);
        }
        s
    }

    /// Legacy VTK with this field as point data (scalars for m = 1, vectors for m = 2).
    pub fn write_vtk(&self, path: &Path, name: &str) -> Result<()> {
        let nv = self.mesh.num_vertices();
        match self.m {
            1 => write_vtk(path, &self.mesh, name, &[(name, VtkData::Scalars(&self.values))], &[]),
            _ => {
                let v: Vec<[f64; 2]> = (0..nv).map(|i| self.vertex_value(i)).collect();
                write_vtk(path, &self.mesh, name, &[(name, VtkData::Vectors(&v))], &[])
            }
        }
    }
}

/// Value (barycentric interpolation) and gradient at x. On shared edges and
/// vertices the gradient is the area-weighted mean over incident triangles.
pub fn evaluate_at(u: &FieldFunction, x: Point) -> Result<(RVec, RMat)> {
    let hits = u.mesh.locate(x);
    let (t0, b) = *hits.first().ok_or(Error::OutsideMesh(x))?;
    let vals = u.element_values(t0);
    let mut value = [0.0; 2];
    for i in 0..u.m {
        value[i] = b[0] * vals[0][i] + b[1] * vals[1][i] + b[2] * vals[2][i];
    }
    let mut grad = [[0.0; 2]; 2];
    let mut total = 0.0;
    for (t, _) in &hits {
        let eg = ElementGeometry::new(&u.mesh, *t);
        let g = u.gradient_with(&eg, &u.element_values(*t));
        for i in 0..2 {
            for k in 0..2 {
                grad[i][k] += eg.area * g[i][k];
            }
        }
        total += eg.area;
    }
    for row in grad.iter_mut() {
        for g in row.iter_mut() {
            *g /= total;
        }
    }
    Ok((value, grad))
}
