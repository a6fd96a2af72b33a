//! Residual and Jacobian assembly over free dofs.
//!
//! Element arrays are computed in parallel and scattered sequentially in
//! triangle order, so results are bitwise reproducible for any thread count.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use super::form::WeakForm;
use super::linear::{Factorization, Pattern};
use super::quadrature::{EDGE, TRIANGLE};
use super::space::FieldFunction;
use super::ElementGeometry;
use crate::autodiff::{Dual, DMat, DVec, TangentDirection};
use crate::error::{Error, Result};
use crate::mesh::{sorted_edge, BoundaryMarker, Mesh};
use crate::Point;

const NONE: u32 = u32::MAX;

/// Values of a matrix on an [`Assembler`]'s pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    pub values: Vec<f64>,
}

/// Dof numbering, sparsity pattern and scatter maps for one mesh and m.
#[derive(Debug)]
pub struct Assembler {
    pub mesh: Arc<Mesh>,
    pub m: usize,
    /// Free index of each dof, or `usize::MAX` when constrained.
    free_index: Vec<usize>,
    /// Dof of each free index.
    free_dofs: Vec<usize>,
    pattern: Pattern,
    /// (3m)² positions into the value array per triangle; row-major in (a,i),(b,j).
    scatter: Vec<u32>,
    /// Boundary edge (sorted) → adjacent triangle.
    edge_triangle: HashMap<[usize; 2], usize>,
}

impl Assembler {
    pub fn new(mesh: Arc<Mesh>, m: usize) -> Self {
        let template = FieldFunction::zeros(mesh.clone(), m);
        let ndof = template.num_dofs();
        let mut free_index = vec![usize::MAX; ndof];
        let mut free_dofs = Vec::new();
        for d in 0..ndof {
            if !template.constrained[d] {
                free_index[d] = free_dofs.len();
                free_dofs.push(d);
            }
        }
        let n = free_dofs.len();
        let nloc = 3 * m;

        let local_free = |t: usize| -> Vec<usize> {
            let tri = mesh.triangles[t];
            (0..nloc).map(|l| free_index[tri[l / m] * m + l % m]).collect()
        };

        let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(mesh.num_triangles() * nloc * nloc);
        for t in 0..mesh.num_triangles() {
            let f = local_free(t);
            for &r in &f {
                for &c in &f {
                    if r != usize::MAX && c != usize::MAX {
                        pairs.push((c, r));
                    }
                }
            }
        }
        pairs.par_sort_unstable();
        pairs.dedup();
        let mut col_ptr = vec![0usize; n + 1];
        for &(c, _) in &pairs {
            col_ptr[c + 1] += 1;
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        let row_idx: Vec<usize> = pairs.iter().map(|&(_, r)| r).collect();

        let position = |r: usize, c: usize| -> u32 {
            let rows = &row_idx[col_ptr[c]..col_ptr[c + 1]];
            (col_ptr[c] + rows.binary_search(&r).expect("entry in pattern")) as u32
        };
        let scatter: Vec<u32> = (0..mesh.num_triangles())
            .into_par_iter()
            .flat_map_iter(|t| {
                let f = local_free(t);
                let mut s = Vec::with_capacity(nloc * nloc);
                for &r in &f {
                    for &c in &f {
                        s.push(if r == usize::MAX || c == usize::MAX { NONE } else { position(r, c) });
                    }
                }
                s
            })
            .collect();

        let mut edge_triangle = HashMap::new();
        let boundary: std::collections::HashSet<[usize; 2]> =
            mesh.boundary_edges.iter().map(|e| sorted_edge(e.vertices[0], e.vertices[1])).collect();
        for (t, tri) in mesh.triangles.iter().enumerate() {
            for k in 0..3 {
                let e = sorted_edge(tri[k], tri[(k + 1) % 3]);
                if boundary.contains(&e) {
                    edge_triangle.insert(e, t);
                }
            }
        }

        Assembler { pattern: Pattern::new(n, col_ptr, row_idx), mesh, m, free_index, free_dofs, scatter, edge_triangle }
    }

    pub fn num_free(&self) -> usize {
        self.free_dofs.len()
    }

    pub fn num_dofs(&self) -> usize {
        self.free_index.len()
    }

    pub fn pattern(&self) -> &Pattern {
        &self.pattern
    }

    /// Free index of a dof (None if constrained).
    pub fn free_index(&self, dof: usize) -> Option<usize> {
        Some(self.free_index[dof]).filter(|&i| i != usize::MAX)
    }

    pub fn zeros(&self) -> FieldFunction {
        FieldFunction::zeros(self.mesh.clone(), self.m)
    }

    /// Restrict a full dof vector to the free dofs.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free_dofs.iter().map(|&d| full[d]).collect()
    }

    /// Full dof vector with zeros on constrained dofs.
    pub fn extend(&self, free: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.num_dofs()];
        for (i, &d) in self.free_dofs.iter().enumerate() {
            full[d] = free[i];
        }
        full
    }

    /// Triangle adjacent to a boundary edge.
    pub fn boundary_triangle(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_triangle.get(&sorted_edge(a, b)).copied()
    }

    fn check(&self, u: &FieldFunction) -> Result<()> {
        if u.m != self.m || u.num_dofs() != self.num_dofs() || !(Arc::ptr_eq(&u.mesh, &self.mesh) || *u.mesh == *self.mesh) {
            return Err(Error::InvalidInput("field does not live on the assembler's mesh".into()));
        }
        Ok(())
    }

    /// Residual restricted to free dofs.
    pub fn residual(&self, form: &dyn WeakForm, u: &FieldFunction, load: f64) -> Result<Vec<f64>> {
        self.check(u)?;
        let m = self.m;
        let nloc = 3 * m;
        let elems: Vec<Vec<f64>> = (0..self.mesh.num_triangles())
            .into_par_iter()
            .map(|t| {
                let eg = ElementGeometry::new(&self.mesh, t);
                let vals = u.element_values(t);
                let grad = u.gradient_with(&eg, &vals);
                let region = self.mesh.regions[t];
                let mut r = vec![0.0; nloc];
                for (b, w) in TRIANGLE {
                    let x = eg.map(&b);
                    let y1 = value_at(&vals, &b, m);
                    let (v, mm) = form.volume(region, x, &real_vec(&y1), &real_mat(&grad), load);
                    finite(&v, &mm, x)?;
                    let wa = w * eg.area;
                    for a in 0..3 {
                        for i in 0..m {
                            let mut s = v[i].value * b[a];
                            for k in 0..2 {
                                s += mm[i][k].value * eg.grads[a][k];
                            }
                            r[a * m + i] += wa * s;
                        }
                    }
                }
                Ok(r)
            })
            .collect::<Result<_>>()?;
        let mut res = vec![0.0; self.num_free()];
        for (t, r) in elems.iter().enumerate() {
            let tri = self.mesh.triangles[t];
            for l in 0..nloc {
                let f = self.free_index[tri[l / m] * m + l % m];
                if f != usize::MAX {
                    res[f] += r[l];
                }
            }
        }
        self.add_traction(form, load, &mut res, -1.0);
        Ok(res)
    }

    /// sign · ∫_e g·ψ over the form's traction edges, added into a free-dof vector.
    fn add_traction(&self, form: &dyn WeakForm, load: f64, res: &mut [f64], sign: f64) {
        let m = self.m;
        for [a, b] in form.traction_edges(&self.mesh) {
            let (pa, pb) = (self.mesh.vertices[a], self.mesh.vertices[b]);
            let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
            for (s, w) in EDGE {
                let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
                let g = form.traction(x, load);
                for (v, phi) in [(a, 1.0 - s), (b, s)] {
                    for i in 0..m {
                        let f = self.free_index[v * m + i];
                        if f != usize::MAX {
                            res[f] += sign * w * len * g[i] * phi;
                        }
                    }
                }
            }
        }
    }

    /// Jacobian of the residual (on free dofs) by forward-mode seeding.
    pub fn jacobian(&self, form: &dyn WeakForm, u: &FieldFunction, load: f64) -> Result<SparseMatrix> {
        self.check(u)?;
        let m = self.m;
        let nloc = 3 * m;
        let dirs = TangentDirection::all(m);
        let elems: Vec<Vec<f64>> = (0..self.mesh.num_triangles())
            .into_par_iter()
            .map(|t| {
                let eg = ElementGeometry::new(&self.mesh, t);
                let vals = u.element_values(t);
                let grad = u.gradient_with(&eg, &vals);
                let region = self.mesh.regions[t];
                let mut k_el = vec![0.0; nloc * nloc];
                for (b, w) in TRIANGLE {
                    let x = eg.map(&b);
                    let y1 = value_at(&vals, &b, m);
                    let wa = w * eg.area;
                    // derivative of (V, M) along each unit tangent
                    let mut dv = [[0.0; 2]; 6];
                    let mut dm = [[[0.0; 2]; 2]; 6];
                    for (q, dir) in dirs.iter().enumerate() {
                        let (t1, t2) = dir.tangent();
                        let sy1 = [Dual::new(y1[0], t1[0]), Dual::new(y1[1], t1[1])];
                        let sy2 = [
                            [Dual::new(grad[0][0], t2[0][0]), Dual::new(grad[0][1], t2[0][1])],
                            [Dual::new(grad[1][0], t2[1][0]), Dual::new(grad[1][1], t2[1][1])],
                        ];
                        let (v, mm) = form.volume(region, x, &sy1, &sy2, load);
                        finite(&v, &mm, x)?;
                        for i in 0..2 {
                            dv[q][i] = v[i].deriv;
                            for k in 0..2 {
                                dm[q][i][k] = mm[i][k].deriv;
                            }
                        }
                    }
                    // test function (a, i), trial (bb, j): D = φ_bb·D_value_j + Σ_l ∂_lφ_bb·D_grad_jl
                    for a in 0..3 {
                        for i in 0..m {
                            let row = a * m + i;
                            // T(q) = dv[q][i]·φ_a + Σ_k dm[q][i][k]·∂_kφ_a
                            let mut tq = [0.0; 6];
                            for (q, tv) in tq.iter_mut().enumerate().take(dirs.len()) {
                                *tv = dv[q][i] * b[a] + dm[q][i][0] * eg.grads[a][0] + dm[q][i][1] * eg.grads[a][1];
                            }
                            for bb in 0..3 {
                                for j in 0..m {
                                    // value direction j is index j; gradient (j, l) is m + 2j + l
                                    let s = b[bb] * tq[j] + eg.grads[bb][0] * tq[m + 2 * j] + eg.grads[bb][1] * tq[m + 2 * j + 1];
                                    k_el[row * nloc + bb * m + j] += wa * s;
                                }
                            }
                        }
                    }
                }
                Ok(k_el)
            })
            .collect::<Result<_>>()?;
        let mut values = vec![0.0; self.pattern.nnz()];
        for (t, k_el) in elems.iter().enumerate() {
            let sc = &self.scatter[t * nloc * nloc..(t + 1) * nloc * nloc];
            for (p, &pos) in sc.iter().enumerate() {
                if pos != NONE {
                    values[pos as usize] += k_el[p];
                }
            }
        }
        Ok(SparseMatrix { values })
    }

    /// Load vector ∫ (V·ψ + M:Dψ) for a state-independent integrand given per
    /// triangle, on free dofs. `f(t, x)` returns (V, M) at a quadrature point.
    pub fn load_vector<F>(&self, f: F) -> Vec<f64>
    where
        F: Fn(usize, Point) -> ([f64; 2], [[f64; 2]; 2]) + Sync,
    {
        let m = self.m;
        let nloc = 3 * m;
        let elems: Vec<Vec<f64>> = (0..self.mesh.num_triangles())
            .into_par_iter()
            .map(|t| {
                let eg = ElementGeometry::new(&self.mesh, t);
                let mut r = vec![0.0; nloc];
                for (b, w) in TRIANGLE {
                    let x = eg.map(&b);
                    let (v, mm) = f(t, x);
                    for a in 0..3 {
                        for i in 0..m {
                            r[a * m + i] += w * eg.area * (v[i] * b[a] + mm[i][0] * eg.grads[a][0] + mm[i][1] * eg.grads[a][1]);
                        }
                    }
                }
                r
            })
            .collect();
        let mut res = vec![0.0; self.num_free()];
        for (t, r) in elems.iter().enumerate() {
            let tri = self.mesh.triangles[t];
            for l in 0..nloc {
                let fi = self.free_index[tri[l / m] * m + l % m];
                if fi != usize::MAX {
                    res[fi] += r[l];
                }
            }
        }
        res
    }

    /// Numeric LU of a matrix assembled by this assembler.
    pub fn factor<'a>(&'a self, k: &'a SparseMatrix, stage: &str) -> Result<Factorization<'a>> {
        if self.num_free() == 0 {
            return Err(Error::LinearSolve { stage: stage.into(), reason: "no free dofs".into() });
        }
        Factorization::new(&self.pattern, &k.values, stage)
    }

    /// y = K x on free dofs.
    pub fn matvec(&self, k: &SparseMatrix, x: &[f64]) -> Vec<f64> {
        let (cp, ri) = (self.pattern.col_ptr(), self.pattern.row_idx());
        let mut y = vec![0.0; self.num_free()];
        for c in 0..self.num_free() {
            for p in cp[c]..cp[c + 1] {
                y[ri[p]] += k.values[p] * x[c];
            }
        }
        y
    }

    /// Non-constrained, non-outer-ball boundary edges (for boundary cost terms).
    pub fn cost_boundary_edges(&self) -> impl Iterator<Item = [usize; 2]> + '_ {
        self.mesh.boundary_edges.iter().filter(|e| e.marker != BoundaryMarker::OuterBall).map(|e| e.vertices)
    }
}

fn value_at(vals: &[[f64; 2]; 3], b: &[f64; 3], m: usize) -> [f64; 2] {
    let mut y = [0.0; 2];
    for i in 0..m {
        y[i] = b[0] * vals[0][i] + b[1] * vals[1][i] + b[2] * vals[2][i];
    }
    y
}

fn real_vec(v: &[f64; 2]) -> DVec {
    [Dual::constant(v[0]), Dual::constant(v[1])]
}

fn real_mat(a: &[[f64; 2]; 2]) -> DMat {
    [[Dual::constant(a[0][0]), Dual::constant(a[0][1])], [Dual::constant(a[1][0]), Dual::constant(a[1][1])]]
}

fn finite(v: &DVec, m: &DMat, x: Point) -> Result<()> {
    if v.iter().chain(m.iter().flatten()).all(|d| d.is_finite()) {
        Ok(())
    } else {
        Err(Error::EvaluationDomain { point: x, what: "non-finite coefficient in assembly".into() })
    }
}
