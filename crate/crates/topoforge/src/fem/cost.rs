//! Cost functional J(u) = ∫_D j(x,u,Du) + ∫_∂D j_bnd(x,u,Du), its gradient and
//! the adjoint state.

use rayon::prelude::*;

use super::assembly::Assembler;
use super::form::WeakForm;
use super::quadrature::{EDGE, TRIANGLE};
use super::space::FieldFunction;
use super::ElementGeometry;
use crate::autodiff::{Dual, TangentDirection};
use crate::error::{Error, Result};
use crate::problem::{Coefficient, ProblemSpec};
use crate::Point;

/// Quadrature points of boundary edge (a, b) within its adjacent triangle t:
/// (x, barycentric coordinates in t, weight·length).
fn edge_points(asm: &Assembler, t: usize, a: usize, b: usize) -> Vec<(Point, [f64; 3], f64)> {
    let tri = asm.mesh.triangles[t];
    let (pa, pb) = (asm.mesh.vertices[a], asm.mesh.vertices[b]);
    let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
    EDGE.iter()
        .map(|&(s, w)| {
            let mut bary = [0.0; 3];
            for (l, &v) in tri.iter().enumerate() {
                if v == a {
                    bary[l] = 1.0 - s;
                } else if v == b {
                    bary[l] = s;
                }
            }
            ([pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])], bary, w * len)
        })
        .collect()
}

/// (x, y1, y2) at a point with barycentric coordinates in triangle t.
fn state_at(u: &FieldFunction, eg: &ElementGeometry, vals: &[[f64; 2]; 3], b: &[f64; 3]) -> ([f64; 2], [[f64; 2]; 2]) {
    let mut y = [0.0; 2];
    for i in 0..u.m {
        y[i] = b[0] * vals[0][i] + b[1] * vals[1][i] + b[2] * vals[2][i];
    }
    (y, u.gradient_with(eg, vals))
}

fn eval(f: &Coefficient<Dual>, x: Point, y: [f64; 2], g: [[f64; 2]; 2], t1: [f64; 2], t2: [[f64; 2]; 2]) -> Result<Dual> {
    let y1 = [Dual::new(y[0], t1[0]), Dual::new(y[1], t1[1])];
    let y2 = [[Dual::new(g[0][0], t2[0][0]), Dual::new(g[0][1], t2[0][1])], [Dual::new(g[1][0], t2[1][0]), Dual::new(g[1][1], t2[1][1])]];
    let r = f(x, &y1, &y2);
    if r.is_finite() {
        Ok(r)
    } else {
        Err(Error::EvaluationDomain { point: x, what: "non-finite cost integrand".into() })
    }
}

/// Boundary edges that carry j_bnd, each with its adjacent triangle.
fn cost_edges(asm: &Assembler) -> Result<Vec<(usize, usize, usize)>> {
    asm.cost_boundary_edges()
        .map(|[a, b]| {
            asm.boundary_triangle(a, b)
                .map(|t| (a, b, t))
                .ok_or_else(|| Error::Mesh(format!("boundary edge ({a}, {b}) has no adjacent triangle")))
        })
        .collect()
}

/// J(u).
pub fn cost_value(spec: &ProblemSpec, asm: &Assembler, u: &FieldFunction) -> Result<f64> {
    let zero = ([0.0; 2], [[0.0; 2]; 2]);
    let per_tri: Vec<f64> = (0..asm.mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let eg = ElementGeometry::new(&asm.mesh, t);
            let vals = u.element_values(t);
            let j = &spec.side(asm.mesh.regions[t]).j;
            let mut s = 0.0;
            for (b, w) in TRIANGLE {
                let x = eg.map(&b);
                let (y, g) = state_at(u, &eg, &vals, &b);
                s += w * eg.area * eval(j, x, y, g, zero.0, zero.1)?.value;
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;
    let mut total: f64 = per_tri.iter().sum();
    for (a, b, t) in cost_edges(asm)? {
        let eg = ElementGeometry::new(&asm.mesh, t);
        let vals = u.element_values(t);
        for (x, bary, wl) in edge_points(asm, t, a, b) {
            let (y, g) = state_at(u, &eg, &vals, &bary);
            total += wl * eval(&spec.j_bnd, x, y, g, zero.0, zero.1)?.value;
        }
    }
    Ok(total)
}

/// Local gradient contribution: for each direction derivative dj, add
/// w·(dj_value_i φ_a + Σ_k dj_grad_ik ∂_kφ_a) into local slot (a, i).
fn accumulate(local: &mut [f64], m: usize, f: &Coefficient<Dual>, x: Point, y: [f64; 2], g: [[f64; 2]; 2], eg: &ElementGeometry, bary: &[f64; 3], w: f64) -> Result<()> {
    for dir in TangentDirection::all(m) {
        let (t1, t2) = dir.tangent();
        let d = eval(f, x, y, g, t1, t2)?.deriv;
        for a in 0..3 {
            match dir {
                TangentDirection::StateValue { i } => local[a * m + i] += w * d * bary[a],
                TangentDirection::StateGradient { i, k } => local[a * m + i] += w * d * eg.grads[a][k],
            }
        }
    }
    Ok(())
}

/// ∂J/∂u restricted to free dofs.
pub fn cost_gradient(spec: &ProblemSpec, asm: &Assembler, u: &FieldFunction) -> Result<Vec<f64>> {
    let m = asm.m;
    let per_tri: Vec<Vec<f64>> = (0..asm.mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let eg = ElementGeometry::new(&asm.mesh, t);
            let vals = u.element_values(t);
            let j = &spec.side(asm.mesh.regions[t]).j;
            let mut local = vec![0.0; 3 * m];
            for (b, w) in TRIANGLE {
                let x = eg.map(&b);
                let (y, g) = state_at(u, &eg, &vals, &b);
                accumulate(&mut local, m, j, x, y, g, &eg, &b, w * eg.area)?;
            }
            Ok(local)
        })
        .collect::<Result<_>>()?;
    let mut grad = vec![0.0; asm.num_free()];
    let mut scatter = |t: usize, local: &[f64]| {
        let tri = asm.mesh.triangles[t];
        for l in 0..3 * m {
            if let Some(f) = asm.free_index(tri[l / m] * m + l % m) {
                grad[f] += local[l];
            }
        }
    };
    for (t, local) in per_tri.iter().enumerate() {
        scatter(t, local);
    }
    for (a, b, t) in cost_edges(asm)? {
        let eg = ElementGeometry::new(&asm.mesh, t);
        let vals = u.element_values(t);
        let mut local = vec![0.0; 3 * m];
        for (x, bary, wl) in edge_points(asm, t, a, b) {
            let (y, g) = state_at(u, &eg, &vals, &bary);
            accumulate(&mut local, m, &spec.j_bnd, x, y, g, &eg, &bary, wl)?;
        }
        scatter(t, &local);
    }
    Ok(grad)
}

/// Adjoint p solving J_R(u)ᵀ p = −∂J/∂u at full load.
pub fn solve_adjoint(spec: &ProblemSpec, asm: &Assembler, form: &dyn WeakForm, u: &FieldFunction) -> Result<FieldFunction> {
    let rhs: Vec<f64> = cost_gradient(spec, asm, u)?.iter().map(|v| -v).collect();
    let mut p = asm.zeros();
    if asm.num_free() == 0 {
        return Ok(p);
    }
    let jac = asm.jacobian(form, u, 1.0)?;
    let x = asm.factor(&jac, "adjoint")?.solve(&rhs, true)?;
    p.values = asm.extend(&x);
    Ok(p)
}
