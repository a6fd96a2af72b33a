//! P1 finite elements for scalar and vector fields: quadrature, residual and
//! Jacobian assembly, sparse direct solves, damped Newton with load stepping,
//! adjoints and point evaluation.

mod assembly;
mod cost;
mod form;
mod linear;
mod newton;
pub mod quadrature;
mod space;

pub use assembly::{Assembler, SparseMatrix};
pub use cost::{cost_gradient, cost_value, solve_adjoint};
pub use form::{StateForm, WeakForm};
pub use linear::{solve_linear, solver_calls, Factorization, LINEAR_RTOL};
pub use newton::{solve_newton, NewtonOptions, NewtonReport, NewtonStep};
pub use space::{evaluate_at, FieldFunction};

use crate::mesh::{geom, Mesh};
use crate::Point;

/// Gradients of the three barycentric basis functions and the area of a triangle.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry {
    pub points: [Point; 3],
    pub grads: [[f64; 2]; 3],
    pub area: f64,
}

impl ElementGeometry {
    pub fn new(mesh: &Mesh, t: usize) -> Self {
        let p = mesh.triangle_points(t);
        let a2 = geom::orient(p[0], p[1], p[2]);
        let g = |i: usize, j: usize| [(p[i][1] - p[j][1]) / a2, (p[j][0] - p[i][0]) / a2];
        ElementGeometry { points: p, grads: [g(1, 2), g(2, 0), g(0, 1)], area: 0.5 * a2 }
    }

    #[inline]
    pub fn map(&self, bary: &[f64; 3]) -> Point {
        let p = &self.points;
        [
            bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0],
            bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1],
        ]
    }
}
