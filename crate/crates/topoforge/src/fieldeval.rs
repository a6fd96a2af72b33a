//! Full-domain topological-derivative maps for problems whose A2 is affine in
//! Du and independent of u: the corrector is a fixed linear combination of
//! m·d + 1 precomputed basis correctors, so no PDE is solved per point.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use crate::autodiff::{const_vec, full_jacobian, EvalPoint, RMat, TangentDirection};
use crate::corrector::CorrectorBundle;
use crate::error::{Error, Result, StageExt};
use crate::fem::{solver_calls, Assembler, NewtonReport, WeakForm};
use crate::mesh::vtk::{write_vtk, VtkData};
use crate::mesh::{BallMesh, Mesh, Region};
use crate::problem::ProblemSpec;
use crate::tdcore::{assemble_report, StateSolution};
use crate::{Point, DIM};

/// Reference state samples for the linearity probe.
const PROBES: usize = 12;
const LINEARITY_TOL: f64 = 1e-10;

/// Basis correctors on one ball mesh.
#[derive(Clone, Debug)]
pub struct CorrectorBasis {
    pub shape: String,
    pub ball: Arc<BallMesh>,
    pub k_hat: crate::fem::FieldFunction,
    /// K̃ for the unit matrices e_ij, index i·d + j.
    pub k_tilde: Vec<crate::fem::FieldFunction>,
    /// a2_in(e_ij), a2_out(e_ij), same indexing.
    pub a2_in: Vec<RMat>,
    pub a2_out: Vec<RMat>,
    /// ΔF2 − ΔA2(·, 0): right-hand side data of K̂.
    pub hat_source: RMat,
    pub m: usize,
}

impl CorrectorBasis {
    pub fn len(&self) -> usize {
        self.k_tilde.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Seeded uniform samples in [−1, 1] for the linearity probes.
fn probe_values(n: usize) -> Vec<f64> {
    let mut rng = StdRng::seed_from_u64(0x7D_2024);
    (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

fn a2_value(spec: &ProblemSpec, region: Region, x: Point, y1: [f64; 2], y2: &RMat) -> RMat {
    let a = (spec.side(region).a2)(x, &const_vec(&y1), &crate::autodiff::const_mat(y2));
    [[a[0][0].value, a[0][1].value], [a[1][0].value, a[1][1].value]]
}

/// Check that A2 on both sides is affine in y2 with a constant slope and
/// independent of y1 (and of x over D), by AD Jacobians at probe states.
pub fn check_linearity(spec: &ProblemSpec, z: Point) -> Result<()> {
    let r = probe_values(PROBES * 7);
    let scale = spec.geometry.scale();
    for region in [Region::Inside, Region::Outside] {
        let f = |x: Point, a: &crate::autodiff::DVec, b: &crate::autodiff::DMat| (spec.side(region).a2)(x, a, b);
        let reference = full_jacobian(f, &EvalPoint::new(z, [0.0; 2], [[0.0; 2]; 2]), spec.m)?;
        for k in 0..PROBES {
            let v = &r[7 * k..7 * k + 7];
            let x = [z[0] + 0.25 * scale * v[0], z[1] + 0.25 * scale * v[1]];
            let x = if spec.geometry.contains(x) { x } else { z };
            let at = EvalPoint::new(x, [v[2], if spec.m > 1 { v[3] } else { 0.0 }], [[v[4], v[5]], [v[6] * v[4], v[5] - v[6]]]);
            let mut at = at;
            if spec.m == 1 {
                at.y2[1] = [0.0; 2];
            }
            let jac = full_jacobian(f, &at, spec.m)?;
            for ((dir, col), (_, col0)) in jac.columns.iter().zip(&reference.columns) {
                let bad = match dir {
                    TangentDirection::StateValue { .. } => col.iter().flatten().any(|c| c.abs() > LINEARITY_TOL),
                    TangentDirection::StateGradient { .. } => col.iter().flatten().zip(col0.iter().flatten()).any(|(a, b)| (a - b).abs() > LINEARITY_TOL * (1.0 + b.abs())),
                };
                if bad {
                    return Err(Error::NotLinear(format!("∂A2/∂{dir:?} on the {region:?} side is not constant (at {at:?})")));
                }
            }
        }
    }
    Ok(())
}

/// ∫ a2^ω(DK):Dψ − s·∫_ω S:Dψ with a2 the (constant) y2-slope of A2.
struct BasisForm<'a> {
    spec: &'a ProblemSpec,
    z: Point,
    base: [RMat; 2],
    source: RMat,
}

impl WeakForm for BasisForm<'_> {
    fn m(&self) -> usize {
        self.spec.m
    }

    fn volume(&self, region: Region, _x: Point, _y1: &crate::autodiff::DVec, y2: &crate::autodiff::DMat, load: f64) -> (crate::autodiff::DVec, crate::autodiff::DMat) {
        let a = (self.spec.side(region).a2)(self.z, &const_vec(&[0.0; 2]), y2);
        let base = &self.base[(region == Region::Outside) as usize];
        let mut r = a;
        for i in 0..2 {
            for k in 0..2 {
                r[i][k] -= crate::autodiff::Dual::constant(base[i][k]);
                if region == Region::Inside {
                    r[i][k] -= crate::autodiff::Dual::constant(load * self.source[i][k]);
                }
            }
        }
        ([crate::autodiff::Dual::ZERO; 2], r)
    }
}

fn unit(i: usize, j: usize) -> RMat {
    let mut e = [[0.0; 2]; 2];
    e[i][j] = 1.0;
    e
}

/// Solve the m·d + 1 basis correctors with coefficients frozen at z.
pub fn precompute_basis(spec: &ProblemSpec, z: Point, ball: Arc<BallMesh>, shape: &str) -> Result<CorrectorBasis> {
    check_linearity(spec, z)?;
    let m = spec.m;
    let zero = [[0.0; 2]; 2];
    let base = [a2_value(spec, Region::Inside, z, [0.0; 2], &zero), a2_value(spec, Region::Outside, z, [0.0; 2], &zero)];
    let slope = |region: Region, e: &RMat| {
        let a = a2_value(spec, region, z, [0.0; 2], e);
        let b = base[(region == Region::Outside) as usize];
        [[a[0][0] - b[0][0], a[0][1] - b[0][1]], [a[1][0] - b[1][0], a[1][1] - b[1][1]]]
    };
    let units: Vec<RMat> = (0..m).flat_map(|i| (0..DIM).map(move |j| unit(i, j))).collect();
    let a2_in: Vec<RMat> = units.iter().map(|e| slope(Region::Inside, e)).collect();
    let a2_out: Vec<RMat> = units.iter().map(|e| slope(Region::Outside, e)).collect();
    let (f_in, f_out) = ((spec.inside.f2)(z), (spec.outside.f2)(z));
    let mut hat_source = [[0.0; 2]; 2];
    for i in 0..2 {
        for k in 0..2 {
            hat_source[i][k] = (f_in[i][k] - f_out[i][k]) - (base[0][i][k] - base[1][i][k]);
        }
    }

    let asm = Assembler::new(ball.mesh.clone(), m);
    let form = |source: RMat| BasisForm { spec, z, base, source };
    let jac = asm.jacobian(&form(zero), &asm.zeros(), 1.0).stage("basis")?;
    let lu = asm.factor(&jac, "basis")?;
    let solve = |source: RMat| -> Result<crate::fem::FieldFunction> {
        let rhs: Vec<f64> = asm.residual(&form(source), &asm.zeros(), 1.0)?.iter().map(|v| -v).collect();
        let x = lu.solve(&rhs, false)?;
        asm.zeros().with_values(asm.extend(&x))
    };
    let k_hat = solve(hat_source).stage("basis K̂")?;
    let mut k_tilde = Vec::with_capacity(units.len());
    for (ai, ao) in a2_in.iter().zip(&a2_out) {
        let d = [[ao[0][0] - ai[0][0], ao[0][1] - ai[0][1]], [ao[1][0] - ai[1][0], ao[1][1] - ai[1][1]]];
        k_tilde.push(solve(d).stage("basis K̃")?);
    }
    Ok(CorrectorBasis { shape: shape.to_string(), ball, k_hat, k_tilde, a2_in, a2_out, hat_source, m })
}

/// K = K̂ + Σ_ij Du0z[i][j]·K̃_ij.
pub fn superpose(basis: &CorrectorBasis, du0z: &RMat) -> Result<crate::fem::FieldFunction> {
    if du0z.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite gradient {du0z:?}")));
    }
    if (basis.m..2).any(|i| du0z[i] != [0.0; 2]) {
        return Err(Error::InvalidInput(format!("gradient {du0z:?} has more than m = {} rows", basis.m)));
    }
    let mut values = basis.k_hat.values.clone();
    for i in 0..basis.m {
        for j in 0..DIM {
            let c = du0z[i][j];
            if c != 0.0 {
                for (v, k) in values.iter_mut().zip(&basis.k_tilde[i * DIM + j].values) {
                    *v += c * k;
                }
            }
        }
    }
    basis.k_hat.with_values(values)
}

/// TD per triangle of a design mesh.
#[derive(Clone, Debug)]
pub struct TDFieldMap {
    pub mesh: Arc<Mesh>,
    pub centroids: Vec<Point>,
    pub values: Vec<f64>,
    /// Cells where the basis does not apply (centroid inside Ω, or the
    /// frozen K̂ data differ from the basis); their value is 0.
    pub flagged: Vec<bool>,
    /// Linear solves performed while evaluating the map.
    pub solves: usize,
}

impl TDFieldMap {
    /// `x,y,value,flagged` per cell.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,value,flagged\n");
        for ((c, v), f) in self.centroids.iter().zip(&self.values).zip(&self.flagged) {
            let _ = writeln!(s, "{},{},{},{}", c[0], c[1], v, f);
        }
        s
    }

    /// Cell-data VTK with the field, the flag mask and optionally a reference
    /// field and the difference to it.
    pub fn write_vtk(&self, path: &Path, reference: Option<&[f64]>) -> Result<()> {
        let flags: Vec<f64> = self.flagged.iter().map(|&f| f as u8 as f64).collect();
        let diff: Vec<f64>;
        let mut cells: Vec<(&str, VtkData)> = vec![("td", VtkData::Scalars(&self.values)), ("flagged", VtkData::Scalars(&flags))];
        if let Some(r) = reference {
            if r.len() != self.values.len() {
                return Err(Error::InvalidInput("reference field has the wrong length".into()));
            }
            diff = self.values.iter().zip(r).map(|(a, b)| a - b).collect();
            cells.push(("reference", VtkData::Scalars(r)));
            cells.push(("difference", VtkData::Scalars(&diff)));
        }
        write_vtk(path, &self.mesh, "topological derivative", &[], &cells)
    }
}

/// Evaluate the TD at every centroid of the state mesh using superposed
/// correctors. Performs no linear solves.
pub fn td_field(spec: &ProblemSpec, basis: &CorrectorBasis, state: &StateSolution) -> Result<TDFieldMap> {
    let before = solver_calls();
    let mesh = state.mesh().clone();
    let centroids: Vec<Point> = (0..mesh.num_triangles()).map(|t| mesh.centroid(t)).collect();
    let results: Vec<(f64, bool)> = centroids
        .par_iter()
        .map(|&z| {
            if spec.in_omega(z) || !source_matches(spec, basis, z) {
                return Ok((0.0, true));
            }
            let pd = state.point_data(z)?;
            let k = superpose(basis, &pd.frozen.du0z)?;
            let bundle = CorrectorBundle {
                frozen: pd.frozen,
                k,
                ball: basis.ball.clone(),
                radius: basis.ball.radius(),
                residual_norm: 0.0,
                newton: NewtonReport { history: vec![], iterations: 0, final_residual: 0.0, tolerance: 0.0 },
            };
            Ok((assemble_report(spec, &bundle, &pd, &basis.shape, &mesh)?.total, false))
        })
        .collect::<Result<_>>()
        .stage("td field")?;
    let solves = solver_calls() - before;
    Ok(TDFieldMap { mesh, centroids, values: results.iter().map(|r| r.0).collect(), flagged: results.iter().map(|r| r.1).collect(), solves })
}

/// The K̂ data and slopes at z equal those the basis was built with.
fn source_matches(spec: &ProblemSpec, basis: &CorrectorBasis, z: Point) -> bool {
    let zero = [[0.0; 2]; 2];
    let (ai, ao) = (a2_value(spec, Region::Inside, z, [0.0; 2], &zero), a2_value(spec, Region::Outside, z, [0.0; 2], &zero));
    let (fi, fo) = ((spec.inside.f2)(z), (spec.outside.f2)(z));
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + b.abs());
    (0..2).all(|i| (0..2).all(|k| close((fi[i][k] - fo[i][k]) - (ai[i][k] - ao[i][k]), basis.hat_source[i][k])))
}

/// Example-1 disk closed form at every centroid of `map` from the same discrete
/// state (0 on flagged cells); the reference of the difference map.
pub fn closed_form_field(spec: &ProblemSpec, state: &StateSolution, map: &TDFieldMap) -> Result<Vec<f64>> {
    map.centroids
        .par_iter()
        .zip(&map.flagged)
        .map(|(&z, &flag)| {
            if flag {
                return Ok(0.0);
            }
            let pd = state.point_data(z)?;
            let inputs = crate::problem::ClosedFormInputs { u: pd.frozen.u0z[0], grad_u: pd.frozen.du0z[0], p: pd.p0z[0], grad_p: pd.dp0z[0] };
            Ok(crate::problem::example1_closed_form(spec, inputs)?.total())
        })
        .collect()
}
