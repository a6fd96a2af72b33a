//! The three terms R1, R2, ∂ℓL of the topological derivative and their sum.
//!
//! All coefficients are frozen at (z, u0(z), Du0(z)); since K is P1, DK is
//! constant per triangle and the ball integrals are exact sums of area·integrand.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::autodiff::{const_vec, DMat, DVec, Dual, RMat, RVec};
use crate::corrector::{solve_corrector, CorrectorBundle, FrozenPointData};
use crate::error::{Error, Result, StageExt};
use crate::fem::{cost_value, evaluate_at, solve_adjoint, solve_newton, Assembler, FieldFunction, NewtonOptions, NewtonReport, StateForm};
use crate::mesh::{triangulate_ball_with, triangulate_domain_with, BallMesh, BallOptions, DomainMeshOptions, InclusionShape, Mesh, Region};
use crate::problem::{ProblemSpec, SideCoefficients};
use crate::Point;

/// Converged state u0 and adjoint p0 on one mesh of D.
pub struct StateSolution {
    pub asm: Assembler,
    pub u: FieldFunction,
    pub p: FieldFunction,
    pub cost: f64,
    pub newton: NewtonReport,
}

impl StateSolution {
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.asm.mesh
    }

    /// u0, Du0, p0, Dp0 at z.
    pub fn point_data(&self, z: Point) -> Result<PointData> {
        let (u0z, du0z) = evaluate_at(&self.u, z)?;
        let (p0z, dp0z) = evaluate_at(&self.p, z)?;
        Ok(PointData { frozen: FrozenPointData::new(z, u0z, du0z)?, p0z, dp0z })
    }
}

/// Solve the state equation (load stepping per `opts`) and the adjoint.
pub fn solve_state(spec: &ProblemSpec, mesh: Arc<Mesh>, opts: &NewtonOptions) -> Result<StateSolution> {
    let asm = Assembler::new(mesh, spec.m);
    let form = StateForm::new(spec);
    let (u, newton) = solve_newton(&asm, &form, &asm.zeros(), opts).stage("state")?;
    let p = solve_adjoint(spec, &asm, &form, &u).stage("adjoint")?;
    let cost = cost_value(spec, &asm, &u).stage("cost")?;
    Ok(StateSolution { asm, u, p, cost, newton })
}

/// State and adjoint data at the evaluation point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PointData {
    pub frozen: FrozenPointData,
    pub p0z: RVec,
    pub dp0z: RMat,
}

/// Contributions of one term by origin: the A1 part (tested with p0(z)), the
/// A2 part (tested with Dp0(z)), the load part (∂ℓL only) and the cost part.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct TermParts {
    pub a1: f64,
    pub a2: f64,
    pub load: f64,
    pub cost: f64,
}

impl TermParts {
    pub fn total(&self) -> f64 {
        self.a1 + self.a2 + self.load + self.cost
    }

    fn add(&mut self, o: &TermParts) {
        self.a1 += o.a1;
        self.a2 += o.a2;
        self.load += o.load;
        self.cost += o.cost;
    }

    fn scaled(mut self, s: f64) -> Self {
        self.a1 *= s;
        self.a2 *= s;
        self.load *= s;
        self.cost *= s;
        self
    }
}

fn dot(a: &RVec, b: &RVec) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn ddot(a: &RMat, b: &RMat) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

fn vreal(v: &DVec, deriv: bool) -> RVec {
    if deriv {
        [v[0].deriv, v[1].deriv]
    } else {
        [v[0].value, v[1].value]
    }
}

fn mreal(a: &DMat, deriv: bool) -> RMat {
    let f = |d: Dual| if deriv { d.deriv } else { d.value };
    [[f(a[0][0]), f(a[0][1])], [f(a[1][0]), f(a[1][1])]]
}

fn plus(a: &RMat, b: &RMat) -> RMat {
    [[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]]
}

fn seeded(g: &RMat, t: &RMat) -> DMat {
    [[Dual::new(g[0][0], t[0][0]), Dual::new(g[0][1], t[0][1])], [Dual::new(g[1][0], t[1][0]), Dual::new(g[1][1], t[1][1])]]
}

/// Value of (A1, A2, j) at y2 and their y2-derivatives along dk at y2.
struct Probe {
    a1: RVec,
    a2: RMat,
    j: f64,
    da1: RVec,
    da2: RMat,
    dj: f64,
}

fn probe(side: &SideCoefficients, pd: &PointData, y2: &RMat, dk: &RMat) -> Result<Probe> {
    let (z, u) = (pd.frozen.z, const_vec(&pd.frozen.u0z));
    let g = seeded(y2, dk);
    let (a1, a2, j) = ((side.a1)(z, &u, &g), (side.a2)(z, &u, &g), (side.j)(z, &u, &g));
    let p = Probe { a1: vreal(&a1, false), a2: mreal(&a2, false), j: j.value, da1: vreal(&a1, true), da2: mreal(&a2, true), dj: j.deriv };
    let all = p.a1.iter().chain(p.da1.iter()).chain(p.a2.iter().flatten()).chain(p.da2.iter().flatten()).chain([&p.j, &p.dj]);
    if all.into_iter().all(|v| v.is_finite()) {
        Ok(p)
    } else {
        Err(Error::EvaluationDomain { point: z, what: "non-finite coefficient at frozen data".into() })
    }
}

fn contract(pd: &PointData, a1: &RVec, a2: &RMat, j: f64) -> TermParts {
    TermParts { a1: dot(a1, &pd.p0z), a2: ddot(a2, &pd.dp0z), load: 0.0, cost: j }
}

/// Per-triangle contributions summed in triangle order, divided by |ω|.
fn ball_sum(bundle: &CorrectorBundle, only: Option<Region>, f: impl Fn(Region, &RMat) -> Result<TermParts> + Sync) -> Result<TermParts> {
    let mesh = &bundle.k.mesh;
    let per: Vec<TermParts> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let region = mesh.regions[t];
            if only.is_some_and(|r| r != region) {
                return Ok(TermParts::default());
            }
            let dk = bundle.k.element_gradient(t);
            Ok(f(region, &dk)?.scaled(mesh.area(t)))
        })
        .collect::<Result<_>>()?;
    let mut s = TermParts::default();
    for p in &per {
        s.add(p);
    }
    Ok(s.scaled(1.0 / bundle.ball.shape.area()))
}

/// R1: Taylor remainders of A1, A2 and j in y2 along DK, integrated over B_R.
pub fn term_r1(spec: &ProblemSpec, bundle: &CorrectorBundle, pd: &PointData) -> Result<TermParts> {
    let g = pd.frozen.du0z;
    let zero = [[0.0; 2]; 2];
    ball_sum(bundle, None, |region, dk| {
        let side = spec.side(region);
        let at = probe(side, pd, &g, dk)?;
        let shifted = probe(side, pd, &plus(&g, dk), &zero)?;
        let a1 = [shifted.a1[0] - at.a1[0] - at.da1[0], shifted.a1[1] - at.a1[1] - at.da1[1]];
        let a2 = [
            [shifted.a2[0][0] - at.a2[0][0] - at.da2[0][0], shifted.a2[0][1] - at.a2[0][1] - at.da2[0][1]],
            [shifted.a2[1][0] - at.a2[1][0] - at.da2[1][0], shifted.a2[1][1] - at.a2[1][1] - at.da2[1][1]],
        ];
        Ok(contract(pd, &a1, &a2, shifted.j - at.j - at.dj))
    })
}

/// R2: jump of the y2-derivatives along DK, integrated over ω.
pub fn term_r2(spec: &ProblemSpec, bundle: &CorrectorBundle, pd: &PointData) -> Result<TermParts> {
    let g = pd.frozen.du0z;
    ball_sum(bundle, Some(Region::Inside), |_, dk| {
        let i = probe(&spec.inside, pd, &g, dk)?;
        let o = probe(&spec.outside, pd, &g, dk)?;
        let a1 = [i.da1[0] - o.da1[0], i.da1[1] - o.da1[1]];
        let a2 = [[i.da2[0][0] - o.da2[0][0], i.da2[0][1] - o.da2[0][1]], [i.da2[1][0] - o.da2[1][0], i.da2[1][1] - o.da2[1][1]]];
        Ok(contract(pd, &a1, &a2, i.dj - o.dj))
    })
}

/// ∂ℓL: pointwise jumps of A1, A2, F1, F2 and j at z.
pub fn term_dl(spec: &ProblemSpec, pd: &PointData) -> Result<TermParts> {
    let (z, g) = (pd.frozen.z, pd.frozen.du0z);
    let zero = [[0.0; 2]; 2];
    let i = probe(&spec.inside, pd, &g, &zero)?;
    let o = probe(&spec.outside, pd, &g, &zero)?;
    let (f1i, f1o, f2i, f2o) = ((spec.inside.f1)(z), (spec.outside.f1)(z), (spec.inside.f2)(z), (spec.outside.f2)(z));
    let df1 = [f1i[0] - f1o[0], f1i[1] - f1o[1]];
    let df2 = [[f2i[0][0] - f2o[0][0], f2i[0][1] - f2o[0][1]], [f2i[1][0] - f2o[1][0], f2i[1][1] - f2o[1][1]]];
    let a1 = [i.a1[0] - o.a1[0], i.a1[1] - o.a1[1]];
    let a2 = [[i.a2[0][0] - o.a2[0][0], i.a2[0][1] - o.a2[0][1]], [i.a2[1][0] - o.a2[1][0], i.a2[1][1] - o.a2[1][1]]];
    let mut parts = contract(pd, &a1, &a2, i.j - o.j);
    parts.load = -dot(&df1, &pd.p0z) - ddot(&df2, &pd.dp0z);
    Ok(parts)
}

/// Result of one topological-derivative evaluation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TDReport {
    pub z: Point,
    pub shape: String,
    pub r1: f64,
    pub r2: f64,
    pub dl: f64,
    pub total: f64,
    pub parts_r1: TermParts,
    pub parts_r2: TermParts,
    pub parts_dl: TermParts,
    pub point: PointData,
    pub radius: f64,
    /// Characteristic element sizes of the state mesh (outside Ω) and along ∂ω.
    pub h_state: f64,
    pub h_ball: f64,
    pub state_mesh: String,
    pub ball_mesh: String,
}

impl TDReport {
    pub const CSV_HEADER: &'static str = "z_x,z_y,shape,R1,R2,dL,total,R,h_state,h_ball";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.z[0], self.z[1], self.shape, self.r1, self.r2, self.dl, self.total, self.radius, self.h_state, self.h_ball
        )
    }
}

/// Combine the three terms for a solved corrector.
pub fn assemble_report(spec: &ProblemSpec, bundle: &CorrectorBundle, pd: &PointData, shape: &str, state_mesh: &Mesh) -> Result<TDReport> {
    let parts_r1 = term_r1(spec, bundle, pd)?;
    let parts_r2 = term_r2(spec, bundle, pd)?;
    let parts_dl = term_dl(spec, pd)?;
    let (r1, r2, dl) = (parts_r1.total(), parts_r2.total(), parts_dl.total());
    Ok(TDReport {
        z: pd.frozen.z,
        shape: shape.to_string(),
        r1,
        r2,
        dl,
        total: r1 + r2 + dl,
        parts_r1,
        parts_r2,
        parts_dl,
        point: *pd,
        radius: bundle.radius,
        h_state: state_mesh.characteristic_size.outside,
        h_ball: bundle.ball.options.h_inclusion,
        state_mesh: state_mesh.content_hash(),
        ball_mesh: bundle.k.mesh.content_hash(),
    })
}

/// Everything `topological_derivative` needs besides the spec.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TdOptions {
    pub domain_mesh: DomainMeshOptions,
    pub ball: BallOptions,
    pub state_newton: NewtonOptions,
    pub corrector_newton: NewtonOptions,
}

impl TdOptions {
    /// Solver settings from the example defaults; meshes as given.
    pub fn for_spec(spec: &ProblemSpec, domain_mesh: DomainMeshOptions, ball: BallOptions) -> Self {
        TdOptions {
            domain_mesh,
            ball,
            state_newton: NewtonOptions::default().with_load_steps(spec.defaults.load_steps),
            corrector_newton: NewtonOptions::default().with_damping(spec.defaults.corrector_damping),
        }
    }
}

/// TD at z for one shape from an already solved state.
pub fn td_at(spec: &ProblemSpec, state: &StateSolution, z: Point, ball: Arc<BallMesh>, shape: &str, opts: &NewtonOptions) -> Result<TDReport> {
    if spec.in_omega(z) {
        return Err(Error::InvalidInput(format!("z = {z:?} lies in Ω")));
    }
    let pd = state.point_data(z).stage("evaluate")?;
    let bundle = solve_corrector(spec, pd.frozen, ball, opts).stage("corrector")?;
    assemble_report(spec, &bundle, &pd, shape, state.mesh()).stage("terms")
}

/// Full pipeline: mesh D, solve state and adjoint, mesh B_R, solve the
/// corrector, evaluate the three terms.
pub fn topological_derivative(spec: &ProblemSpec, z: Point, shape: &InclusionShape, shape_name: &str, opts: &TdOptions) -> Result<TDReport> {
    if spec.in_omega(z) || !spec.geometry.contains(z) {
        return Err(Error::InvalidInput(format!("z = {z:?} must lie in D outside Ω")));
    }
    let mesh = Arc::new(triangulate_domain_with(&spec.geometry, &opts.domain_mesh).stage("mesh")?);
    let state = solve_state(spec, mesh, &opts.state_newton)?;
    let ball = Arc::new(triangulate_ball_with(shape, &opts.ball).stage("ball mesh")?);
    td_at(spec, &state, z, ball, shape_name, &opts.corrector_newton)
}
