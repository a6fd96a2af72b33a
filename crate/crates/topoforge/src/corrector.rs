//! Corrector K on the truncated ball B_R: coefficients frozen at (z, u0(z), Du0(z)),
//! zero trace on ∂B_R.
//!
//! The weak form is built from A2 and F2 only; A1 (reaction, convection)
//! never enters.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::autodiff::{const_mat, const_vec, DMat, DVec, Dual, RMat, RVec};
use crate::error::{Error, Result};
use crate::fem::{solve_newton, Assembler, FieldFunction, NewtonOptions, NewtonReport, WeakForm};
use crate::mesh::{BallMesh, Region};
use crate::problem::ProblemSpec;
use crate::Point;

/// State (and its gradient) frozen at the evaluation point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrozenPointData {
    pub z: Point,
    pub u0z: RVec,
    pub du0z: RMat,
}

impl FrozenPointData {
    pub fn new(z: Point, u0z: RVec, du0z: RMat) -> Result<Self> {
        let f = FrozenPointData { z, u0z, du0z };
        if z.iter().chain(&u0z).chain(du0z.iter().flatten()).all(|v| v.is_finite()) {
            Ok(f)
        } else {
            Err(Error::InvalidInput(format!("non-finite frozen point data {f:?}")))
        }
    }
}

/// Residual  A2^ω(z, u0z, Du0z + DK) − A2^ω(z, u0z, Du0z) − χ_ω·s·(ΔF2(z) − ΔA2(z, u0z, Du0z)).
struct CorrectorForm<'a> {
    spec: &'a ProblemSpec,
    frozen: FrozenPointData,
    /// A2_in, A2_out at the frozen data.
    base: [DMat; 2],
    /// ΔF2(z) − ΔA2(z, u0z, Du0z).
    source: RMat,
}

impl<'a> CorrectorForm<'a> {
    fn new(spec: &'a ProblemSpec, frozen: FrozenPointData) -> Result<Self> {
        let (z, y1, y2) = (frozen.z, const_vec(&frozen.u0z), const_mat(&frozen.du0z));
        let a_in = (spec.inside.a2)(z, &y1, &y2);
        let a_out = (spec.outside.a2)(z, &y1, &y2);
        let (f_in, f_out) = ((spec.inside.f2)(z), (spec.outside.f2)(z));
        let mut source = [[0.0; 2]; 2];
        for i in 0..2 {
            for k in 0..2 {
                source[i][k] = (f_in[i][k] - f_out[i][k]) - (a_in[i][k].value - a_out[i][k].value);
            }
        }
        if !source.iter().flatten().all(|v| v.is_finite()) {
            return Err(Error::EvaluationDomain { point: z, what: "corrector data at frozen point".into() });
        }
        Ok(CorrectorForm { spec, frozen, base: [a_in, a_out], source })
    }
}

impl WeakForm for CorrectorForm<'_> {
    fn m(&self) -> usize {
        self.spec.m
    }

    fn volume(&self, region: Region, _x: Point, _y1: &DVec, y2: &DMat, load: f64) -> (DVec, DMat) {
        let z = self.frozen.z;
        let u = const_vec(&self.frozen.u0z);
        let mut g = *y2;
        for i in 0..2 {
            for k in 0..2 {
                g[i][k] += Dual::constant(self.frozen.du0z[i][k]);
            }
        }
        let (a, base) = match region {
            Region::Inside => ((self.spec.inside.a2)(z, &u, &g), &self.base[0]),
            Region::Outside => ((self.spec.outside.a2)(z, &u, &g), &self.base[1]),
        };
        let mut r = [[Dual::ZERO; 2]; 2];
        for i in 0..2 {
            for k in 0..2 {
                r[i][k] = a[i][k] - base[i][k];
                if region == Region::Inside {
                    r[i][k] -= Dual::constant(load * self.source[i][k]);
                }
            }
        }
        ([Dual::ZERO; 2], r)
    }
}

/// Frozen data, K on the ball mesh and solve diagnostics.
#[derive(Clone, Debug)]
pub struct CorrectorBundle {
    pub frozen: FrozenPointData,
    pub k: FieldFunction,
    pub ball: Arc<BallMesh>,
    pub radius: f64,
    pub residual_norm: f64,
    pub newton: NewtonReport,
}

/// Solve for K starting from zero.
pub fn solve_corrector(spec: &ProblemSpec, frozen: FrozenPointData, ball: Arc<BallMesh>, opts: &NewtonOptions) -> Result<CorrectorBundle> {
    let asm = Assembler::new(ball.mesh.clone(), spec.m);
    solve_corrector_with(spec, frozen, ball, &asm, opts)
}

/// As [`solve_corrector`], reusing an assembler built on `ball.mesh`.
pub fn solve_corrector_with(spec: &ProblemSpec, frozen: FrozenPointData, ball: Arc<BallMesh>, asm: &Assembler, opts: &NewtonOptions) -> Result<CorrectorBundle> {
    let frozen = FrozenPointData::new(frozen.z, frozen.u0z, frozen.du0z)?;
    if !Arc::ptr_eq(&asm.mesh, &ball.mesh) || asm.m != spec.m {
        return Err(Error::InvalidInput("assembler does not belong to this ball mesh".into()));
    }
    let form = CorrectorForm::new(spec, frozen)?;
    let (k, newton) = solve_newton(asm, &form, &asm.zeros(), opts)?;
    Ok(CorrectorBundle { frozen, radius: ball.radius(), residual_norm: newton.final_residual, k, ball, newton })
}

impl CorrectorBundle {
    /// Area-weighted mean of DK over one region of the ball mesh.
    pub fn mean_gradient(&self, region: Region) -> RMat {
        let mesh = &self.k.mesh;
        let mut g = [[0.0; 2]; 2];
        let mut area = 0.0;
        for t in (0..mesh.num_triangles()).filter(|&t| mesh.regions[t] == region) {
            let a = mesh.area(t);
            let gt = self.k.element_gradient(t);
            for i in 0..2 {
                for k in 0..2 {
                    g[i][k] += a * gt[i][k];
                }
            }
            area += a;
        }
        if area > 0.0 {
            g.iter_mut().flatten().for_each(|v| *v /= area);
        }
        g
    }

    /// Legacy VTK of K plus a JSON sidecar (`<stem>.vtk`, `<stem>.json`).
    pub fn export(&self, dir: &Path, stem: &str) -> Result<()> {
        self.k.write_vtk(&dir.join(format!("{stem}.vtk")), "K")?;
        let side = Sidecar {
            frozen: self.frozen,
            radius: self.radius,
            residual_norm: self.residual_norm,
            newton_iterations: self.newton.iterations,
            shape: self.ball.shape.clone(),
            vertices: self.k.mesh.num_vertices(),
            mesh_hash: self.k.mesh.content_hash(),
            decay_profile: decay_profile(self),
        };
        let path = dir.join(format!("{stem}.json"));
        let text = serde_json::to_string_pretty(&side).map_err(|e| Error::Format { path: path.clone(), message: e.to_string() })?;
        std::fs::write(&path, text).map_err(|source| Error::Io { path, source })
    }
}

#[derive(Serialize)]
struct Sidecar {
    frozen: FrozenPointData,
    radius: f64,
    residual_norm: f64,
    newton_iterations: usize,
    shape: crate::mesh::InclusionShape,
    vertices: usize,
    mesh_hash: String,
    decay_profile: Vec<(f64, f64)>,
}

/// RMS of |DK| over dyadic annuli 2^k ≤ |x| < 2^{k+1}, k = 0 … ⌊log2 R⌋ − 2,
/// as (inner radius, value). Triangles are binned by centroid.
pub fn decay_profile(bundle: &CorrectorBundle) -> Vec<(f64, f64)> {
    let n = (bundle.radius.log2().floor() as i64 - 1).max(0) as usize;
    let mut sums = vec![(0.0, 0.0); n];
    let mesh = &bundle.k.mesh;
    for t in 0..mesh.num_triangles() {
        let c = mesh.centroid(t);
        let r = (c[0] * c[0] + c[1] * c[1]).sqrt();
        if r < 1.0 {
            continue;
        }
        let k = r.log2().floor() as usize;
        if k < n {
            let g = bundle.k.element_gradient(t);
            let a = mesh.area(t);
            sums[k].0 += a * g.iter().flatten().map(|v| v * v).sum::<f64>();
            sums[k].1 += a;
        }
    }
    sums.iter()
        .enumerate()
        .map(|(k, &(s, a))| (2f64.powi(k as i32), if a > 0.0 { (s / a).sqrt() } else { 0.0 }))
        .collect()
}
