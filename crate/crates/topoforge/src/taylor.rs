//! Taylor test of the expansion J(Ω_ε) = J(Ω) + ε²|ω| dJ + o(ε²): solve
//! perturbed problems over a geometric ε-sequence and regress log δJ on log ε.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, StageExt};
use crate::fem::{cost_value, solve_newton, Assembler, NewtonOptions, StateForm};
use crate::mesh::{triangulate_ball_with, BallOptions, DomainMeshOptions, InclusionShape, Mesh, PatchFamily};
use crate::problem::ProblemSpec;
use crate::tdcore::{solve_state, td_at, TDReport};
use crate::{Point, DIM};

/// ε_k = eps0·delta^k, k = 0 … count − 1, listed in decreasing order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSweep {
    pub eps0: f64,
    pub delta: f64,
    pub count: usize,
}

impl Default for EpsilonSweep {
    fn default() -> Self {
        EpsilonSweep { eps0: 0.005, delta: 1.5, count: 10 }
    }
}

impl EpsilonSweep {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps0 > 0.0 && self.eps0.is_finite() && self.delta > 1.0 && self.delta.is_finite() && self.count >= 2) {
            return Err(Error::InvalidInput(format!("invalid ε sweep {self:?}")));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).rev().map(|k| self.eps0 * self.delta.powi(k as i32)).collect()
    }
}

/// Rows with δJ below this fraction of |J(Ω)| are round-off and not fitted.
pub const NOISE_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaylorRow {
    pub eps: f64,
    pub j_perturbed: f64,
    /// J(Ω) on the same mesh with the inclusion switched off.
    pub j_unperturbed: f64,
    pub delta_j: f64,
    pub included: bool,
    /// Whether the self-similar patch was used (false: independently fitted mesh).
    pub patched: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaylorResult {
    pub shape: String,
    pub z: Point,
    pub td_total: f64,
    pub area: f64,
    pub rows: Vec<TaylorRow>,
    /// Least-squares slope of log δJ against log ε over included rows (NaN if fewer than two).
    pub slope: f64,
    /// Reference orders d + 1 and d + 2.
    pub reference_slopes: [f64; 2],
}

impl TaylorResult {
    pub const CSV_HEADER: &'static str = "eps,J_perturbed,deltaJ,included_in_fit";

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{}", r.eps, r.j_perturbed, r.delta_j, r.included);
        }
        s
    }

    pub fn included(&self) -> usize {
        self.rows.iter().filter(|r| r.included).count()
    }

    /// Same data with another derivative value (δJ and the fit recomputed).
    pub fn with_td(&self, td_total: f64) -> TaylorResult {
        let rows = self.rows.iter().map(|r| row(r.eps, r.j_perturbed, r.j_unperturbed, r.patched, td_total, self.area, r.error.clone())).collect();
        finish(self.shape.clone(), self.z, td_total, self.area, rows)
    }
}

fn row(eps: f64, jp: f64, j0: f64, patched: bool, td: f64, area: f64, error: Option<String>) -> TaylorRow {
    let delta_j = (jp - j0 - eps.powi(DIM as i32) * area * td).abs();
    let included = error.is_none() && delta_j.is_finite() && delta_j > 0.0 && delta_j >= NOISE_FLOOR * j0.abs();
    TaylorRow { eps, j_perturbed: jp, j_unperturbed: j0, delta_j, included, patched, error }
}

fn finish(shape: String, z: Point, td_total: f64, area: f64, rows: Vec<TaylorRow>) -> TaylorResult {
    let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.included).map(|r| (r.eps.ln(), r.delta_j.ln())).collect();
    let slope = fit_slope(&pts);
    TaylorResult { shape, z, td_total, area, rows, slope, reference_slopes: [DIM as f64 + 1.0, DIM as f64 + 2.0] }
}

/// Least-squares slope of y against x.
pub fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Mesh and solver settings of a Taylor test.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaylorOptions {
    pub domain_mesh: DomainMeshOptions,
    /// Ball mesh whose rings fill the patch; its grading must have δ as an integer power.
    pub ball: BallOptions,
    pub state_newton: NewtonOptions,
    pub corrector_newton: NewtonOptions,
}

impl TaylorOptions {
    /// Ball grading with `layers` rings per ε step.
    pub fn grading_for(sweep: &EpsilonSweep, layers: usize) -> f64 {
        sweep.delta.powf(1.0 / layers as f64)
    }
}

/// Meshes for all ε plus the unperturbed mesh, sharing the outer part.
pub fn build_family(spec: &ProblemSpec, z: Point, shape: &InclusionShape, sweep: &EpsilonSweep, opts: &TaylorOptions) -> Result<PatchFamily> {
    sweep.validate()?;
    let ball = Arc::new(triangulate_ball_with(shape, &opts.ball).stage("ball mesh")?);
    PatchFamily::new(spec.geometry.clone(), opts.domain_mesh.clone(), z, ball, sweep.eps0, sweep.delta).stage("patch family")
}

/// TD at the family's z from the state on the family's unperturbed mesh and
/// the corrector on the family's ball mesh (same discretisation as the sweep).
pub fn family_td(spec: &ProblemSpec, family: &PatchFamily, shape_name: &str, opts: &TaylorOptions) -> Result<TDReport> {
    let mesh = Arc::new(family.unperturbed(0).stage("unperturbed mesh")?);
    let state = solve_state(spec, mesh, &opts.state_newton)?;
    td_at(spec, &state, family.z, family.ball.clone(), shape_name, &opts.corrector_newton)
}

fn cost_on(spec: &ProblemSpec, mesh: Mesh, opts: &NewtonOptions) -> Result<f64> {
    let asm = Assembler::new(Arc::new(mesh), spec.m);
    let (u, _) = solve_newton(&asm, &StateForm::new(spec), &asm.zeros(), opts)?;
    cost_value(spec, &asm, &u)
}

/// Solve the perturbed and unperturbed problems for every ε of the sweep.
/// Failed solves are reported as rows with `error` set.
pub fn run_taylor_test(spec: &ProblemSpec, family: &PatchFamily, shape_name: &str, td_total: f64, sweep: &EpsilonSweep, opts: &NewtonOptions) -> Result<TaylorResult> {
    sweep.validate()?;
    let area = family.ball.shape.area();
    let rows: Vec<TaylorRow> = sweep
        .values()
        .into_par_iter()
        .map(|eps| {
            let solved = family.mesh(eps).and_then(|pm| {
                let patched = pm.patched;
                let jp = cost_on(spec, pm.mesh, opts)?;
                let j0 = cost_on(spec, pm.baseline, opts)?;
                Ok((jp, j0, patched))
            });
            match solved {
                Ok((jp, j0, patched)) => row(eps, jp, j0, patched, td_total, area, None),
                Err(e) => row(eps, f64::NAN, f64::NAN, false, td_total, area, Some(e.to_string())),
            }
        })
        .collect();
    Ok(finish(shape_name.to_string(), family.z, td_total, area, rows))
}

/// Curves scaled to coincide at the largest ε, for log-log plotting.
#[derive(Clone, Debug, PartialEq)]
pub struct PlotTable {
    pub eps: Vec<f64>,
    /// (label, scaled δJ); reference lines ε^{d+1}, ε^{d+2} come last.
    pub columns: Vec<(String, Vec<f64>)>,
}

impl PlotTable {
    /// Whitespace-separated table with a `#` header line.
    pub fn to_gnuplot(&self) -> String {
        let mut s = String::from("# eps");
        for (l, _) in &self.columns {
            s.push(' ');
            s.push_str(l);
        }
        s.push('\n');
        for (i, e) in self.eps.iter().enumerate() {
            s.push_str(&e.to_string());
            for (_, c) in &self.columns {
                let _ = write!(s, " {}", c[i]);
            }
            s.push('\n');
        }
        s
    }
}

pub fn normalize_for_plot(results: &[TaylorResult]) -> Result<PlotTable> {
    let first = results.first().ok_or_else(|| Error::InvalidInput("no Taylor results to normalize".into()))?;
    let eps: Vec<f64> = first.rows.iter().map(|r| r.eps).collect();
    if results.iter().any(|r| r.rows.iter().map(|x| x.eps).ne(eps.iter().copied())) {
        return Err(Error::InvalidInput("Taylor results use different ε sequences".into()));
    }
    let imax = (0..eps.len()).max_by(|&a, &b| eps[a].total_cmp(&eps[b])).ok_or_else(|| Error::InvalidInput("empty ε sequence".into()))?;
    let target = first.rows[imax].delta_j;
    let mut columns: Vec<(String, Vec<f64>)> = results
        .iter()
        .map(|r| {
            let c = target / r.rows[imax].delta_j;
            (r.shape.clone(), r.rows.iter().map(|x| c * x.delta_j).collect())
        })
        .collect();
    for p in first.reference_slopes {
        let c = target / eps[imax].powf(p);
        columns.push((format!("eps^{p}"), eps.iter().map(|e| c * e.powf(p)).collect()));
    }
    Ok(PlotTable { eps, columns })
}
