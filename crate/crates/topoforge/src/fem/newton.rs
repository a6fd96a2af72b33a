//! Damped Newton with load stepping.

use serde::Serialize;

use super::assembly::Assembler;
use super::form::WeakForm;
use super::linear::norm;
use super::space::FieldFunction;
use crate::error::{Error, Result};

/// Relative tolerance of all but the last load step.
pub const INTERMEDIATE_RTOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NewtonOptions {
    /// Converged when ‖R‖ ≤ atol + rtol·‖R(u_init, full load)‖.
    pub rtol: f64,
    pub atol: f64,
    /// Iteration cap per load step.
    pub max_iter: usize,
    /// Step length ramps as min(1, k·damping), k = 1, 2, … within each load step.
    pub damping: f64,
    pub load_steps: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { rtol: 1e-12, atol: 0.0, max_iter: 60, damping: 1.0, load_steps: 1 }
    }
}

impl NewtonOptions {
    pub fn with_damping(mut self, damping: f64) -> Self {
        self.damping = damping;
        self
    }

    pub fn with_load_steps(mut self, n: usize) -> Self {
        self.load_steps = n;
        self
    }

    /// Iteration cap actually used: enough to finish the damping ramp.
    fn cap(&self) -> usize {
        self.max_iter + (1.0 / self.damping).ceil() as usize
    }
}

/// Residual norm before the update of one iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NewtonStep {
    pub load_step: usize,
    pub iteration: usize,
    pub residual: f64,
    pub damping: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NewtonReport {
    pub history: Vec<NewtonStep>,
    pub iterations: usize,
    pub final_residual: f64,
    pub tolerance: f64,
}

/// Solve R(u) = 0 starting from `init` (its constrained dofs are zeroed).
///
/// Besides the residual test, an iterate is accepted when the last step
/// reduced the residual by less than half of what its length τ promises
/// (factor 1 − τ/2) while it is already below 1e-9 of the reference: that is
/// round-off stagnation, not divergence. Load steps before the last one only
/// provide starting points and stop at [`INTERMEDIATE_RTOL`].
pub fn solve_newton(asm: &Assembler, form: &dyn WeakForm, init: &FieldFunction, opts: &NewtonOptions) -> Result<(FieldFunction, NewtonReport)> {
    if !(opts.damping > 0.0 && opts.damping <= 1.0) || opts.load_steps == 0 || !(opts.rtol >= 0.0 && opts.atol >= 0.0) {
        return Err(Error::InvalidInput(format!("bad Newton options {opts:?}")));
    }
    let mut u = asm.zeros();
    let mut x = asm.restrict(&init.values);
    u.values = asm.extend(&x);
    let reference = norm(&asm.residual(form, &u, 1.0)?);
    let tol = opts.atol + opts.rtol * reference;
    let mut history = Vec::new();
    let mut total = 0;
    let mut last = 0.0;
    for step in 1..=opts.load_steps {
        let load = step as f64 / opts.load_steps as f64;
        let step_tol = if step == opts.load_steps { tol } else { tol.max(INTERMEDIATE_RTOL * reference) };
        let mut prev: Option<(f64, f64)> = None; // (residual, step length)
        let mut done = false;
        for k in 1..=opts.cap() {
            let r = asm.residual(form, &u, load)?;
            let rn = norm(&r);
            last = rn;
            if !rn.is_finite() {
                return Err(Error::NewtonDivergence { step, iterations: k, residual: rn, damping: opts.damping });
            }
            let stagnated = matches!(prev, Some((pr, tau)) if rn >= (1.0 - 0.5 * tau) * pr && rn <= 1e-9 * reference.max(f64::MIN_POSITIVE));
            if rn <= step_tol || asm.num_free() == 0 || stagnated {
                done = true;
                break;
            }
            let tau = (k as f64 * opts.damping).min(1.0);
            history.push(NewtonStep { load_step: step, iteration: k, residual: rn, damping: tau });
            total += 1;
            let jac = asm.jacobian(form, &u, load)?;
            let neg: Vec<f64> = r.iter().map(|v| -v).collect();
            let dx = asm.factor(&jac, "newton")?.solve(&neg, false)?;
            for (xi, d) in x.iter_mut().zip(&dx) {
                *xi += tau * d;
            }
            u.values = asm.extend(&x);
            prev = Some((rn, tau));
        }
        if !done {
            return Err(Error::NewtonDivergence { step, iterations: opts.cap(), residual: last, damping: opts.damping });
        }
    }
    Ok((u, NewtonReport { history, iterations: total, final_residual: last, tolerance: tol }))
}
