//! Sparse direct solves (faer LU with fill-reducing ordering). The symbolic
//! factorization is cached per sparsity pattern.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Once, OnceLock};

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use faer::{Conj, Mat};

use crate::error::{Error, Result};

/// Relative residual required of every linear solve.
pub const LINEAR_RTOL: f64 = 1e-10;

static SOLVES: AtomicUsize = AtomicUsize::new(0);

/// Number of linear solves (forward or transposed) performed so far in this process.
pub fn solver_calls() -> usize {
    SOLVES.load(Ordering::SeqCst)
}

fn sequential() {
    static INIT: Once = Once::new();
    INIT.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

/// Compressed-column sparsity pattern with a lazily computed symbolic LU.
#[derive(Debug)]
pub struct Pattern {
    pub n: usize,
    pub symbolic: SymbolicSparseColMat<usize>,
    lu: OnceLock<std::result::Result<SymbolicLu<usize>, String>>,
}

impl Pattern {
    pub fn new(n: usize, col_ptr: Vec<usize>, row_idx: Vec<usize>) -> Self {
        Pattern { n, symbolic: SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx), lu: OnceLock::new() }
    }

    pub fn col_ptr(&self) -> &[usize] {
        self.symbolic.col_ptr()
    }

    pub fn row_idx(&self) -> &[usize] {
        self.symbolic.row_idx()
    }

    pub fn nnz(&self) -> usize {
        self.row_idx().len()
    }

    fn symbolic_lu(&self, stage: &str) -> Result<SymbolicLu<usize>> {
        sequential();
        self.lu
            .get_or_init(|| SymbolicLu::try_new(self.symbolic.as_ref()).map_err(|e| format!("{e:?}")))
            .clone()
            .map_err(|reason| Error::LinearSolve { stage: stage.to_string(), reason })
    }
}

/// Numeric LU of a matrix on a [`Pattern`]; solves many right-hand sides.
pub struct Factorization<'a> {
    pattern: &'a Pattern,
    values: &'a [f64],
    lu: Lu<usize, f64>,
    stage: String,
}

impl<'a> Factorization<'a> {
    pub fn new(pattern: &'a Pattern, values: &'a [f64], stage: &str) -> Result<Self> {
        let symbolic = pattern.symbolic_lu(stage)?;
        let mat = SparseColMatRef::new(pattern.symbolic.as_ref(), values);
        let lu = Lu::try_new_with_symbolic(symbolic, mat)
            .map_err(|e| Error::LinearSolve { stage: stage.to_string(), reason: format!("factorization failed: {e:?}") })?;
        Ok(Factorization { pattern, values, lu, stage: stage.to_string() })
    }

    fn apply(&self, x: &[f64], transpose: bool) -> Vec<f64> {
        let mut y = vec![0.0; self.pattern.n];
        let (cp, ri) = (self.pattern.col_ptr(), self.pattern.row_idx());
        for c in 0..self.pattern.n {
            for p in cp[c]..cp[c + 1] {
                if transpose {
                    y[c] += self.values[p] * x[ri[p]];
                } else {
                    y[ri[p]] += self.values[p] * x[c];
                }
            }
        }
        y
    }

    fn raw_solve(&self, rhs: &[f64], transpose: bool) -> Vec<f64> {
        let mut b = Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        if transpose {
            self.lu.solve_transpose_in_place_with_conj(Conj::No, b.as_mut());
        } else {
            self.lu.solve_in_place_with_conj(Conj::No, b.as_mut());
        }
        (0..rhs.len()).map(|i| b[(i, 0)]).collect()
    }

    /// Solve A x = b (or Aᵀ x = b) with up to three steps of iterative
    /// refinement; errors if the relative residual stays above [`LINEAR_RTOL`].
    pub fn solve(&self, rhs: &[f64], transpose: bool) -> Result<Vec<f64>> {
        SOLVES.fetch_add(1, Ordering::SeqCst);
        let bnorm = norm(rhs);
        if bnorm == 0.0 {
            return Ok(vec![0.0; rhs.len()]);
        }
        let mut x = self.raw_solve(rhs, transpose);
        let mut rel = f64::INFINITY;
        let mut prev = f64::INFINITY;
        for _ in 0..4 {
            let ax = self.apply(&x, transpose);
            let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            rel = norm(&r) / bnorm;
            if !rel.is_finite() {
                break;
            }
            if rel <= LINEAR_RTOL * 1e-3 || rel > 0.5 * prev {
                break;
            }
            prev = rel;
            let dx = self.raw_solve(&r, transpose);
            for (xi, d) in x.iter_mut().zip(&dx) {
                *xi += d;
            }
        }
        if rel.is_finite() && rel <= LINEAR_RTOL {
            Ok(x)
        } else {
            Err(Error::LinearSolve { stage: self.stage.clone(), reason: format!("relative residual {rel:e} (singular or indefinite system)") })
        }
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One-shot solve of a matrix given on a pattern.
pub fn solve_linear(pattern: &Pattern, values: &[f64], rhs: &[f64], stage: &str) -> Result<Vec<f64>> {
    if pattern.n == 0 {
        return Ok(Vec::new());
    }
    Factorization::new(pattern, values, stage)?.solve(rhs, false)
}
