//! Independent re-checks of solver output against the problem data.

use faer::Side;
use serde::Serialize;

use super::problem::SdpProblem;
use super::svec::{smat, svec_entry, svec_len, SQRT2};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolutionCheck {
    /// `||A x - b||_inf`
    pub equality_residual: f64,
    pub min_eigenvalues: Vec<f64>,
    /// Largest absolute entry of each PSD block.
    pub block_norms: Vec<f64>,
    pub objective: f64,
}

impl SolutionCheck {
    /// Equality residual within `tol (1 + ||b||_inf)` and every block's least
    /// eigenvalue at least `-tol (1 + ||block||)`.
    pub fn passes(&self, problem: &SdpProblem, tol: f64) -> bool {
        let bnorm = problem.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        self.equality_residual <= tol * (1.0 + bnorm)
            && self.min_eigenvalues.iter().zip(&self.block_norms).all(|(&l, &n)| l >= -tol * (1.0 + n))
    }
}

fn min_eigenvalue(v: &[f64], dim: usize) -> f64 {
    let m = smat(v, dim);
    m.self_adjoint_eigenvalues(Side::Lower).ok().and_then(|e| e.first().copied()).unwrap_or(f64::NAN)
}

pub fn check_solution(problem: &SdpProblem, x: &[f64]) -> SolutionCheck {
    let equality_residual = problem.residual(x).iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut min_eigenvalues = Vec::new();
    let mut block_norms = Vec::new();
    for (k, &d) in problem.block_dims.iter().enumerate() {
        let off = problem.block_offset(k);
        let v = &x[off..off + svec_len(d)];
        min_eigenvalues.push(min_eigenvalue(v, d));
        block_norms.push(smat(v, d).norm_max());
    }
    SolutionCheck { equality_residual, min_eigenvalues, block_norms, objective: problem.objective(x) }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RayCheck {
    /// `b' y`; positive for a valid certificate.
    pub b_dot_y: f64,
    /// `||A_free' y||_inf`; should vanish.
    pub free_residual: f64,
    /// Least eigenvalue of `-A_k^*(y)` per block; should be nonnegative.
    pub min_eigenvalues: Vec<f64>,
}

impl RayCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.b_dot_y > 0.0
            && self.free_residual <= tol * self.b_dot_y
            && self.min_eigenvalues.iter().all(|&l| l >= -tol * self.b_dot_y)
    }
}

/// Checks a Farkas-type ray: `b'y > 0`, `A_free' y = 0`, `-A_psd^*(y)` PSD.
/// Such a `y` rules out any `x` with `A x = b` and PSD blocks.
pub fn check_infeasibility_ray(problem: &SdpProblem, y: &[f64]) -> RayCheck {
    let ncols = problem.ncols();
    let mut aty = vec![0.0; ncols];
    for (row, &yi) in problem.rows.iter().zip(y) {
        for &(c, v) in row {
            aty[c] += v * yi;
        }
    }
    let free_residual = aty[..problem.n_free].iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut min_eigenvalues = Vec::new();
    for (k, &d) in problem.block_dims.iter().enumerate() {
        let off = problem.block_offset(k);
        let neg: Vec<f64> = aty[off..off + svec_len(d)].iter().map(|v| -v).collect();
        min_eigenvalues.push(min_eigenvalue(&neg, d));
    }
    let b_dot_y = problem.b.iter().zip(y).map(|(b, y)| b * y).sum();
    RayCheck { b_dot_y, free_residual, min_eigenvalues }
}

/// Sparse row for `trace(A X_block)` given the upper-triangle entries
/// `(i, j, A[i][j])` of a symmetric `A`.
pub fn matrix_row(problem: &SdpProblem, block: usize, entries: &[(usize, usize, f64)]) -> Vec<(usize, f64)> {
    let off = problem.block_offset(block);
    let mut out: Vec<(usize, f64)> = Vec::new();
    for &(i, j, v) in entries {
        let idx = super::svec::svec_index(i, j);
        let coeff = if i == j { v } else { v * SQRT2 };
        match out.iter_mut().find(|(c, _)| *c == off + idx) {
            Some(slot) => slot.1 += coeff,
            None => out.push((off + idx, coeff)),
        }
    }
    debug_assert!(out.iter().all(|&(c, _)| svec_entry(c - off).1 < problem.block_dims[block]));
    out.sort_by_key(|&(c, _)| c);
    out
}
