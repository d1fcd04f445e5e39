use thiserror::Error;

use super::svec::svec_len;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("PSD block {0} has dimension 0")]
    EmptyBlock(usize),
    #[error("row {0} has no nonzero entries")]
    ZeroRow(usize),
    #[error("row {row} references column {col} but the problem has {ncols} columns")]
    ColumnOutOfRange { row: usize, col: usize, ncols: usize },
    #[error("{what} has length {found}, expected {expected}")]
    Length { what: &'static str, expected: usize, found: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// A sparse row of the equality map: `(column, value)` pairs with distinct
/// columns, sorted by column.
pub type SparseRow = Vec<(usize, f64)>;

/// Standard-form SDP
///
/// ```text
/// minimize    c' x
/// subject to  A x = b,   x = (u, svec X_1, ..., svec X_k),  X_j PSD,  u free
/// ```
///
/// Columns are laid out as the free scalars first, then the symmetric
/// vectorization of each block in order. `svec` stores the upper triangle
/// column by column with off-diagonal entries scaled by `sqrt(2)`, so
/// `<svec A, svec B> = trace(A B)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub block_dims: Vec<usize>,
    pub n_free: usize,
    pub rows: Vec<SparseRow>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl SdpProblem {
    /// An empty problem with the given layout and zero objective.
    pub fn new(n_free: usize, block_dims: Vec<usize>) -> Self {
        let ncols = n_free + block_dims.iter().map(|&d| svec_len(d)).sum::<usize>();
        SdpProblem { block_dims, n_free, rows: Vec::new(), b: Vec::new(), c: vec![0.0; ncols] }
    }

    pub fn ncols(&self) -> usize {
        self.n_free + self.block_dims.iter().map(|&d| svec_len(d)).sum::<usize>()
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    /// First column of PSD block `k`.
    pub fn block_offset(&self, k: usize) -> usize {
        self.n_free + self.block_dims[..k].iter().map(|&d| svec_len(d)).sum::<usize>()
    }

    pub fn push_row(&mut self, mut row: SparseRow, rhs: f64) {
        row.sort_by_key(|&(c, _)| c);
        self.rows.push(row);
        self.b.push(rhs);
    }

    pub fn is_feasibility(&self) -> bool {
        self.c.iter().all(|&v| v == 0.0)
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        if let Some(k) = self.block_dims.iter().position(|&d| d == 0) {
            return Err(ProblemError::EmptyBlock(k));
        }
        let ncols = self.ncols();
        if self.b.len() != self.rows.len() {
            return Err(ProblemError::Length { what: "b", expected: self.rows.len(), found: self.b.len() });
        }
        if self.c.len() != ncols {
            return Err(ProblemError::Length { what: "c", expected: ncols, found: self.c.len() });
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.iter().all(|&(_, v)| v == 0.0) {
                return Err(ProblemError::ZeroRow(i));
            }
            if let Some(&(col, _)) = row.iter().find(|&&(c, _)| c >= ncols) {
                return Err(ProblemError::ColumnOutOfRange { row: i, col, ncols });
            }
            if row.iter().any(|&(_, v)| !v.is_finite()) {
                return Err(ProblemError::NonFinite("A"));
            }
        }
        if self.b.iter().any(|v| !v.is_finite()) {
            return Err(ProblemError::NonFinite("b"));
        }
        if self.c.iter().any(|v| !v.is_finite()) {
            return Err(ProblemError::NonFinite("c"));
        }
        Ok(())
    }

    /// `A x - b`.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.b)
            .map(|(row, &bi)| row.iter().map(|&(c, v)| v * x[c]).sum::<f64>() - bi)
            .collect()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| c * x).sum()
    }
}
