//! Primal-dual interior-point method on the homogeneous self-dual embedding.
//!
//! The embedding
//!
//! ```text
//! A x - b tau = 0,   -A' y - z + c tau = 0,   b'y - c'x - kappa = 0
//! ```
//!
//! always has an interior, so the same iteration either converges to an
//! optimal pair (`tau > 0`) or to an infeasibility ray (`tau -> 0`). Search
//! directions use the HKM scaling with a Mehrotra predictor-corrector; free
//! variables are eliminated through a bordered Schur system.

use std::time::{Duration, Instant};

use faer::linalg::matmul::matmul;
use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
use faer::{Accum, Mat, Par, Side};

use super::problem::SdpProblem;
use super::svec::{smat, svec, svec_entry, SQRT2};
use crate::par::map_range;

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Relative primal tolerance, measured against the larger of `|b|` and
    /// the terms that cancel in `A x`.
    pub tol_feas: f64,
    /// Absolute primal residual a point may never exceed when the relative
    /// test is loosened by large cancelling terms.
    pub max_abs_residual: f64,
    pub tol_gap: f64,
    pub tol_infeas: f64,
    pub step_fraction: f64,
    pub time_limit: Option<Duration>,
    pub verbose: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iter: 200,
            tol_feas: 1e-8,
            max_abs_residual: 5e-7,
            tol_gap: 1e-8,
            tol_infeas: 1e-8,
            step_fraction: 0.98,
            time_limit: None,
            verbose: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// Tolerances met on a problem with a nonzero objective.
    Optimal,
    /// Tolerances met on a pure feasibility problem.
    Feasible,
    /// A dual ray proves the equality/PSD system has no solution.
    InfeasibleCertificate,
    /// A primal ray proves the objective is unbounded below.
    DualInfeasible,
    IterationLimit,
    NumericalFailure,
}

impl SolveStatus {
    pub fn is_success(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Feasible)
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    /// Primal solution in the problem's column layout; present exactly when
    /// the status is a success.
    pub x: Option<Vec<f64>>,
    /// Last dual iterate divided by `tau`.
    pub y: Vec<f64>,
    /// Dual ray normalized to `b'y = 1`, present with `InfeasibleCertificate`.
    pub ray: Option<Vec<f64>>,
    /// `||A x - b||_inf`.
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub relative_gap: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    pub elapsed: Duration,
    pub message: String,
}

#[derive(Clone, Copy, Debug)]
struct Entry {
    a: usize,
    b: usize,
    /// Matrix entry `A[a][b] = A[b][a]`, pre-divided by 2 on the diagonal
    /// so every entry stands for `v (e_a e_b' + e_b e_a')`.
    half: f64,
    /// The plain matrix entry.
    v: f64,
}

struct Block {
    dim: usize,
    offset: usize,
    rows: Vec<usize>,
    entries: Vec<Vec<Entry>>,
    /// Sorted matrix indices touched by each row.
    support: Vec<Vec<usize>>,
}

struct Prepared {
    m: usize,
    /// Original indices of the free columns kept in the solve.
    free_cols: Vec<usize>,
    a_free: Mat<f64>,
    c_free: Vec<f64>,
    blocks: Vec<Block>,
    c_blocks: Vec<Mat<f64>>,
    has_c: bool,
    b: Vec<f64>,
    scale: Vec<f64>,
    b_norm: f64,
    c_norm: f64,
}

fn prepare(problem: &SdpProblem) -> Prepared {
    let m = problem.nrows();
    let scale: Vec<f64> = problem
        .rows
        .iter()
        .map(|r| 1.0 / r.iter().fold(0.0f64, |acc, &(_, v)| acc.max(v.abs())))
        .collect();

    let mut used = vec![false; problem.n_free];
    for row in &problem.rows {
        for &(c, v) in row {
            if c < problem.n_free && v != 0.0 {
                used[c] = true;
            }
        }
    }
    let free_cols: Vec<usize> =
        (0..problem.n_free).filter(|&j| used[j] || problem.c[j] != 0.0).collect();
    let mut free_pos = vec![usize::MAX; problem.n_free];
    for (k, &j) in free_cols.iter().enumerate() {
        free_pos[j] = k;
    }
    let mut a_free = Mat::<f64>::zeros(m, free_cols.len());

    let nblocks = problem.block_dims.len();
    let offsets: Vec<usize> = (0..nblocks).map(|k| problem.block_offset(k)).collect();
    let mut blocks: Vec<Block> = problem
        .block_dims
        .iter()
        .zip(&offsets)
        .map(|(&dim, &offset)| Block { dim, offset, rows: Vec::new(), entries: Vec::new(), support: Vec::new() })
        .collect();

    for (i, row) in problem.rows.iter().enumerate() {
        let s = scale[i];
        for &(c, v) in row {
            if v == 0.0 {
                continue;
            }
            if c < problem.n_free {
                a_free[(i, free_pos[c])] += s * v;
                continue;
            }
            let k = offsets.partition_point(|&o| o <= c) - 1;
            let (a, b) = svec_entry(c - offsets[k]);
            let mv = if a == b { s * v } else { s * v / SQRT2 };
            let blk = &mut blocks[k];
            if blk.rows.last() != Some(&i) {
                blk.rows.push(i);
                blk.entries.push(Vec::new());
            }
            let half = if a == b { 0.5 * mv } else { mv };
            blk.entries.last_mut().unwrap().push(Entry { a, b, half, v: mv });
        }
    }

    for blk in &mut blocks {
        blk.support = blk
            .entries
            .iter()
            .map(|es| {
                let mut sup: Vec<usize> = es.iter().flat_map(|e| [e.a, e.b]).collect();
                sup.sort_unstable();
                sup.dedup();
                sup
            })
            .collect();
    }

    let c_blocks: Vec<Mat<f64>> = problem
        .block_dims
        .iter()
        .zip(&offsets)
        .map(|(&d, &o)| smat(&problem.c[o..o + super::svec::svec_len(d)], d))
        .collect();
    let has_c = !problem.is_feasibility();
    let b: Vec<f64> = problem.b.iter().zip(&scale).map(|(b, s)| b * s).collect();
    let c_free = free_cols.iter().map(|&j| problem.c[j]).collect();
    Prepared {
        m,
        free_cols,
        a_free,
        c_free,
        blocks,
        c_blocks,
        has_c,
        b,
        scale,
        b_norm: problem.b.iter().fold(0.0f64, |a, v| a.max(v.abs())),
        c_norm: problem.c.iter().fold(0.0f64, |a, v| a.max(v.abs())),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inner(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        s += dot(a.col_as_slice(j), b.col_as_slice(j));
    }
    s
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

fn mat_max_abs(m: &Mat<f64>) -> f64 {
    (0..m.ncols()).fold(0.0f64, |a, j| a.max(max_abs(m.col_as_slice(j))))
}

fn axpy_mat(y: &mut Mat<f64>, alpha: f64, x: &Mat<f64>) {
    for j in 0..y.ncols() {
        for (yi, xi) in y.col_as_slice_mut(j).iter_mut().zip(x.col_as_slice(j)) {
            *yi += alpha * xi;
        }
    }
}

fn sym_part(m: &Mat<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

impl Prepared {
    /// `max_i sum_j |a_ij x_j|` in original units: the size of the terms
    /// that cancel in `A x`.
    fn term_norm(&self, u: &[f64], xs: &[Mat<f64>]) -> f64 {
        let mut out = vec![0.0; self.m];
        for (j, &uj) in u.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.a_free.col_as_slice(j)) {
                *o += (a * uj).abs();
            }
        }
        for (blk, x) in self.blocks.iter().zip(xs) {
            for (r, &row) in blk.rows.iter().enumerate() {
                out[row] += blk.entries[r].iter().map(|e| (2.0 * e.half * x[(e.a, e.b)]).abs()).sum::<f64>();
            }
        }
        out.iter().zip(&self.scale).fold(0.0f64, |a, (o, s)| a.max(o / s))
    }

    /// `A_free u + sum_k A_k(X_k)` in scaled rows.
    fn apply(&self, u: &[f64], xs: &[Mat<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for (j, &uj) in u.iter().enumerate() {
            if uj != 0.0 {
                for (o, a) in out.iter_mut().zip(self.a_free.col_as_slice(j)) {
                    *o += a * uj;
                }
            }
        }
        for (blk, x) in self.blocks.iter().zip(xs) {
            for (r, &row) in blk.rows.iter().enumerate() {
                let mut s = 0.0;
                for e in &blk.entries[r] {
                    s += 2.0 * e.half * x[(e.a, e.b)];
                }
                out[row] += s;
            }
        }
        out
    }

    fn adjoint_free(&self, y: &[f64]) -> Vec<f64> {
        (0..self.a_free.ncols()).map(|j| dot(self.a_free.col_as_slice(j), y)).collect()
    }

    fn adjoint_block(&self, k: usize, y: &[f64]) -> Mat<f64> {
        let blk = &self.blocks[k];
        let mut w = Mat::<f64>::zeros(blk.dim, blk.dim);
        for (r, &row) in blk.rows.iter().enumerate() {
            let yr = y[row];
            if yr == 0.0 {
                continue;
            }
            for e in &blk.entries[r] {
                w[(e.a, e.b)] += yr * e.v;
                if e.a != e.b {
                    w[(e.b, e.a)] += yr * e.v;
                }
            }
        }
        w
    }

    fn adjoint_blocks(&self, y: &[f64]) -> Vec<Mat<f64>> {
        (0..self.blocks.len()).map(|k| self.adjoint_block(k, y)).collect()
    }

    /// Schur complement `M_ij = trace(A_i X A_j Z^-1)`, summed over blocks.
    /// Column `j` of a block comes from one dense product
    /// `W = X[:, S] (A_j Z^-1)[S, :]` over the support `S` of `A_j`, after
    /// which `M_ij = <A_i, W>` is a sparse dot product.
    fn schur(&self, xs: &[Mat<f64>], zis: &[Mat<f64>]) -> Mat<f64> {
        let parts: Vec<Mat<f64>> = map_range(self.blocks.len(), |k| {
            let blk = &self.blocks[k];
            let d = blk.dim;
            let (x, z) = (&xs[k], &zis[k]);
            let n = blk.rows.len();
            let mut out = Mat::<f64>::zeros(n, n);
            let mut w = Mat::<f64>::zeros(d, d);
            let mut pos = vec![0usize; d];
            for j in 0..n {
                let sup = &blk.support[j];
                for (t, &r) in sup.iter().enumerate() {
                    pos[r] = t;
                }
                // Columns of `(A_j Z^-1)'` restricted to the support rows.
                let mut az = Mat::<f64>::zeros(d, sup.len());
                for e in &blk.entries[j] {
                    let col = az.col_as_slice_mut(pos[e.a]);
                    for (o, zv) in col.iter_mut().zip(z.col_as_slice(e.b)) {
                        *o += e.v * zv;
                    }
                    if e.a != e.b {
                        let col = az.col_as_slice_mut(pos[e.b]);
                        for (o, zv) in col.iter_mut().zip(z.col_as_slice(e.a)) {
                            *o += e.v * zv;
                        }
                    }
                }
                let xsup = Mat::<f64>::from_fn(d, sup.len(), |r, c| x[(r, sup[c])]);
                matmul(w.as_mut(), Accum::Replace, xsup.as_ref(), az.transpose(), 1.0, Par::Seq);
                for i in 0..n {
                    out[(i, j)] =
                        blk.entries[i].iter().map(|e| e.half * (w[(e.a, e.b)] + w[(e.b, e.a)])).sum();
                }
            }
            out
        });
        let mut m = Mat::<f64>::zeros(self.m, self.m);
        for (blk, part) in self.blocks.iter().zip(&parts) {
            for (i, &ri) in blk.rows.iter().enumerate() {
                for (j, &rj) in blk.rows.iter().enumerate() {
                    m[(ri, rj)] += 0.5 * (part[(i, j)] + part[(j, i)]);
                }
            }
        }
        m
    }
}

/// `D(W) = (X W Zi + Zi W X) / 2`.
fn hkm(x: &Mat<f64>, zi: &Mat<f64>, w: &Mat<f64>) -> Mat<f64> {
    let t = x * w * zi;
    sym_part(&t)
}

/// Factored bordered system `[[M, F], [F', 0]]`. Without free variables
/// `M` is factored by Cholesky; otherwise the whole symmetric indefinite
/// matrix goes through Bunch-Kaufman, which stays stable when `F' M^-1 F`
/// is badly conditioned.
struct Kkt {
    m_mat: Mat<f64>,
    fact: Factor,
}

enum Factor {
    Chol(faer::linalg::solvers::Llt<f64>),
    Full(faer::linalg::solvers::Lblt<f64>),
}

fn factor_kkt(m_mat: Mat<f64>, a_free: &Mat<f64>) -> Option<Kkt> {
    let n = m_mat.nrows();
    let p = a_free.ncols();
    if p > 0 {
        let k = Mat::<f64>::from_fn(n + p, n + p, |i, j| match (i < n, j < n) {
            (true, true) => m_mat[(i, j)],
            (true, false) => a_free[(i, j - n)],
            (false, true) => a_free[(j, i - n)],
            (false, false) => 0.0,
        });
        let f = k.lblt(Side::Lower);
        return Some(Kkt { m_mat, fact: Factor::Full(f) });
    }
    let max_diag = (0..n).fold(0.0f64, |a, i| a.max(m_mat[(i, i)].abs())).max(1e-300);
    let mut reg = m_mat.clone();
    for attempt in 0..6 {
        match reg.llt(Side::Lower) {
            Ok(f) => return Some(Kkt { m_mat, fact: Factor::Chol(f) }),
            Err(_) => {
                let bump = max_diag * 1e-14 * 100f64.powi(attempt);
                for i in 0..n {
                    reg[(i, i)] += bump;
                }
            }
        }
    }
    None
}

impl Kkt {
    fn solve_once(&self, r1: &[f64], r2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = r1.len();
        let p = r2.len();
        let mut w = Mat::<f64>::from_fn(m + p, 1, |i, _| if i < m { r1[i] } else { r2[i - m] });
        match &self.fact {
            Factor::Chol(f) => f.solve_in_place(w.as_mut()),
            Factor::Full(f) => f.solve_in_place(w.as_mut()),
        }
        ((0..m).map(|i| w[(i, 0)]).collect(), (m..m + p).map(|i| w[(i, 0)]).collect())
    }

    /// Solves with iterative refinement against the unregularized operator.
    fn solve(&self, a_free: &Mat<f64>, r1: &[f64], r2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (mut y, mut u) = self.solve_once(r1, r2);
        let m = r1.len();
        let p = u.len();
        let rnorm = max_abs(r1).max(max_abs(r2)).max(1e-300);
        let mut last = f64::INFINITY;
        for _ in 0..REFINE_STEPS {
            let ym = Mat::<f64>::from_fn(m, 1, |i, _| y[i]);
            let mut res1 = Mat::<f64>::from_fn(m, 1, |i, _| r1[i]);
            matmul(res1.as_mut(), Accum::Add, self.m_mat.as_ref(), ym.as_ref(), -1.0, Par::Seq);
            let mut res2 = r2.to_vec();
            if p > 0 {
                let um = Mat::<f64>::from_fn(p, 1, |i, _| u[i]);
                matmul(res1.as_mut(), Accum::Add, a_free.as_ref(), um.as_ref(), -1.0, Par::Seq);
                for (j, r) in res2.iter_mut().enumerate() {
                    *r -= dot(a_free.col_as_slice(j), &y);
                }
            }
            let res1v: Vec<f64> = (0..m).map(|i| res1[(i, 0)]).collect();
            let err = max_abs(&res1v).max(max_abs(&res2)) / rnorm;
            if err <= 1e-14 || err >= 0.5 * last {
                break;
            }
            last = err;
            let (dy, du) = self.solve_once(&res1v, &res2);
            for (a, b) in y.iter_mut().zip(&dy) {
                *a += b;
            }
            for (a, b) in u.iter_mut().zip(&du) {
                *a += b;
            }
        }
        (y, u)
    }
}

const REFINE_STEPS: usize = 8;

/// Some progress measure (complementarity, the scaled residuals, or the
/// infeasibility ratio) must shrink by this factor at least once every
/// `STALL_ITERATIONS` iterations.
const STALL_FACTOR: f64 = 0.7;
const STALL_ITERATIONS: usize = 15;
/// Complementarity below this fraction of its start no longer counts as
/// progress; only the residuals can still improve.
const MU_FLOOR: f64 = 1e-14;
/// Best iterates whose scaled residuals are within this bound get polished.
const POLISH_RANGE: f64 = 1e-3;
const POLISH_STEPS: usize = 4;
/// Polishing needs the final `tau / kappa` above this: a collapsing ratio is
/// the embedding drifting toward an infeasibility ray, and the best iterate
/// of such a run is not a solution.
const POLISH_MIN_TAU_KAPPA: f64 = 1e3;

/// Tracks the best value of a progress measure.
struct Progress {
    best: [f64; 3],
    stalled: usize,
}

impl Progress {
    /// Returns `false` once no measure has improved for `STALL_ITERATIONS`.
    fn update(&mut self, measures: [f64; 3]) -> bool {
        let mut improved = false;
        for (b, m) in self.best.iter_mut().zip(measures) {
            if m < STALL_FACTOR * *b {
                *b = m;
                improved = true;
            }
        }
        if improved {
            self.stalled = 0;
        } else {
            self.stalled += 1;
        }
        self.stalled < STALL_ITERATIONS
    }
}

/// A primal iterate in original units (`u / tau`, `X / tau`).
struct Snapshot {
    merit: f64,
    dual_ok: bool,
    u: Vec<f64>,
    xs: Vec<Mat<f64>>,
}

/// `max |c tau - A'y - z|` over free and PSD parts, given the dual residuals.
fn primal_ok(pr: &Prepared, cfg: &SolverConfig, pinf: f64, pscale: f64) -> bool {
    pinf <= cfg.tol_feas * (1.0 + pr.b_norm) || (pinf <= cfg.tol_feas * pscale && pinf <= cfg.max_abs_residual)
}

fn infeasibility_ratio(pr: &Prepared, rdx: &[Mat<f64>], rdu: &[f64], tau: f64) -> f64 {
    let free_res = rdu.iter().zip(&pr.c_free).fold(0.0f64, |a, (r, c)| a.max((c * tau - r).abs()));
    rdx.iter().enumerate().fold(free_res, |a, (k, r)| {
        let mut t = -r;
        if pr.has_c {
            axpy_mat(&mut t, tau, &pr.c_blocks[k]);
        }
        a.max(mat_max_abs(&t))
    })
}

/// Pulls a nearly feasible point onto `A x = b` with the smallest correction
/// in the norm induced by `X`: `dX = X A*(w) X`, `du = F' w` with
/// `(A (X (x) X) A' + F F') w = b - A x`. The correction keeps `X` positive
/// definite as long as it is small in that norm. Returns the scaled residual
/// reached, or `None` if `X` is not positive definite.
fn polish(pr: &Prepared, snap: &mut Snapshot) -> Option<f64> {
    let resid = |snap: &Snapshot| -> Vec<f64> {
        let ax = pr.apply(&snap.u, &snap.xs);
        pr.b.iter().zip(&ax).map(|(b, a)| b - a).collect()
    };
    let unscaled = |r: &[f64]| r.iter().zip(&pr.scale).fold(0.0f64, |a, (r, s)| a.max((r / s).abs()));
    let mut r = resid(snap);
    let mut err = unscaled(&r);
    for _ in 0..POLISH_STEPS {
        let mut m_mat = pr.schur(&snap.xs, &snap.xs);
        if pr.a_free.ncols() > 0 {
            matmul(m_mat.as_mut(), Accum::Add, pr.a_free.as_ref(), pr.a_free.transpose(), 1.0, Par::Seq);
        }
        let n = m_mat.nrows();
        let max_diag = (0..n).fold(0.0f64, |a, i| a.max(m_mat[(i, i)])).max(1e-300);
        for i in 0..n {
            m_mat[(i, i)] += 1e-14 * max_diag;
        }
        let llt = m_mat.llt(Side::Lower).ok()?;
        let mut w = Mat::<f64>::from_fn(n, 1, |i, _| r[i]);
        llt.solve_in_place(w.as_mut());
        let wv: Vec<f64> = (0..n).map(|i| w[(i, 0)]).collect();
        let aw = pr.adjoint_blocks(&wv);
        let du = pr.adjoint_free(&wv);
        let mut trial = Snapshot {
            merit: snap.merit,
            dual_ok: snap.dual_ok,
            u: snap.u.iter().zip(&du).map(|(a, b)| a + b).collect(),
            xs: snap.xs.iter().zip(&aw).map(|(x, a)| sym_part(&(x + x * a * x))).collect(),
        };
        if trial.xs.iter().any(|x| x.llt(Side::Lower).is_err()) {
            break;
        }
        let r_new = resid(&trial);
        let e_new = unscaled(&r_new);
        if e_new >= err {
            break;
        }
        std::mem::swap(snap, &mut trial);
        r = r_new;
        err = e_new;
    }
    snap.xs.iter().all(|x| x.llt(Side::Lower).is_ok()).then_some(err)
}

/// Largest `alpha` with `X + alpha dX` PSD (`inf` if unbounded); `None` if
/// `X` is not numerically positive definite.
fn max_step(x: &Mat<f64>, dx: &Mat<f64>) -> Option<f64> {
    let llt = x.llt(Side::Lower).ok()?;
    let l = llt.L();
    let mut w = dx.clone();
    solve_lower_triangular_in_place(l, w.as_mut(), Par::Seq);
    let mut wt = w.transpose().to_owned();
    solve_lower_triangular_in_place(l, wt.as_mut(), Par::Seq);
    let ws = sym_part(&wt);
    let eig = ws.self_adjoint_eigenvalues(Side::Lower).ok()?;
    let lmin = eig.first().copied().unwrap_or(0.0);
    Some(if lmin < 0.0 { -1.0 / lmin } else { f64::INFINITY })
}

fn scalar_step(v: f64, dv: f64) -> f64 {
    if dv < 0.0 {
        -v / dv
    } else {
        f64::INFINITY
    }
}

struct Direction {
    du: Vec<f64>,
    dxs: Vec<Mat<f64>>,
    dy: Vec<f64>,
    dzs: Vec<Mat<f64>>,
    dtau: f64,
    dkappa: f64,
}

struct Residuals {
    rp: Vec<f64>,
    rdu: Vec<f64>,
    rdx: Vec<Mat<f64>>,
    rg: f64,
}

pub(crate) fn solve_ipm(problem: &SdpProblem, cfg: &SolverConfig) -> SolveOutcome {
    let start = Instant::now();
    let pr = prepare(problem);
    let nblocks = pr.blocks.len();
    let nu: usize = problem.block_dims.iter().sum();
    let p = pr.free_cols.len();

    let mut u = vec![0.0; p];
    let mut xs: Vec<Mat<f64>> = problem.block_dims.iter().map(|&d| Mat::identity(d, d)).collect();
    let mut y = vec![0.0; pr.m];
    let mut zs: Vec<Mat<f64>> = xs.clone();
    let mut tau = 1.0;
    let mut kappa = 1.0;

    let mut status = SolveStatus::IterationLimit;
    let mut message = String::from("iteration limit reached");
    let mut iterations = 0;
    let mut stats = (f64::INFINITY, f64::INFINITY, f64::INFINITY, 0.0, 0.0);
    let mut ray = None;
    let mut small_steps = 0;
    let mut progress = Progress { best: [f64::INFINITY; 3], stalled: 0 };
    let mut mu0 = None;
    let mut best: Option<Snapshot> = None;

    if pr.m == 0 {
        message = "problem has no equality constraints".into();
        status = if pr.has_c { SolveStatus::NumericalFailure } else { SolveStatus::Feasible };
    }

    while pr.m > 0 {
        // Residuals of the embedding.
        let ax = pr.apply(&u, &xs);
        let rp: Vec<f64> = ax.iter().zip(&pr.b).map(|(a, b)| a - b * tau).collect();
        let aty = pr.adjoint_free(&y);
        let rdu: Vec<f64> = aty.iter().zip(&pr.c_free).map(|(a, c)| -a + c * tau).collect();
        let atys = pr.adjoint_blocks(&y);
        let rdx: Vec<Mat<f64>> = (0..nblocks)
            .map(|k| {
                let mut r = -&atys[k] - &zs[k];
                if pr.has_c {
                    axpy_mat(&mut r, tau, &pr.c_blocks[k]);
                }
                r
            })
            .collect();
        let cx = dot(&pr.c_free, &u)
            + if pr.has_c { (0..nblocks).map(|k| inner(&pr.c_blocks[k], &xs[k])).sum() } else { 0.0 };
        let by = dot(&pr.b, &y);
        let rg = by - cx - kappa;
        let xz: f64 = (0..nblocks).map(|k| inner(&xs[k], &zs[k])).sum();
        let mu = (xz + tau * kappa) / (nu as f64 + 1.0);

        let pinf = rp.iter().zip(&pr.scale).fold(0.0f64, |a, (r, s)| a.max((r / s).abs())) / tau;
        let dinf = max_abs(&rdu).max(rdx.iter().fold(0.0f64, |a, r| a.max(mat_max_abs(r)))) / tau;
        let pobj = cx / tau;
        let dobj = by / tau;
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        stats = (pinf, dinf, gap, pobj, dobj);

        if cfg.verbose {
            eprintln!(
                "ipm {iterations:3}  pinf {pinf:9.2e}  dinf {dinf:9.2e}  gap {gap:9.2e}  mu {mu:9.2e}  tau {tau:9.2e}  kappa {kappa:9.2e}"
            );
        }
        if ![pinf, dinf, gap, mu, tau, kappa].iter().all(|v| v.is_finite()) {
            status = SolveStatus::NumericalFailure;
            message = "non-finite iterate".into();
            break;
        }
        // Primal residual relative to the terms that cancel in `A x`.
        let uo: Vec<f64> = u.iter().map(|v| v / tau).collect();
        let xo: Vec<Mat<f64>> = xs.iter().map(|x| x * (1.0 / tau)).collect();
        let pscale = 1.0 + pr.b_norm.max(pr.term_norm(&uo, &xo));
        if primal_ok(&pr, cfg, pinf, pscale)
            && dinf <= cfg.tol_feas * (1.0 + pr.c_norm)
            && gap <= cfg.tol_gap
        {
            status = if pr.has_c { SolveStatus::Optimal } else { SolveStatus::Feasible };
            message = "converged".into();
            break;
        }
        if by > 0.0 {
            if infeasibility_ratio(&pr, &rdx, &rdu, tau) <= cfg.tol_infeas * by {
                status = SolveStatus::InfeasibleCertificate;
                message = "primal infeasibility certificate".into();
                let r: Vec<f64> = y.iter().zip(&pr.scale).map(|(y, s)| y * s / by).collect();
                ray = Some(r);
                break;
            }
        }
        if cx < 0.0 {
            let ares = ax.iter().zip(&pr.scale).fold(0.0f64, |a, (v, s)| a.max((v / s).abs()));
            if ares <= cfg.tol_infeas * (-cx) {
                status = SolveStatus::DualInfeasible;
                message = "dual infeasibility certificate".into();
                break;
            }
        }
        let mu_ref = *mu0.get_or_insert(mu);
        let pmerit = pinf / pscale;
        // Without an objective any primal feasible point will do.
        let merit = if pr.has_c { pmerit.max(dinf / (1.0 + pr.c_norm)).max(gap) } else { pmerit };
        let infeas = if by > 0.0 { infeasibility_ratio(&pr, &rdx, &rdu, tau) / by } else { f64::INFINITY };
        let mu_measure = if mu > MU_FLOOR * mu_ref { mu } else { f64::INFINITY };
        if !progress.update([mu_measure, merit, infeas]) {
            status = SolveStatus::NumericalFailure;
            message = format!("no progress in {STALL_ITERATIONS} iterations");
            break;
        }
        if best.as_ref().is_none_or(|b| merit < b.merit) {
            best = Some(Snapshot {
                merit,
                dual_ok: !pr.has_c || (dinf <= cfg.tol_feas * (1.0 + pr.c_norm) && gap <= cfg.tol_gap),
                u: uo,
                xs: xo,
            });
        }
        if iterations >= cfg.max_iter {
            break;
        }
        if let Some(limit) = cfg.time_limit {
            if start.elapsed() > limit {
                message = "time limit reached".into();
                break;
            }
        }
        iterations += 1;

        // Scaling and factorization.
        let mut zis = Vec::with_capacity(nblocks);
        let mut ok = true;
        for z in &zs {
            match z.llt(Side::Lower) {
                Ok(f) => zis.push(sym_part(&f.inverse())),
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            status = SolveStatus::NumericalFailure;
            message = "dual slack lost definiteness".into();
            break;
        }
        let m_mat = pr.schur(&xs, &zis);
        let Some(kkt) = factor_kkt(m_mat, &pr.a_free) else {
            status = SolveStatus::NumericalFailure;
            message = "Schur complement factorization failed".into();
            break;
        };

        let dcs: Vec<Mat<f64>> = if pr.has_c {
            (0..nblocks).map(|k| hkm(&xs[k], &zis[k], &pr.c_blocks[k])).collect()
        } else {
            Vec::new()
        };
        let adc = if pr.has_c { pr.apply(&vec![0.0; p], &dcs) } else { vec![0.0; pr.m] };
        let cdc: f64 = if pr.has_c { (0..nblocks).map(|k| inner(&pr.c_blocks[k], &dcs[k])).sum() } else { 0.0 };
        let qrhs: Vec<f64> = pr.b.iter().zip(&adc).map(|(b, a)| b + a).collect();
        let (qy, qu) = kkt.solve(&pr.a_free, &qrhs, &pr.c_free);
        let bmadc: Vec<f64> = pr.b.iter().zip(&adc).map(|(b, a)| b - a).collect();
        let den = dot(&bmadc, &qy) - dot(&pr.c_free, &qu) + cdc + kappa / tau;
        let d_rdx: Vec<Mat<f64>> = (0..nblocks).map(|k| hkm(&xs[k], &zis[k], &rdx[k])).collect();
        let a_d_rdx = pr.apply(&vec![0.0; p], &d_rdx);
        let c_d_rdx: f64 =
            if pr.has_c { (0..nblocks).map(|k| inner(&pr.c_blocks[k], &d_rdx[k])).sum() } else { 0.0 };
        let res = Residuals { rp, rdu, rdx, rg };

        let direction = |rx: &[Mat<f64>], eta: f64, comp: f64| -> Direction {
            let arx = pr.apply(&vec![0.0; p], rx);
            let h1: Vec<f64> =
                (0..pr.m).map(|i| -eta * res.rp[i] - arx[i] + eta * a_d_rdx[i]).collect();
            let h2: Vec<f64> = res.rdu.iter().map(|r| eta * r).collect();
            let (py, pu) = kkt.solve(&pr.a_free, &h1, &h2);
            let c_rx: f64 =
                if pr.has_c { (0..nblocks).map(|k| inner(&pr.c_blocks[k], &rx[k])).sum() } else { 0.0 };
            let h3 = -eta * res.rg + c_rx - eta * c_d_rdx + comp / tau;
            let num = h3 - dot(&bmadc, &py) + dot(&pr.c_free, &pu);
            let dtau = num / den;
            let dy: Vec<f64> = py.iter().zip(&qy).map(|(a, b)| a + dtau * b).collect();
            let du: Vec<f64> = pu.iter().zip(&qu).map(|(a, b)| a + dtau * b).collect();
            let atdy = pr.adjoint_blocks(&dy);
            let mut dzs = Vec::with_capacity(nblocks);
            let mut dxs = Vec::with_capacity(nblocks);
            for k in 0..nblocks {
                let mut dz = -&atdy[k];
                axpy_mat(&mut dz, eta, &res.rdx[k]);
                if pr.has_c {
                    axpy_mat(&mut dz, dtau, &pr.c_blocks[k]);
                }
                let mut dx = rx[k].clone();
                axpy_mat(&mut dx, -1.0, &hkm(&xs[k], &zis[k], &dz));
                dzs.push(dz);
                dxs.push(dx);
            }
            let dkappa = (comp - kappa * dtau) / tau;
            Direction { du, dxs, dy, dzs, dtau, dkappa }
        };

        let step_len = |d: &Direction| -> Option<f64> {
            let mut a = scalar_step(tau, d.dtau).min(scalar_step(kappa, d.dkappa));
            for k in 0..nblocks {
                a = a.min(max_step(&xs[k], &d.dxs[k])?);
                a = a.min(max_step(&zs[k], &d.dzs[k])?);
            }
            Some(a)
        };

        // Predictor.
        let rx_aff: Vec<Mat<f64>> = xs.iter().map(|x| -x).collect();
        let aff = direction(&rx_aff, 1.0, -tau * kappa);
        let Some(a_aff) = step_len(&aff) else {
            status = SolveStatus::NumericalFailure;
            message = "primal iterate lost definiteness".into();
            break;
        };
        let a_aff = a_aff.min(1.0);
        let mut xz_aff = (tau + a_aff * aff.dtau) * (kappa + a_aff * aff.dkappa);
        for k in 0..nblocks {
            let mut xa = xs[k].clone();
            axpy_mat(&mut xa, a_aff, &aff.dxs[k]);
            let mut za = zs[k].clone();
            axpy_mat(&mut za, a_aff, &aff.dzs[k]);
            xz_aff += inner(&xa, &za);
        }
        let mu_aff = xz_aff / (nu as f64 + 1.0);
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector.
        let rx_cor: Vec<Mat<f64>> = (0..nblocks)
            .map(|k| {
                let mut r = &zis[k] * (sigma * mu);
                axpy_mat(&mut r, -1.0, &xs[k]);
                let second = &aff.dxs[k] * &aff.dzs[k] * &zis[k];
                axpy_mat(&mut r, -1.0, &sym_part(&second));
                r
            })
            .collect();
        let comp = sigma * mu - tau * kappa - aff.dtau * aff.dkappa;
        let dir = direction(&rx_cor, 1.0 - sigma, comp);
        let Some(a_max) = step_len(&dir) else {
            status = SolveStatus::NumericalFailure;
            message = "primal iterate lost definiteness".into();
            break;
        };
        let alpha = (cfg.step_fraction * a_max).min(1.0);
        if alpha < 1e-9 {
            small_steps += 1;
            if small_steps >= 3 {
                status = SolveStatus::NumericalFailure;
                message = "step length stalled".into();
                break;
            }
        } else {
            small_steps = 0;
        }

        for (a, b) in u.iter_mut().zip(&dir.du) {
            *a += alpha * b;
        }
        for (a, b) in y.iter_mut().zip(&dir.dy) {
            *a += alpha * b;
        }
        for k in 0..nblocks {
            axpy_mat(&mut xs[k], alpha, &dir.dxs[k]);
            xs[k] = sym_part(&xs[k]);
            axpy_mat(&mut zs[k], alpha, &dir.dzs[k]);
            zs[k] = sym_part(&zs[k]);
        }
        tau += alpha * dir.dtau;
        kappa += alpha * dir.dkappa;
    }

    // A stalled run whose best iterate is close to feasible gets one
    // polishing pass; it only counts if the tolerances then hold exactly.
    let mut polished = None;
    let stopped_early = !status.is_success()
        && !matches!(status, SolveStatus::InfeasibleCertificate | SolveStatus::DualInfeasible)
        && tau > POLISH_MIN_TAU_KAPPA * kappa;
    if let Some(mut snap) = best.filter(|b| stopped_early && b.dual_ok && b.merit <= POLISH_RANGE) {
        if let Some(err) = polish(&pr, &mut snap) {
            if cfg.verbose {
                eprintln!("ipm polish: residual {err:.2e}");
            }
            if primal_ok(&pr, cfg, err, 1.0 + pr.b_norm.max(pr.term_norm(&snap.u, &snap.xs))) {
                status = if pr.has_c { SolveStatus::Optimal } else { SolveStatus::Feasible };
                message = format!("converged after polishing ({message})");
                polished = Some(snap);
            }
        }
    }

    // Map back to the caller's layout and units.
    let ncols = problem.ncols();
    let mut x = vec![0.0; ncols];
    let tau_out = if tau > 0.0 { tau } else { 1.0 };
    let (u, xs, t) = match &polished {
        Some(snap) => (&snap.u, &snap.xs, 1.0),
        None => (&u, &xs, tau_out),
    };
    for (k, &j) in pr.free_cols.iter().enumerate() {
        x[j] = u[k] / t;
    }
    for (blk, xm) in pr.blocks.iter().zip(xs) {
        let v = svec(xm);
        for (i, val) in v.into_iter().enumerate() {
            x[blk.offset + i] = val / t;
        }
    }
    let y_out: Vec<f64> = y.iter().zip(&pr.scale).map(|(y, s)| y * s / tau_out).collect();
    let primal_residual = max_abs(&problem.residual(&x));
    SolveOutcome {
        status,
        x: status.is_success().then_some(x),
        y: y_out,
        ray,
        primal_residual,
        dual_residual: stats.1,
        relative_gap: stats.2,
        primal_objective: stats.3,
        dual_objective: stats.4,
        iterations,
        elapsed: start.elapsed(),
        message,
    }
}
