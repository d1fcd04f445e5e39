//! Independent oracles shared by the test targets.
#![allow(dead_code)]

use gbarrier::poly::{Monomial, PolyVector, Polynomial};
use gbarrier::sdp::svec::{svec_index, SQRT2};
use gbarrier::sdp::{matrix_row, SdpProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense coefficient array over exponents `0..base` per variable, indexed in
/// mixed radix. Arithmetic is the schoolbook definition with no sharing of
/// code with the sparse implementation.
#[derive(Clone, Debug)]
pub struct Dense {
    pub nvars: usize,
    pub base: usize,
    pub c: Vec<f64>,
}

impl Dense {
    pub fn zero(nvars: usize, base: usize) -> Self {
        Dense { nvars, base, c: vec![0.0; base.pow(nvars as u32)] }
    }

    fn exps(&self, mut idx: usize) -> Vec<usize> {
        (0..self.nvars)
            .map(|_| {
                let e = idx % self.base;
                idx /= self.base;
                e
            })
            .collect()
    }

    fn index(&self, e: &[usize]) -> Option<usize> {
        let mut idx = 0;
        for k in (0..self.nvars).rev() {
            if e[k] >= self.base {
                return None;
            }
            idx = idx * self.base + e[k];
        }
        Some(idx)
    }

    pub fn from_poly(p: &Polynomial, base: usize) -> Self {
        let mut d = Dense::zero(p.nvars(), base);
        for (m, c) in p.terms() {
            let e: Vec<usize> = m.exponents().iter().map(|&x| x as usize).collect();
            let i = d.index(&e).expect("exponent fits the dense base");
            d.c[i] += c;
        }
        d
    }

    pub fn add(&self, o: &Dense) -> Dense {
        Dense { c: self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect(), ..self.clone() }
    }

    pub fn mul(&self, o: &Dense) -> Dense {
        let mut out = Dense::zero(self.nvars, self.base);
        for i in 0..self.c.len() {
            if self.c[i] == 0.0 {
                continue;
            }
            let ei = self.exps(i);
            for j in 0..o.c.len() {
                if o.c[j] == 0.0 {
                    continue;
                }
                let ej = o.exps(j);
                let e: Vec<usize> = ei.iter().zip(&ej).map(|(a, b)| a + b).collect();
                let k = out.index(&e).expect("product fits the dense base");
                out.c[k] += self.c[i] * o.c[j];
            }
        }
        out
    }

    pub fn derivative(&self, var: usize) -> Dense {
        let mut out = Dense::zero(self.nvars, self.base);
        for i in 0..self.c.len() {
            let mut e = self.exps(i);
            if e[var] == 0 {
                continue;
            }
            let f = e[var] as f64;
            e[var] -= 1;
            let k = out.index(&e).unwrap();
            out.c[k] += f * self.c[i];
        }
        out
    }

    /// Largest coefficient difference divided by `max(1, largest coefficient)`.
    pub fn scaled_diff(&self, o: &Dense) -> f64 {
        let scale = self.c.iter().chain(&o.c).fold(1.0f64, |a, v| a.max(v.abs()));
        self.c.iter().zip(&o.c).fold(0.0f64, |a, (x, y)| a.max((x - y).abs())) / scale
    }
}

pub fn random_poly(rng: &mut ChaCha8Rng, nvars: usize, degree: u32) -> Polynomial {
    let mut terms = Vec::new();
    let nterms = rng.random_range(0..=8);
    for _ in 0..nterms {
        let mut left = degree;
        let mut e = vec![0u32; nvars];
        for slot in e.iter_mut() {
            let k = rng.random_range(0..=left);
            *slot = k;
            left -= k;
        }
        let mag = 10f64.powf(rng.random_range(-3.0..3.0));
        terms.push((Monomial::new(&e), mag * rng.random_range(-1.0..1.0)));
    }
    Polynomial::from_terms(nvars, terms).unwrap()
}

/// Worst scaled coefficient error of add, mul and Lie derivative against
/// the dense oracle over `cases` random instances of each operation.
pub fn algebra_oracle_error(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for case in 0..cases {
        let n = rng.random_range(1..=3);
        let p = random_poly(&mut rng, n, 4);
        let q = random_poly(&mut rng, n, 4);
        let base = 9;
        let (dp, dq) = (Dense::from_poly(&p, base), Dense::from_poly(&q, base));
        worst = worst.max(Dense::from_poly(&p.try_add(&q).unwrap(), base).scaled_diff(&dp.add(&dq)));
        worst = worst.max(Dense::from_poly(&p.try_mul(&q).unwrap(), base).scaled_diff(&dp.mul(&dq)));

        let field: Vec<Polynomial> = (0..n).map(|_| random_poly(&mut rng, n, 3)).collect();
        let lie = p.lie_derivative(&PolyVector::new(field.clone()).unwrap()).unwrap();
        let mut want = Dense::zero(n, base);
        for (i, fi) in field.iter().enumerate() {
            want = want.add(&dp.derivative(i).mul(&Dense::from_poly(fi, base)));
        }
        let err = Dense::from_poly(&lie, base).scaled_diff(&want);
        assert!(err.is_finite(), "case {case}");
        worst = worst.max(err);
    }
    worst
}

/// Worst relative error of the symbolic gradient against central
/// differences at `points` random points.
pub fn gradient_fd_error(points: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let n = rng.random_range(1..=3);
        let p = random_poly(&mut rng, n, 5).scale(1.0 / p_scale(&mut rng));
        let grad = p.gradient();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = grad.eval(&x).unwrap();
        for i in 0..n {
            let h = 1e-5;
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (p.eval(&xp).unwrap() - p.eval(&xm).unwrap()) / (2.0 * h);
            let scale = 1.0f64.max(g[i].abs()).max(p.max_abs_coeff());
            worst = worst.max((g[i] - fd).abs() / scale);
        }
    }
    worst
}

fn p_scale(rng: &mut ChaCha8Rng) -> f64 {
    10f64.powf(rng.random_range(0.0..1.0))
}

/// minimize X11 subject to trace(X) = 1 over 2x2 PSD matrices.
pub fn trace_one_problem() -> SdpProblem {
    let mut p = SdpProblem::new(0, vec![2]);
    let row = matrix_row(&p, 0, &[(0, 0, 1.0), (1, 1, 1.0)]);
    p.push_row(row, 1.0);
    p.c[svec_index(0, 0)] = 1.0;
    p
}

fn random_psd(rng: &mut ChaCha8Rng, d: usize) -> Vec<Vec<f64>> {
    let g: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let mut x = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            x[i][j] = (0..d).map(|k| g[i][k] * g[j][k]).sum::<f64>();
        }
        x[i][i] += 0.1;
    }
    x
}

/// A random SDP with a known strictly feasible point `x0`.
pub fn random_feasible(seed: u64) -> (SdpProblem, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nblocks = rng.random_range(1..4);
    let dims: Vec<usize> = (0..nblocks).map(|_| rng.random_range(1..=10)).collect();
    let n_free = rng.random_range(0..4);
    let mut p = SdpProblem::new(n_free, dims.clone());
    let mut x0 = vec![0.0; p.ncols()];
    for v in x0.iter_mut().take(n_free) {
        *v = rng.random_range(-2.0..2.0);
    }
    for (k, &d) in dims.iter().enumerate() {
        let off = p.block_offset(k);
        let m = random_psd(&mut rng, d);
        for j in 0..d {
            for i in 0..=j {
                x0[off + svec_index(i, j)] = if i == j { m[i][j] } else { SQRT2 * m[i][j] };
            }
        }
    }
    let ncols = p.ncols();
    let nrows = rng.random_range(1..=(ncols - n_free).clamp(1, 25));
    for _ in 0..nrows {
        let mut row = Vec::new();
        for c in 0..ncols {
            if rng.random_bool(0.4) {
                row.push((c, rng.random_range(-1.0..1.0)));
            }
        }
        if row.is_empty() {
            row.push((rng.random_range(0..ncols), 1.0));
        }
        let b: f64 = row.iter().map(|&(c, v)| v * x0[c]).sum();
        p.push_row(row, b);
    }
    (p, x0)
}

/// Smallest eigenvalue by cyclic Jacobi rotations.
pub fn jacobi_min_eig(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    for _ in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p][q] * a[p][q];
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
        if off < 1e-30 {
            break;
        }
    }
    (0..n).map(|i| a[i][i]).fold(f64::INFINITY, f64::min)
}
