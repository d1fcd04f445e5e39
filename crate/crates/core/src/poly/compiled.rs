//! Flat evaluators for polynomials that are evaluated millions of times
//! (sampling, level-set grids, trajectory integration).

use smallvec::SmallVec;

use super::{PolyVector, Polynomial};

/// A polynomial flattened to coefficient and exponent arrays, evaluated with
/// per-variable power tables.
#[derive(Clone, Debug)]
pub struct CompiledPoly {
    nvars: usize,
    coeffs: Vec<f64>,
    exps: Vec<u32>,
    max_exp: Vec<u32>,
}

impl CompiledPoly {
    pub fn new(p: &Polynomial) -> Self {
        let nvars = p.nvars();
        let mut coeffs = Vec::with_capacity(p.num_terms());
        let mut exps = Vec::with_capacity(p.num_terms() * nvars);
        let mut max_exp = vec![0u32; nvars];
        for (m, c) in p.terms() {
            coeffs.push(c);
            for (k, &e) in m.exponents().iter().enumerate() {
                exps.push(e);
                max_exp[k] = max_exp[k].max(e);
            }
        }
        CompiledPoly { nvars, coeffs, exps, max_exp }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// Evaluates at `point`; the caller guarantees `point.len() == nvars`.
    pub fn eval(&self, point: &[f64]) -> f64 {
        debug_assert_eq!(point.len(), self.nvars);
        let mut table = PowerTable::new(point, &self.max_exp);
        table.fill(point, &self.max_exp);
        self.eval_with(&table)
    }

    fn eval_with(&self, table: &PowerTable) -> f64 {
        let n = self.nvars;
        let mut acc = 0.0;
        for (t, &c) in self.coeffs.iter().enumerate() {
            let mut term = c;
            for k in 0..n {
                let e = self.exps[t * n + k];
                if e != 0 {
                    term *= table.get(k, e);
                }
            }
            acc += term;
        }
        acc
    }
}

struct PowerTable {
    stride: usize,
    data: SmallVec<[f64; 96]>,
}

impl PowerTable {
    fn new(point: &[f64], max_exp: &[u32]) -> Self {
        let stride = max_exp.iter().copied().max().unwrap_or(0) as usize + 1;
        PowerTable { stride, data: SmallVec::from_elem(1.0, stride * point.len()) }
    }

    fn fill(&mut self, point: &[f64], max_exp: &[u32]) {
        for (k, &x) in point.iter().enumerate() {
            let row = &mut self.data[k * self.stride..(k + 1) * self.stride];
            for e in 1..=max_exp[k] as usize {
                row[e] = row[e - 1] * x;
            }
        }
    }

    #[inline]
    fn get(&self, var: usize, e: u32) -> f64 {
        self.data[var * self.stride + e as usize]
    }
}

/// Compiled form of a vector field, sharing one power table per evaluation.
#[derive(Clone, Debug)]
pub struct CompiledField {
    parts: Vec<CompiledPoly>,
    max_exp: Vec<u32>,
}

impl CompiledField {
    pub fn new(field: &PolyVector) -> Self {
        Self::from_polys(field.entries())
    }

    pub fn from_polys(polys: &[Polynomial]) -> Self {
        let parts: Vec<CompiledPoly> = polys.iter().map(CompiledPoly::new).collect();
        let nvars = parts.first().map_or(0, |p| p.nvars);
        let mut max_exp = vec![0u32; nvars];
        for p in &parts {
            for (m, &e) in max_exp.iter_mut().zip(&p.max_exp) {
                *m = (*m).max(e);
            }
        }
        CompiledField { parts, max_exp }
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn eval_into(&self, point: &[f64], out: &mut [f64]) {
        let mut table = PowerTable::new(point, &self.max_exp);
        table.fill(point, &self.max_exp);
        for (o, p) in out.iter_mut().zip(&self.parts) {
            *o = p.eval_with(&table);
        }
    }

    /// Largest component value; `-inf` for an empty field.
    pub fn max_value(&self, point: &[f64]) -> f64 {
        let mut table = PowerTable::new(point, &self.max_exp);
        table.fill(point, &self.max_exp);
        self.parts.iter().map(|p| p.eval_with(&table)).fold(f64::NEG_INFINITY, f64::max)
    }
}
