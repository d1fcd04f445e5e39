//! Compilation of a reach-avoid instance and certificate method into a
//! sum-of-squares program in SDP standard form.
//!
//! Every `p in SOS` membership becomes a coefficient-matching system
//! `p = z' G z` with a PSD Gram block `G`. SOS multipliers are Gram blocks
//! over `monomial_basis(n, d/2)`; free polynomials are coefficient vectors
//! over `monomial_basis(n, d)`.

mod method;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

pub use method::Method;

use crate::certify::{Certificate, GramBlock};
use crate::poly::{monomial_basis, CompiledPoly, Monomial, PolyError, Polynomial};
use crate::sdp::svec::{smat, svec_index, svec_len, SQRT2};
use crate::sdp::SdpProblem;
use crate::semialg::{sample_where, ProblemInstance, SetError, BOUNDARY_TOL};

/// Default strictness margin.
pub const DEFAULT_EPS: f64 = 1e-6;
/// Samples used to check a multiplier template for nonnegativity.
pub const TEMPLATE_SAMPLES: usize = 10_000;
/// Most negative template value tolerated on the closure of the safe set.
pub const TEMPLATE_MARGIN: f64 = -1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BuildError {
    #[error("degree must be even, got {0}")]
    OddDegree(u32),
    #[error("degree must be at least 2, got {0}")]
    DegreeTooSmall(u32),
    #[error("beta must be positive, got {0}")]
    NonPositiveBeta(f64),
    #[error("eps must be positive, got {0}")]
    NonPositiveEps(f64),
    #[error("multiplier template is negative on the safe set: m({point:?}) = {value:.3e}")]
    TemplateNegative { value: f64, point: Vec<f64> },
    #[error("identity {identity} cannot hold: monomial {monomial} has data but no decision variables")]
    Inconsistent { identity: String, monomial: String },
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Set(#[from] SetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Zero objective.
    #[default]
    Feasibility,
    /// Maximize the box average of the value function, capped at 1 on the
    /// safe set by an extra identity so the program stays bounded.
    Volume,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildOptions {
    pub eps: f64,
    pub objective: Objective,
    /// Use separate boundary multipliers for `v1` and `v2` in the combined
    /// method instead of one shared `p`.
    pub split_boundary_multiplier: bool,
    /// Seed for the multiplier-template sampling check.
    pub seed: u64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { eps: DEFAULT_EPS, objective: Objective::Feasibility, split_boundary_multiplier: false, seed: 0 }
    }
}

/// Ordered list of even degrees to try.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DegreePlan {
    degrees: Vec<u32>,
}

impl DegreePlan {
    pub fn new(degrees: Vec<u32>) -> Result<Self, BuildError> {
        for (k, &d) in degrees.iter().enumerate() {
            if d % 2 == 1 {
                return Err(BuildError::OddDegree(d));
            }
            if d < 2 {
                return Err(BuildError::DegreeTooSmall(d));
            }
            if k > 0 && degrees[k - 1] >= d {
                return Err(BuildError::DegreeTooSmall(d));
            }
        }
        Ok(DegreePlan { degrees })
    }

    /// `2, 4, ..., max` (max rounded down to even).
    pub fn up_to(max: u32) -> Self {
        DegreePlan { degrees: (1..=max / 2).map(|k| 2 * k).collect() }
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }
}

impl Default for DegreePlan {
    fn default() -> Self {
        Self::up_to(20)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    /// Unrestricted coefficients.
    Free,
    /// `z' G z` with `G` PSD.
    Sos,
}

/// A decision polynomial and where its variables live in the SDP.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub name: String,
    pub kind: DecisionKind,
    /// Coefficient basis for free polynomials, Gram basis for SOS ones.
    pub basis: Vec<Monomial>,
    /// First column of the variable slice.
    pub offset: usize,
    /// PSD block index for SOS decisions.
    pub block: Option<usize>,
}

impl Decision {
    pub fn len(&self) -> usize {
        match self.kind {
            DecisionKind::Free => self.basis.len(),
            DecisionKind::Sos => svec_len(self.basis.len()),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Degree of the polynomial this decision represents.
    pub fn degree(&self) -> u32 {
        let top = self.basis.iter().map(Monomial::degree).max().unwrap_or(0);
        match self.kind {
            DecisionKind::Free => top,
            DecisionKind::Sos => 2 * top,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SymbolTable {
    pub decisions: Vec<Decision>,
}

impl SymbolTable {
    pub fn get(&self, name: &str) -> Option<&Decision> {
        self.decisions.iter().find(|d| d.name == name)
    }

    pub fn ncols(&self) -> usize {
        self.decisions.iter().map(Decision::len).sum()
    }
}

/// One summand of an identity's target polynomial.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    /// `factor * var`
    Scaled { var: String, factor: Polynomial },
    /// `scale * (grad var . f)`
    Lie { var: String, scale: f64 },
    /// Data with no decision variables.
    Fixed(Polynomial),
}

/// `sum(terms) = z' G z` with `G` the Gram decision named `gram`.
#[derive(Debug, Clone, PartialEq)]
pub struct SosIdentity {
    pub name: String,
    pub terms: Vec<Term>,
    pub gram: String,
}

impl SosIdentity {
    /// Fixed (data-only) part of the target.
    pub fn fixed_part(&self, nvars: usize) -> Polynomial {
        let mut p = Polynomial::zero(nvars);
        for t in &self.terms {
            if let Term::Fixed(q) = t {
                p = &p + q;
            }
        }
        p
    }
}

/// A compiled program with everything needed to read back a certificate.
#[derive(Debug, Clone)]
pub struct Program {
    pub method: Method,
    pub degree: u32,
    pub eps: f64,
    pub problem: SdpProblem,
    pub symbols: SymbolTable,
    pub identities: Vec<SosIdentity>,
    /// `(identity index, monomial)` matched by each row.
    pub row_labels: Vec<(usize, Monomial)>,
}

struct Builder<'a> {
    instance: &'a ProblemInstance,
    degree: u32,
    free: Vec<(String, Vec<Monomial>)>,
    sos: Vec<(String, Vec<Monomial>)>,
    identities: Vec<SosIdentity>,
}

impl<'a> Builder<'a> {
    fn n(&self) -> usize {
        self.instance.dimension()
    }

    fn free(&mut self, name: &str) -> String {
        if !self.free.iter().any(|(n, _)| n == name) {
            let basis = monomial_basis(self.n(), self.degree);
            self.free.push((name.to_string(), basis));
        }
        name.to_string()
    }

    fn sos(&mut self, name: &str) -> String {
        let basis = monomial_basis(self.n(), self.degree / 2);
        self.sos.push((name.to_string(), basis));
        name.to_string()
    }

    fn scaled(&self, var: &str, factor: Polynomial) -> Term {
        Term::Scaled { var: var.to_string(), factor }
    }

    fn konst(&self, c: f64) -> Polynomial {
        Polynomial::constant(self.n(), c)
    }

    fn identity(&mut self, name: String, terms: Vec<Term>) {
        let gram = format!("gram_{name}");
        self.identities.push(SosIdentity { name, terms, gram });
    }

    /// `sum_i value_i + sum_i s0_i l_i - eps` (the initial-set identity), where
    /// `value` lists `(var, sign)` pairs.
    fn initial(&mut self, value: &[(&str, f64)], eps: Option<f64>) {
        let mut terms: Vec<Term> = value.iter().map(|&(v, s)| self.scaled(v, self.konst(s))).collect();
        if let Some(eps) = eps {
            terms.push(Term::Fixed(self.konst(-eps)));
        }
        let ls: Vec<Polynomial> = self.instance.initial.constraints().to_vec();
        for (i, l) in ls.into_iter().enumerate() {
            let s = self.sos(&format!("s0_{}", i + 1));
            terms.push(Term::Scaled { var: s, factor: l });
        }
        self.identity("initial".into(), terms);
    }

    /// For every target constraint `g_j`: `head + s_a h - s_b g_j`.
    fn per_target(&mut self, label: &str, head: &[Term], a: u32, b: u32) {
        let h = self.instance.safe.h().clone();
        let gs: Vec<Polynomial> = self.instance.target.constraints().to_vec();
        for (j, g) in gs.into_iter().enumerate() {
            let j = j + 1;
            let sa = self.sos(&format!("s{a}_{j}"));
            let sb = self.sos(&format!("s{b}_{j}"));
            let mut terms = head.to_vec();
            terms.push(Term::Scaled { var: sa, factor: h.clone() });
            terms.push(Term::Scaled { var: sb, factor: -&g });
            self.identity(format!("{label}_{j}"), terms);
        }
    }

    /// `sign * var - mult * h`.
    fn boundary(&mut self, name: &str, var: &str, sign: f64, mult: &str, eps: Option<f64>) {
        let h = self.instance.safe.h().clone();
        let mut terms = vec![self.scaled(var, self.konst(sign))];
        if let Some(eps) = eps {
            terms.push(Term::Fixed(self.konst(-eps)));
        }
        terms.push(Term::Scaled { var: mult.to_string(), factor: -&h });
        self.identity(name.into(), terms);
    }
}

fn check_template(instance: &ProblemInstance, m: &Polynomial, seed: u64) -> Result<(), BuildError> {
    if m.nvars() != instance.dimension() {
        return Err(PolyError::DimensionMismatch { expected: instance.dimension(), found: m.nvars() }.into());
    }
    let h = CompiledPoly::new(instance.safe.h());
    let samples = sample_where(|x| h.eval(x) <= BOUNDARY_TOL, TEMPLATE_SAMPLES, &instance.bounding_box, seed)?;
    let cm = CompiledPoly::new(m);
    for p in &samples.points {
        let v = cm.eval(p);
        if !(v >= TEMPLATE_MARGIN) {
            return Err(BuildError::TemplateNegative { value: v, point: p.clone() });
        }
    }
    Ok(())
}

/// Symbolic identities and decision declarations for `method` at `degree`.
fn declare<'a>(
    instance: &'a ProblemInstance,
    method: &Method,
    degree: u32,
    opts: &BuildOptions,
) -> Builder<'a> {
    let mut b = Builder { instance, degree, free: Vec::new(), sos: Vec::new(), identities: Vec::new() };
    let eps = opts.eps;
    let n = instance.dimension();
    match method {
        Method::Prajna => {
            let v = b.free("v");
            b.initial(&[(&v, -1.0)], None);
            let head = [Term::Lie { var: v.clone(), scale: -1.0 }, Term::Fixed(Polynomial::constant(n, -eps))];
            b.per_target("derivative", &head, 1, 2);
            let q = b.free("q");
            b.boundary("boundary", &v, 1.0, &q, Some(eps));
        }
        Method::ExpGbf { beta } => {
            let v = b.free("v");
            b.initial(&[(&v, 1.0)], Some(eps));
            let head = [
                Term::Lie { var: v.clone(), scale: 1.0 },
                Term::Scaled { var: v.clone(), factor: Polynomial::constant(n, -beta) },
            ];
            b.per_target("derivative", &head, 1, 2);
            let p = b.free("p");
            b.boundary("boundary", &v, -1.0, &p, None);
        }
        Method::AsymGbf | Method::GeneralGbf { .. } => {
            let v = b.free("v");
            let w = b.free("w");
            b.initial(&[(&v, 1.0)], Some(eps));
            let mut head = vec![Term::Lie { var: v.clone(), scale: 1.0 }];
            if let Method::GeneralGbf { multiplier } = method {
                head.push(Term::Scaled { var: v.clone(), factor: -multiplier });
            }
            b.per_target("derivative", &head, 1, 2);
            let head = [
                Term::Lie { var: w.clone(), scale: 1.0 },
                Term::Scaled { var: v.clone(), factor: Polynomial::constant(n, -1.0) },
            ];
            b.per_target("coupling", &head, 3, 4);
            let p = b.free("p");
            b.boundary("boundary", &v, -1.0, &p, None);
        }
        Method::Combined { beta } => {
            let v1 = b.free("v1");
            let v2 = b.free("v2");
            let w = b.free("w");
            b.initial(&[(&v1, 1.0), (&v2, 1.0)], Some(eps));
            b.per_target("derivative", &[Term::Lie { var: v1.clone(), scale: 1.0 }], 1, 2);
            let head = [
                Term::Lie { var: w.clone(), scale: 1.0 },
                Term::Scaled { var: v1.clone(), factor: Polynomial::constant(n, -1.0) },
            ];
            b.per_target("coupling", &head, 3, 4);
            let head = [
                Term::Lie { var: v2.clone(), scale: 1.0 },
                Term::Scaled { var: v2.clone(), factor: Polynomial::constant(n, -beta) },
            ];
            b.per_target("exp_derivative", &head, 5, 6);
            let p = b.free("p");
            let p2 = if opts.split_boundary_multiplier { b.free("p2") } else { p.clone() };
            b.boundary("boundary_v1", &v1, -1.0, &p, None);
            b.boundary("boundary_v2", &v2, -1.0, &p2, None);
        }
    }
    if opts.objective == Objective::Volume {
        let h = instance.safe.h().clone();
        let s = b.sos("s_cap");
        let mut terms = vec![Term::Fixed(Polynomial::constant(n, 1.0))];
        for (var, sign) in value_parts(method) {
            terms.push(Term::Scaled { var: var.into(), factor: Polynomial::constant(n, -sign) });
        }
        terms.push(Term::Scaled { var: s, factor: h });
        b.identity("volume_cap".into(), terms);
    }
    b
}

/// Symbolic identities `build_program` would emit, without compiling rows.
pub(crate) fn declared_identities(
    instance: &ProblemInstance,
    method: &Method,
    degree: u32,
    opts: &BuildOptions,
) -> Vec<SosIdentity> {
    declare(instance, method, degree, opts).identities
}

/// `(decision, sign)` pairs whose signed sum is the reported value function.
/// Prajna's `v` is negative on the initial set, so its value is `-v`.
pub fn value_parts(method: &Method) -> Vec<(&'static str, f64)> {
    match method {
        Method::Prajna => vec![("v", -1.0)],
        Method::Combined { .. } => vec![("v1", 1.0), ("v2", 1.0)],
        _ => vec![("v", 1.0)],
    }
}

fn term_degree(t: &Term, degrees: &BTreeMap<String, u32>, field_degree: u32) -> u32 {
    match t {
        Term::Scaled { var, factor } => degrees[var] + factor.degree(),
        Term::Lie { var, .. } => (degrees[var] + field_degree).saturating_sub(1),
        Term::Fixed(p) => p.degree(),
    }
}

/// Average of `x^alpha` over the box.
fn box_moment(m: &Monomial, bounds: &[(f64, f64)]) -> f64 {
    m.exponents()
        .iter()
        .zip(bounds)
        .map(|(&e, &(lo, hi))| {
            let k = e as i32 + 1;
            (hi.powi(k) - lo.powi(k)) / (k as f64 * (hi - lo))
        })
        .product()
}

/// Accumulates `coeff * col` into the row for `mono`.
type RowMap = BTreeMap<Monomial, (BTreeMap<usize, f64>, f64)>;

fn add_entry(rows: &mut RowMap, mono: Monomial, col: usize, coeff: f64) {
    if coeff != 0.0 {
        *rows.entry(mono).or_default().0.entry(col).or_insert(0.0) += coeff;
    }
}

/// Coefficient-matching rows for one identity, keyed by monomial.
///
/// Each row reads `sum_cols A x = -fixed coefficient`, where the Gram block
/// of the identity enters with a minus sign.
pub fn expand_identity(
    identity: &SosIdentity,
    symbols: &SymbolTable,
    instance: &ProblemInstance,
) -> Vec<(Monomial, Vec<(usize, f64)>, f64)> {
    let mut rows: RowMap = BTreeMap::new();
    let field = &instance.field;
    let sos_cols = |d: &Decision, factor: &Polynomial, sign: f64, rows: &mut RowMap| {
        let z = &d.basis;
        for j in 0..z.len() {
            for i in 0..=j {
                let col = d.offset + svec_index(i, j);
                let w = if i == j { 1.0 } else { SQRT2 };
                let zz = z[i].mul(&z[j]);
                for (m, c) in factor.terms() {
                    add_entry(rows, m.mul(&zz), col, sign * w * c);
                }
            }
        }
    };
    for t in &identity.terms {
        match t {
            Term::Scaled { var, factor } => {
                let d = symbols.get(var).expect("undeclared decision");
                match d.kind {
                    DecisionKind::Free => {
                        for (k, a) in d.basis.iter().enumerate() {
                            for (m, c) in factor.terms() {
                                add_entry(&mut rows, m.mul(a), d.offset + k, c);
                            }
                        }
                    }
                    DecisionKind::Sos => sos_cols(d, factor, 1.0, &mut rows),
                }
            }
            Term::Lie { var, scale } => {
                let d = symbols.get(var).expect("undeclared decision");
                assert_eq!(d.kind, DecisionKind::Free, "Lie derivative of an SOS decision");
                for (k, a) in d.basis.iter().enumerate() {
                    let ex = a.exponents();
                    for (i, fi) in field.entries().iter().enumerate() {
                        if ex[i] == 0 {
                            continue;
                        }
                        let mut lowered = ex.to_vec();
                        lowered[i] -= 1;
                        let da = Monomial::new(&lowered);
                        let c0 = scale * ex[i] as f64;
                        for (m, c) in fi.terms() {
                            add_entry(&mut rows, m.mul(&da), d.offset + k, c0 * c);
                        }
                    }
                }
            }
            Term::Fixed(p) => {
                for (m, c) in p.terms() {
                    rows.entry(m.clone()).or_default().1 -= c;
                }
            }
        }
    }
    let gram = symbols.get(&identity.gram).expect("undeclared Gram block");
    let one = Polynomial::constant(instance.dimension(), 1.0);
    sos_cols(gram, &one, -1.0, &mut rows);
    rows.into_iter()
        .map(|(m, (cols, rhs))| (m, cols.into_iter().filter(|&(_, v)| v != 0.0).collect(), rhs))
        .collect()
}

/// Compiles `(instance, method, degree)` into an SDP plus symbol table.
pub fn build_program(
    instance: &ProblemInstance,
    method: &Method,
    degree: u32,
    opts: &BuildOptions,
) -> Result<Program, BuildError> {
    if degree % 2 == 1 {
        return Err(BuildError::OddDegree(degree));
    }
    if degree < 2 {
        return Err(BuildError::DegreeTooSmall(degree));
    }
    if !(opts.eps > 0.0) {
        return Err(BuildError::NonPositiveEps(opts.eps));
    }
    if let Some(beta) = method.beta() {
        if !(beta > 0.0) {
            return Err(BuildError::NonPositiveBeta(beta));
        }
    }
    if let Some(m) = method.multiplier() {
        check_template(instance, m, opts.seed)?;
    }
    let n = instance.dimension();
    let b = declare(instance, method, degree, opts);

    // Degrees of declared decisions, then each identity's Gram basis.
    let mut degrees: BTreeMap<String, u32> = BTreeMap::new();
    for (name, _) in &b.free {
        degrees.insert(name.clone(), degree);
    }
    for (name, basis) in &b.sos {
        degrees.insert(name.clone(), 2 * basis.iter().map(Monomial::degree).max().unwrap_or(0));
    }
    let field_degree = instance.field.degree();
    let mut grams: Vec<(String, Vec<Monomial>)> = Vec::new();
    for id in &b.identities {
        let top = id.terms.iter().map(|t| term_degree(t, &degrees, field_degree)).max().unwrap_or(0);
        grams.push((id.gram.clone(), monomial_basis(n, top / 2)));
    }

    // Column layout: free coefficients, then PSD blocks.
    let mut symbols = SymbolTable::default();
    let mut offset = 0;
    for (name, basis) in &b.free {
        symbols.decisions.push(Decision {
            name: name.clone(),
            kind: DecisionKind::Free,
            basis: basis.clone(),
            offset,
            block: None,
        });
        offset += basis.len();
    }
    let n_free = offset;
    let mut block_dims = Vec::new();
    for (name, basis) in b.sos.iter().chain(&grams) {
        symbols.decisions.push(Decision {
            name: name.clone(),
            kind: DecisionKind::Sos,
            basis: basis.clone(),
            offset,
            block: Some(block_dims.len()),
        });
        block_dims.push(basis.len());
        offset += svec_len(basis.len());
    }

    let mut problem = SdpProblem::new(n_free, block_dims);
    let mut row_labels = Vec::new();
    for (k, id) in b.identities.iter().enumerate() {
        for (m, cols, rhs) in expand_identity(id, &symbols, instance) {
            if cols.is_empty() {
                if rhs != 0.0 {
                    return Err(BuildError::Inconsistent { identity: id.name.clone(), monomial: format!("{m:?}") });
                }
                continue;
            }
            problem.push_row(cols, rhs);
            row_labels.push((k, m));
        }
    }

    if opts.objective == Objective::Volume {
        let bounds = instance.bounding_box.bounds();
        for (var, sign) in value_parts(method) {
            let d = symbols.get(var).expect("value decision");
            for (k, a) in d.basis.iter().enumerate() {
                problem.c[d.offset + k] -= sign * box_moment(a, bounds);
            }
        }
    }

    Ok(Program { method: method.clone(), degree, eps: opts.eps, problem, symbols, identities: b.identities, row_labels })
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("solution has length {found}, program has {expected} columns")]
pub struct LengthMismatch {
    pub expected: usize,
    pub found: usize,
}

/// Reads named polynomials and Gram blocks out of a solution vector.
pub fn reconstruct(program: &Program, x: &[f64]) -> Result<Certificate, LengthMismatch> {
    let expected = program.symbols.ncols();
    if x.len() != expected {
        return Err(LengthMismatch { expected, found: x.len() });
    }
    let mut polynomials = BTreeMap::new();
    let mut grams = BTreeMap::new();
    let nvars = program.problem_nvars();
    for d in &program.symbols.decisions {
        match d.kind {
            DecisionKind::Free => {
                let p = Polynomial::from_terms(
                    nvars,
                    d.basis.iter().zip(&x[d.offset..d.offset + d.len()]).map(|(m, &c)| (m.clone(), c)),
                )
                .expect("basis dimension");
                polynomials.insert(d.name.clone(), p);
            }
            DecisionKind::Sos => {
                let g = smat(&x[d.offset..d.offset + d.len()], d.basis.len());
                let dim = d.basis.len();
                let matrix: Vec<Vec<f64>> = (0..dim).map(|i| (0..dim).map(|j| g[(i, j)]).collect()).collect();
                grams.insert(d.name.clone(), GramBlock { basis: d.basis.clone(), matrix });
            }
        }
    }
    Ok(Certificate {
        method: program.method.clone(),
        degree: program.degree,
        eps: program.eps,
        nvars,
        polynomials,
        grams,
        identities: program.identities.clone(),
        solver: None,
    })
}

impl Program {
    fn problem_nvars(&self) -> usize {
        self.symbols.decisions.first().and_then(|d| d.basis.first()).map_or(0, Monomial::nvars)
    }

    pub fn identity_count(&self) -> usize {
        self.identities.len()
    }
}
