//! Sparse multivariate polynomials over `f64`.
//!
//! Every object handled by the verifier (vector fields, set descriptions,
//! certificate polynomials, multipliers) is a [`Polynomial`] in canonical
//! sparse form: a map from [`Monomial`] to coefficient with no entry smaller
//! than [`ZERO_THRESHOLD`] in magnitude.

mod compiled;
mod parse;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use smallvec::SmallVec;
use thiserror::Error;

pub use compiled::{CompiledPoly, CompiledField};
pub use parse::parse_polynomial;

/// Coefficients at or below this magnitude are dropped from the term map.
pub const ZERO_THRESHOLD: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolyError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("polynomial evaluated to a non-finite value")]
    NonFinite,
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

/// Exponent vector of a monomial `x1^a1 * ... * xn^an`.
///
/// Ordered graded-lexicographically: lower total degree first, then by
/// exponent of `x1` descending, then `x2`, and so on. With this order the
/// degree-2 basis in two variables reads `1, x1, x2, x1^2, x1*x2, x2^2`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Monomial(SmallVec<[u32; 4]>);

impl Monomial {
    pub fn one(nvars: usize) -> Self {
        Monomial(SmallVec::from_elem(0, nvars))
    }

    pub fn new(exponents: &[u32]) -> Self {
        Monomial(SmallVec::from_slice(exponents))
    }

    /// The monomial `x_{var+1}`.
    pub fn var(nvars: usize, var: usize) -> Self {
        let mut m = Self::one(nvars);
        m.0[var] = 1;
        m
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// Exponent-wise sum, i.e. the product of the two monomials.
    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.nvars(), other.nvars());
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(point)
            .fold(1.0, |acc, (&e, &x)| acc * powi(x, e))
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_one() {
            return write!(f, "1");
        }
        write_monomial(f, self)
    }
}

fn write_monomial(f: &mut fmt::Formatter<'_>, m: &Monomial) -> fmt::Result {
    let mut first = true;
    for (i, &e) in m.0.iter().enumerate() {
        if e == 0 {
            continue;
        }
        if !first {
            write!(f, " * ")?;
        }
        first = false;
        if e == 1 {
            write!(f, "x{}", i + 1)?;
        } else {
            write!(f, "x{}^{}", i + 1, e)?;
        }
    }
    Ok(())
}

#[inline]
pub(crate) fn powi(x: f64, e: u32) -> f64 {
    match e {
        0 => 1.0,
        1 => x,
        2 => x * x,
        _ => x.powi(e as i32),
    }
}

/// All monomials in `nvars` variables with total degree `<= degree`, in
/// graded lexicographic order. The length is `C(nvars + degree, nvars)`.
pub fn monomial_basis(nvars: usize, degree: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    let mut exps = vec![0u32; nvars];
    for d in 0..=degree {
        fill_degree(&mut out, &mut exps, 0, d);
    }
    out
}

fn fill_degree(out: &mut Vec<Monomial>, exps: &mut [u32], var: usize, remaining: u32) {
    if exps.is_empty() {
        if remaining == 0 {
            out.push(Monomial::new(exps));
        }
        return;
    }
    if var == exps.len() - 1 {
        exps[var] = remaining;
        out.push(Monomial::new(exps));
        exps[var] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        exps[var] = e;
        fill_degree(out, exps, var + 1, remaining - e);
    }
    exps[var] = 0;
}

/// Sparse polynomial in canonical form.
#[derive(Clone, PartialEq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::one(nvars), c);
        p
    }

    /// The coordinate polynomial `x_{var+1}`.
    pub fn var(nvars: usize, var: usize) -> Self {
        Self::monomial(Monomial::var(nvars, var), 1.0)
    }

    pub fn monomial(m: Monomial, c: f64) -> Self {
        let mut p = Self::zero(m.nvars());
        p.add_term(m, c);
        p
    }

    /// Builds a polynomial from `(monomial, coefficient)` pairs; repeated
    /// monomials are summed.
    pub fn from_terms(
        nvars: usize,
        terms: impl IntoIterator<Item = (Monomial, f64)>,
    ) -> Result<Self, PolyError> {
        let mut p = Self::zero(nvars);
        for (m, c) in terms {
            if m.nvars() != nvars {
                return Err(PolyError::DimensionMismatch { expected: nvars, found: m.nvars() });
            }
            p.add_term(m, c);
        }
        Ok(p)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> + '_ {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Accumulates `c * m`, pruning the entry if it cancels.
    pub fn add_term(&mut self, m: Monomial, c: f64) {
        debug_assert_eq!(m.nvars(), self.nvars);
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                if c.abs() > ZERO_THRESHOLD {
                    e.insert(c);
                }
            }
            Entry::Occupied(mut e) => {
                let v = *e.get() + c;
                if v.abs() > ZERO_THRESHOLD {
                    *e.get_mut() = v;
                } else {
                    e.remove();
                }
            }
        }
    }

    fn check_dim(&self, other: &Polynomial) -> Result<(), PolyError> {
        if self.nvars != other.nvars {
            return Err(PolyError::DimensionMismatch { expected: self.nvars, found: other.nvars });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_dim(other)?;
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            out.add_term(m.clone(), c);
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_dim(other)?;
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            out.add_term(m.clone(), -c);
        }
        Ok(out)
    }

    pub fn try_mul(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_dim(other)?;
        let mut out = Polynomial::zero(self.nvars);
        for (ma, &ca) in &self.terms {
            for (mb, &cb) in &other.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut out = Polynomial::zero(self.nvars);
        for (m, &c) in &self.terms {
            out.add_term(m.clone(), c * s);
        }
        out
    }

    pub fn pow(&self, e: u32) -> Polynomial {
        let mut out = Polynomial::constant(self.nvars, 1.0);
        for _ in 0..e {
            out = &out * self;
        }
        out
    }

    /// Partial derivative with respect to `x_{var+1}`.
    pub fn derivative(&self, var: usize) -> Polynomial {
        let mut out = Polynomial::zero(self.nvars);
        for (m, &c) in &self.terms {
            let e = m.0[var];
            if e == 0 {
                continue;
            }
            let mut dm = m.clone();
            dm.0[var] -= 1;
            out.add_term(dm, c * e as f64);
        }
        out
    }

    pub fn gradient(&self) -> PolyVector {
        PolyVector { entries: (0..self.nvars).map(|i| self.derivative(i)).collect() }
    }

    /// `grad(self) . field`, the derivative of `self` along the flow of `field`.
    pub fn lie_derivative(&self, field: &PolyVector) -> Result<Polynomial, PolyError> {
        if field.len() != self.nvars {
            return Err(PolyError::DimensionMismatch { expected: self.nvars, found: field.len() });
        }
        let mut out = Polynomial::zero(self.nvars);
        for (i, fi) in field.entries.iter().enumerate() {
            self.check_dim(fi)?;
            let di = self.derivative(i);
            for (ma, &ca) in &di.terms {
                for (mb, &cb) in &fi.terms {
                    out.add_term(ma.mul(mb), ca * cb);
                }
            }
        }
        Ok(out)
    }

    /// Evaluates at `point`; non-finite results are reported as errors.
    pub fn eval(&self, point: &[f64]) -> Result<f64, PolyError> {
        if point.len() != self.nvars {
            return Err(PolyError::DimensionMismatch { expected: self.nvars, found: point.len() });
        }
        let v = self.eval_unchecked(point);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(PolyError::NonFinite)
        }
    }

    pub(crate) fn eval_unchecked(&self, point: &[f64]) -> f64 {
        self.terms.iter().map(|(m, &c)| c * m.eval(point)).sum()
    }

    /// Drops terms with magnitude at or below `tol`.
    pub fn pruned(&self, tol: f64) -> Polynomial {
        Polynomial {
            nvars: self.nvars,
            terms: self.terms.iter().filter(|(_, c)| c.abs() > tol).map(|(m, &c)| (m.clone(), c)).collect(),
        }
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial({self})")
    }
}

/// Text form accepted by [`parse_polynomial`]: `c * x1^a1 * ... * xn^an`
/// terms joined by ` + ` / ` - `. Coefficients use Rust's shortest
/// round-trip formatting, so `parse(p.to_string()) == p`.
impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, &c)) in self.terms.iter().enumerate() {
            let mag = c.abs();
            if k == 0 {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else if c < 0.0 {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if m.is_one() {
                write!(f, "{mag:?}")?;
            } else if mag == 1.0 {
                write_monomial(f, m)?;
            } else {
                write!(f, "{mag:?} * ")?;
                write_monomial(f, m)?;
            }
        }
        Ok(())
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $try:ident) => {
        impl $trait<&Polynomial> for &Polynomial {
            type Output = Polynomial;
            /// Panics on dimension mismatch; use the `try_` form for fallible input.
            fn $method(self, rhs: &Polynomial) -> Polynomial {
                self.$try(rhs).expect("polynomial dimension mismatch")
            }
        }
        impl $trait<Polynomial> for Polynomial {
            type Output = Polynomial;
            fn $method(self, rhs: Polynomial) -> Polynomial {
                (&self).$method(&rhs)
            }
        }
    };
}

forward_binop!(Add, add, try_add);
forward_binop!(Sub, sub, try_sub);
forward_binop!(Mul, mul, try_mul);

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

/// A polynomial vector field `(f_1, ..., f_n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyVector {
    entries: Vec<Polynomial>,
}

impl PolyVector {
    /// Requires `entries.len()` to equal the common dimension of the entries.
    pub fn new(entries: Vec<Polynomial>) -> Result<Self, PolyError> {
        let n = entries.len();
        for p in &entries {
            if p.nvars() != n {
                return Err(PolyError::DimensionMismatch { expected: n, found: p.nvars() });
            }
        }
        Ok(PolyVector { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Polynomial] {
        &self.entries
    }

    pub fn degree(&self) -> u32 {
        self.entries.iter().map(Polynomial::degree).max().unwrap_or(0)
    }

    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>, PolyError> {
        self.entries.iter().map(|p| p.eval(point)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str, n: usize) -> Polynomial {
        parse_polynomial(s, n).unwrap()
    }

    #[test]
    fn add_cancels_and_identity() {
        assert_eq!(p("x1^2 + x2", 2) + p("-x1^2 + 1", 2), p("x2 + 1", 2));
        let q = p("3*x1*x2 - 2", 2);
        assert_eq!(&q + &Polynomial::zero(2), q);
        assert_eq!(p("2*x1 + 3*x2^2", 2) + p("x1 + x2^2", 2), p("3*x1 + 4*x2^2", 2));
    }

    #[test]
    fn mul_examples() {
        assert_eq!(p("x1 + x2", 2) * p("x1 - x2", 2), p("x1^2 - x2^2", 2));
        let q = p("x1^3 - 0.5*x2", 2);
        assert_eq!(&q * &Polynomial::constant(2, 1.0), q);
        assert_eq!(p("x1 + 2", 1) * p("x1^2 + 3*x1", 1), p("x1^3 + 5*x1^2 + 6*x1", 1));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let e = p("x1", 1).try_add(&p("x1", 2)).unwrap_err();
        assert_eq!(e, PolyError::DimensionMismatch { expected: 1, found: 2 });
        assert!(p("x1", 1).try_mul(&p("x2", 2)).is_err());
        assert!(p("x1", 2).eval(&[1.0]).is_err());
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(p("x1^2", 1).gradient().entries(), &[p("2*x1", 1)]);
        let g = p("x1^2*x2 + x2^3", 2).gradient();
        assert_eq!(g.entries(), &[p("2*x1*x2", 2), p("x1^2 + 3*x2^2", 2)]);
        let g = Polynomial::constant(2, 5.0).gradient();
        assert!(g.entries().iter().all(Polynomial::is_zero));
        assert_eq!(g.len(), 2);
    }

    #[test]
    fn lie_derivative_examples() {
        let rot = PolyVector::new(vec![p("-x2", 2), p("x1", 2)]).unwrap();
        assert!(p("x1^2 + x2^2", 2).lie_derivative(&rot).unwrap().is_zero());

        let illu = PolyVector::new(vec![p("-0.5*x1 - 0.5*x2 + 0.5*x1*x2", 2), p("-0.5*x2 + 0.5", 2)]).unwrap();
        assert_eq!(p("x1", 2).lie_derivative(&illu).unwrap(), p("-0.5*x1 - 0.5*x2 + 0.5*x1*x2", 2));

        let swap = PolyVector::new(vec![p("x2", 2), p("x1", 2)]).unwrap();
        assert_eq!(p("x1*x2", 2).lie_derivative(&swap).unwrap(), p("x2^2 + x1^2", 2));

        let short = PolyVector::new(vec![p("x1", 1)]).unwrap();
        assert!(p("x1", 2).lie_derivative(&short).is_err());
    }

    #[test]
    fn eval_examples() {
        assert_eq!(p("x1^2*x2", 2).eval(&[2.0, 3.0]).unwrap(), 12.0);
        assert_eq!(Polynomial::zero(3).eval(&[1.0, -4.0, 2.5]).unwrap(), 0.0);
        assert_eq!(p("x1^3 - 2*x1*x2 + 1", 2).eval(&[1.5, -2.0]).unwrap(), 10.375);
        assert_eq!(p("x1^400", 1).eval(&[1e10]), Err(PolyError::NonFinite));
    }

    #[test]
    fn basis_order_and_counts() {
        let b = monomial_basis(2, 2);
        let shown: Vec<String> = b.iter().map(|m| format!("{m:?}")).collect();
        assert_eq!(shown, ["1", "x1", "x2", "x1^2", "x1 * x2", "x2^2"]);
        assert_eq!(monomial_basis(2, 4).len(), 15);
        assert_eq!(monomial_basis(3, 4).len(), 35);
        assert!(b.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn pruning_threshold() {
        let q = p("x1 + 1", 1) - p("x1 + 1", 1);
        assert!(q.is_zero());
        let mut r = Polynomial::zero(1);
        r.add_term(Monomial::one(1), 1e-15);
        assert!(r.is_zero());
    }

    #[test]
    fn display_round_trips() {
        let q = p("-0.1*x1^2*x3 + x2 - 3 + 1e-7*x3^5", 3);
        assert_eq!(parse_polynomial(&q.to_string(), 3).unwrap(), q);
        assert_eq!(Polynomial::zero(2).to_string(), "0");
    }
}
