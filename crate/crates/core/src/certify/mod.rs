//! Certificates and their independent validation.
//!
//! A [`Certificate`] is what the solver's output means: named polynomials and
//! Gram matrices. Validation never looks at SDP rows; it re-expands every
//! identity with polynomial arithmetic, checks Gram definiteness with a
//! dense eigensolver, and samples every quantified inequality.

mod embed;
mod levelset;
mod sampling;

use std::collections::BTreeMap;

use faer::{Mat, Side};
use serde::Serialize;

pub use embed::{embed_exp_as_general, embedding_flow_check, EmbedError};
pub use levelset::{extract_level_set, LevelSet, LevelSetError};
pub use sampling::{
    validate_sampling, validate_sampling_with, ConstraintMargin, Region, SamplePool, SamplingReport,
};

use crate::poly::{Monomial, Polynomial};
use crate::sdp::SolveStatus;
use crate::semialg::ProblemInstance;
use crate::sosbuild::{value_parts, Method, SosIdentity, Term};

/// Largest tolerated coefficient of `target - z' G z`.
pub const RESIDUAL_TOL: f64 = 1e-6;
/// Smallest tolerated Gram eigenvalue.
pub const EIGEN_FLOOR: f64 = -1e-7;
/// Smallest tolerated sampled slack.
pub const MARGIN_FLOOR: f64 = -1e-6;

/// A Gram matrix and its monomial basis: the polynomial `z' G z`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramBlock {
    pub basis: Vec<Monomial>,
    pub matrix: Vec<Vec<f64>>,
}

impl GramBlock {
    pub fn polynomial(&self, nvars: usize) -> Polynomial {
        let mut p = Polynomial::zero(nvars);
        for (i, zi) in self.basis.iter().enumerate() {
            for (j, zj) in self.basis.iter().enumerate() {
                p.add_term(zi.mul(zj), self.matrix[i][j]);
            }
        }
        p
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let d = self.basis.len();
        if d == 0 {
            return 0.0;
        }
        let m = Mat::from_fn(d, d, |i, j| 0.5 * (self.matrix[i][j] + self.matrix[j][i]));
        m.self_adjoint_eigenvalues(Side::Lower).ok().and_then(|e| e.first().copied()).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverStats {
    pub backend: String,
    pub status: SolveStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub relative_gap: f64,
}

/// Named decision polynomials and Gram blocks read back from a solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub method: Method,
    pub degree: u32,
    pub eps: f64,
    pub nvars: usize,
    /// Free decision polynomials (`v`, `w`, `p`, ...).
    pub polynomials: BTreeMap<String, Polynomial>,
    /// SOS multipliers and per-identity Gram blocks.
    pub grams: BTreeMap<String, GramBlock>,
    pub identities: Vec<SosIdentity>,
    pub solver: Option<SolverStats>,
}

impl Certificate {
    /// The decision named `name`: a free polynomial, or `z' G z` for an SOS
    /// decision.
    pub fn decision(&self, name: &str) -> Option<Polynomial> {
        if let Some(p) = self.polynomials.get(name) {
            return Some(p.clone());
        }
        self.grams.get(name).map(|g| g.polynomial(self.nvars))
    }

    /// SOS multipliers as polynomials (Gram blocks not owned by an identity).
    pub fn multipliers(&self) -> BTreeMap<String, Polynomial> {
        let owned: Vec<&str> = self.identities.iter().map(|i| i.gram.as_str()).collect();
        self.grams
            .iter()
            .filter(|(k, _)| !owned.contains(&k.as_str()))
            .map(|(k, g)| (k.clone(), g.polynomial(self.nvars)))
            .collect()
    }

    /// The reported value function: `v`, `v1 + v2` for the combined method,
    /// `-v` for the classical barrier. Its positive set is the certified
    /// region.
    pub fn value_function(&self) -> Polynomial {
        let mut out = Polynomial::zero(self.nvars);
        for (name, sign) in value_parts(&self.method) {
            if let Some(p) = self.polynomials.get(name) {
                out = &out + &p.scale(sign);
            }
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let polys: BTreeMap<&String, String> = self.polynomials.iter().map(|(k, p)| (k, p.to_string())).collect();
        let grams: BTreeMap<&String, serde_json::Value> = self
            .grams
            .iter()
            .map(|(k, g)| {
                let basis: Vec<&[u32]> = g.basis.iter().map(Monomial::exponents).collect();
                (k, serde_json::json!({ "basis": basis, "matrix": g.matrix }))
            })
            .collect();
        serde_json::json!({
            "method": self.method,
            "degree": self.degree,
            "eps": self.eps,
            "value_function": self.value_function().to_string(),
            "polynomials": polys,
            "grams": grams,
            "solver": self.solver,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityResidual {
    pub identity: String,
    pub max_residual: f64,
    /// Number of monomials the residual is measured over.
    pub monomials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgebraicReport {
    pub identities: Vec<IdentityResidual>,
    pub max_residual: f64,
    pub min_gram_eigenvalue: f64,
    pub gram_eigenvalues: BTreeMap<String, f64>,
    pub passed: bool,
}

/// Re-expands `target - z' G z` for every identity with polynomial
/// arithmetic and reports the largest residual coefficient and the least
/// Gram eigenvalue.
pub fn validate_algebraic(cert: &Certificate, instance: &ProblemInstance) -> AlgebraicReport {
    let n = cert.nvars;
    let mut identities = Vec::new();
    for id in &cert.identities {
        let mut target = Polynomial::zero(n);
        for t in &id.terms {
            let part = match t {
                Term::Scaled { var, factor } => {
                    let p = cert.decision(var).unwrap_or_else(|| Polynomial::zero(n));
                    factor * &p
                }
                Term::Lie { var, scale } => {
                    let p = cert.decision(var).unwrap_or_else(|| Polynomial::zero(n));
                    p.lie_derivative(&instance.field).expect("field dimension").scale(*scale)
                }
                Term::Fixed(p) => p.clone(),
            };
            target = &target + &part;
        }
        let sos = cert.grams.get(&id.gram).map(|g| g.polynomial(n)).unwrap_or_else(|| Polynomial::zero(n));
        let residual = &target - &sos;
        let mut monos: Vec<&Monomial> = target.terms().map(|(m, _)| m).collect();
        monos.extend(sos.terms().map(|(m, _)| m));
        monos.sort();
        monos.dedup();
        identities.push(IdentityResidual {
            identity: id.name.clone(),
            max_residual: residual.max_abs_coeff(),
            monomials: monos.len(),
        });
    }
    let gram_eigenvalues: BTreeMap<String, f64> =
        cert.grams.iter().map(|(k, g)| (k.clone(), g.min_eigenvalue())).collect();
    let max_residual = identities.iter().fold(0.0f64, |a, r| a.max(r.max_residual));
    let min_gram_eigenvalue = gram_eigenvalues.values().fold(f64::INFINITY, |a, &v| a.min(v));
    let passed = max_residual <= RESIDUAL_TOL && min_gram_eigenvalue >= EIGEN_FLOOR;
    AlgebraicReport { identities, max_residual, min_gram_eigenvalue, gram_eigenvalues, passed }
}

/// Combined algebraic and sampling verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub algebraic: AlgebraicReport,
    pub sampling: SamplingReport,
    /// Bound on how far any sampled slack can fall below zero given the
    /// algebraic residual: `r * (matched monomials) * max |x^a|` over the box.
    pub residual_slack_bound: f64,
    pub passed: bool,
    pub label: String,
}

/// `max |x^alpha|` over the box for monomials up to `degree`.
pub fn max_monomial_magnitude(instance: &ProblemInstance, degree: u32) -> f64 {
    let r = instance.bounding_box.bounds().iter().fold(1.0f64, |a, &(lo, hi)| a.max(lo.abs()).max(hi.abs()));
    r.powi(degree as i32)
}

pub fn validate(cert: &Certificate, instance: &ProblemInstance, pool: &SamplePool) -> ValidationReport {
    let algebraic = validate_algebraic(cert, instance);
    let sampling = validate_sampling_with(cert, instance, pool);
    let top_degree = cert.grams.values().map(|g| 2 * g.basis.iter().map(Monomial::degree).max().unwrap_or(0)).max();
    let monos = algebraic.identities.iter().map(|r| r.monomials).max().unwrap_or(0);
    let residual_slack_bound =
        algebraic.max_residual * monos as f64 * max_monomial_magnitude(instance, top_degree.unwrap_or(0));
    let passed = algebraic.passed && sampling.passed;
    let label = if passed {
        format!("falsification-free at {} samples", sampling.total_samples)
    } else {
        "validation failed".to_string()
    };
    ValidationReport { algebraic, sampling, residual_slack_bound, passed, label }
}
