//! Reading an exponential certificate as a general one with `m = beta`.
//!
//! With `w = v / beta` the coupling identity is the derivative identity
//! divided by `beta`, so every multiplier and Gram block is either reused or
//! scaled by `1 / beta`.

use thiserror::Error;

use super::sampling::{margin_of, ConstraintMargin, Region, SamplePool};
use super::{Certificate, GramBlock};
use crate::poly::{CompiledPoly, Polynomial};
use crate::semialg::ProblemInstance;
use crate::sosbuild::{declared_identities, BuildOptions, Method, Objective};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbedError {
    #[error("expected an exponential certificate, got {0}")]
    NotExponential(String),
    #[error("certificate is missing decision {0}")]
    Missing(String),
}

fn scaled(g: &GramBlock, s: f64) -> GramBlock {
    GramBlock {
        basis: g.basis.clone(),
        matrix: g.matrix.iter().map(|r| r.iter().map(|x| x * s).collect()).collect(),
    }
}

/// Builds the general certificate `(v, w = v / beta)` with constant
/// multiplier `m = beta` from an exponential certificate.
pub fn embed_exp_as_general(cert: &Certificate, instance: &ProblemInstance) -> Result<Certificate, EmbedError> {
    let Method::ExpGbf { beta } = cert.method else {
        return Err(EmbedError::NotExponential(cert.method.to_string()));
    };
    let n = cert.nvars;
    let method = Method::GeneralGbf { multiplier: Polynomial::constant(n, beta) };
    let v = cert.polynomials.get("v").ok_or_else(|| EmbedError::Missing("v".into()))?;
    let mut polynomials = cert.polynomials.clone();
    polynomials.insert("w".into(), v.scale(1.0 / beta));

    let mut grams = cert.grams.clone();
    for (name, g) in &cert.grams {
        // Derivative multipliers s1_j, s2_j pair with coupling s3_j, s4_j.
        let coupled = if let Some(j) = name.strip_prefix("s1_") {
            Some(format!("s3_{j}"))
        } else if let Some(j) = name.strip_prefix("s2_") {
            Some(format!("s4_{j}"))
        } else {
            name.strip_prefix("gram_derivative_").map(|j| format!("gram_coupling_{j}"))
        };
        if let Some(c) = coupled {
            grams.insert(c, scaled(g, 1.0 / beta));
        }
    }

    let objective = if cert.identities.iter().any(|i| i.name == "volume_cap") {
        Objective::Volume
    } else {
        Objective::Feasibility
    };
    let opts = BuildOptions { eps: cert.eps, objective, ..BuildOptions::default() };
    let identities = declared_identities(instance, &method, cert.degree, &opts);
    Ok(Certificate {
        method,
        degree: cert.degree,
        eps: cert.eps,
        nvars: n,
        polynomials,
        grams,
        identities,
        solver: cert.solver.clone(),
    })
}

/// Samples `grad v . f >= 0` at flow-region points where `v >= 0`: the part
/// of the asymptotic derivative condition an exponential certificate
/// implies.
pub fn embedding_flow_check(cert: &Certificate, instance: &ProblemInstance, pool: &SamplePool) -> ConstraintMargin {
    let v = cert.polynomials.get("v").cloned().unwrap_or_else(|| Polynomial::zero(cert.nvars));
    let cv = CompiledPoly::new(&v);
    let pts: Vec<Vec<f64>> = pool.flow.iter().filter(|x| cv.eval(x) >= 0.0).cloned().collect();
    let lie = v.lie_derivative(&instance.field).expect("field dimension");
    let mut m = margin_of("grad v . f >= 0 where v >= 0".into(), Region::Flow, &lie, 0.0, &pts);
    // No sample with v >= 0 makes the check vacuous.
    m.passed |= pts.is_empty();
    m
}
