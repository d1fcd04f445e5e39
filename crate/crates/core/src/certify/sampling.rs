//! Dense sampling of the quantified inequalities a certificate must satisfy.

use serde::Serialize;

use super::{Certificate, MARGIN_FLOOR};
use crate::par;
use crate::poly::{CompiledField, CompiledPoly, Polynomial};
use crate::semialg::{sample, sample_boundary, sample_where, ProblemInstance, SetError, BOUNDARY_TOL};
use crate::sosbuild::Method;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// The initial set.
    Initial,
    /// The closure of the safe set minus the target.
    Flow,
    /// The boundary of the safe set.
    Boundary,
}

/// Sample points per region, drawn once and shared by every certificate
/// checked against the same instance.
#[derive(Debug, Clone)]
pub struct SamplePool {
    pub seed: u64,
    pub initial: Vec<Vec<f64>>,
    pub flow: Vec<Vec<f64>>,
    pub boundary: Vec<Vec<f64>>,
}

impl SamplePool {
    pub fn draw(instance: &ProblemInstance, per_region: usize, seed: u64) -> Result<Self, SetError> {
        let bbox = &instance.bounding_box;
        let initial = sample(&instance.initial, per_region, bbox, par::derive_seed(seed, 1))?.points;
        let boundary = sample_boundary(&instance.safe, per_region, bbox, par::derive_seed(seed, 2))?;
        let h = CompiledPoly::new(instance.safe.h());
        let g = CompiledField::from_polys(instance.target.constraints());
        let mut flow = sample_where(
            |x| h.eval(x) <= 0.0 && g.max_value(x) >= 0.0,
            per_region,
            bbox,
            par::derive_seed(seed, 3),
        )?
        .points;
        // The closure includes the part of the boundary outside the target.
        flow.extend(boundary.iter().filter(|x| g.max_value(x) >= -BOUNDARY_TOL).cloned());
        Ok(SamplePool { seed, initial, flow, boundary })
    }

    pub fn points(&self, region: Region) -> &[Vec<f64>] {
        match region {
            Region::Initial => &self.initial,
            Region::Flow => &self.flow,
            Region::Boundary => &self.boundary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintMargin {
    pub constraint: String,
    pub region: Region,
    pub samples: usize,
    /// Least signed slack over the samples (negative = violated).
    pub min_margin: f64,
    pub worst_point: Vec<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingReport {
    pub seed: u64,
    pub total_samples: usize,
    pub constraints: Vec<ConstraintMargin>,
    pub passed: bool,
}

/// Inequalities `expr - offset >= 0` implied by the certificate's method.
pub(super) fn inequalities(cert: &Certificate, instance: &ProblemInstance) -> Vec<(String, Region, Polynomial, f64)> {
    let n = cert.nvars;
    let get = |name: &str| cert.polynomials.get(name).cloned().unwrap_or_else(|| Polynomial::zero(n));
    let lie = |p: &Polynomial| p.lie_derivative(&instance.field).expect("field dimension");
    let half_eps = 0.5 * cert.eps;
    let mut out = Vec::new();
    match &cert.method {
        Method::Prajna => {
            let v = get("v");
            out.push(("-v >= 0".into(), Region::Initial, -&v, 0.0));
            out.push(("-grad v . f > 0".into(), Region::Flow, -&lie(&v), half_eps));
            out.push(("v > 0".into(), Region::Boundary, v, half_eps));
        }
        Method::ExpGbf { beta } => {
            let v = get("v");
            out.push(("v > 0".into(), Region::Initial, v.clone(), half_eps));
            out.push(("grad v . f - beta v >= 0".into(), Region::Flow, &lie(&v) - &v.scale(*beta), 0.0));
            out.push(("-v >= 0".into(), Region::Boundary, -&v, 0.0));
        }
        Method::AsymGbf | Method::GeneralGbf { .. } => {
            let v = get("v");
            let w = get("w");
            out.push(("v > 0".into(), Region::Initial, v.clone(), half_eps));
            match &cert.method {
                Method::GeneralGbf { multiplier } => {
                    out.push(("grad v . f - m v >= 0".into(), Region::Flow, &lie(&v) - &(multiplier * &v), 0.0))
                }
                _ => out.push(("grad v . f >= 0".into(), Region::Flow, lie(&v), 0.0)),
            }
            out.push(("grad w . f - v >= 0".into(), Region::Flow, &lie(&w) - &v, 0.0));
            out.push(("-v >= 0".into(), Region::Boundary, -&v, 0.0));
        }
        Method::Combined { beta } => {
            let v1 = get("v1");
            let v2 = get("v2");
            let w = get("w");
            out.push(("v1 + v2 > 0".into(), Region::Initial, &v1 + &v2, half_eps));
            out.push(("grad v1 . f >= 0".into(), Region::Flow, lie(&v1), 0.0));
            out.push(("grad w . f - v1 >= 0".into(), Region::Flow, &lie(&w) - &v1, 0.0));
            out.push(("grad v2 . f - beta v2 >= 0".into(), Region::Flow, &lie(&v2) - &v2.scale(*beta), 0.0));
            out.push(("-v1 >= 0".into(), Region::Boundary, -&v1, 0.0));
            out.push(("-v2 >= 0".into(), Region::Boundary, -&v2, 0.0));
        }
    }
    out
}

pub(super) fn margin_of(name: String, region: Region, expr: &Polynomial, offset: f64, pts: &[Vec<f64>]) -> ConstraintMargin {
    let c = CompiledPoly::new(expr);
    let slacks = par::map_slice(pts, |x| c.eval(x) - offset);
    let mut min_margin = f64::INFINITY;
    let mut worst = 0;
    for (k, &s) in slacks.iter().enumerate() {
        // NaN counts as a violation.
        if !(s >= min_margin) {
            min_margin = s;
            worst = k;
        }
    }
    let worst_point = pts.get(worst).cloned().unwrap_or_default();
    // A positive offset marks a strict inequality `expr > 0`: the floor
    // absorbs solver noise but may not let the expression reach zero.
    let strict_ok = !(offset > 0.0) || min_margin + offset > 0.0;
    let passed = !pts.is_empty() && min_margin >= MARGIN_FLOOR && strict_ok;
    ConstraintMargin { constraint: name, region, samples: pts.len(), min_margin, worst_point, passed }
}

pub fn validate_sampling_with(cert: &Certificate, instance: &ProblemInstance, pool: &SamplePool) -> SamplingReport {
    let constraints: Vec<ConstraintMargin> = inequalities(cert, instance)
        .into_iter()
        .map(|(name, region, expr, offset)| margin_of(name, region, &expr, offset, pool.points(region)))
        .collect();
    let total_samples = pool.initial.len() + pool.flow.len() + pool.boundary.len();
    let passed = constraints.iter().all(|c| c.passed);
    SamplingReport { seed: pool.seed, total_samples, constraints, passed }
}

/// Draws `per_region` points for each region from `seed` and checks every
/// inequality of the certificate's method.
pub fn validate_sampling(
    cert: &Certificate,
    instance: &ProblemInstance,
    per_region: usize,
    seed: u64,
) -> Result<SamplingReport, SetError> {
    let pool = SamplePool::draw(instance, per_region, seed)?;
    Ok(validate_sampling_with(cert, instance, &pool))
}
