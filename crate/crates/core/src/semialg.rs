//! Basic semialgebraic sets `{x | p(x) < 0 for all p}` and the reach-avoid
//! problem instance built from them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::par;
use crate::poly::{CompiledField, CompiledPoly, PolyError, PolyVector, Polynomial};

/// Half-width of the band treated as the zero level set.
pub const BOUNDARY_TOL: f64 = 1e-9;
/// Bisection steps used to locate `h = 0` on a segment.
pub const BISECTION_DEPTH: usize = 60;
/// Below this acceptance rate a set is reported as (numerically) empty.
pub const MIN_ACCEPTANCE: f64 = 1e-4;

const SHARDS: usize = 16;
const DRAWS_PER_SHARD: usize = 4096;
const MIN_DRAWS_BEFORE_VERDICT: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SetError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("set needs at least one defining polynomial")]
    NoConstraints,
    #[error("bounding box is invalid: {0}")]
    BadBox(String),
    #[error("set appears empty or box too loose (acceptance rate {rate:.2e} after {draws} draws)")]
    Empty { rate: f64, draws: usize },
    #[error("boundary not located in box")]
    BoundaryNotFound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Inside,
    Boundary,
    Outside,
}

/// Classifies a point from the largest defining-polynomial value.
pub fn classify(max_value: f64) -> Membership {
    if max_value < -BOUNDARY_TOL {
        Membership::Inside
    } else if max_value <= BOUNDARY_TOL {
        Membership::Boundary
    } else {
        Membership::Outside
    }
}

/// Anything described by a conjunction of strict polynomial inequalities.
pub trait SemialgebraicSet {
    fn dimension(&self) -> usize;
    fn defining(&self) -> &[Polynomial];

    fn max_value(&self, point: &[f64]) -> Result<f64, PolyError> {
        let mut m = f64::NEG_INFINITY;
        for p in self.defining() {
            m = m.max(p.eval(point)?);
        }
        Ok(m)
    }

    fn membership(&self, point: &[f64]) -> Result<Membership, PolyError> {
        self.max_value(point).map(classify)
    }

    fn compiled(&self) -> CompiledField {
        CompiledField::from_polys(self.defining())
    }
}

/// `{x | p(x) < 0 for every p in constraints}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasicOpenSet {
    constraints: Vec<Polynomial>,
}

impl BasicOpenSet {
    pub fn new(constraints: Vec<Polynomial>) -> Result<Self, SetError> {
        let first = constraints.first().ok_or(SetError::NoConstraints)?;
        let n = first.nvars();
        if let Some(bad) = constraints.iter().find(|p| p.nvars() != n) {
            return Err(PolyError::DimensionMismatch { expected: n, found: bad.nvars() }.into());
        }
        Ok(BasicOpenSet { constraints })
    }

    pub fn constraints(&self) -> &[Polynomial] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }
}

impl SemialgebraicSet for BasicOpenSet {
    fn dimension(&self) -> usize {
        self.constraints[0].nvars()
    }
    fn defining(&self) -> &[Polynomial] {
        &self.constraints
    }
}

/// The safe set `{h < 0}` with boundary `{h = 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SafeSet {
    h: [Polynomial; 1],
}

impl SafeSet {
    pub fn new(h: Polynomial) -> Self {
        SafeSet { h: [h] }
    }

    pub fn h(&self) -> &Polynomial {
        &self.h[0]
    }
}

impl SemialgebraicSet for SafeSet {
    fn dimension(&self) -> usize {
        self.h[0].nvars()
    }
    fn defining(&self) -> &[Polynomial] {
        &self.h
    }
}

/// Axis-aligned box `[lo_1, hi_1] x ... x [lo_n, hi_n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBox {
    bounds: Vec<(f64, f64)>,
}

impl BoundingBox {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self, SetError> {
        if bounds.is_empty() {
            return Err(SetError::BadBox("no intervals".into()));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(SetError::BadBox(format!("interval {} is not finite", i + 1)));
            }
            if lo >= hi {
                return Err(SetError::BadBox(format!("interval {} has lo >= hi", i + 1)));
            }
        }
        Ok(BoundingBox { bounds })
    }

    pub fn dimension(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn volume(&self) -> f64 {
        self.bounds.iter().map(|(lo, hi)| hi - lo).product()
    }

    fn draw(&self, rng: &mut impl Rng, out: &mut [f64]) {
        for (x, &(lo, hi)) in out.iter_mut().zip(&self.bounds) {
            *x = rng.random_range(lo..hi);
        }
    }
}

/// Points drawn by rejection sampling, with the observed acceptance rate.
#[derive(Debug, Clone)]
pub struct Samples {
    pub points: Vec<Vec<f64>>,
    pub draws: usize,
    pub acceptance_rate: f64,
}

fn check_box(bbox: &BoundingBox, dim: usize) -> Result<(), SetError> {
    if bbox.dimension() != dim {
        return Err(PolyError::DimensionMismatch { expected: dim, found: bbox.dimension() }.into());
    }
    Ok(())
}

/// Uniform rejection sampling of `accept` inside `bbox`.
///
/// Draws proceed in rounds of fixed-size shards, each with its own RNG
/// seeded from `(seed, round, shard)`, so the output depends only on the
/// seed. Fails with [`SetError::Empty`] when, after a minimum work budget,
/// fewer than [`MIN_ACCEPTANCE`] of the draws are accepted.
pub fn sample_where<F>(accept: F, count: usize, bbox: &BoundingBox, seed: u64) -> Result<Samples, SetError>
where
    F: Fn(&[f64]) -> bool + Sync + Send,
{
    let n = bbox.dimension();
    let mut points = Vec::with_capacity(count);
    let mut draws = 0usize;
    let mut round = 0u64;
    let hard_budget = MIN_DRAWS_BEFORE_VERDICT.max(count.saturating_mul(20_000));
    while points.len() < count {
        let shards = par::map_range(SHARDS, |s| {
            let mut rng = ChaCha8Rng::seed_from_u64(par::derive_seed(seed, round * SHARDS as u64 + s as u64));
            let mut x = vec![0.0; n];
            let mut found = Vec::new();
            for _ in 0..DRAWS_PER_SHARD {
                bbox.draw(&mut rng, &mut x);
                if accept(&x) {
                    found.push(x.clone());
                }
            }
            found
        });
        draws += SHARDS * DRAWS_PER_SHARD;
        round += 1;
        for shard in shards {
            points.extend(shard);
        }
        let rate = points.len() as f64 / draws as f64;
        if draws >= MIN_DRAWS_BEFORE_VERDICT && rate < MIN_ACCEPTANCE {
            return Err(SetError::Empty { rate, draws });
        }
        if draws >= hard_budget {
            break;
        }
    }
    let acceptance_rate = points.len() as f64 / draws.max(1) as f64;
    points.truncate(count);
    Ok(Samples { points, draws, acceptance_rate })
}

/// Up to `count` strict-interior points of `set`.
pub fn sample<S: SemialgebraicSet + ?Sized>(
    set: &S,
    count: usize,
    bbox: &BoundingBox,
    seed: u64,
) -> Result<Samples, SetError> {
    check_box(bbox, set.dimension())?;
    if count == 0 {
        return Ok(Samples { points: Vec::new(), draws: 0, acceptance_rate: 0.0 });
    }
    let field = set.compiled();
    sample_where(|x| classify(field.max_value(x)) == Membership::Inside, count, bbox, seed)
}

/// Points with `|h| <= BOUNDARY_TOL`, located by bisecting segments between
/// box-sampled points on either side of `h = 0`.
pub fn sample_boundary(safe: &SafeSet, count: usize, bbox: &BoundingBox, seed: u64) -> Result<Vec<Vec<f64>>, SetError> {
    check_box(bbox, safe.dimension())?;
    let n = bbox.dimension();
    let h = CompiledPoly::new(safe.h());
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut round = 0u64;
    let max_rounds = 64 + count / 16;
    while out.len() < count {
        if round as usize >= max_rounds {
            return Err(SetError::BoundaryNotFound);
        }
        let shards = par::map_range(SHARDS, |s| {
            let mut rng = ChaCha8Rng::seed_from_u64(par::derive_seed(seed ^ 0xB0DA_u64, round * SHARDS as u64 + s as u64));
            let mut inside = Vec::new();
            let mut outside = Vec::new();
            let mut x = vec![0.0; n];
            for _ in 0..256 {
                bbox.draw(&mut rng, &mut x);
                let v = h.eval(&x);
                if v < 0.0 {
                    inside.push(x.clone());
                } else if v > 0.0 {
                    outside.push(x.clone());
                }
            }
            inside
                .iter()
                .zip(&outside)
                .filter_map(|(a, b)| bisect(&h, a, b))
                .collect::<Vec<_>>()
        });
        round += 1;
        let before = out.len();
        for shard in shards {
            out.extend(shard);
        }
        if out.len() == before && round >= 4 {
            return Err(SetError::BoundaryNotFound);
        }
    }
    out.truncate(count);
    Ok(out)
}

/// Bisection on the segment from `inside` (h < 0) to `outside` (h > 0).
fn bisect(h: &CompiledPoly, inside: &[f64], outside: &[f64]) -> Option<Vec<f64>> {
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut x = inside.to_vec();
    let at = |t: f64, x: &mut Vec<f64>| {
        for ((xi, a), b) in x.iter_mut().zip(inside).zip(outside) {
            *xi = a + t * (b - a);
        }
    };
    for _ in 0..BISECTION_DEPTH {
        let mid = 0.5 * (lo + hi);
        at(mid, &mut x);
        let v = h.eval(&x);
        if v.abs() <= BOUNDARY_TOL {
            return Some(x);
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi), &mut x);
    (h.eval(&x).abs() <= BOUNDARY_TOL).then_some(x)
}

/// Dynamics plus safe, initial and target sets. Containment of the initial
/// and target sets in the safe set is not checked here.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub field: PolyVector,
    pub safe: SafeSet,
    pub initial: BasicOpenSet,
    pub target: BasicOpenSet,
    pub bounding_box: BoundingBox,
}

impl ProblemInstance {
    pub fn new(
        field: PolyVector,
        safe: SafeSet,
        initial: BasicOpenSet,
        target: BasicOpenSet,
        bounding_box: BoundingBox,
    ) -> Result<Self, SetError> {
        let n = field.len();
        let dims = [safe.dimension(), initial.dimension(), target.dimension(), bounding_box.dimension()];
        if let Some(&bad) = dims.iter().find(|&&d| d != n) {
            return Err(PolyError::DimensionMismatch { expected: n, found: bad }.into());
        }
        Ok(ProblemInstance { field, safe, initial, target, bounding_box })
    }

    pub fn dimension(&self) -> usize {
        self.field.len()
    }
}
