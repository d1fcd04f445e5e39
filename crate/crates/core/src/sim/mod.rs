//! Trajectory integration with reach/exit event detection, Monte-Carlo
//! reach-avoid checks and empirical discount values.
//!
//! Leaving the safe set ends a trajectory with [`Outcome::ExitedSafeSet`];
//! for classification this is the same as freezing the state outside the
//! safe set.

mod dopri;

use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::par;
use crate::poly::{CompiledField, CompiledPoly, PolyError, PolyVector};
use crate::semialg::{sample, ProblemInstance, SetError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub t_max: f64,
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub event_tol: f64,
    /// Hard cap on accepted plus rejected steps.
    pub max_steps: usize,
    /// Keep every accepted step; otherwise only the endpoints.
    pub record: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            t_max: 100.0,
            rtol: 1e-8,
            atol: 1e-10,
            max_step: 1.0,
            event_tol: 1e-9,
            max_steps: 2_000_000,
            record: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("initial state is not finite: {0:?}")]
    NonFinite(Vec<f64>),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Set(#[from] SetError),
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let all = [self.t_max, self.rtol, self.atol, self.max_step, self.event_tol];
        if all.iter().any(|v| !(*v > 0.0 && v.is_finite())) || self.max_steps == 0 {
            return Err(SimError::Config(format!("all parameters must be positive and finite: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    ReachedTargetSafely,
    ExitedSafeSet,
    Timeout,
    /// Step size underflow, step budget exhausted or non-finite state.
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub outcome: Outcome,
    /// First hitting time of the target; present iff the target was reached.
    pub tau: Option<f64>,
    /// Least `-h` along the accepted steps.
    pub min_safety_margin: f64,
    pub steps: usize,
    pub rejected: usize,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.states.first().map_or(0, Vec::len);
        let header: Vec<String> = std::iter::once("t".to_string()).chain((1..=n).map(|i| format!("x{i}"))).collect();
        writeln!(w, "{}", header.join(","))?;
        for (t, x) in self.times.iter().zip(&self.states) {
            let row: Vec<String> = std::iter::once(*t).chain(x.iter().copied()).map(|v| format!("{v:?}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Compiled event functions: `h` for the safe set, the target constraints.
struct Events {
    h: CompiledPoly,
    g: CompiledField,
}

impl Events {
    fn new(instance: &ProblemInstance) -> Self {
        Events { h: CompiledPoly::new(instance.safe.h()), g: CompiledField::from_polys(instance.target.constraints()) }
    }

    fn in_target(&self, x: &[f64]) -> bool {
        self.g.max_value(x) < 0.0
    }

    fn outside_safe(&self, x: &[f64]) -> bool {
        self.h.eval(x) >= 0.0
    }
}

/// Smallest `theta` in `(0, 1]` with `hit(theta)`, given `hit(1)` and not
/// `hit(0)`, bisected until `|value(theta)| <= tol` at the hit side.
fn locate(step: &dopri::Step, n: usize, tol: f64, hit: impl Fn(&[f64]) -> bool, value: impl Fn(&[f64]) -> f64) -> (f64, Vec<f64>) {
    let mut x = vec![0.0; n];
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut best = step.y1.clone();
    for _ in 0..200 {
        if value(&best).abs() <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        step.interpolate(mid, &mut x);
        if hit(&x) {
            hi = mid;
            best.copy_from_slice(&x);
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON {
            break;
        }
    }
    (hi, best)
}

/// Integrates `x' = f(x)` from `x0` until the target is entered, the safe
/// set is left, or `t_max` passes.
pub fn integrate(instance: &ProblemInstance, x0: &[f64], cfg: &SimConfig) -> Result<Trajectory, SimError> {
    cfg.validate()?;
    if x0.len() != instance.dimension() {
        return Err(PolyError::DimensionMismatch { expected: instance.dimension(), found: x0.len() }.into());
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(SimError::NonFinite(x0.to_vec()));
    }
    let field = CompiledField::new(&instance.field);
    let events = Events::new(instance);
    Ok(run(&field, &events, x0, cfg))
}

fn run(field: &CompiledField, ev: &Events, x0: &[f64], cfg: &SimConfig) -> Trajectory {
    let n = x0.len();
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![x0.to_vec()],
        outcome: Outcome::Timeout,
        tau: None,
        min_safety_margin: -ev.h.eval(x0),
        steps: 0,
        rejected: 0,
    };
    if ev.in_target(x0) {
        traj.outcome = Outcome::ReachedTargetSafely;
        traj.tau = Some(0.0);
        return traj;
    }
    if ev.outside_safe(x0) {
        traj.outcome = Outcome::ExitedSafeSet;
        return traj;
    }
    let mut t = 0.0;
    let mut y = x0.to_vec();
    let mut k1 = vec![0.0; n];
    field.eval_into(&y, &mut k1);
    let mut h = dopri::initial_step(field, &y, &k1, cfg.rtol, cfg.atol, cfg.max_step);
    let finish = |traj: &mut Trajectory, t: f64, y: Vec<f64>, outcome: Outcome| {
        if !cfg.record {
            traj.times.truncate(1);
            traj.states.truncate(1);
        }
        traj.times.push(t);
        traj.states.push(y);
        traj.outcome = outcome;
    };
    while t < cfg.t_max {
        if traj.steps + traj.rejected >= cfg.max_steps || h < 1e-14 * t.abs().max(1.0) {
            finish(&mut traj, t, y, Outcome::NumericalFailure);
            return traj;
        }
        h = h.min(cfg.t_max - t);
        let s = dopri::step(field, &y, &k1, h);
        let err = dopri::error_norm(&s, &y, cfg.rtol, cfg.atol);
        if !err.is_finite() {
            traj.rejected += 1;
            h *= 0.2;
            continue;
        }
        if err > 1.0 {
            traj.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).max(0.2);
            continue;
        }
        traj.steps += 1;
        let reach = ev.in_target(&s.y1);
        let exit = ev.outside_safe(&s.y1);
        if reach || exit {
            let g = |x: &[f64]| ev.g.max_value(x);
            let hv = |x: &[f64]| ev.h.eval(x);
            let reach_at = reach.then(|| locate(&s, n, cfg.event_tol, |x| ev.in_target(x), g));
            let exit_at = exit.then(|| locate(&s, n, cfg.event_tol, |x| ev.outside_safe(x), hv));
            let (theta, x, outcome) = match (reach_at, exit_at) {
                (Some(r), Some(e)) if e.0 < r.0 => (e.0, e.1, Outcome::ExitedSafeSet),
                (Some(r), _) => (r.0, r.1, Outcome::ReachedTargetSafely),
                (None, Some(e)) => (e.0, e.1, Outcome::ExitedSafeSet),
                (None, None) => unreachable!(),
            };
            let te = t + theta * h;
            if outcome == Outcome::ReachedTargetSafely {
                traj.tau = Some(te);
            }
            finish(&mut traj, te, x, outcome);
            return traj;
        }
        t += h;
        y = s.y1;
        k1 = s.k7;
        traj.min_safety_margin = traj.min_safety_margin.min(-ev.h.eval(&y));
        if cfg.record {
            traj.times.push(t);
            traj.states.push(y.clone());
        }
        h *= (0.9 * err.max(1e-10).powf(-0.2)).min(10.0);
        h = h.min(cfg.max_step);
    }
    if !cfg.record {
        traj.times.push(t);
        traj.states.push(y);
    }
    traj
}

/// End state of `x' = f(x)` at `t_end` with the adaptive integrator and no
/// events.
pub fn integrate_to(field: &PolyVector, x0: &[f64], t_end: f64, rtol: f64, atol: f64) -> Vec<f64> {
    let f = CompiledField::new(field);
    let n = x0.len();
    let mut y = x0.to_vec();
    let mut k1 = vec![0.0; n];
    f.eval_into(&y, &mut k1);
    let mut t = 0.0;
    let mut h = dopri::initial_step(&f, &y, &k1, rtol, atol, t_end);
    while t < t_end {
        h = h.min(t_end - t);
        let s = dopri::step(&f, &y, &k1, h);
        let err = dopri::error_norm(&s, &y, rtol, atol);
        if err > 1.0 || !err.is_finite() {
            h *= if err.is_finite() { (0.9 * err.powf(-0.2)).max(0.2) } else { 0.2 };
            continue;
        }
        t += h;
        y = s.y1;
        k1 = s.k7;
        h *= (0.9 * err.max(1e-10).powf(-0.2)).min(10.0);
    }
    y
}

/// End state after `steps` equal Dormand–Prince steps to `t_end`.
pub fn integrate_fixed(field: &PolyVector, x0: &[f64], t_end: f64, steps: usize) -> Vec<f64> {
    let f = CompiledField::new(field);
    let h = t_end / steps as f64;
    let mut y = x0.to_vec();
    let mut k1 = vec![0.0; y.len()];
    f.eval_into(&y, &mut k1);
    for _ in 0..steps {
        let s = dopri::step(&f, &y, &k1, h);
        y = s.y1;
        k1 = s.k7;
    }
    y
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub samples: usize,
    pub seed: u64,
    pub reached: usize,
    pub exited: usize,
    pub timeout: usize,
    pub numerical_failure: usize,
    /// Least `-h` along all trajectories (`None` without samples).
    pub min_safety_margin: Option<f64>,
    /// Initial states whose trajectories left the safe set.
    pub counterexamples: Vec<Vec<f64>>,
    /// Some sampled initial state lies outside the safe set: the instance
    /// itself is malformed rather than the property false.
    pub modeling_error: bool,
}

/// Integrates from `n_samples` uniform points of the initial set.
pub fn monte_carlo_reach_avoid(
    instance: &ProblemInstance,
    n_samples: usize,
    cfg: &SimConfig,
    seed: u64,
) -> Result<MonteCarloSummary, SimError> {
    let cfg = SimConfig { record: false, ..cfg.clone() };
    Ok(monte_carlo_trajectories(instance, n_samples, &cfg, seed)?.0)
}

/// As [`monte_carlo_reach_avoid`], also returning every trajectory (with
/// full paths when `cfg.record` is set).
pub fn monte_carlo_trajectories(
    instance: &ProblemInstance,
    n_samples: usize,
    cfg: &SimConfig,
    seed: u64,
) -> Result<(MonteCarloSummary, Vec<Trajectory>), SimError> {
    cfg.validate()?;
    let points = if n_samples == 0 {
        Vec::new()
    } else {
        sample(&instance.initial, n_samples, &instance.bounding_box, par::derive_seed(seed, 0))?.points
    };
    let field = CompiledField::new(&instance.field);
    let events = Events::new(instance);
    let runs = par::map_slice(&points, |x0| run(&field, &events, x0, cfg));
    let mut out = MonteCarloSummary {
        samples: points.len(),
        seed,
        reached: 0,
        exited: 0,
        timeout: 0,
        numerical_failure: 0,
        min_safety_margin: None,
        counterexamples: Vec::new(),
        modeling_error: false,
    };
    for (x0, tr) in points.iter().zip(&runs) {
        match tr.outcome {
            Outcome::ReachedTargetSafely => out.reached += 1,
            Outcome::ExitedSafeSet => {
                out.exited += 1;
                out.counterexamples.push(x0.clone());
                if events.outside_safe(x0) {
                    out.modeling_error = true;
                }
            }
            Outcome::Timeout => out.timeout += 1,
            Outcome::NumericalFailure => out.numerical_failure += 1,
        }
        let m = tr.min_safety_margin;
        out.min_safety_margin = Some(out.min_safety_margin.map_or(m, |a: f64| a.min(m)));
    }
    Ok((out, runs))
}

/// Writes trajectories as one CSV with a leading `sample` column.
pub fn write_trajectories_csv<W: Write>(runs: &[Trajectory], mut w: W) -> io::Result<()> {
    let n = runs.first().map_or(0, |t| t.final_state().len());
    let header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    writeln!(w, "sample,t,{}", header.join(","))?;
    for (k, tr) in runs.iter().enumerate() {
        for (t, x) in tr.times.iter().zip(&tr.states) {
            let xs: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{k},{t},{}", xs.join(","))?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueEstimate {
    pub value: f64,
    pub tau: Option<f64>,
    /// The horizon ran out before the target was reached or the safe set
    /// left.
    pub inconclusive: bool,
}

/// `exp(-beta * tau)` for a trajectory that reaches the target at `tau`
/// without leaving the safe set, otherwise 0.
pub fn estimate_value(instance: &ProblemInstance, x0: &[f64], beta: f64, cfg: &SimConfig) -> Result<ValueEstimate, SimError> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(SimError::Config(format!("beta must be non-negative, got {beta}")));
    }
    let tr = integrate(instance, x0, &SimConfig { record: false, ..cfg.clone() })?;
    Ok(match tr.tau {
        Some(tau) => ValueEstimate { value: (-beta * tau).exp(), tau: Some(tau), inconclusive: false },
        None => ValueEstimate {
            value: 0.0,
            tau: None,
            inconclusive: matches!(tr.outcome, Outcome::Timeout | Outcome::NumericalFailure),
        },
    })
}
