//! Degree sweeps: build, solve, reconstruct and validate at increasing
//! degree until a certificate survives validation.

use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::certify::{
    embed_exp_as_general, embedding_flow_check, validate, validate_algebraic, validate_sampling_with,
    Certificate, ConstraintMargin, SamplePool, SolverStats, ValidationReport,
};
use crate::problem::Problem;
use crate::sdp::{SdpBackend, SolveStatus, SolverConfig};
use crate::semialg::SetError;
use crate::sim::{monte_carlo_reach_avoid, MonteCarloSummary, SimConfig, SimError};
use crate::sosbuild::{build_program, reconstruct, BuildError, BuildOptions, DegreePlan, Method};

/// Default wall-clock budget per cell.
pub const CELL_BUDGET: Duration = Duration::from_secs(600);

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub plan: DegreePlan,
    pub build: BuildOptions,
    pub solver: SolverConfig,
    pub cell_budget: Duration,
    /// Accept solver success without validation.
    pub trust_solver: bool,
    pub samples_per_region: usize,
    pub validation_seed: u64,
    /// Monte-Carlo cross-check on the winning certificate; 0 disables it.
    pub sim_samples: usize,
    pub sim: SimConfig,
    pub sim_seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            plan: DegreePlan::default(),
            build: BuildOptions::default(),
            solver: SolverConfig::default(),
            cell_budget: CELL_BUDGET,
            trust_solver: false,
            samples_per_region: 10_000,
            validation_seed: 0,
            sim_samples: 500,
            sim: SimConfig::default(),
            sim_seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error("cannot sample the problem sets: {0}")]
    Set(#[from] SetError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Short per-cell validation verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellValidation {
    pub max_residual: f64,
    pub min_gram_eigenvalue: f64,
    pub min_margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub method: String,
    pub degree: u32,
    /// Solver status; absent when the program could not be built.
    pub status: Option<SolveStatus>,
    pub backend: String,
    pub message: String,
    pub iterations: usize,
    pub validation: Option<CellValidation>,
    pub verified: bool,
}

/// Wall-clock times, kept out of the report so reports are reproducible.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellTiming {
    pub method: String,
    pub degree: u32,
    pub build_s: f64,
    pub solve_s: f64,
    pub validate_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Verified { degree: u32 },
    NotVerified { max_degree: u32 },
}

/// The exponential certificate re-read as a general one with `w = v / beta`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingCheck {
    pub algebraic_max_residual: f64,
    pub algebraic_passed: bool,
    pub sampling_passed: bool,
    pub flow_on_positive_set: ConstraintMargin,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub problem: String,
    pub instance_digest: String,
    pub method: Method,
    pub plan: DegreePlan,
    pub eps: f64,
    pub trust_solver: bool,
    pub cells: Vec<SweepCell>,
    pub verdict: Verdict,
    pub certificate: Option<serde_json::Value>,
    pub validation: Option<ValidationReport>,
    pub embedding: Option<EmbeddingCheck>,
    pub simulation: Option<MonteCarloSummary>,
    /// Files written alongside the report (filled in by the caller).
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub report: VerificationReport,
    pub certificate: Option<Certificate>,
    pub timings: Vec<CellTiming>,
}

fn summarize(v: &ValidationReport) -> CellValidation {
    CellValidation {
        max_residual: v.algebraic.max_residual,
        min_gram_eigenvalue: v.algebraic.min_gram_eigenvalue,
        min_margin: v.sampling.constraints.iter().fold(f64::INFINITY, |a, c| a.min(c.min_margin)),
        passed: v.passed,
    }
}

/// Whether a build error is the input's fault (abort) or the cell's.
fn is_input_error(e: &BuildError) -> bool {
    !matches!(e, BuildError::Inconsistent { .. })
}

pub fn embedding_check(cert: &Certificate, problem: &Problem, pool: &SamplePool) -> Option<EmbeddingCheck> {
    let general = embed_exp_as_general(cert, &problem.instance).ok()?;
    let alg = validate_algebraic(&general, &problem.instance);
    let samp = validate_sampling_with(&general, &problem.instance, pool);
    let flow = embedding_flow_check(cert, &problem.instance, pool);
    let passed = alg.passed && samp.passed && flow.passed;
    Some(EmbeddingCheck {
        algebraic_max_residual: alg.max_residual,
        algebraic_passed: alg.passed,
        sampling_passed: samp.passed,
        flow_on_positive_set: flow,
        passed,
    })
}

/// Embedding an exponential certificate sets `w = v / beta`, which scales the
/// derivative identity's residual by `1 / beta`; the solve is tightened so
/// the embedded certificate stays within the validator's tolerance.
fn residual_cap(method: &Method, cap: f64) -> f64 {
    match method {
        Method::ExpGbf { beta } if *beta < 1.0 => cap * beta,
        _ => cap,
    }
}

/// Runs `method` over the degree plan, stopping at the first verified cell.
pub fn run_sweep(
    problem: &Problem,
    method: &Method,
    cfg: &SweepConfig,
    backend: &dyn SdpBackend,
) -> Result<SweepOutcome, DriverError> {
    let instance = &problem.instance;
    let pool = SamplePool::draw(instance, cfg.samples_per_region, cfg.validation_seed)?;
    let mut cells = Vec::new();
    let mut timings = Vec::new();
    let mut winner: Option<(u32, Certificate, ValidationReport)> = None;
    for &degree in cfg.plan.degrees() {
        let t0 = Instant::now();
        let program = match build_program(instance, method, degree, &cfg.build) {
            Ok(p) => p,
            Err(e) if is_input_error(&e) => return Err(e.into()),
            Err(e) => {
                cells.push(SweepCell {
                    method: method.to_string(),
                    degree,
                    status: None,
                    backend: backend.name().to_string(),
                    message: e.to_string(),
                    iterations: 0,
                    validation: None,
                    verified: false,
                });
                continue;
            }
        };
        let build_s = t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let remaining = cfg.cell_budget.saturating_sub(t0.elapsed());
        let limit = cfg.solver.time_limit.map_or(remaining, |l| l.min(remaining));
        let solver = SolverConfig {
            time_limit: Some(limit),
            max_abs_residual: residual_cap(method, cfg.solver.max_abs_residual),
            ..cfg.solver.clone()
        };
        let outcome = backend.solve(&program.problem, &solver);
        let solve_s = t1.elapsed().as_secs_f64();
        let t2 = Instant::now();
        let mut cell = SweepCell {
            method: method.to_string(),
            degree,
            status: None,
            backend: backend.name().to_string(),
            message: String::new(),
            iterations: 0,
            validation: None,
            verified: false,
        };
        let mut found = None;
        match outcome {
            Err(e) => cell.message = e.to_string(),
            Ok(out) => {
                cell.status = Some(out.status);
                cell.message = out.message.clone();
                cell.iterations = out.iterations;
                if let (true, Some(x)) = (out.status.is_success(), out.x.as_ref()) {
                    let mut cert = reconstruct(&program, x).expect("solution length matches program");
                    cert.solver = Some(SolverStats {
                        backend: backend.name().to_string(),
                        status: out.status,
                        iterations: out.iterations,
                        primal_residual: out.primal_residual,
                        dual_residual: out.dual_residual,
                        relative_gap: out.relative_gap,
                    });
                    let report = validate(&cert, instance, &pool);
                    cell.validation = Some(summarize(&report));
                    cell.verified = cfg.trust_solver || report.passed;
                    found = Some((cert, report));
                }
            }
        }
        timings.push(CellTiming {
            method: method.to_string(),
            degree,
            build_s,
            solve_s,
            validate_s: t2.elapsed().as_secs_f64(),
        });
        let verified = cell.verified;
        cells.push(cell);
        if verified {
            let (cert, report) = found.expect("verified cell has a certificate");
            winner = Some((degree, cert, report));
            break;
        }
    }

    let max_degree = cfg.plan.degrees().last().copied().unwrap_or(0);
    let mut report = VerificationReport {
        problem: problem.name.clone(),
        instance_digest: problem.digest(),
        method: method.clone(),
        plan: cfg.plan.clone(),
        eps: cfg.build.eps,
        trust_solver: cfg.trust_solver,
        cells,
        verdict: Verdict::NotVerified { max_degree },
        certificate: None,
        validation: None,
        embedding: None,
        simulation: None,
        artifacts: Vec::new(),
    };
    let certificate = match winner {
        None => None,
        Some((degree, cert, validation)) => {
            report.verdict = Verdict::Verified { degree };
            report.certificate = Some(cert.to_json());
            report.validation = Some(validation);
            if matches!(method, Method::ExpGbf { .. }) {
                report.embedding = embedding_check(&cert, problem, &pool);
            }
            if cfg.sim_samples > 0 {
                report.simulation = Some(monte_carlo_reach_avoid(instance, cfg.sim_samples, &cfg.sim, cfg.sim_seed)?);
            }
            Some(cert)
        }
    };
    Ok(SweepOutcome { report, certificate, timings })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub method: String,
    /// Least verified degree, if any.
    pub verified_degree: Option<u32>,
    pub max_degree: u32,
    pub cells: usize,
    /// Monte-Carlo counterexamples for the winning certificate.
    pub sim_exited: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub problem: String,
    pub instance_digest: String,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    /// Fixed-width text table.
    pub fn table(&self) -> String {
        let mut out = format!("{:<32} {:>9} {:>6} {:>7}\n", "method", "verified", "cells", "exited");
        for r in &self.rows {
            let v = match (r.verified_degree, &r.error) {
                (_, Some(_)) => "error".to_string(),
                (Some(d), _) => d.to_string(),
                (None, _) => format!(">{}", r.max_degree),
            };
            let e = r.sim_exited.map_or("-".to_string(), |e| e.to_string());
            out.push_str(&format!("{:<32} {:>9} {:>6} {:>7}\n", r.method, v, r.cells, e));
        }
        out
    }
}

/// Sweeps each method in turn and reports the least verified degree.
pub fn compare_methods(
    problem: &Problem,
    methods: &[Method],
    cfg: &SweepConfig,
    backend: &dyn SdpBackend,
) -> (Comparison, Vec<SweepOutcome>) {
    let mut rows = Vec::new();
    let mut outcomes = Vec::new();
    for m in methods {
        let max_degree = cfg.plan.degrees().last().copied().unwrap_or(0);
        match run_sweep(problem, m, cfg, backend) {
            Ok(o) => {
                rows.push(ComparisonRow {
                    method: m.to_string(),
                    verified_degree: match o.report.verdict {
                        Verdict::Verified { degree } => Some(degree),
                        Verdict::NotVerified { .. } => None,
                    },
                    max_degree,
                    cells: o.report.cells.len(),
                    sim_exited: o.report.simulation.as_ref().map(|s| s.exited),
                    error: None,
                });
                outcomes.push(o);
            }
            Err(e) => rows.push(ComparisonRow {
                method: m.to_string(),
                verified_degree: None,
                max_degree,
                cells: 0,
                sim_exited: None,
                error: Some(e.to_string()),
            }),
        }
    }
    let comparison = Comparison { problem: problem.name.clone(), instance_digest: problem.digest(), rows };
    (comparison, outcomes)
}

/// Discount factors swept in the benchmark suites.
pub const BENCH_BETAS: [f64; 7] = [1.0, 0.1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

/// Method grid of a built-in benchmark suite, with `betas` for the
/// exponential and combined methods.
pub fn bench_methods(suite: &str, betas: &[f64]) -> Option<Vec<Method>> {
    use crate::poly::parse_polynomial;
    let (n, templates): (usize, &[&str]) = match suite {
        "illu1" => (2, &[]),
        "illu4" => (2, &["x1^2"]),
        "vdp" => (2, &["x1^2"]),
        "tan1" => (2, &["2 - x2"]),
        "tan2" => (2, &["x1^4", "(x1 + x2)^2"]),
        "dubins" => (3, &["(1 - x1)^2"]),
        _ => return None,
    };
    let mut out = vec![Method::Prajna, Method::AsymGbf];
    out.extend(betas.iter().map(|&beta| Method::ExpGbf { beta }));
    let combined: Vec<f64> = if suite == "illu1" { vec![2.0] } else { betas.to_vec() };
    out.extend(combined.into_iter().map(|beta| Method::Combined { beta }));
    for t in templates {
        out.push(Method::GeneralGbf { multiplier: parse_polynomial(t, n).expect("template parses") });
    }
    Some(out)
}
