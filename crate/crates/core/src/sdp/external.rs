//! Adapter that hands the problem to an external program.
//!
//! The program is invoked as `<command> <args...> <problem.sdp> <solution.txt>`.
//! It reads the dump format and writes
//!
//! ```text
//! status <optimal|feasible|infeasible|dual_infeasible|iteration_limit|numerical_failure>
//! x <col> <value>     (zero entries may be omitted)
//! ```
//!
//! Residuals in the returned outcome are recomputed here from `x`.

use std::path::PathBuf;
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use super::check::check_solution;
use super::dump::write_dump;
use super::ipm::{SolveOutcome, SolveStatus, SolverConfig};
use super::problem::{ProblemError, SdpProblem};
use super::SdpBackend;

#[derive(Clone, Debug)]
pub struct ExternalSolver {
    command: String,
    args: Vec<String>,
    label: String,
}

impl ExternalSolver {
    pub fn new(command: impl Into<String>, args: Vec<String>) -> Self {
        let command = command.into();
        let label = std::iter::once(command.as_str()).chain(args.iter().map(String::as_str)).collect::<Vec<_>>().join(" ");
        ExternalSolver { command, args, label }
    }

    /// Splits a shell-style command line on whitespace.
    pub fn from_command_line(line: &str) -> Option<Self> {
        let mut parts = line.split_whitespace().map(String::from);
        let command = parts.next()?;
        Some(Self::new(command, parts.collect()))
    }
}

static COUNTER: AtomicU64 = AtomicU64::new(0);

fn scratch_path(ext: &str) -> PathBuf {
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    std::env::temp_dir().join(format!("gbarrier-{}-{n}.{ext}", std::process::id()))
}

fn failed(start: Instant, _n: usize, message: String) -> SolveOutcome {
    SolveOutcome {
        status: SolveStatus::NumericalFailure,
        x: None,
        y: Vec::new(),
        ray: None,
        primal_residual: f64::INFINITY,
        dual_residual: f64::INFINITY,
        relative_gap: f64::INFINITY,
        primal_objective: f64::NAN,
        dual_objective: f64::NAN,
        iterations: 0,
        elapsed: start.elapsed(),
        message,
    }
}

impl SdpBackend for ExternalSolver {
    fn name(&self) -> &str {
        &self.label
    }

    fn solve(&self, problem: &SdpProblem, _config: &SolverConfig) -> Result<SolveOutcome, ProblemError> {
        problem.validate()?;
        let start = Instant::now();
        let n = problem.ncols();
        let input = scratch_path("sdp");
        let output = scratch_path("sol");
        if let Err(e) = std::fs::write(&input, write_dump(problem)) {
            return Ok(failed(start, n, format!("cannot write problem file: {e}")));
        }
        let run = Command::new(&self.command).args(&self.args).arg(&input).arg(&output).output();
        let _ = std::fs::remove_file(&input);
        let run = match run {
            Ok(r) => r,
            Err(e) => return Ok(failed(start, n, format!("cannot run {}: {e}", self.command))),
        };
        if !run.status.success() {
            let _ = std::fs::remove_file(&output);
            return Ok(failed(start, n, format!("{} exited with {}", self.command, run.status)));
        }
        let text = std::fs::read_to_string(&output);
        let _ = std::fs::remove_file(&output);
        let text = match text {
            Ok(t) => t,
            Err(e) => return Ok(failed(start, n, format!("cannot read solution: {e}"))),
        };
        let mut status = None;
        let mut x = vec![0.0; n];
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.as_slice() {
                ["status", s] => {
                    status = Some(match *s {
                        "optimal" => SolveStatus::Optimal,
                        "feasible" => SolveStatus::Feasible,
                        "infeasible" => SolveStatus::InfeasibleCertificate,
                        "dual_infeasible" => SolveStatus::DualInfeasible,
                        "iteration_limit" => SolveStatus::IterationLimit,
                        "numerical_failure" => SolveStatus::NumericalFailure,
                        other => return Ok(failed(start, n, format!("unknown status '{other}'"))),
                    })
                }
                ["x", j, v] => match (j.parse::<usize>(), v.parse::<f64>()) {
                    (Ok(j), Ok(v)) if j < n => x[j] = v,
                    _ => return Ok(failed(start, n, format!("bad solution line '{line}'"))),
                },
                _ => return Ok(failed(start, n, format!("bad solution line '{line}'"))),
            }
        }
        let Some(status) = status else {
            return Ok(failed(start, n, "solution has no status line".into()));
        };
        let check = check_solution(problem, &x);
        Ok(SolveOutcome {
            status,
            primal_residual: check.equality_residual,
            primal_objective: check.objective,
            x: status.is_success().then_some(x),
            y: Vec::new(),
            ray: None,
            dual_residual: f64::NAN,
            relative_gap: f64::NAN,
            dual_objective: f64::NAN,
            iterations: 0,
            elapsed: start.elapsed(),
            message: format!("solved by {}", self.label),
        })
    }
}
