//! Semidefinite programming: problem representation, an interior-point
//! solver, independent solution checks, and a text interchange format for
//! external solvers.

mod check;
mod dump;
mod external;
mod ipm;
mod problem;
pub mod svec;

pub use check::{check_infeasibility_ray, check_solution, matrix_row, RayCheck, SolutionCheck};
pub use dump::{read_dump, write_dump, DumpError};
pub use external::ExternalSolver;
pub use ipm::{SolveOutcome, SolveStatus, SolverConfig};
pub use problem::{ProblemError, SdpProblem, SparseRow};

/// A solver for [`SdpProblem`]s.
pub trait SdpBackend: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, problem: &SdpProblem, config: &SolverConfig) -> Result<SolveOutcome, ProblemError>;
}

/// The built-in homogeneous self-dual interior-point method.
#[derive(Clone, Copy, Debug, Default)]
pub struct InteriorPoint;

impl SdpBackend for InteriorPoint {
    fn name(&self) -> &str {
        "interior-point"
    }

    fn solve(&self, problem: &SdpProblem, config: &SolverConfig) -> Result<SolveOutcome, ProblemError> {
        solve(problem, config)
    }
}

/// Validates `problem` and solves it with the built-in solver.
pub fn solve(problem: &SdpProblem, config: &SolverConfig) -> Result<SolveOutcome, ProblemError> {
    problem.validate()?;
    Ok(ipm::solve_ipm(problem, config))
}
