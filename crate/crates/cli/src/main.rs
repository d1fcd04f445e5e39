//! `gbarrier`: reach-avoid verification from the command line.
//!
//! Exit codes: 0 verified (or simulation without counterexamples), 1 not
//! verified (or some trajectory left the safe set), 2 input or I/O error.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gbarrier::certify::extract_level_set;
use gbarrier::driver::{
    bench_methods, compare_methods, run_sweep, SweepConfig, SweepOutcome, Verdict, BENCH_BETAS,
};
use gbarrier::par::{set_execution, Execution};
use gbarrier::poly::parse_polynomial;
use gbarrier::problem::{builtin, Problem, BUILTIN_NAMES};
use gbarrier::sdp::{ExternalSolver, InteriorPoint, SdpBackend};
use gbarrier::sim::{monte_carlo_trajectories, write_trajectories_csv, SimConfig};
use gbarrier::sosbuild::{BuildOptions, DegreePlan, Method, Objective, DEFAULT_EPS};

#[derive(Parser)]
#[command(name = "gbarrier", version, about = "Reach-avoid verification with guidance-barrier certificates")]
struct Cli {
    /// Run all data-parallel work on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for a certificate over a degree sweep and validate it.
    Verify(VerifyArgs),
    /// Monte-Carlo simulation from the initial set.
    Simulate(SimulateArgs),
    /// Compare all methods on built-in benchmark suites.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodName {
    Prajna,
    Exp,
    Asym,
    Combined,
    General,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ObjectiveName {
    Feasibility,
    Volume,
}

/// Options shared by `verify` and `bench`.
#[derive(Args)]
struct SweepArgs {
    /// Accept solver success without validation.
    #[arg(long)]
    trust_solver: bool,
    /// Seed for validation sampling and simulation.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Validation samples per region.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Monte-Carlo samples run on a verified certificate (0 disables).
    #[arg(long, default_value_t = 500)]
    sim_samples: usize,
    /// Wall-clock budget per degree in seconds.
    #[arg(long, default_value_t = 600)]
    cell_budget: u64,
    /// Nonnegativity margin for the strict inequalities.
    #[arg(long, default_value_t = DEFAULT_EPS)]
    eps: f64,
    /// Solver objective.
    #[arg(long, value_enum, default_value_t = ObjectiveName::Feasibility)]
    objective: ObjectiveName,
    /// Separate boundary multipliers for the two parts of the combined method.
    #[arg(long)]
    split_boundary: bool,
    /// External SDP solver command, split on whitespace; it is called as
    /// `<command> <args...> <problem.sdp> <solution.txt>`.
    #[arg(long, value_name = "COMMAND")]
    external_solver: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Problem file, or the name of a built-in problem.
    #[arg(long)]
    problem: Option<String>,
    /// Certificate family (defaults to the problem file's `defaults`).
    #[arg(long, value_enum)]
    method: Option<MethodName>,
    /// Discount factor for `exp` and `combined`.
    #[arg(long)]
    beta: Option<f64>,
    /// Multiplier polynomial `m` for `general`, e.g. "(1 - x1)^2".
    #[arg(long)]
    alpha_m: Option<String>,
    /// "sweep" (2, 4, ..., 20), a list "4,6,8", or a range "2-10".
    #[arg(long, default_value = "sweep")]
    degrees: String,
    /// Write zero-level-set CSVs of v on a grid with this many nodes per axis.
    #[arg(long)]
    grid: Option<usize>,
    /// Report path; the report goes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    sweep: SweepArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// Problem file, or the name of a built-in problem.
    #[arg(long)]
    problem: String,
    #[arg(long, default_value_t = 500)]
    samples: usize,
    /// Time horizon.
    #[arg(long, default_value_t = 100.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write every trajectory to one CSV with a `sample` column.
    #[arg(long)]
    traj_out: Option<PathBuf>,
    /// Summary path; the summary goes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Suite name or "all".
    #[arg(long)]
    suite: String,
    /// Output directory for tables and reports.
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
    /// Highest degree tried per method.
    #[arg(long, default_value_t = 20)]
    max_degree: u32,
    /// Comma-separated discount factors (default 1, 0.1, ..., 1e-6).
    #[arg(long)]
    betas: Option<String>,
    #[command(flatten)]
    sweep: SweepArgs,
}

/// An error reported on one line before exiting with status 2.
struct Fail(String);

impl<E: std::fmt::Display> From<E> for Fail {
    fn from(e: E) -> Self {
        Fail(e.to_string())
    }
}

fn fail<T>(msg: impl Into<String>) -> Result<T, Fail> {
    Err(Fail(msg.into()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.sequential {
        set_execution(Execution::Sequential);
    }
    let result = match cli.command {
        Command::Verify(a) => verify(a),
        Command::Simulate(a) => simulate(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Fail(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn load_problem(source: &str) -> Result<Problem, Fail> {
    let path = Path::new(source);
    if path.exists() {
        return Problem::load(path).map_err(|e| Fail(format!("{source}: {e}")));
    }
    builtin(source).ok_or_else(|| {
        Fail(format!("{source}: no such file or built-in problem (built-ins: {})", BUILTIN_NAMES.join(", ")))
    })
}

fn parse_degrees(s: &str) -> Result<DegreePlan, Fail> {
    let s = s.trim();
    if s == "sweep" {
        return Ok(DegreePlan::default());
    }
    let num = |t: &str| -> Result<u32, Fail> {
        t.trim().parse().map_err(|_| Fail(format!("--degrees: '{t}' is not a degree")))
    };
    let degrees = if let Some((lo, hi)) = s.split_once('-') {
        let (lo, hi) = (num(lo)?, num(hi)?);
        if lo > hi {
            return fail(format!("--degrees: empty range {s}"));
        }
        (lo..=hi).filter(|d| d % 2 == 0).collect()
    } else {
        s.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if degrees.is_empty() {
        return fail(format!("--degrees: no even degree in {s}"));
    }
    DegreePlan::new(degrees).map_err(|e| Fail(format!("--degrees: {e}")))
}

fn resolve_method(a: &VerifyArgs, problem: &Problem) -> Result<Method, Fail> {
    let (name, beta, alpha) = match a.method {
        Some(m) => (m, a.beta, a.alpha_m.clone()),
        None => {
            if a.beta.is_some() || a.alpha_m.is_some() {
                return fail("--beta and --alpha-m need --method");
            }
            let Some(d) = &problem.defaults else {
                return fail("--method is required (the problem file has no defaults)");
            };
            let Some(name) = &d.method else {
                return fail("--method is required (the problem defaults name no method)");
            };
            let m = MethodName::from_str(name, true)
                .map_err(|_| Fail(format!("problem defaults: unknown method '{name}'")))?;
            (m, d.beta, d.alpha_m.clone())
        }
    };
    let n = problem.instance.dimension();
    check_params(name, beta, alpha.as_deref())?;
    Ok(match name {
        MethodName::Prajna => Method::Prajna,
        MethodName::Asym => Method::AsymGbf,
        MethodName::Exp => Method::ExpGbf { beta: beta.expect("checked") },
        MethodName::Combined => Method::Combined { beta: beta.expect("checked") },
        MethodName::General => {
            let src = alpha.expect("checked");
            let multiplier = parse_polynomial(&src, n).map_err(|e| Fail(format!("--alpha-m: {e}")))?;
            Method::GeneralGbf { multiplier }
        }
    })
}

fn check_params(name: MethodName, beta: Option<f64>, alpha: Option<&str>) -> Result<(), Fail> {
    let label = name.to_possible_value().expect("no skipped variants").get_name().to_string();
    let wants_beta = matches!(name, MethodName::Exp | MethodName::Combined);
    match (wants_beta, beta) {
        (true, None) => return fail(format!("{label} requires --beta")),
        (true, Some(b)) if !(b.is_finite() && b > 0.0) => return fail(format!("--beta must be positive, got {b}")),
        (false, Some(_)) => return fail(format!("--beta only applies to exp and combined, not {label}")),
        _ => {}
    }
    match (name == MethodName::General, alpha) {
        (true, None) => fail("general requires --alpha-m"),
        (false, Some(_)) => fail(format!("--alpha-m only applies to general, not {label}")),
        _ => Ok(()),
    }
}

fn sweep_config(a: &SweepArgs, plan: DegreePlan) -> Result<SweepConfig, Fail> {
    if !(a.eps.is_finite() && a.eps > 0.0) {
        return fail(format!("--eps must be positive, got {}", a.eps));
    }
    if a.samples == 0 {
        return fail("--samples must be at least 1");
    }
    Ok(SweepConfig {
        plan,
        build: BuildOptions {
            eps: a.eps,
            objective: match a.objective {
                ObjectiveName::Feasibility => Objective::Feasibility,
                ObjectiveName::Volume => Objective::Volume,
            },
            split_boundary_multiplier: a.split_boundary,
            seed: a.seed,
        },
        cell_budget: Duration::from_secs(a.cell_budget),
        trust_solver: a.trust_solver,
        samples_per_region: a.samples,
        validation_seed: a.seed,
        sim_samples: a.sim_samples,
        sim_seed: a.seed,
        ..SweepConfig::default()
    })
}

fn backend(a: &SweepArgs) -> Result<Box<dyn SdpBackend>, Fail> {
    match &a.external_solver {
        None => Ok(Box::new(InteriorPoint)),
        Some(cmd) => match ExternalSolver::from_command_line(cmd) {
            Some(s) => Ok(Box::new(s)),
            None => fail("--external-solver: empty command"),
        },
    }
}

fn write_json(path: Option<&Path>, value: &impl serde::Serialize) -> Result<(), Fail> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => fs::write(p, text + "\n").map_err(|e| Fail(format!("{}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

/// `<out>` with `suffix` appended to the file name.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    out.with_file_name(name)
}

fn create(path: &Path) -> Result<BufWriter<File>, Fail> {
    File::create(path).map(BufWriter::new).map_err(|e| Fail(format!("{}: {e}", path.display())))
}

fn verify(a: VerifyArgs) -> Result<u8, Fail> {
    if let Some(m) = a.method {
        check_params(m, a.beta, a.alpha_m.as_deref())?;
    }
    let Some(source) = a.problem.as_deref() else {
        return fail("--problem is required");
    };
    let plan = parse_degrees(&a.degrees)?;
    if a.grid.is_some_and(|g| g < 2) {
        return fail("--grid needs at least 2 nodes per axis");
    }
    let problem = load_problem(source)?;
    let method = resolve_method(&a, &problem)?;
    let cfg = sweep_config(&a.sweep, plan)?;
    let backend = backend(&a.sweep)?;

    let SweepOutcome { mut report, certificate, timings } = run_sweep(&problem, &method, &cfg, backend.as_ref())?;

    if let (Some(res), Some(cert)) = (a.grid, &certificate) {
        let n = problem.instance.dimension();
        if n <= 3 {
            let stem = a.out.clone().unwrap_or_else(|| PathBuf::from(format!("{}-{}", problem.name, cert.degree)));
            let ls = extract_level_set(&cert.value_function(), &problem.instance.bounding_box, res)?;
            let grid = sibling(&stem, ".grid.csv");
            ls.write_grid_csv(create(&grid)?)?;
            let points = sibling(&stem, ".levelset.csv");
            ls.write_points_csv(create(&points)?)?;
            report.artifacts.push(grid.display().to_string());
            report.artifacts.push(points.display().to_string());
            if n == 2 {
                let seg = sibling(&stem, ".segments.csv");
                ls.write_segments_csv(create(&seg)?)?;
                report.artifacts.push(seg.display().to_string());
            }
        } else {
            eprintln!("note: --grid ignored for {n} variables");
        }
    }

    match &a.out {
        Some(out) => {
            write_json(Some(&sibling(out, ".timings.json")), &timings)?;
            write_json(Some(out), &report)?;
        }
        None => {
            for t in &timings {
                eprintln!(
                    "degree {:>2}: build {:.3}s solve {:.3}s validate {:.3}s",
                    t.degree, t.build_s, t.solve_s, t.validate_s
                );
            }
            write_json(None, &report)?;
        }
    }
    match report.verdict {
        Verdict::Verified { degree } => {
            eprintln!("verified: {method} at degree {degree}");
            Ok(0)
        }
        Verdict::NotVerified { max_degree } => {
            eprintln!("not verified: {method} through degree {max_degree}");
            Ok(1)
        }
    }
}

fn simulate(a: SimulateArgs) -> Result<u8, Fail> {
    let problem = load_problem(&a.problem)?;
    let cfg = SimConfig { t_max: a.horizon, record: a.traj_out.is_some(), ..SimConfig::default() };
    let (summary, runs) = monte_carlo_trajectories(&problem.instance, a.samples, &cfg, a.seed)?;
    if let Some(path) = &a.traj_out {
        let mut w = create(path)?;
        write_trajectories_csv(&runs, &mut w)?;
        w.flush()?;
    }
    write_json(a.out.as_deref(), &summary)?;
    if summary.modeling_error {
        eprintln!("warning: some initial states lie outside the safe set");
    }
    Ok(if summary.exited == 0 { 0 } else { 1 })
}

fn bench(a: BenchArgs) -> Result<u8, Fail> {
    let suites: Vec<&str> = if a.suite == "all" {
        BUILTIN_NAMES.to_vec()
    } else if BUILTIN_NAMES.contains(&a.suite.as_str()) {
        vec![a.suite.as_str()]
    } else {
        return fail(format!("unknown suite '{}' (suites: {}, all)", a.suite, BUILTIN_NAMES.join(", ")));
    };
    let betas: Vec<f64> = match &a.betas {
        None => BENCH_BETAS.to_vec(),
        Some(s) => s
            .split(',')
            .map(|t| match t.trim().parse::<f64>() {
                Ok(b) if b.is_finite() && b > 0.0 => Ok(b),
                _ => fail(format!("--betas: '{t}' is not a positive number")),
            })
            .collect::<Result<_, _>>()?,
    };
    if a.max_degree < 2 {
        return fail("--max-degree must be at least 2");
    }
    let cfg = sweep_config(&a.sweep, DegreePlan::up_to(a.max_degree))?;
    let backend = backend(&a.sweep)?;
    fs::create_dir_all(&a.out).map_err(|e| Fail(format!("{}: {e}", a.out.display())))?;
    for suite in suites {
        let problem = builtin(suite).expect("listed suite exists");
        let methods = bench_methods(suite, &betas).expect("listed suite has methods");
        let (comparison, outcomes) = compare_methods(&problem, &methods, &cfg, backend.as_ref());
        let table = comparison.table();
        println!("{suite}\n{table}");
        fs::write(a.out.join(format!("{suite}.txt")), &table)?;
        write_json(Some(&a.out.join(format!("{suite}.json"))), &comparison)?;
        let reports: Vec<_> = outcomes.iter().map(|o| &o.report).collect();
        write_json(Some(&a.out.join(format!("{suite}.reports.json"))), &reports)?;
        let timings: Vec<_> = outcomes.iter().flat_map(|o| &o.timings).collect();
        write_json(Some(&a.out.join(format!("{suite}.timings.json"))), &timings)?;
    }
    Ok(0)
}
