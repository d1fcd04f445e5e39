//! Acceptance criteria 1-7, one pass/fail line each.
//!
//! Run with `cargo test --release --test acceptance`. Criterion 1 sweeps every
//! benchmark cell with the built-in solver and takes several minutes.

mod common;

use std::io::Write;
use std::time::{Duration, Instant};

use common::{algebra_oracle_error, gradient_fd_error, random_feasible, trace_one_problem};
use gbarrier::driver::{run_sweep, SweepConfig, SweepOutcome, Verdict};
use gbarrier::poly::parse_polynomial;
use gbarrier::problem::{builtin, ProblemFile};
use gbarrier::sdp::{check_solution, solve, InteriorPoint, SolveStatus, SolverConfig};
use gbarrier::sim::{integrate, integrate_fixed, integrate_to, monte_carlo_reach_avoid, SimConfig};
use gbarrier::sosbuild::{DegreePlan, Method};

const CELL_BUDGET: Duration = Duration::from_secs(600);

fn say(line: String) {
    // Written past the test harness's capture so the lines always show.
    let _ = writeln!(std::io::stderr(), "{line}");
}

#[derive(Clone, Copy)]
enum Expect {
    /// Verified at some degree up to the bound.
    By(u32),
    /// Not verified at any degree up to the bound.
    NotThrough(u32),
}

struct Cell {
    problem: &'static str,
    method: Method,
    expect: Expect,
    trust_solver: bool,
}

fn cells() -> Vec<Cell> {
    let m = |p: &str, n| Method::GeneralGbf { multiplier: parse_polynomial(p, n).unwrap() };
    let cell = |problem, method, expect| Cell { problem, method, expect, trust_solver: false };
    let trusted = |problem, method, expect| Cell { problem, method, expect, trust_solver: true };
    vec![
        cell("vdp", Method::AsymGbf, Expect::By(10)),
        cell("vdp", Method::ExpGbf { beta: 0.1 }, Expect::By(14)),
        trusted("vdp", Method::ExpGbf { beta: 1.0 }, Expect::NotThrough(20)),
        cell("vdp", Method::Combined { beta: 1.0 }, Expect::By(10)),
        cell("vdp", m("x1^2", 2), Expect::By(8)),
        cell("tan2", m("x1^4", 2), Expect::By(6)),
        cell("tan2", m("(x1 + x2)^2", 2), Expect::By(8)),
        cell("tan2", Method::AsymGbf, Expect::By(12)),
        trusted("tan2", Method::ExpGbf { beta: 1.0 }, Expect::NotThrough(20)),
        trusted("tan2", Method::ExpGbf { beta: 0.1 }, Expect::NotThrough(20)),
        trusted("tan1", Method::Prajna, Expect::NotThrough(10)),
        cell("tan1", Method::AsymGbf, Expect::By(12)),
        cell("dubins", Method::ExpGbf { beta: 1.0 }, Expect::By(10)),
        cell("dubins", Method::ExpGbf { beta: 0.1 }, Expect::By(10)),
        cell("dubins", Method::AsymGbf, Expect::By(10)),
        cell("dubins", Method::Combined { beta: 1.0 }, Expect::By(10)),
        cell("dubins", Method::Combined { beta: 0.1 }, Expect::By(10)),
        cell("dubins", m("(1 - x1)^2", 3), Expect::By(8)),
    ]
}

struct Ran {
    label: String,
    outcome: SweepOutcome,
    elapsed: Duration,
    ok: bool,
}

fn criterion_1() -> (bool, Vec<Ran>) {
    let mut all = true;
    let mut ran = Vec::new();
    for c in cells() {
        let problem = builtin(c.problem).unwrap();
        let max = match c.expect {
            Expect::By(d) | Expect::NotThrough(d) => d,
        };
        let cfg = SweepConfig {
            plan: DegreePlan::up_to(max),
            trust_solver: c.trust_solver,
            cell_budget: CELL_BUDGET,
            ..SweepConfig::default()
        };
        let t = Instant::now();
        let outcome = run_sweep(&problem, &c.method, &cfg, &InteriorPoint).unwrap();
        let elapsed = t.elapsed();
        let verdict = outcome.report.verdict.clone();
        let ok = match (c.expect, &verdict) {
            (Expect::By(d), Verdict::Verified { degree }) => *degree <= d,
            (Expect::NotThrough(_), Verdict::NotVerified { .. }) => true,
            _ => false,
        } && outcome.timings.iter().all(|t| t.build_s + t.solve_s + t.validate_s <= CELL_BUDGET.as_secs_f64());
        let label = format!("{} {}", c.problem, c.method);
        let got = match verdict {
            Verdict::Verified { degree } => format!("verified at {degree}"),
            Verdict::NotVerified { max_degree } => format!("not verified through {max_degree}"),
        };
        let want = match c.expect {
            Expect::By(d) => format!("verified by {d}"),
            Expect::NotThrough(d) => format!("not verified through {d}"),
        };
        let backend = outcome.report.cells.last().map_or("-", |c| c.backend.as_str()).to_string();
        say(format!(
            "    {} {label}: {got} (want {want}, {:.1}s, backend {backend})",
            if ok { "ok  " } else { "FAIL" },
            elapsed.as_secs_f64()
        ));
        all &= ok;
        ran.push(Ran { label, outcome, elapsed, ok });
    }
    (all, ran)
}

/// Verified cells whose verdict came from validation rather than trust.
fn validated(ran: &[Ran]) -> impl Iterator<Item = &Ran> {
    ran.iter().filter(|r| !r.outcome.report.trust_solver && r.outcome.certificate.is_some())
}

fn criterion_2(ran: &[Ran]) -> (bool, String) {
    let mut all = true;
    let mut n = 0;
    for r in validated(ran) {
        n += 1;
        let v = r.outcome.report.validation.as_ref().unwrap();
        let validate_s = r.outcome.timings.last().unwrap().validate_s;
        let ok = v.passed
            && v.algebraic.max_residual <= 1e-6
            && v.algebraic.min_gram_eigenvalue >= -1e-7
            && v.sampling.constraints.iter().all(|c| c.min_margin >= -1e-6 && c.samples > 0)
            && validate_s <= 30.0;
        if !ok {
            say(format!("    FAIL {}: {}", r.label, v.label));
        }
        all &= ok;
    }
    (all && n > 0, format!("{n} certificates"))
}

fn criterion_3(ran: &[Ran]) -> (bool, String) {
    let mut all = true;
    let mut n = 0;
    let mut timeouts = 0;
    for r in validated(ran) {
        n += 1;
        let problem = builtin(&r.outcome.report.problem).unwrap();
        let t = Instant::now();
        let sim = monte_carlo_reach_avoid(&problem.instance, 500, &SimConfig::default(), 0).unwrap();
        let secs = t.elapsed().as_secs_f64();
        let reported = r.outcome.report.simulation.as_ref().unwrap();
        timeouts += sim.timeout;
        let ok = sim.exited == 0 && reported.exited == 0 && sim.samples == 500 && secs <= 60.0;
        if !ok {
            say(format!("    FAIL {}: exited {} in {secs:.1}s", r.label, sim.exited));
        }
        all &= ok;
    }
    (all && n > 0, format!("{n} instances, {timeouts} timeouts"))
}

fn criterion_4() -> (bool, String) {
    let alg = algebra_oracle_error(1000, 2024);
    let fd = gradient_fd_error(100, 2024);
    (alg <= 1e-12 && fd <= 1e-6, format!("dense oracle {alg:.1e}, finite differences {fd:.1e}"))
}

fn criterion_5() -> (bool, String) {
    let p = trace_one_problem();
    let out = solve(&p, &SolverConfig::default()).unwrap();
    let value = out.x.as_ref().map_or(f64::INFINITY, |x| p.objective(x));
    let trace_ok = out.status == SolveStatus::Optimal && value.abs() <= 1e-7;
    let cfg = SolverConfig::default();
    let random_ok = (0..20u64).filter(|&seed| {
        let (p, _) = random_feasible(seed);
        let out = solve(&p, &cfg).unwrap();
        out.status == SolveStatus::Feasible && out.x.as_ref().is_some_and(|x| check_solution(&p, x).passes(&p, cfg.tol_feas))
    });
    let solved = random_ok.count();
    (trace_ok && solved == 20, format!("trace-1 value {value:.1e}, {solved}/20 random feasible"))
}

fn criterion_6(ran: &[Ran]) -> (bool, String) {
    let exp: Vec<&Ran> = validated(ran).filter(|r| matches!(r.outcome.report.method, Method::ExpGbf { .. })).collect();
    let passed = exp.iter().filter(|r| r.outcome.report.embedding.as_ref().is_some_and(|e| e.passed)).count();
    for r in &exp {
        if !r.outcome.report.embedding.as_ref().is_some_and(|e| e.passed) {
            say(format!("    FAIL {}", r.label));
        }
    }
    (!exp.is_empty() && passed == exp.len(), format!("{passed}/{} exponential certificates", exp.len()))
}

fn criterion_7() -> (bool, String) {
    let decay = ProblemFile {
        version: 1,
        name: "decay".into(),
        variables: 1,
        dynamics: vec!["-x1".into()],
        safe: "x1^2 - 4".into(),
        initial: vec!["(x1 - 1)^2 - 0.01".into()],
        target: vec!["x1^2 - 0.01".into()],
        bounding_box: vec![(-3.0, 3.0)],
        defaults: None,
    }
    .parse()
    .unwrap()
    .instance;
    let exact = (-2.0f64).exp();
    let err = |steps| (integrate_fixed(&decay.field, &[1.0], 2.0, steps)[0] - exact).abs();
    let factor = [4usize, 8, 16].iter().map(|&s| err(s) / err(2 * s)).fold(f64::INFINITY, f64::min);
    let adaptive = |tol: f64| (integrate_to(&decay.field, &[1.0], 2.0, tol, tol * 1e-3)[0] - exact).abs();
    let adaptive_factor = adaptive(1e-6) / adaptive(5e-7);
    let tau = integrate(&decay, &[1.0], &SimConfig::default()).unwrap().tau.unwrap_or(f64::NAN);
    let tau_err = (tau - 10f64.ln()).abs();
    (
        factor >= 16.0 && tau_err <= 1e-6,
        format!(
            "step-halving factor {factor:.1} (adaptive tolerance-halving {adaptive_factor:.2}), tau - ln 10 = {tau_err:.1e}"
        ),
    )
}

#[test]
fn acceptance_criteria() {
    let mut results = Vec::new();
    let mut line = |n: usize, name: &str, (ok, detail): (bool, String)| {
        say(format!("criterion {n} {}: {name} ({detail})", if ok { "PASS" } else { "FAIL" }));
        results.push((n, ok));
    };

    line(4, "algebra oracles", criterion_4());
    line(5, "SDP micro-oracles", criterion_5());
    line(7, "integrator order and hitting time", criterion_7());

    let t = Instant::now();
    let (bench_ok, ran) = criterion_1();
    let failed: Vec<&str> = ran.iter().filter(|r| !r.ok).map(|r| r.label.as_str()).collect();
    let slowest = ran.iter().map(|r| r.elapsed.as_secs_f64()).fold(0.0, f64::max);
    let detail = if failed.is_empty() {
        format!("{} cells, slowest {slowest:.0}s, total {:.0}s", ran.len(), t.elapsed().as_secs_f64())
    } else {
        format!("{}/{} cells; failing: {}", ran.len() - failed.len(), ran.len(), failed.join(", "))
    };
    line(1, "benchmark reproduction", (bench_ok, detail));
    line(2, "certificate validity", criterion_2(&ran));
    line(3, "Monte-Carlo soundness", criterion_3(&ran));
    line(6, "exponential-to-general embedding", criterion_6(&ran));

    let failing: Vec<usize> = results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    assert!(failing.is_empty(), "failing criteria: {failing:?}");
}
