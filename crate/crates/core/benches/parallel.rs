//! Parallel vs sequential execution of the data-parallel hot paths.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use gbarrier::certify::{validate, SamplePool};
use gbarrier::par::{set_execution, Execution};
use gbarrier::problem::builtin;
use gbarrier::sdp::{solve, SolverConfig};
use gbarrier::sim::{monte_carlo_reach_avoid, SimConfig};
use gbarrier::sosbuild::{build_program, reconstruct, BuildOptions, Method};

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn monte_carlo(c: &mut Criterion) {
    let vdp = builtin("vdp").unwrap();
    let mut g = c.benchmark_group("monte_carlo_vdp_200");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            set_execution(mode);
            b.iter(|| monte_carlo_reach_avoid(&vdp.instance, 200, &SimConfig::default(), 7).unwrap());
        });
    }
    g.finish();
}

fn validation(c: &mut Criterion) {
    let vdp = builtin("vdp").unwrap();
    let prog = build_program(&vdp.instance, &Method::AsymGbf, 8, &BuildOptions::default()).unwrap();
    let out = solve(&prog.problem, &SolverConfig::default()).unwrap();
    let cert = reconstruct(&prog, out.x.as_ref().unwrap()).unwrap();
    let mut g = c.benchmark_group("validate_vdp_asym_8");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            set_execution(mode);
            b.iter(|| {
                let pool = SamplePool::draw(&vdp.instance, 10_000, 0).unwrap();
                validate(&cert, &vdp.instance, &pool)
            });
        });
    }
    g.finish();
}

fn interior_point(c: &mut Criterion) {
    let vdp = builtin("vdp").unwrap();
    let prog = build_program(&vdp.instance, &Method::AsymGbf, 6, &BuildOptions::default()).unwrap();
    let mut g = c.benchmark_group("solve_vdp_asym_6");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            set_execution(mode);
            b.iter(|| solve(&prog.problem, &SolverConfig::default()).unwrap());
        });
    }
    g.finish();
}

criterion_group!(benches, monte_carlo, validation, interior_point);
criterion_main!(benches);
