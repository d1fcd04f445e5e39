mod common;

use common::{jacobi_min_eig, random_feasible, trace_one_problem};
use gbarrier::sdp::svec::{svec_index, svec_len, SQRT2};
use gbarrier::sdp::{check_infeasibility_ray, check_solution, matrix_row, solve, SdpProblem, SolveStatus, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[test]
fn trace_one_minimization_reaches_zero() {
    let p = trace_one_problem();
    let out = solve(&p, &SolverConfig::default()).unwrap();
    assert_eq!(out.status, SolveStatus::Optimal, "{}", out.message);
    let x = out.x.unwrap();
    assert!(p.objective(&x).abs() <= 1e-7, "objective {}", p.objective(&x));
    assert!((x[svec_index(1, 1)] - 1.0).abs() <= 1e-6);
    assert!(out.primal_objective >= out.dual_objective - 1e-8);
}

#[test]
fn hand_built_point_has_zero_residual_and_perturbation_shows() {
    let p = trace_one_problem();
    let mut x = vec![0.0; p.ncols()];
    x[svec_index(1, 1)] = 1.0;
    let chk = check_solution(&p, &x);
    assert!(chk.equality_residual <= 1e-12);
    assert!(chk.min_eigenvalues[0].abs() <= 1e-12);
    assert!(chk.passes(&p, 1e-12));
    x[svec_index(1, 1)] += 1e-3;
    let chk = check_solution(&p, &x);
    assert!((chk.equality_residual - 1e-3).abs() <= 1e-12);
}

#[test]
fn sign_contradiction_yields_certificate() {
    let mut p = SdpProblem::new(0, vec![1]);
    p.push_row(vec![(0, 1.0)], -1.0);
    let out = solve(&p, &SolverConfig::default()).unwrap();
    assert_eq!(out.status, SolveStatus::InfeasibleCertificate, "{}", out.message);
    assert!(out.x.is_none());
    let ray = out.ray.unwrap();
    assert!(check_infeasibility_ray(&p, &ray).passes(1e-8));
}


#[test]
fn random_constructed_feasible_problems_are_solved() {
    let cfg = SolverConfig::default();
    for seed in 0..20 {
        let (p, x0) = random_feasible(seed);
        assert!(p.block_dims.iter().all(|&d| d <= 10));
        assert!(check_solution(&p, &x0).passes(&p, 1e-10));
        let out = solve(&p, &cfg).unwrap();
        assert_eq!(out.status, SolveStatus::Feasible, "seed {seed}: {}", out.message);
        let x = out.x.unwrap();
        let chk = check_solution(&p, &x);
        assert!(chk.passes(&p, cfg.tol_feas), "seed {seed}: {chk:?}");
    }
}

#[test]
fn free_variables_are_handled() {
    // u0 + X11 = 2, u0 - u1 = 0.5, X22 = 1, u2 unused
    let mut p = SdpProblem::new(3, vec![2]);
    let off = p.block_offset(0);
    p.push_row(vec![(0, 1.0), (off + svec_index(0, 0), 1.0)], 2.0);
    p.push_row(vec![(0, 1.0), (1, -1.0)], 0.5);
    p.push_row(vec![(off + svec_index(1, 1), 1.0)], 1.0);
    let out = solve(&p, &SolverConfig::default()).unwrap();
    assert_eq!(out.status, SolveStatus::Feasible, "{}", out.message);
    let x = out.x.unwrap();
    assert!(check_solution(&p, &x).passes(&p, 1e-8));
    assert_eq!(x[2], 0.0);
}


#[test]
fn min_inner_product_over_spectraplex_is_least_eigenvalue() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for d in [2usize, 4, 6] {
        let mut cm = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in i..d {
                let v = rng.random_range(-1.0..1.0);
                cm[i][j] = v;
                cm[j][i] = v;
            }
        }
        let mut p = SdpProblem::new(0, vec![d]);
        let diag: Vec<(usize, usize, f64)> = (0..d).map(|i| (i, i, 1.0)).collect();
        let row = matrix_row(&p, 0, &diag);
        p.push_row(row, 1.0);
        for j in 0..d {
            for i in 0..=j {
                p.c[svec_index(i, j)] = if i == j { cm[i][i] } else { SQRT2 * cm[i][j] };
            }
        }
        assert_eq!(p.c.len(), svec_len(d));
        let out = solve(&p, &SolverConfig::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Optimal, "{}", out.message);
        let want = jacobi_min_eig(cm);
        let got = p.objective(out.x.as_ref().unwrap());
        assert!((got - want).abs() <= 1e-6, "d={d}: {got} vs {want}");
        assert!(out.primal_objective >= out.dual_objective - 1e-8);
    }
}

#[test]
fn solves_are_deterministic() {
    let (p, _) = random_feasible(5);
    let a = solve(&p, &SolverConfig::default()).unwrap();
    let b = solve(&p, &SolverConfig::default()).unwrap();
    assert_eq!(a.x, b.x);
    assert_eq!(a.iterations, b.iterations);
}
