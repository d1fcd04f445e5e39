use gbarrier::poly::{parse_polynomial, Polynomial};
use gbarrier::problem::builtin;
use gbarrier::sdp::check_solution;
use gbarrier::sosbuild::{
    build_program, expand_identity, reconstruct, value_parts, BuildError, BuildOptions, DegreePlan, Method, Objective,
    SosIdentity, Term,
};

fn names(ids: &[SosIdentity]) -> Vec<&str> {
    ids.iter().map(|i| i.name.as_str()).collect()
}

#[test]
fn vdp_asym_degree_8_shape() {
    let p = builtin("vdp").unwrap();
    let prog = build_program(&p.instance, &Method::AsymGbf, 8, &BuildOptions::default()).unwrap();
    assert_eq!(names(&prog.identities), ["initial", "derivative_1", "coupling_1", "boundary"]);
    assert_eq!(prog.symbols.get("v").unwrap().len(), 45);
    assert_eq!(prog.symbols.get("w").unwrap().len(), 45);
    assert_eq!(prog.symbols.get("p").unwrap().len(), 45);
    for name in ["s0_1", "s1_1", "s2_1", "s3_1", "s4_1"] {
        assert_eq!(prog.symbols.get(name).unwrap().basis.len(), 15, "{name}");
    }
    assert!(prog.problem.block_dims.iter().all(|&d| d >= 15));
    assert_eq!(prog.problem.ncols(), prog.symbols.ncols());
    assert_eq!(prog.row_labels.len(), prog.problem.nrows());
}

#[test]
fn identity_counts_per_method() {
    let p = builtin("dubins").unwrap();
    let opts = BuildOptions::default();
    let count = |m: &Method| build_program(&p.instance, m, 2, &opts).unwrap().identity_count();
    // Dubins has two target constraints, so the derivative and coupling
    // identities come in pairs; combined has three such pairs and two
    // boundary identities.
    assert_eq!(count(&Method::Prajna), 4);
    assert_eq!(count(&Method::ExpGbf { beta: 1.0 }), 4);
    assert_eq!(count(&Method::AsymGbf), 6);
    assert_eq!(count(&Method::Combined { beta: 1.0 }), 9);
    let m = parse_polynomial("(1 - x1)^2", 3).unwrap();
    assert_eq!(count(&Method::GeneralGbf { multiplier: m }), 6);

    let vol = BuildOptions { objective: Objective::Volume, ..opts.clone() };
    let prog = build_program(&p.instance, &Method::AsymGbf, 2, &vol).unwrap();
    assert!(prog.identities.iter().any(|i| i.name == "volume_cap"));
    assert!(prog.problem.c.iter().any(|&c| c != 0.0));
}

#[test]
fn split_boundary_adds_a_second_multiplier() {
    let p = builtin("vdp").unwrap();
    let shared = build_program(&p.instance, &Method::Combined { beta: 1.0 }, 4, &BuildOptions::default()).unwrap();
    let split_opts = BuildOptions { split_boundary_multiplier: true, ..BuildOptions::default() };
    let split = build_program(&p.instance, &Method::Combined { beta: 1.0 }, 4, &split_opts).unwrap();
    assert!(split.symbols.ncols() > shared.symbols.ncols());
    assert_eq!(shared.identity_count(), split.identity_count());
}

#[test]
fn invalid_options_are_rejected() {
    let p = builtin("vdp").unwrap();
    let opts = BuildOptions::default();
    assert!(matches!(build_program(&p.instance, &Method::AsymGbf, 5, &opts), Err(BuildError::OddDegree(5))));
    assert!(build_program(&p.instance, &Method::AsymGbf, 0, &opts).is_err());
    assert!(build_program(&p.instance, &Method::ExpGbf { beta: 0.0 }, 4, &opts).is_err());
    let bad_eps = BuildOptions { eps: -1.0, ..opts };
    assert!(build_program(&p.instance, &Method::AsymGbf, 4, &bad_eps).is_err());
    assert!(DegreePlan::new(vec![4, 3]).is_err());
    assert!(DegreePlan::new(vec![4, 4]).is_err());
    assert_eq!(DegreePlan::up_to(6).degrees(), &[2, 4, 6]);
}

#[test]
fn rows_match_the_coefficients_of_each_identity() {
    // Setting one decision column to 1 must reproduce that column's
    // polynomial contribution in the expanded identity.
    let p = builtin("vdp").unwrap();
    let prog = build_program(&p.instance, &Method::AsymGbf, 4, &BuildOptions::default()).unwrap();
    let v = prog.symbols.get("v").unwrap();
    let derivative = &prog.identities[1];
    let rows = expand_identity(derivative, &prog.symbols, &p.instance);
    for (k, mono) in v.basis.iter().enumerate() {
        let lie = Polynomial::monomial(mono.clone(), 1.0).lie_derivative(&p.instance.field).unwrap();
        for (m, cols, _) in &rows {
            let got: f64 = cols.iter().filter(|&&(c, _)| c == v.offset + k).map(|&(_, a)| a).sum();
            assert!((got - lie.coeff(m)).abs() <= 1e-12, "v[{k}] at {m:?}");
        }
    }
}

#[test]
fn fixed_terms_move_to_the_right_hand_side() {
    let p = builtin("vdp").unwrap();
    let prog = build_program(&p.instance, &Method::ExpGbf { beta: 1.0 }, 2, &BuildOptions::default()).unwrap();
    let initial = prog.identities.iter().find(|i| i.name == "initial").unwrap();
    assert!(initial.terms.iter().any(|t| matches!(t, Term::Fixed(_))));
    let rows = expand_identity(initial, &prog.symbols, &p.instance);
    let constant = rows.iter().find(|(m, _, _)| m.degree() == 0).unwrap();
    assert!((constant.2 - prog.eps).abs() <= 1e-15);
}

#[test]
fn builds_are_deterministic() {
    let p = builtin("tan2").unwrap();
    let m = Method::Combined { beta: 0.5 };
    let a = build_program(&p.instance, &m, 6, &BuildOptions::default()).unwrap();
    let b = build_program(&p.instance, &m, 6, &BuildOptions::default()).unwrap();
    assert_eq!(a.problem, b.problem);
    assert_eq!(a.row_labels, b.row_labels);
}

#[test]
fn reconstruct_checks_length_and_round_trips() {
    let p = builtin("vdp").unwrap();
    let prog = build_program(&p.instance, &Method::AsymGbf, 2, &BuildOptions::default()).unwrap();
    let err = reconstruct(&prog, &[0.0; 3]).unwrap_err();
    assert_eq!(err.expected, prog.symbols.ncols());
    assert_eq!(err.found, 3);

    let x: Vec<f64> = (0..prog.symbols.ncols()).map(|i| (i as f64 * 0.37).sin()).collect();
    let cert = reconstruct(&prog, &x).unwrap();
    let v = prog.symbols.get("v").unwrap();
    for (k, m) in v.basis.iter().enumerate() {
        assert_eq!(cert.polynomials["v"].coeff(m), x[v.offset + k]);
    }
    // The residual of the reconstructed identities equals the row residual.
    let chk = check_solution(&prog.problem, &x);
    let report = gbarrier::certify::validate_algebraic(&cert, &p.instance);
    assert!((report.max_residual - chk.equality_residual).abs() <= 1e-9 * (1.0 + chk.equality_residual));
}

#[test]
fn value_function_signs() {
    assert_eq!(value_parts(&Method::Prajna), vec![("v", -1.0)]);
    assert_eq!(value_parts(&Method::AsymGbf), vec![("v", 1.0)]);
    assert_eq!(value_parts(&Method::Combined { beta: 1.0 }), vec![("v1", 1.0), ("v2", 1.0)]);
}
