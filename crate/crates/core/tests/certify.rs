use std::sync::OnceLock;

use gbarrier::certify::{
    embed_exp_as_general, embedding_flow_check, extract_level_set, validate, validate_algebraic, Certificate,
    LevelSetError, SamplePool,
};
use gbarrier::poly::parse_polynomial;
use gbarrier::problem::{builtin, Problem};
use gbarrier::sdp::{solve, SolverConfig};
use gbarrier::semialg::BoundingBox;
use gbarrier::sosbuild::{build_program, reconstruct, BuildOptions, Method};

/// Stable scalar decay with an interval target.
const DECAY: &str = r#"{
  "version": 1,
  "name": "decay",
  "variables": 1,
  "dynamics": ["-x1"],
  "safe": "x1^2 - 4",
  "initial": ["(x1 - 1)^2 - 0.01"],
  "target": ["x1^2 - 0.01"],
  "bounding_box": [[-3, 3]]
}"#;

fn certify(problem: &Problem, method: &Method, degree: u32) -> Certificate {
    let prog = build_program(&problem.instance, method, degree, &BuildOptions::default()).unwrap();
    let out = solve(&prog.problem, &SolverConfig::default()).unwrap();
    assert!(out.status.is_success(), "{method} at {degree}: {}", out.message);
    reconstruct(&prog, out.x.as_ref().unwrap()).unwrap()
}

fn vdp() -> &'static (Problem, Certificate, SamplePool) {
    static CELL: OnceLock<(Problem, Certificate, SamplePool)> = OnceLock::new();
    CELL.get_or_init(|| {
        let p = builtin("vdp").unwrap();
        let cert = certify(&p, &Method::AsymGbf, 8);
        let pool = SamplePool::draw(&p.instance, 10_000, 0).unwrap();
        (p, cert, pool)
    })
}

#[test]
fn solved_certificate_validates() {
    let (p, cert, pool) = vdp();
    let report = validate(cert, &p.instance, pool);
    assert!(report.passed, "{report:#?}");
    assert!(report.algebraic.max_residual <= 1e-6);
    assert!(report.algebraic.min_gram_eigenvalue >= -1e-7);
    assert!(report.sampling.constraints.iter().all(|c| c.samples > 0 && c.min_margin >= -1e-6));
    assert!(report.label.starts_with("falsification-free at"));
}

#[test]
fn perturbed_value_function_fails_the_algebraic_check() {
    let (p, cert, _) = vdp();
    let mut bad = cert.clone();
    let v = bad.polynomials.get_mut("v").unwrap();
    let x1 = parse_polynomial("1e-3*x1", 2).unwrap();
    *v = &*v + &x1;
    let report = validate_algebraic(&bad, &p.instance);
    assert!(!report.passed);
    assert!(report.max_residual >= 1e-3 - 1e-9, "{}", report.max_residual);
}

#[test]
fn negated_value_function_fails_sampling() {
    let (p, cert, pool) = vdp();
    let mut bad = cert.clone();
    let v = bad.polynomials["v"].scale(-1.0);
    bad.polynomials.insert("v".into(), v);
    let report = validate(&bad, &p.instance, pool);
    assert!(!report.passed);
    assert!(!report.sampling.passed);
    assert!(report.sampling.constraints.iter().any(|c| !c.passed));
}

#[test]
fn value_function_is_positive_on_initial_samples() {
    let (_, cert, pool) = vdp();
    let v = cert.value_function();
    assert!(pool.initial.iter().all(|x| v.eval(x).unwrap() > 0.0));
    assert!(pool.boundary.iter().all(|x| v.eval(x).unwrap() <= 1e-6));
}

#[test]
fn exponential_certificate_embeds_as_general() {
    let p = Problem::from_json(DECAY).unwrap();
    let cert = certify(&p, &Method::ExpGbf { beta: 0.1 }, 4);
    let pool = SamplePool::draw(&p.instance, 2_000, 1).unwrap();
    assert!(validate(&cert, &p.instance, &pool).passed);

    let general = embed_exp_as_general(&cert, &p.instance).unwrap();
    let w = &general.polynomials["w"];
    let v = &cert.polynomials["v"];
    assert!((w - &v.scale(10.0)).max_abs_coeff() <= 1e-12);
    let report = validate(&general, &p.instance, &pool);
    assert!(report.passed, "{report:#?}");
    assert!(embedding_flow_check(&cert, &p.instance, &pool).passed);

    let asym = certify(&p, &Method::AsymGbf, 2);
    assert!(embed_exp_as_general(&asym, &p.instance).is_err());
}

#[test]
fn circle_level_set() {
    let bbox = BoundingBox::new(vec![(-2.0, 2.0), (-2.0, 2.0)]).unwrap();
    let v = parse_polynomial("1 - x1^2 - x2^2", 2).unwrap();
    let ls = extract_level_set(&v, &bbox, 101).unwrap();
    assert_eq!(ls.grid.len(), 101 * 101);
    assert!(ls.points.len() > 50);
    assert!(!ls.segments.is_empty());
    for pt in &ls.points {
        let r = (pt[0] * pt[0] + pt[1] * pt[1]).sqrt();
        assert!((r - 1.0).abs() <= 2e-3, "radius {r}");
    }
    for &(a, b) in &ls.segments {
        assert!(a < ls.points.len() && b < ls.points.len());
    }
}

#[test]
fn level_set_edge_cases() {
    let bbox2 = BoundingBox::new(vec![(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
    let constant = parse_polynomial("1", 2).unwrap();
    let ls = extract_level_set(&constant, &bbox2, 11).unwrap();
    assert!(ls.points.is_empty() && ls.segments.is_empty());

    let bbox3 = BoundingBox::new(vec![(-1.0, 1.0); 3]).unwrap();
    let sphere = parse_polynomial("1 - x1^2 - x2^2 - x3^2", 3).unwrap();
    let ls = extract_level_set(&sphere, &bbox3, 5).unwrap();
    assert_eq!(ls.grid.len(), 125);
    assert!(ls.segments.is_empty());

    let bbox4 = BoundingBox::new(vec![(-1.0, 1.0); 4]).unwrap();
    let p4 = parse_polynomial("x4", 4).unwrap();
    assert!(matches!(extract_level_set(&p4, &bbox4, 5), Err(LevelSetError::Unsupported(4))));
    assert!(extract_level_set(&constant, &bbox2, 1).is_err());
}

#[test]
fn certificate_json_lists_value_function_and_grams() {
    let (_, cert, _) = vdp();
    let json = cert.to_json();
    assert_eq!(json["degree"], 8);
    assert!(json["value_function"].as_str().unwrap().contains("x1"));
    assert!(json["grams"].as_object().unwrap().contains_key("s0_1"));
    assert!(!cert.multipliers().is_empty());
}
