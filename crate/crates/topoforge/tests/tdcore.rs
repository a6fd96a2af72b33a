use std::collections::BTreeMap;
use std::sync::Arc;

use topoforge::mesh::{triangulate_ball_with, triangulate_domain_with, BallOptions, DomainMeshOptions, InclusionShape};
use topoforge::problem::{build_example, example1_closed_form, ClosedFormInputs, ProblemSpec};
use topoforge::tdcore::{solve_state, td_at, topological_derivative, StateSolution, TDReport, TdOptions};

fn overrides(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
    kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn state(spec: &ProblemSpec, h: f64) -> StateSolution {
    let mesh = Arc::new(triangulate_domain_with(&spec.geometry, &DomainMeshOptions::new(h)).unwrap());
    solve_state(spec, mesh, &TdOptions::for_spec(spec, DomainMeshOptions::new(h), BallOptions::new(1.0e3, 0.1, 1.3)).state_newton).unwrap()
}

fn td(spec: &ProblemSpec, st: &StateSolution, shape: &InclusionShape, ball: &BallOptions) -> TDReport {
    let b = Arc::new(triangulate_ball_with(shape, ball).unwrap());
    let opts = TdOptions::for_spec(spec, DomainMeshOptions::new(0.1), ball.clone());
    td_at(spec, st, spec.defaults.z, b, "test", &opts.corrector_newton).unwrap()
}

fn closed_form(spec: &ProblemSpec, r: &TDReport) -> f64 {
    let f = &r.point.frozen;
    example1_closed_form(spec, ClosedFormInputs { u: f.u0z[0], grad_u: f.du0z[0], p: r.point.p0z[0], grad_p: r.point.dp0z[0] }).unwrap().total()
}

#[test]
fn disk_matches_closed_form_and_r1_vanishes() {
    let spec = build_example("example1", &BTreeMap::new()).unwrap();
    let st = state(&spec, 0.05);
    let r = td(&spec, &st, &InclusionShape::unit_disk(), &BallOptions::new(500.0, 0.1, 1.3));
    let cf = closed_form(&spec, &r);
    assert!((r.total - cf).abs() <= 0.05 * cf.abs(), "{} vs {cf}", r.total);
    assert!(r.r1.abs() <= 1e-10 * r.total.abs(), "R1 = {}", r.r1);
    assert_eq!(r.total, r.r1 + r.r2 + r.dl);
}

#[test]
fn zero_contrast_gives_zero_derivative() {
    let same = [
        ("beta_in", 2.0),
        ("alpha_in", 2.0),
        ("b_in_x", 0.0),
        ("b_in_y", 1.0),
        ("f_in", 2.0),
        ("alpha_tilde_in", 2.0),
    ];
    let spec = build_example("example1", &overrides(&same)).unwrap();
    let st = state(&spec, 0.1);
    let r = td(&spec, &st, &InclusionShape::catalog(5).unwrap(), &BallOptions::new(64.0, 0.2, 1.4));
    assert!(r.total.abs() <= 1e-13, "{}", r.total);
}

#[test]
fn source_only_contrast_is_a_pure_load_term() {
    let same = [("beta_in", 2.0), ("alpha_in", 2.0), ("b_in_x", 0.0), ("b_in_y", 1.0), ("alpha_tilde_in", 2.0)];
    let spec = build_example("example1", &overrides(&same)).unwrap();
    let st = state(&spec, 0.1);
    let r = td(&spec, &st, &InclusionShape::catalog(3).unwrap(), &BallOptions::new(64.0, 0.2, 1.4));
    assert_eq!(r.r1, 0.0);
    assert_eq!(r.r2, 0.0);
    // −(f1 − f2)·p0(z) with f1 − f2 = −1
    assert!((r.dl - r.point.p0z[0]).abs() <= 1e-12 * r.dl.abs().max(1e-300), "{} vs {}", r.dl, r.point.p0z[0]);
}

#[test]
fn derivative_is_invariant_under_shape_scaling() {
    let spec = build_example("example1", &BTreeMap::new()).unwrap();
    let st = state(&spec, 0.05);
    let one = td(&spec, &st, &InclusionShape::catalog(4).unwrap(), &BallOptions::new(1000.0, 0.1, 1.3));
    let two = td(&spec, &st, &InclusionShape::catalog(4).unwrap().scaled(2.0), &BallOptions::new(1000.0, 0.2, 1.3));
    assert!((one.total - two.total).abs() <= 0.01 * one.total.abs(), "{} vs {}", one.total, two.total);
}

#[test]
fn doubling_the_truncation_radius_changes_little() {
    let spec = build_example("example2", &BTreeMap::new()).unwrap();
    let st = state(&spec, 0.05);
    let shape = InclusionShape::catalog(2).unwrap();
    let a = td(&spec, &st, &shape, &BallOptions::new(500.0, 0.1, 1.3));
    let b = td(&spec, &st, &shape, &BallOptions::new(1000.0, 0.1, 1.3));
    assert!((a.total - b.total).abs() <= 0.01 * b.total.abs(), "{} vs {}", a.total, b.total);
}

#[test]
fn points_inside_omega_are_rejected() {
    let spec = build_example("example1", &BTreeMap::new()).unwrap();
    let c = spec.geometry.subdomains[0].center;
    let opts = TdOptions::for_spec(&spec, DomainMeshOptions::new(0.2), BallOptions::new(16.0, 0.3, 1.5));
    assert!(topological_derivative(&spec, c, &InclusionShape::unit_disk(), "disk", &opts).is_err());
}

#[test]
fn report_row_has_all_columns() {
    let spec = build_example("example1", &BTreeMap::new()).unwrap();
    let opts = TdOptions::for_spec(&spec, DomainMeshOptions::new(0.2), BallOptions::new(16.0, 0.3, 1.5));
    let r = topological_derivative(&spec, spec.defaults.z, &InclusionShape::unit_disk(), "disk", &opts).unwrap();
    let row = r.csv_row();
    assert_eq!(row.split(',').count(), TDReport::CSV_HEADER.split(',').count());
    assert!(row.contains(",disk,"));
    let back: Vec<f64> = row.split(',').filter_map(|s| s.parse().ok()).collect();
    assert!(back.contains(&r.total));
}
