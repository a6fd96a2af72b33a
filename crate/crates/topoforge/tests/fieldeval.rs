use std::collections::BTreeMap;
use std::sync::Arc;

use topoforge::corrector::solve_corrector;
use topoforge::error::Error;
use topoforge::fem::{solver_calls, NewtonOptions};
use topoforge::fieldeval::{check_linearity, precompute_basis, superpose, td_field};
use topoforge::mesh::{triangulate_ball, triangulate_domain_with, BallMesh, DomainMeshOptions, InclusionShape};
use topoforge::problem::build_example;
use topoforge::tdcore::{solve_state, td_at};

fn ball(shape: usize, r: f64, h: f64) -> Arc<BallMesh> {
    Arc::new(triangulate_ball(r, &InclusionShape::catalog(shape).unwrap(), h, 1.4).unwrap())
}

#[test]
fn example1_basis_has_three_fields_and_no_particular_part() {
    let spec = build_example("example1", &BTreeMap::new()).unwrap();
    let b = precompute_basis(&spec, spec.defaults.z, ball(1, 32.0, 0.2), "disk").unwrap();
    assert_eq!(b.len(), 3);
    assert_eq!(b.k_hat.norm(), 0.0);
    assert!(b.k_tilde.iter().all(|k| k.norm() > 0.0));
    assert_eq!(superpose(&b, &[[0.0; 2]; 2]).unwrap().values, b.k_hat.values);
}

#[test]
fn zero_contrast_basis_is_zero() {
    let o: BTreeMap<String, f64> = [("beta_in".to_string(), 2.0)].into();
    let spec = build_example("example1", &o).unwrap();
    let b = precompute_basis(&spec, spec.defaults.z, ball(1, 16.0, 0.3), "disk").unwrap();
    assert!(b.k_tilde.iter().chain([&b.k_hat]).all(|k| k.norm() == 0.0));
}

#[test]
fn nonlinear_diffusion_fails_the_linearity_check() {
    let spec = build_example("example2", &BTreeMap::new()).unwrap();
    match check_linearity(&spec, spec.defaults.z) {
        Err(Error::NotLinear(msg)) => assert!(msg.contains("StateGradient"), "{msg}"),
        other => panic!("expected NotLinear, got {other:?}"),
    }
}

#[test]
fn superposition_matches_direct_solve() {
    let spec = build_example("example1", &BTreeMap::new()).unwrap();
    let bm = ball(4, 64.0, 0.2);
    let b = precompute_basis(&spec, spec.defaults.z, bm.clone(), "shifted_ellipse").unwrap();
    let g = [[0.37, -1.21], [0.0, 0.0]];
    let sup = superpose(&b, &g).unwrap();
    let frozen = topoforge::corrector::FrozenPointData::new(spec.defaults.z, [0.2, 0.0], g).unwrap();
    let direct = solve_corrector(&spec, frozen, bm, &NewtonOptions::default()).unwrap();
    let diff: f64 = sup.values.iter().zip(&direct.k.values).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
    assert!(diff <= 1e-8 * direct.k.norm(), "{diff}");
}

#[test]
fn superpose_rejects_bad_gradients() {
    let spec = build_example("example1", &BTreeMap::new()).unwrap();
    let b = precompute_basis(&spec, spec.defaults.z, ball(1, 16.0, 0.3), "disk").unwrap();
    assert!(superpose(&b, &[[f64::NAN, 0.0], [0.0, 0.0]]).is_err());
    assert!(superpose(&b, &[[0.0, 0.0], [1.0, 0.0]]).is_err());
}

#[test]
fn field_matches_pointwise_pipeline_without_solves() {
    let spec = build_example("example1", &BTreeMap::new()).unwrap();
    let mesh = Arc::new(triangulate_domain_with(&spec.geometry, &DomainMeshOptions::new(0.2)).unwrap());
    let st = solve_state(&spec, mesh, &NewtonOptions::default()).unwrap();
    let bm = ball(1, 32.0, 0.3);
    let basis = precompute_basis(&spec, spec.defaults.z, bm.clone(), "disk").unwrap();
    let before = solver_calls();
    let map = td_field(&spec, &basis, &st).unwrap();
    assert_eq!(map.solves, 0);
    assert!(solver_calls() >= before);
    assert!(map.values.iter().all(|v| v.is_finite()));
    let flagged: Vec<usize> = (0..map.values.len()).filter(|&t| map.flagged[t]).collect();
    assert!(!flagged.is_empty() && flagged.iter().all(|&t| spec.in_omega(map.centroids[t])));
    let scale = map.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for t in (0..map.values.len()).step_by(97).filter(|&t| !map.flagged[t]).take(5) {
        let direct = td_at(&spec, &st, map.centroids[t], bm.clone(), "disk", &NewtonOptions::default()).unwrap();
        assert!((direct.total - map.values[t]).abs() <= 1e-6 * scale, "{} vs {}", direct.total, map.values[t]);
    }
    let csv = map.to_csv();
    assert_eq!(csv.lines().count(), map.values.len() + 1);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.vtk");
    map.write_vtk(&p, Some(&map.values)).unwrap();
    let vtk = std::fs::read_to_string(p).unwrap();
    assert!(vtk.contains("CELL_DATA") && vtk.contains("difference"));
}
