use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use proptest::prelude::*;

use topoforge::autodiff::{directional_derivative, evaluate, EvalPoint, RMat, TangentDirection};
use topoforge::config::{apply_override, RunConfig};
use topoforge::fieldeval::{precompute_basis, superpose, CorrectorBasis};
use topoforge::mesh::{triangulate_ball, triangulate_domain_with, BallOptions, DomainMeshOptions, InclusionShape, Region};
use topoforge::problem::{build_example, ProblemSpec, EXAMPLE_NAMES};
use topoforge::taylor::{fit_slope, EpsilonSweep};
use topoforge::tdcore::{solve_state, td_at, TdOptions};

const FD_STEP: f64 = 1e-4;

fn state_strategy() -> impl Strategy<Value = ([f64; 2], [f64; 2], RMat)> {
    let c = -1.0..1.0f64;
    (
        [c.clone(), c.clone()],
        [c.clone(), c.clone()],
        [[c.clone(), c.clone()], [c.clone(), c]],
    )
}

fn fd_check<T: Copy>(f: impl Fn(&EvalPoint) -> T, jvp: impl Fn(TangentDirection) -> T, at: &EvalPoint, m: usize, flat: impl Fn(T) -> Vec<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for dir in TangentDirection::all(m) {
        let (t1, t2) = dir.tangent();
        let shift = |s: f64| {
            let mut p = *at;
            for i in 0..2 {
                p.y1[i] += s * t1[i];
                for k in 0..2 {
                    p.y2[i][k] += s * t2[i][k];
                }
            }
            p
        };
        // Fourth-order central stencil.
        let [f2, f1, m1, m2] = [2.0, 1.0, -1.0, -2.0].map(|k| flat(f(&shift(k * FD_STEP))));
        let ad = flat(jvp(dir));
        for (i, d) in ad.iter().enumerate() {
            let fd = (8.0 * (f1[i] - m1[i]) - (f2[i] - m2[i])) / (12.0 * FD_STEP);
            worst = worst.max((fd - d).abs() / (1.0 + d.abs()));
        }
    }
    worst
}

/// Elasticity examples see displacement gradients of order 1e-2.
fn scaled(name: &str, y1: [f64; 2], y2: RMat) -> ([f64; 2], RMat) {
    let s = if name.starts_with("example4") || name.starts_with("example5") { 0.05 } else { 1.0 };
    ([y1[0] * s, y1[1] * s], [[y2[0][0] * s, y2[0][1] * s], [y2[1][0] * s, y2[1][1] * s]])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn coefficient_derivatives_match_finite_differences(ex in 0..EXAMPLE_NAMES.len(), x in [0.0..1.0f64, 0.0..0.5f64], (y1, _, y2) in state_strategy(), inside in any::<bool>()) {
        let name = EXAMPLE_NAMES[ex];
        let spec = build_example(name, &BTreeMap::new()).unwrap();
        let side = spec.side(if inside { Region::Inside } else { Region::Outside });
        let (mut y1, mut y2) = scaled(name, y1, y2);
        if spec.m == 1 {
            y1[1] = 0.0;
            y2[1] = [0.0; 2];
        }
        let at = EvalPoint::new(x, y1, y2);
        let m = spec.m;
        let a1 = |p: &EvalPoint| evaluate(|x, a, b| (side.a1)(x, a, b), p).unwrap();
        let e1 = fd_check(a1, |d| directional_derivative(|x, a, b| (side.a1)(x, a, b), &at, d, m).unwrap(), &at, m, |v: [f64; 2]| v.to_vec());
        let a2 = |p: &EvalPoint| evaluate(|x, a, b| (side.a2)(x, a, b), p).unwrap();
        let e2 = fd_check(a2, |d| directional_derivative(|x, a, b| (side.a2)(x, a, b), &at, d, m).unwrap(), &at, m, |v: RMat| v.iter().flatten().copied().collect());
        let j = |p: &EvalPoint| evaluate(|x, a, b| (side.j)(x, a, b), p).unwrap();
        let e3 = fd_check(j, |d| directional_derivative(|x, a, b| (side.j)(x, a, b), &at, d, m).unwrap(), &at, m, |v: f64| vec![v]);
        prop_assert!(e1.max(e2).max(e3) <= 1e-6, "{name}: {e1} {e2} {e3}");
    }

    #[test]
    fn slope_fit_ignores_scale_and_recovers_powers(c in 0.01..100.0f64, p in 1.0..5.0f64) {
        let eps = EpsilonSweep::default().values();
        let pts: Vec<(f64, f64)> = eps.iter().map(|e| (e.ln(), (c * e.powf(p)).ln())).collect();
        prop_assert!((fit_slope(&pts) - p).abs() < 1e-9);
    }

    #[test]
    fn sweep_is_geometric_and_decreasing(eps0 in 1e-4..0.1f64, delta in 1.1..3.0f64, count in 2usize..15) {
        let v = EpsilonSweep { eps0, delta, count }.values();
        prop_assert_eq!(v.len(), count);
        prop_assert!((v[count - 1] - eps0).abs() <= 1e-15 * eps0);
        for w in v.windows(2) {
            prop_assert!((w[0] / w[1] - delta).abs() < 1e-12);
        }
    }

    #[test]
    fn overrides_reach_nested_keys(h in 0.01..0.5f64, count in 2usize..20) {
        let cfg = RunConfig::from_toml("example = \"example1\"\n", &[format!("mesh.h_coarse={h}"), format!("sweep.count={count}")]).unwrap();
        prop_assert_eq!(cfg.mesh.h_coarse, h);
        prop_assert_eq!(cfg.sweep.count, count);
        let mut t = toml::Table::new();
        apply_override(&mut t, "a.b.c=\"x\"").unwrap();
        prop_assert_eq!(t["a"]["b"]["c"].as_str(), Some("x"));
    }
}

fn basis() -> &'static CorrectorBasis {
    static B: OnceLock<CorrectorBasis> = OnceLock::new();
    B.get_or_init(|| {
        let spec = build_example("example1", &BTreeMap::new()).unwrap();
        let ball = Arc::new(triangulate_ball(16.0, &InclusionShape::catalog(5).unwrap(), 0.3, 1.5).unwrap());
        precompute_basis(&spec, spec.defaults.z, ball, "lshape").unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn superposition_is_linear(g in [-5.0..5.0f64, -5.0..5.0f64], a in -3.0..3.0f64) {
        let b = basis();
        let k1 = superpose(b, &[g, [0.0; 2]]).unwrap();
        let ka = superpose(b, &[[a * g[0], a * g[1]], [0.0; 2]]).unwrap();
        let err = k1.values.iter().zip(&ka.values).map(|(x, y)| (a * x - y).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-12 * (1.0 + ka.norm()));
    }
}

fn affine_spec(beta: f64, alpha: f64, b: [f64; 2], f: f64) -> ProblemSpec {
    let o: BTreeMap<String, f64> = [("beta_in", beta), ("alpha_in", alpha), ("b_in_x", b[0]), ("b_in_y", b[1]), ("f_in", f)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
    build_example("example1", &o).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn affine_problems_have_no_r1_term(beta in 0.2..5.0f64, alpha in 0.0..3.0f64, bx in -1.0..1.0f64, f in -2.0..2.0f64, shape in 1usize..=5) {
        let spec = affine_spec(beta, alpha, [bx, 0.5], f);
        let opts = TdOptions::for_spec(&spec, DomainMeshOptions::new(0.2), BallOptions::new(32.0, 0.3, 1.5));
        let mesh = Arc::new(triangulate_domain_with(&spec.geometry, &opts.domain_mesh).unwrap());
        let st = solve_state(&spec, mesh, &opts.state_newton).unwrap();
        let ball = Arc::new(triangulate_ball(32.0, &InclusionShape::catalog(shape).unwrap(), 0.3, 1.5).unwrap());
        let r = td_at(&spec, &st, spec.defaults.z, ball, "s", &opts.corrector_newton).unwrap();
        prop_assert!(r.r1.abs() <= 1e-10 * (r.r2.abs() + r.dl.abs()), "{}", r.r1);
    }

    #[test]
    fn equal_sides_give_zero_derivative(beta in 0.2..5.0f64, alpha in 0.0..3.0f64, f in -2.0..2.0f64, shape in 1usize..=5) {
        let o: BTreeMap<String, f64> = [
            ("beta_in", beta), ("beta_out", beta), ("alpha_in", alpha), ("alpha_out", alpha),
            ("b_in_x", 0.0), ("b_in_y", 1.0), ("f_in", f), ("f_out", f), ("alpha_tilde_in", 2.0),
        ].iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let spec = build_example("example1", &o).unwrap();
        let opts = TdOptions::for_spec(&spec, DomainMeshOptions::new(0.25), BallOptions::new(32.0, 0.3, 1.5));
        let mesh = Arc::new(triangulate_domain_with(&spec.geometry, &opts.domain_mesh).unwrap());
        let st = solve_state(&spec, mesh, &opts.state_newton).unwrap();
        let ball = Arc::new(triangulate_ball(32.0, &InclusionShape::catalog(shape).unwrap(), 0.3, 1.5).unwrap());
        let r = td_at(&spec, &st, spec.defaults.z, ball, "s", &opts.corrector_newton).unwrap();
        prop_assert!(r.total.abs() <= 1e-12, "{}", r.total);
    }
}
