use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use topoforge::autodiff::{DMat, DVec, Dual, RVec};
use topoforge::fem::{cost_gradient, cost_value, evaluate_at, solve_adjoint, solve_newton, Assembler, FieldFunction, NewtonOptions, StateForm, WeakForm};
use topoforge::mesh::{triangulate_domain, DomainGeometry, Mesh, Region, Segment};
use topoforge::problem::{build_example, linear_stress, ProblemSpec};
use topoforge::Point;

fn unit_square(h: f64, dirichlet: bool) -> Arc<Mesh> {
    let mut g = DomainGeometry::rectangle([0.0, 0.0], [1.0, 1.0]);
    if dirichlet {
        g.dirichlet = vec![
            Segment::new([0.0, 0.0], [1.0, 0.0]),
            Segment::new([1.0, 0.0], [1.0, 1.0]),
            Segment::new([1.0, 1.0], [0.0, 1.0]),
            Segment::new([0.0, 1.0], [0.0, 0.0]),
        ];
    }
    Arc::new(triangulate_domain(&g, h, None).unwrap())
}

fn example(name: &str, h: f64) -> (ProblemSpec, Arc<Mesh>) {
    let spec = build_example(name, &BTreeMap::new()).unwrap();
    let mesh = Arc::new(triangulate_domain(&spec.geometry, h, None).unwrap());
    (spec, mesh)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Poisson;

impl WeakForm for Poisson {
    fn m(&self) -> usize {
        1
    }
    fn volume(&self, _: Region, x: Point, _: &DVec, y2: &DMat, _: f64) -> (DVec, DMat) {
        let f = 2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin();
        ([Dual::constant(-f), Dual::ZERO], *y2)
    }
}

#[test]
fn poisson_l2_error_is_second_order() {
    let exact = |x: Point| -> RVec { [(PI * x[0]).sin() * (PI * x[1]).sin(), 0.0] };
    let mut pts = Vec::new();
    for h in [0.1, 0.05, 0.025] {
        let mesh = unit_square(h, true);
        let asm = Assembler::new(mesh.clone(), 1);
        let (u, _) = solve_newton(&asm, &Poisson, &asm.zeros(), &NewtonOptions::default()).unwrap();
        let hmax = (0..mesh.num_triangles()).map(|t| mesh.diameter(t)).fold(0.0, f64::max);
        pts.push(((mesh.num_vertices() as f64).ln(), u.l2_error(exact).ln(), hmax));
    }
    // error ~ N^{-slope/2} for quasi-uniform meshes
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = -2.0 * pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!(slope >= 1.9, "L2 slope {slope}");
}

struct Elastic;

impl WeakForm for Elastic {
    fn m(&self) -> usize {
        2
    }
    fn volume(&self, _: Region, _: Point, _: &DVec, y2: &DMat, _: f64) -> (DVec, DMat) {
        ([Dual::ZERO; 2], linear_stress(y2, 1.3, 0.7))
    }
}

#[test]
fn rigid_motions_span_the_elastic_kernel() {
    let mesh = unit_square(0.2, false);
    let asm = Assembler::new(mesh.clone(), 2);
    assert_eq!(asm.num_free(), asm.num_dofs());
    let k = asm.jacobian(&Elastic, &asm.zeros(), 1.0).unwrap();
    let kmax = k.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for mode in [|_: Point| [1.0, 0.0], |_: Point| [0.0, 1.0], |x: Point| [-x[1], x[0]]] {
        let v = FieldFunction::interpolate(mesh.clone(), 2, mode);
        let kv = asm.matvec(&k, &v.values);
        let r = kv.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        assert!(r < 1e-12 * kmax, "rigid mode residual {r}");
    }
    // a non-rigid motion is not in the kernel
    let v = FieldFunction::interpolate(mesh.clone(), 2, |x| [x[0], 0.0]);
    assert!(dot(&v.values, &asm.matvec(&k, &v.values)) > 1e-3);
}

#[test]
fn jacobian_matches_finite_differences_for_nonlinear_example() {
    let (spec, mesh) = example("example2", 0.15);
    let asm = Assembler::new(mesh.clone(), 1);
    let form = StateForm::new(&spec);
    let u = FieldFunction::interpolate(mesh.clone(), 1, |x| [0.3 * (x[0] + 1.0) * (x[1] + 1.0) + 0.1 * (3.0 * x[0]).sin(), 0.0]);
    let dir = FieldFunction::interpolate(mesh.clone(), 1, |x| [(2.0 * x[1]).cos() * (x[0] + 1.0), 0.0]);
    let k = asm.jacobian(&form, &u, 1.0).unwrap();
    let jv = asm.matvec(&k, &asm.restrict(&dir.values));
    let h = 1e-6;
    let shifted = |s: f64| {
        let vals: Vec<f64> = u.values.iter().zip(&dir.values).map(|(a, b)| a + s * b).collect();
        asm.residual(&form, &u.with_values(vals).unwrap(), 1.0).unwrap()
    };
    let (rp, rm) = (shifted(h), shifted(-h));
    let scale = jv.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for i in 0..jv.len() {
        let fd = (rp[i] - rm[i]) / (2.0 * h);
        assert!((fd - jv[i]).abs() <= 1e-6 * scale, "dof {i}: AD {} FD {fd}", jv[i]);
    }
}

#[test]
fn linear_problem_converges_in_one_newton_step() {
    let (spec, mesh) = example("example1", 0.1);
    let asm = Assembler::new(mesh, 1);
    let (_, rep) = solve_newton(&asm, &StateForm::new(&spec), &asm.zeros(), &NewtonOptions::default()).unwrap();
    assert_eq!(rep.iterations, 1, "{rep:?}");
}

#[test]
fn adjoint_satisfies_transposed_system() {
    // convection makes the operator non-symmetric
    let (spec, mesh) = example("example1", 0.1);
    let asm = Assembler::new(mesh.clone(), 1);
    let form = StateForm::new(&spec);
    let (u, _) = solve_newton(&asm, &form, &asm.zeros(), &NewtonOptions::default()).unwrap();
    let p = solve_adjoint(&spec, &asm, &form, &u).unwrap();
    let k = asm.jacobian(&form, &u, 1.0).unwrap();
    let g = cost_gradient(&spec, &asm, &u).unwrap();
    let pf = asm.restrict(&p.values);
    for seed in 0..3 {
        let v = FieldFunction::interpolate(mesh.clone(), 1, |x| [(x[0] * (seed as f64 + 1.0)).sin() + x[1] * x[1], 0.0]);
        let vf = asm.restrict(&v.values);
        let lhs = dot(&pf, &asm.matvec(&k, &vf));
        let rhs = -dot(&g, &vf);
        assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1e-12), "{lhs} vs {rhs}");
    }
}

#[test]
fn cost_gradient_matches_finite_differences() {
    let mut ov = BTreeMap::new();
    ov.insert("beta_tilde_in".to_string(), 0.5);
    ov.insert("beta_tilde_out".to_string(), 1.5);
    ov.insert("gamma_tilde".to_string(), 2.0);
    let spec = build_example("example1", &ov).unwrap();
    let mesh = Arc::new(triangulate_domain(&spec.geometry, 0.2, None).unwrap());
    let asm = Assembler::new(mesh.clone(), 1);
    let u = FieldFunction::interpolate(mesh.clone(), 1, |x| [(x[0] + 1.0) * (x[1] + 1.0) * (1.0 + 0.5 * x[0]), 0.0]);
    let dir = FieldFunction::interpolate(mesh.clone(), 1, |x| [(x[0] - x[1]).cos() * (x[0] + 1.0), 0.0]);
    let g = cost_gradient(&spec, &asm, &u).unwrap();
    let h = 1e-5;
    let j = |s: f64| {
        let vals: Vec<f64> = u.values.iter().zip(&dir.values).map(|(a, b)| a + s * b).collect();
        cost_value(&spec, &asm, &u.with_values(vals).unwrap()).unwrap()
    };
    let fd = (j(h) - j(-h)) / (2.0 * h);
    let ad = dot(&g, &asm.restrict(&dir.values));
    assert!((fd - ad).abs() <= 1e-7 * ad.abs(), "{fd} vs {ad}");
}

#[test]
fn zero_cost_gives_zero_adjoint() {
    let mut ov = BTreeMap::new();
    for k in ["alpha_tilde_in", "alpha_tilde_out", "beta_tilde_in", "beta_tilde_out", "gamma_tilde"] {
        ov.insert(k.to_string(), 0.0);
    }
    let spec = build_example("example1", &ov).unwrap();
    let mesh = Arc::new(triangulate_domain(&spec.geometry, 0.15, None).unwrap());
    let asm = Assembler::new(mesh, 1);
    let form = StateForm::new(&spec);
    let (u, _) = solve_newton(&asm, &form, &asm.zeros(), &NewtonOptions::default()).unwrap();
    assert_eq!(cost_value(&spec, &asm, &u).unwrap(), 0.0);
    assert!(solve_adjoint(&spec, &asm, &form, &u).unwrap().values.iter().all(|v| *v == 0.0));
}

#[test]
fn compliance_adjoint_is_minus_the_state() {
    let (spec, mesh) = example("example4", 0.08);
    let asm = Assembler::new(mesh, 2);
    let form = StateForm::new(&spec);
    let (u, _) = solve_newton(&asm, &form, &asm.zeros(), &NewtonOptions::default()).unwrap();
    let p = solve_adjoint(&spec, &asm, &form, &u).unwrap();
    let err = u.values.iter().zip(&p.values).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-8 * u.norm(), "max |u + p| = {err}");
}

#[test]
fn loaded_cantilever_bends_down() {
    let (spec, mesh) = example("example5", 0.06);
    let asm = Assembler::new(mesh.clone(), 2);
    let opts = NewtonOptions::default().with_load_steps(spec.defaults.load_steps);
    let (u, rep) = solve_newton(&asm, &StateForm::new(&spec), &asm.zeros(), &opts).unwrap();
    let (tip, _) = evaluate_at(&u, [2.0, 0.5]).unwrap();
    assert!(tip[1] < 0.0, "tip displacement {tip:?}");
    assert!(rep.final_residual <= rep.tolerance.max(1e-9 * rep.history[0].residual));
}

#[test]
fn point_evaluation_is_exact_for_linear_fields() {
    let mesh = unit_square(0.1, false);
    let f = |x: Point| [2.0 * x[0] - 3.0 * x[1] + 0.5, -x[0] + 4.0 * x[1]];
    let u = FieldFunction::interpolate(mesh.clone(), 2, f);
    for x in [[0.123, 0.777], [0.5, 0.5], [0.0, 0.0], [1.0, 0.31]] {
        let (v, g) = evaluate_at(&u, x).unwrap();
        let e = f(x);
        assert!((v[0] - e[0]).abs() < 1e-12 && (v[1] - e[1]).abs() < 1e-12);
        assert!((g[0][0] - 2.0).abs() < 1e-10 && (g[0][1] + 3.0).abs() < 1e-10);
        assert!((g[1][0] + 1.0).abs() < 1e-10 && (g[1][1] - 4.0).abs() < 1e-10);
    }
    assert!(evaluate_at(&u, [1.5, 0.5]).is_err());
}

#[test]
fn point_gradient_error_is_first_order() {
    let f = |x: Point| [(2.0 * x[0]).sin() * x[1].exp(), 0.0];
    let x0: Point = [0.37, 0.61];
    let exact = [2.0 * (2.0 * x0[0]).cos() * x0[1].exp(), (2.0 * x0[0]).sin() * x0[1].exp()];
    let err = |h: f64| {
        let u = FieldFunction::interpolate(unit_square(h, false), 1, f);
        let (_, g) = evaluate_at(&u, x0).unwrap();
        ((g[0][0] - exact[0]).powi(2) + (g[0][1] - exact[1]).powi(2)).sqrt()
    };
    let (e1, e2) = (err(0.08), err(0.02));
    assert!(e2 < 0.5 * e1 && e2 < 0.1, "{e1} -> {e2}");
}

#[test]
fn assembly_is_deterministic_across_thread_counts() {
    let (spec, mesh) = example("example2", 0.1);
    let asm = Assembler::new(mesh.clone(), 1);
    let form = StateForm::new(&spec);
    let u = FieldFunction::interpolate(mesh, 1, |x| [x[0] * x[1] + 0.2, 0.0]);
    let run = |n| {
        rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap().install(|| {
            (asm.residual(&form, &u, 1.0).unwrap(), asm.jacobian(&form, &u, 1.0).unwrap())
        })
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn traction_only_acts_on_load_segment() {
    let (spec, mesh) = example("example4", 0.1);
    let edges = StateForm::new(&spec).traction_edges(&mesh);
    assert!(!edges.is_empty());
    for [a, b] in edges {
        for v in [a, b] {
            let p = mesh.vertices[v];
            assert!((p[0] - 2.0).abs() < 1e-9 && p[1] >= 0.45 - 1e-9 && p[1] <= 0.55 + 1e-9, "{p:?}");
        }
    }
}
