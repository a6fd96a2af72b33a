//! Acceptance suite. Runs sequentially in one test (the solver-call counter is
//! process-wide) and prints one PASS/FAIL line per check to stderr, bypassing
//! the harness capture so the lines always appear in the log.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use topoforge::autodiff::{DMat, DVec, Dual, RVec};
use topoforge::corrector::{solve_corrector, FrozenPointData};
use topoforge::fem::{solver_calls, Assembler, FieldFunction, NewtonOptions, StateForm, WeakForm};
use topoforge::fieldeval::{closed_form_field, precompute_basis, superpose, td_field};
use topoforge::mesh::{
    triangulate_ball_with, triangulate_domain, triangulate_domain_with, BallOptions, DomainGeometry, DomainMeshOptions, InclusionShape, Region, Segment,
    SHAPE_NAMES,
};
use topoforge::problem::{build_example, example1_closed_form, ClosedFormInputs, ProblemSpec};
use topoforge::taylor::{build_family, family_td, run_taylor_test, EpsilonSweep, TaylorOptions, TaylorResult};
use topoforge::tdcore::{solve_state, td_at, PointData, StateSolution, TDReport};
use topoforge::Point;

// Pinned tolerances.
const C1_REL: f64 = 0.05;
const C2_SLOPE_SYMMETRIC: f64 = 3.5;
const C2_SLOPE: f64 = 2.8;
const C4_REL: f64 = 0.02;
const C5_SUPERPOSITION: f64 = 1e-8;
const C5_FIELD: f64 = 1e-6;
const C6_REL: f64 = 0.05;
const C6_COEFF_REL: f64 = 0.03;
const C7_AD_FD: f64 = 1e-6;
const C7_L2_SLOPE: f64 = 1.9;
const C7_KERNEL: f64 = 1e-12;
const C7_R1: f64 = 1e-10;
const C7_ZERO: f64 = 1e-13;
const C7_SCALING: f64 = 0.01;
const C7_RADIUS: f64 = 0.01;
const C7_WRONG_TD: f64 = 2.3;
const C8_CONVECTION: f64 = 0.02;

struct Checks {
    results: Vec<(String, bool)>,
}

impl Checks {
    fn record(&mut self, id: &str, what: String, pass: bool) {
        let line = format!("{} {id:<4} {what}", if pass { "PASS" } else { "FAIL" });
        let _ = writeln!(std::io::stderr().lock(), "{line}");
        self.results.push((line, pass));
    }

    fn at_most(&mut self, id: &str, what: &str, value: f64, bound: f64) {
        self.record(id, format!("{what}: {value:.4e} (<= {bound:e})"), value <= bound);
    }

    fn at_least(&mut self, id: &str, what: &str, value: f64, bound: f64) {
        self.record(id, format!("{what}: {value:.4} (>= {bound})"), value >= bound);
    }

    fn note(&self, text: &str) {
        let _ = writeln!(std::io::stderr().lock(), "     {text}");
    }
}

fn example(name: &str) -> ProblemSpec {
    build_example(name, &BTreeMap::new()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn closed_form_inputs(pd: &PointData) -> ClosedFormInputs {
    ClosedFormInputs { u: pd.frozen.u0z[0], grad_u: pd.frozen.du0z[0], p: pd.p0z[0], grad_p: pd.dp0z[0] }
}

fn state(spec: &ProblemSpec, opts: &DomainMeshOptions) -> StateSolution {
    let mesh = Arc::new(triangulate_domain_with(&spec.geometry, opts).unwrap());
    let newton = NewtonOptions::default().with_load_steps(spec.defaults.load_steps);
    solve_state(spec, mesh, &newton).unwrap()
}

fn td(spec: &ProblemSpec, st: &StateSolution, shape: &InclusionShape, name: &str, ball: &BallOptions) -> TDReport {
    let b = Arc::new(triangulate_ball_with(shape, ball).unwrap());
    let newton = NewtonOptions::default().with_damping(spec.defaults.corrector_damping);
    td_at(spec, st, spec.defaults.z, b, name, &newton).unwrap()
}

/// Taylor tests of `shapes` with TD computed on each family's own meshes.
fn taylor(spec: &ProblemSpec, shapes: &[usize], h_domain: f64, h_ball: f64, layers: usize) -> Vec<(TaylorResult, TDReport)> {
    let sweep = EpsilonSweep::default();
    let opts = TaylorOptions {
        domain_mesh: DomainMeshOptions::new(h_domain),
        ball: BallOptions::new(1000.0, h_ball, TaylorOptions::grading_for(&sweep, layers)),
        state_newton: NewtonOptions::default().with_load_steps(spec.defaults.load_steps),
        corrector_newton: NewtonOptions::default().with_damping(spec.defaults.corrector_damping),
    };
    shapes
        .iter()
        .map(|&id| {
            let shape = InclusionShape::catalog(id).unwrap();
            let family = build_family(spec, spec.defaults.z, &shape, &sweep, &opts).unwrap();
            let report = family_td(spec, &family, SHAPE_NAMES[id - 1], &opts).unwrap();
            let res = run_taylor_test(spec, &family, SHAPE_NAMES[id - 1], report.total, &sweep, &opts.state_newton).unwrap();
            (res, report)
        })
        .collect()
}

/// Criteria 1, 4, 8a and the R1 / scaling / R-doubling properties.
fn closed_form_oracle(c: &mut Checks) {
    let t = Instant::now();
    let spec = example("example1");
    let st = state(&spec, &DomainMeshOptions::new(0.03));
    let ball = BallOptions::new(1000.0, 0.008, 1.05);
    let pd = st.point_data(spec.defaults.z).unwrap();
    let cf = example1_closed_form(&spec, closed_form_inputs(&pd)).unwrap();
    c.note(&format!("example1 D-mesh {} vertices; closed form {:.6e}", st.mesh().num_vertices(), cf.total()));
    let mut worst_r1: f64 = 0.0;
    for id in 1..=5 {
        let shape = InclusionShape::catalog(id).unwrap();
        let b = Arc::new(triangulate_ball_with(&shape, &ball).unwrap());
        let nv = b.mesh.num_vertices();
        let k = solve_corrector(&spec, pd.frozen, b.clone(), &NewtonOptions::default()).unwrap();
        let r = td_at(&spec, &st, spec.defaults.z, b, SHAPE_NAMES[id - 1], &NewtonOptions::default()).unwrap();
        worst_r1 = worst_r1.max(r.r1.abs() / r.total.abs());
        c.note(&format!("{:<16} ball {nv} vertices  total {:.6e}  R1 {:.2e}  R2 {:.6e}  dL {:.6e}", SHAPE_NAMES[id - 1], r.total, r.r1, r.r2, r.dl));
        if id == 1 {
            c.at_most("C1", "example1 disk TD vs closed form, relative", rel(r.total, cf.total()), C1_REL);
            let g = pd.frozen.du0z[0];
            let (b1, b2) = (spec.params["beta_in"], spec.params["beta_out"]);
            let expect = [-(b1 - b2) / (b1 + b2) * g[0], -(b1 - b2) / (b1 + b2) * g[1]];
            let mean = k.mean_gradient(Region::Inside)[0];
            let err = ((mean[0] - expect[0]).powi(2) + (mean[1] - expect[1]).powi(2)).sqrt() / expect[0].hypot(expect[1]);
            c.at_most("C4", "mean DK inside the disk vs -(b1-b2)/(b1+b2) Du0, relative", err, C4_REL);
            let reaction = (spec.params["alpha_in"] - spec.params["alpha_out"]) * pd.frozen.u0z[0] * pd.p0z[0];
            let convection = r.parts_dl.a1 - reaction + r.parts_r2.a1;
            c.at_most("C8a", "assembled convection coefficient vs 2b2/(b1+b2)(b1-b2).Du p, relative", rel(convection, cf.convection), C8_CONVECTION);
        }
    }
    c.at_most("C7", "max |R1|/|total| over five shapes (affine spec)", worst_r1, C7_R1);

    let shape = InclusionShape::catalog(4).unwrap();
    let one = td(&spec, &st, &shape, "shifted_ellipse", &BallOptions::new(1000.0, 0.06, 1.2));
    let two = td(&spec, &st, &shape.scaled(2.0), "shifted_ellipse x2", &BallOptions::new(1000.0, 0.12, 1.2));
    c.at_most("C7", "shape scaling (w vs 2w) relative TD change", rel(two.total, one.total), C7_SCALING);

    let spec2 = example("example2");
    let st2 = state(&spec2, &DomainMeshOptions::new(0.05));
    let shape = InclusionShape::catalog(2).unwrap();
    let a = td(&spec2, &st2, &shape, "shifted_disk", &BallOptions::new(500.0, 0.06, 1.2));
    let b = td(&spec2, &st2, &shape, "shifted_disk", &BallOptions::new(1000.0, 0.06, 1.2));
    c.at_most("C7", "example2 R = 500 vs 1000 relative TD change", rel(a.total, b.total), C7_RADIUS);

    let same: BTreeMap<String, f64> =
        [("beta_in", 2.0), ("alpha_in", 2.0), ("b_in_x", 0.0), ("b_in_y", 1.0), ("f_in", 2.0), ("alpha_tilde_in", 2.0)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
    let spec0 = build_example("example1", &same).unwrap();
    let st0 = state(&spec0, &DomainMeshOptions::new(0.1));
    let z = td(&spec0, &st0, &InclusionShape::catalog(5).unwrap(), "lshape", &BallOptions::new(1000.0, 0.1, 1.3));
    c.at_most("C7", "zero contrast |TD|", z.total.abs(), C7_ZERO);
    c.note(&format!("closed-form block {:.1?}", t.elapsed()));
}

/// Criteria 2, 3, 8b and wrong-TD detection.
fn taylor_slopes(c: &mut Checks) {
    let t = Instant::now();
    let ex1 = taylor(&example("example1"), &[1, 2, 3, 4, 5], 0.05, 0.1, 8);
    for (res, rep) in &ex1 {
        let bound = if res.shape == "disk" || res.shape == "ellipse" { C2_SLOPE_SYMMETRIC } else { C2_SLOPE };
        c.at_least("C2", &format!("example1 {} slope ({} rows fitted)", res.shape, res.included()), res.slope, bound);
        c.at_most("C7", &format!("example1 {} slope with TD off by +20%", res.shape), res.with_td(1.2 * res.td_total).slope, C7_WRONG_TD);
        if !InclusionShape::by_name(&res.shape).unwrap().is_doubly_symmetric() {
            let dropped = res.with_td(res.td_total - rep.parts_r2.a1);
            c.note(&format!("{}: R2 A1-part {:.4e} of TD {:.4e}", res.shape, rep.parts_r2.a1, res.td_total));
            c.record("C8b", format!("example1 {} slope without R2 A1-part: {:.4} (must drop below {C2_SLOPE})", res.shape, dropped.slope), dropped.slope < C2_SLOPE);
        }
    }
    c.note(&format!("example1 Taylor block {:.1?}", t.elapsed()));
    let t = Instant::now();
    for (res, _) in taylor(&example("example2"), &[1, 2, 3, 4, 5], 0.05, 0.1, 8) {
        c.at_least("C2", &format!("example2 {} slope ({} rows fitted)", res.shape, res.included()), res.slope, C2_SLOPE);
    }
    c.note(&format!("example2 Taylor block {:.1?}", t.elapsed()));
    let t = Instant::now();
    for (res, _) in taylor(&example("example4"), &[1, 2, 3, 4], 0.05, 0.1, 8) {
        c.at_least("C3", &format!("example4 {} slope ({} rows fitted)", res.shape, res.included()), res.slope, C2_SLOPE);
    }
    c.note(&format!("example4 Taylor block {:.1?}", t.elapsed()));
    let t = Instant::now();
    let spec5 = example("example5");
    assert_eq!((spec5.defaults.load_steps, spec5.defaults.corrector_damping), (20, 0.002));
    for (res, _) in taylor(&spec5, &[1, 2, 3, 4], 0.1, 0.2, 4) {
        c.at_least("C3", &format!("example5 {} slope ({} rows fitted)", res.shape, res.included()), res.slope, C2_SLOPE);
    }
    c.note(&format!("example5 Taylor block {:.1?}", t.elapsed()));
}

/// Criteria 5 and 6.
fn superposition(c: &mut Checks) {
    let t = Instant::now();
    let mut spec = example("example1");
    let ball = Arc::new(triangulate_ball_with(&InclusionShape::unit_disk(), &BallOptions::new(1000.0, 0.1, 1.2)).unwrap());
    let basis = precompute_basis(&spec, spec.defaults.z, ball.clone(), "disk").unwrap();
    c.record("C5", format!("example1 basis size {} (= m*d + 1 = 3), |K_hat| = {:e}", basis.len(), basis.k_hat.norm()), basis.len() == 3 && basis.k_hat.norm() == 0.0);

    let mut rng = StdRng::seed_from_u64(20240501);
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let g = [[rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)], [0.0, 0.0]];
        let sup = superpose(&basis, &g).unwrap();
        let frozen = FrozenPointData::new(spec.defaults.z, [rng.random_range(-1.0..1.0), 0.0], g).unwrap();
        let direct = solve_corrector(&spec, frozen, ball.clone(), &NewtonOptions::default()).unwrap();
        let diff = sup.values.iter().zip(&direct.k.values).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        worst = worst.max(diff / direct.k.norm());
    }
    c.at_most("C5", "superposed vs direct corrector, relative l2", worst, C5_SUPERPOSITION);

    spec.geometry.subdomains.clear();
    let st = state(&spec, &DomainMeshOptions::new(0.05));
    let before = solver_calls();
    let map = td_field(&spec, &basis, &st).unwrap();
    let extra = solver_calls() - before;
    c.record("C5", format!("td_field over {} cells performed {extra} linear solves (must be 0)", map.values.len()), extra == 0 && map.solves == 0);
    let scale = map.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let t = rng.random_range(0..map.values.len());
        let direct = td_at(&spec, &st, map.centroids[t], ball.clone(), "disk", &NewtonOptions::default()).unwrap();
        worst = worst.max((direct.total - map.values[t]).abs() / scale);
    }
    c.at_most("C5", "td_field vs pointwise TD at 10 random centroids, |diff|/max|field|", worst, C5_FIELD);

    let reference = closed_form_field(&spec, &st, &map).unwrap();
    let interior: Vec<usize> = (0..map.values.len()).filter(|&t| spec.geometry.dist_to_boundary(map.centroids[t]) >= 0.1).collect();
    let ref_scale = interior.iter().fold(0.0f64, |a, &t| a.max(reference[t].abs()));
    let dev = interior.iter().fold(0.0f64, |a, &t| a.max((map.values[t] - reference[t]).abs())) / ref_scale;
    c.at_most("C6", &format!("td_field vs closed form on {} interior cells, max|diff|/max|closed form|", interior.len()), dev, C6_REL);

    // Least-squares coefficient of Du.Dp in the field after removing the other closed-form terms.
    let (mut num, mut den) = (0.0, 0.0);
    for &t in &interior {
        let pd = st.point_data(map.centroids[t]).unwrap();
        let cf = example1_closed_form(&spec, closed_form_inputs(&pd)).unwrap();
        let x = pd.frozen.du0z[0][0] * pd.dp0z[0][0] + pd.frozen.du0z[0][1] * pd.dp0z[0][1];
        num += x * (map.values[t] - (cf.total() - cf.diffusion));
        den += x * x;
    }
    let (b1, b2) = (spec.params["beta_in"], spec.params["beta_out"]);
    let expect = 2.0 * b2 * (b1 - b2) / (b1 + b2);
    c.at_most("C6", &format!("fitted Du.Dp coefficient {:.5} vs {expect:.5}, relative", num / den), rel(num / den, expect), C6_COEFF_REL);
    c.note(&format!("superposition block {:.1?}", t.elapsed()));
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

/// Remaining criterion-7 properties.
fn discretisation_properties(c: &mut Checks) {
    // AD jacobian of the assembled residual against central differences.
    let mut worst: f64 = 0.0;
    for name in ["example2", "example5"] {
        let spec = example(name);
        let mesh = Arc::new(triangulate_domain(&spec.geometry, 0.15, None).unwrap());
        let asm = Assembler::new(mesh.clone(), spec.m);
        let form = StateForm::new(&spec);
        let s = if spec.m == 2 { 0.02 } else { 1.0 };
        let u = FieldFunction::interpolate(mesh.clone(), spec.m, |x| [s * (x[0] + 1.0) * (x[1] + 0.5), s * (2.0 * x[0]).sin() * x[1]]);
        let dir = FieldFunction::interpolate(mesh.clone(), spec.m, |x| [(2.0 * x[1]).cos() * (x[0] + 1.0), x[0] * x[1]]);
        let k = asm.jacobian(&form, &u, 1.0).unwrap();
        let jv = asm.matvec(&k, &asm.restrict(&dir.values));
        let h = 1e-6;
        let shifted = |e: f64| {
            let vals: Vec<f64> = u.values.iter().zip(&dir.values).map(|(a, b)| a + e * b).collect();
            asm.residual(&form, &u.with_values(vals).unwrap(), 1.0).unwrap()
        };
        let (rp, rm) = (shifted(h), shifted(-h));
        let scale = jv.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for i in 0..jv.len() {
            worst = worst.max(((rp[i] - rm[i]) / (2.0 * h) - jv[i]).abs() / scale);
        }
    }
    c.at_most("C7", "AD jacobian vs central differences (examples 2, 5), max relative", worst, C7_AD_FD);

    let mut pts = Vec::new();
    for h in [0.1, 0.05, 0.025] {
        let mut g = DomainGeometry::rectangle([0.0, 0.0], [1.0, 1.0]);
        g.dirichlet = vec![
            Segment::new([0.0, 0.0], [1.0, 0.0]),
            Segment::new([1.0, 0.0], [1.0, 1.0]),
            Segment::new([1.0, 1.0], [0.0, 1.0]),
            Segment::new([0.0, 1.0], [0.0, 0.0]),
        ];
        let mesh = Arc::new(triangulate_domain(&g, h, None).unwrap());
        let asm = Assembler::new(mesh.clone(), 1);
        let (u, _) = topoforge::fem::solve_newton(&asm, &Poisson, &asm.zeros(), &NewtonOptions::default()).unwrap();
        let err = u.l2_error(|x| -> RVec { [(PI * x[0]).sin() * (PI * x[1]).sin(), 0.0] });
        pts.push(((mesh.num_vertices() as f64).ln(), err.ln()));
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = -2.0 * pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    c.at_least("C7", "P1 manufactured-solution L2 convergence slope in h", slope, C7_L2_SLOPE);

    let mut spec = example("example4");
    spec.geometry.dirichlet.clear();
    spec.geometry.load_segments.clear();
    let mesh = Arc::new(triangulate_domain(&spec.geometry, 0.15, None).unwrap());
    let asm = Assembler::new(mesh.clone(), 2);
    let k = asm.jacobian(&StateForm::new(&spec), &asm.zeros(), 1.0).unwrap();
    let kmax = k.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut worst: f64 = 0.0;
    let modes: [fn(Point) -> RVec; 3] = [|_| [1.0, 0.0], |_| [0.0, 1.0], |x| [-x[1], x[0]]];
    for mode in modes {
        let v = FieldFunction::interpolate(mesh.clone(), 2, mode);
        let r = asm.matvec(&k, &v.values).iter().fold(0.0f64, |a, x| a.max(x.abs()));
        worst = worst.max(r / kmax);
    }
    c.at_most("C7", "elasticity stiffness applied to rigid motions, max|Kr|/max|K|", worst, C7_KERNEL);
}

#[test]
fn acceptance() {
    let mut c = Checks { results: Vec::new() };
    let t = Instant::now();
    discretisation_properties(&mut c);
    closed_form_oracle(&mut c);
    superposition(&mut c);
    taylor_slopes(&mut c);
    let failed: Vec<&String> = c.results.iter().filter(|r| !r.1).map(|r| &r.0).collect();
    let _ = writeln!(std::io::stderr().lock(), "acceptance: {} checks, {} failed, {:.1?}", c.results.len(), failed.len(), t.elapsed());
    assert!(failed.is_empty(), "failed checks:\n{}", failed.iter().map(|s| s.as_str()).collect::<Vec<_>>().join("\n"));
}
