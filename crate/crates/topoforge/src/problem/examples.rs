//! Built-in problems: scalar diffusion–convection–reaction (examples 1, 2)
//! and the cantilever in linear / St. Venant–Kirchhoff elasticity (4, 5).

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use super::material::{lame_from_engineering, linear_stress, stvk_stress_dual};
use super::{ExampleDefaults, ProblemSpec, SideCoefficients};
use crate::autodiff::{frob, DMat, DVec, Dual};
use crate::error::{Error, Result};
use crate::mesh::{Circle, DomainGeometry, Segment};

pub const EXAMPLE_NAMES: [&str; 4] = ["example1", "example2", "example4", "example5"];

type Params = BTreeMap<String, f64>;

fn params(defaults: &[(&str, f64)], name: &str, overrides: &BTreeMap<String, f64>) -> Result<Params> {
    let mut p: Params = defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    for (k, v) in overrides {
        match p.get_mut(k) {
            Some(slot) => *slot = *v,
            None => return Err(Error::UnknownOverride { example: name.to_string(), key: k.clone() }),
        }
    }
    if let Some((k, v)) = p.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("parameter `{k}` of {name} is not finite ({v})")));
    }
    Ok(p)
}

/// The named example with scalar overrides applied.
pub fn build_example(name: &str, overrides: &BTreeMap<String, f64>) -> Result<ProblemSpec> {
    match name {
        "example1" => scalar_example(name, overrides, false),
        "example2" => scalar_example(name, overrides, true),
        "example4" => elasticity_example(name, overrides, false),
        "example5" => elasticity_example(name, overrides, true),
        _ => Err(Error::UnknownExample(name.to_string())),
    }
}

const SCALAR_LINEAR: [(&str, f64); 19] = [
    ("alpha_tilde_in", 1.0),
    ("alpha_tilde_out", 2.0),
    ("beta_tilde_in", 0.0),
    ("beta_tilde_out", 0.0),
    ("gamma_tilde", 0.0),
    ("b_in_x", 1.0),
    ("b_in_y", 0.0),
    ("b_out_x", 0.0),
    ("b_out_y", 1.0),
    ("f_in", 1.0),
    ("f_out", 2.0),
    ("m_in_x", 0.0),
    ("m_in_y", 0.0),
    ("m_out_x", 0.0),
    ("m_out_y", 0.0),
    ("beta_in", 1.0),
    ("beta_out", 2.0),
    ("alpha_in", 1.0),
    ("alpha_out", 2.0),
];

/// Example-2 reluctivity ν0 − (ν0 − floor)·exp(−s⁶/1000), evaluated through s².
pub fn reluctivity(s2: Dual, nu0: f64, floor: f64) -> Dual {
    nu0 - (nu0 - floor) * (-(s2 * s2 * s2) / 1000.0).exp()
}

fn scalar_example(name: &str, overrides: &BTreeMap<String, f64>, nonlinear: bool) -> Result<ProblemSpec> {
    let mut defaults: Vec<(&str, f64)> = SCALAR_LINEAR.to_vec();
    if nonlinear {
        for (k, v) in [("beta_tilde_in", 1.0), ("beta_tilde_out", 2.0), ("gamma_tilde", 1.0), ("m_in_x", 1.0), ("m_out_y", 1.0)] {
            defaults.iter_mut().find(|(n, _)| *n == k).unwrap().1 = v;
        }
        // β_out is the reluctivity curve; α_out multiplies u³.
        defaults.retain(|(n, _)| *n != "beta_out");
        defaults.iter_mut().find(|(n, _)| *n == "alpha_out").unwrap().1 = 1.0;
        defaults.push(("nu0", 1e7 / (4.0 * PI)));
        defaults.push(("reluctivity_floor", 200.0));
    }
    let p = params(&defaults, name, overrides)?;
    let g = |k: &str| p[k];

    let side = |tag: &str| -> SideCoefficients {
        let at = g(&format!("alpha_tilde_{tag}"));
        let bt = g(&format!("beta_tilde_{tag}"));
        let b = [g(&format!("b_{tag}_x")), g(&format!("b_{tag}_y"))];
        let f = g(&format!("f_{tag}"));
        let mm = [g(&format!("m_{tag}_x")), g(&format!("m_{tag}_y"))];
        let alpha = g(&format!("alpha_{tag}"));
        let cubic = nonlinear && tag == "out";
        let a1 = Arc::new(move |_: crate::Point, y1: &DVec, y2: &DMat| {
            let u = y1[0];
            let react = if cubic { alpha * u * u * u } else { alpha * u };
            [b[0] * y2[0][0] + b[1] * y2[0][1] + react, Dual::ZERO]
        });
        let a2: super::Coefficient<DMat> = if nonlinear && tag == "out" {
            let (nu0, floor) = (g("nu0"), g("reluctivity_floor"));
            Arc::new(move |_, _, y2: &DMat| {
                let beta = reluctivity(y2[0][0] * y2[0][0] + y2[0][1] * y2[0][1], nu0, floor);
                [[beta * y2[0][0], beta * y2[0][1]], [Dual::ZERO; 2]]
            })
        } else {
            let beta = g(&format!("beta_{tag}"));
            Arc::new(move |_, _, y2: &DMat| [[beta * y2[0][0], beta * y2[0][1]], [Dual::ZERO; 2]])
        };
        SideCoefficients {
            a1,
            a2,
            f1: Arc::new(move |_| [f, 0.0]),
            f2: Arc::new(move |_| [mm, [0.0; 2]]),
            j: Arc::new(move |_, y1: &DVec, y2: &DMat| at * y1[0] * y1[0] + bt * (y2[0][0] * y2[0][0] + y2[0][1] * y2[0][1])),
        }
    };
    let gamma = g("gamma_tilde");
    let mut geometry = DomainGeometry::rectangle([-1.0, -1.0], [1.0, 1.0]);
    geometry.subdomains.push(Circle { center: [0.0, -0.5], radius: 0.3 });
    geometry.dirichlet.push(Segment::new([-1.0, -1.0], [-1.0, 1.0]));
    geometry.dirichlet.push(Segment::new([-1.0, -1.0], [1.0, -1.0]));
    Ok(ProblemSpec {
        name: name.to_string(),
        m: 1,
        inside: side("in"),
        outside: side("out"),
        j_bnd: Arc::new(move |_, y1: &DVec, _| gamma * y1[0] * y1[0]),
        g_n: Arc::new(|x| [x[0] * x[1], 0.0]),
        geometry,
        params: p,
        defaults: ExampleDefaults { z: [0.0, 0.5], shapes: vec![1, 2, 3, 4, 5], load_steps: 1, corrector_damping: 1.0 },
    })
}

fn elasticity_example(name: &str, overrides: &BTreeMap<String, f64>, nonlinear: bool) -> Result<ProblemSpec> {
    let nu = if nonlinear { 0.3 } else { 1.0 / 3.0 };
    let (gy, fy) = if nonlinear { (-20.0, -5.0) } else { (-1.0, 0.0) };
    let defaults = [
        ("young_in", 0.1),
        ("young_out", 1000.0),
        ("poisson_in", nu),
        ("poisson_out", nu),
        ("g_x", 0.0),
        ("g_y", gy),
        ("f_in_x", 0.0),
        ("f_in_y", 0.0),
        ("f_out_x", 0.0),
        ("f_out_y", fy),
        ("neumann_x1", 2.0),
    ];
    let p = params(&defaults, name, overrides)?;
    let side = |tag: &str| -> Result<SideCoefficients> {
        let (mu, lambda) = lame_from_engineering(p[&format!("young_{tag}")], p[&format!("poisson_{tag}")])?;
        let f = [p[&format!("f_{tag}_x")], p[&format!("f_{tag}_y")]];
        let stress = move |y2: &DMat| if nonlinear { stvk_stress_dual(y2, mu, lambda) } else { linear_stress(y2, mu, lambda) };
        Ok(SideCoefficients {
            a1: Arc::new(|_, _, _| [Dual::ZERO; 2]),
            a2: Arc::new(move |_, _, y2: &DMat| stress(y2)),
            f1: Arc::new(move |_| f),
            f2: Arc::new(|_| [[0.0; 2]; 2]),
            j: Arc::new(move |_, _, y2: &DMat| 0.5 * frob(&stress(y2), y2)),
        })
    };
    let x1 = p["neumann_x1"];
    if !(x1 > 0.0 && x1 <= 2.0) {
        return Err(Error::InvalidInput(format!("neumann_x1 = {x1} must lie in (0, 2]")));
    }
    let mut geometry = DomainGeometry::rectangle([0.0, 0.0], [2.0, 1.0]);
    geometry.subdomains = vec![
        Circle { center: [0.5, 0.5], radius: 0.3 },
        Circle { center: [1.8, 0.25], radius: 0.1 },
        Circle { center: [1.8, 0.75], radius: 0.1 },
    ];
    geometry.dirichlet.push(Segment::new([0.0, 0.0], [0.0, 0.12]));
    geometry.dirichlet.push(Segment::new([0.0, 0.88], [0.0, 1.0]));
    geometry.load_segments.push(Segment::new([x1, 0.45], [x1, 0.55]));
    let gn = [p["g_x"], p["g_y"]];
    Ok(ProblemSpec {
        name: name.to_string(),
        m: 2,
        inside: side("in")?,
        outside: side("out")?,
        j_bnd: Arc::new(|_, _, _| Dual::ZERO),
        g_n: Arc::new(move |_| gn),
        geometry,
        params: p,
        defaults: ExampleDefaults {
            z: [1.2, 0.5],
            shapes: vec![1, 2, 3, 4],
            load_steps: if nonlinear { 20 } else { 1 },
            corrector_damping: if nonlinear { 0.002 } else { 1.0 },
        },
    })
}

/// Point values entering the closed-form topological derivative of example 1.
#[derive(Clone, Copy, Debug)]
pub struct ClosedFormInputs {
    pub u: f64,
    pub grad_u: [f64; 2],
    pub p: f64,
    pub grad_p: [f64; 2],
}

/// Terms of the closed-form topological derivative of the linear scalar
/// problem for a disk inclusion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosedForm {
    /// 2β2(β1−β2)/(β1+β2) ∇u·∇p
    pub diffusion: f64,
    /// 2β2/(β1+β2) (b1−b2)·∇u p
    pub convection: f64,
    /// (α1−α2) u p
    pub reaction: f64,
    /// −(f1−f2) p
    pub source: f64,
    /// (α̃1−α̃2) u²
    pub cost: f64,
}

impl ClosedForm {
    pub fn total(&self) -> f64 {
        self.diffusion + self.convection + self.reaction + self.source + self.cost
    }
}

/// Closed form for example 1 (requires the linear scalar parameter set with
/// β̃ = 0 and M = 0).
pub fn example1_closed_form(spec: &ProblemSpec, at: ClosedFormInputs) -> Result<ClosedForm> {
    let p = &spec.params;
    let get = |k: &str| p.get(k).copied().ok_or_else(|| Error::InvalidInput(format!("{} has no parameter `{k}`", spec.name)));
    let (b1, b2) = (get("beta_in")?, get("beta_out")?);
    let db = [get("b_in_x")? - get("b_out_x")?, get("b_in_y")? - get("b_out_y")?];
    let gu_gp = at.grad_u[0] * at.grad_p[0] + at.grad_u[1] * at.grad_p[1];
    Ok(ClosedForm {
        diffusion: 2.0 * b2 * (b1 - b2) / (b1 + b2) * gu_gp,
        convection: 2.0 * b2 / (b1 + b2) * (db[0] * at.grad_u[0] + db[1] * at.grad_u[1]) * at.p,
        reaction: (get("alpha_in")? - get("alpha_out")?) * at.u * at.p,
        source: -(get("f_in")? - get("f_out")?) * at.p,
        cost: (get("alpha_tilde_in")? - get("alpha_tilde_out")?) * at.u * at.u,
    })
}
