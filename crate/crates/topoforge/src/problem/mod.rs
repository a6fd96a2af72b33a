//! The abstract problem class: piecewise coefficients A1, A2, loads F1, F2,
//! cost integrands j, j_bnd and Neumann data, plus the built-in examples.

mod examples;
mod material;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::autodiff::{DMat, DVec, Dual, RMat, RVec};
use crate::mesh::{DomainGeometry, Region};
use crate::Point;

pub use examples::{build_example, example1_closed_form, reluctivity, ClosedForm, ClosedFormInputs, EXAMPLE_NAMES};
pub use material::{lame_from_engineering, linear_stress, stvk_stress, stvk_stress_dual};

/// Coefficient callback (x, y1, y2) ↦ T over the AD scalar.
pub type Coefficient<T> = Arc<dyn Fn(Point, &DVec, &DMat) -> T + Send + Sync>;
/// State-independent data x ↦ T.
pub type Source<T> = Arc<dyn Fn(Point) -> T + Send + Sync>;

/// Data of one side (Ω or D \ Ω).
#[derive(Clone)]
pub struct SideCoefficients {
    pub a1: Coefficient<DVec>,
    pub a2: Coefficient<DMat>,
    pub f1: Source<RVec>,
    pub f2: Source<RMat>,
    pub j: Coefficient<Dual>,
}

impl SideCoefficients {
    /// Everything zero.
    pub fn zero() -> Self {
        SideCoefficients {
            a1: Arc::new(|_, _, _| [Dual::ZERO; 2]),
            a2: Arc::new(|_, _, _| [[Dual::ZERO; 2]; 2]),
            f1: Arc::new(|_| [0.0; 2]),
            f2: Arc::new(|_| [[0.0; 2]; 2]),
            j: Arc::new(|_, _, _| Dual::ZERO),
        }
    }
}

/// Solver settings an example ships with (overridable from the config).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleDefaults {
    pub z: Point,
    /// Catalogue ids of the shapes swept by default.
    pub shapes: Vec<usize>,
    pub load_steps: usize,
    pub corrector_damping: f64,
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    /// Number of solution components (1 or 2).
    pub m: usize,
    pub inside: SideCoefficients,
    pub outside: SideCoefficients,
    /// Boundary cost integrand on ∂D.
    pub j_bnd: Coefficient<Dual>,
    /// Traction on Γ_N (only applied on the load segments when the geometry has any).
    pub g_n: Source<RVec>,
    pub geometry: DomainGeometry,
    /// Named scalar parameters (after overrides), echoed into manifests.
    pub params: BTreeMap<String, f64>,
    pub defaults: ExampleDefaults,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("m", &self.m)
            .field("geometry", &self.geometry)
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    pub fn side(&self, region: Region) -> &SideCoefficients {
        match region {
            Region::Inside => &self.inside,
            Region::Outside => &self.outside,
        }
    }

    /// Ω indicator.
    pub fn in_omega(&self, x: Point) -> bool {
        self.geometry.in_omega(x)
    }

    /// Region of x according to the Ω indicator.
    pub fn region_at(&self, x: Point) -> Region {
        if self.in_omega(x) {
            Region::Inside
        } else {
            Region::Outside
        }
    }

    /// Same problem with the outside data on both sides (no contrast).
    pub fn without_contrast(&self) -> ProblemSpec {
        let mut s = self.clone();
        s.inside = s.outside.clone();
        s.name = format!("{}-no-contrast", self.name);
        s
    }
}
