//! Run configuration: a TOML file plus dotted `key=value` overrides.
//!
//! Unknown keys are rejected; errors carry the offending field path.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::NewtonOptions;
use crate::mesh::{BallOptions, DomainMeshOptions, InclusionShape, Refinement, SHAPE_NAMES};
use crate::problem::{build_example, ProblemSpec};
use crate::taylor::{EpsilonSweep, TaylorOptions};
use crate::tdcore::TdOptions;
use crate::Point;

/// Environment variable that replaces `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "TOPOFORGE_OUTPUT_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    TdPoint,
    Taylor,
    TdField,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::TdPoint => "td-point",
            Command::Taylor => "taylor",
            Command::TdField => "td-field",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub example: String,
    /// Optional; must agree with the subcommand when given.
    #[serde(default)]
    pub command: Option<Command>,
    /// Scalar parameter overrides of the example.
    #[serde(default)]
    pub overrides: BTreeMap<String, f64>,
    #[serde(default)]
    pub point: PointConfig,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub field: FieldConfig,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_output() -> PathBuf {
    PathBuf::from("topoforge-out")
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointConfig {
    /// Evaluation point; the example default when absent.
    pub z: Option<Point>,
    /// Shape names; the example's default list when absent.
    pub shapes: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub h_coarse: f64,
    /// Local size near z (no refinement when absent).
    pub h_fine: Option<f64>,
    pub refine_radius: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub h_ball: f64,
    /// Ring ratio of the ball mesh for `td-point` and `td-field`.
    pub grading: f64,
    /// Rings per ε-step of the Taylor family (its ratio is δ^{1/layers}).
    pub taylor_layers: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig { h_coarse: 0.05, h_fine: None, refine_radius: 0.2, radius: 1000.0, h_ball: 0.1, grading: 1.2, taylor_layers: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub eps0: f64,
    pub delta: f64,
    pub count: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let s = EpsilonSweep::default();
        SweepConfig { eps0: s.eps0, delta: s.delta, count: s.count }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub rtol: f64,
    pub max_iter: usize,
    /// Corrector Newton damping; example default when absent.
    pub damping: Option<f64>,
    /// State load steps; example default when absent.
    pub load_steps: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let n = NewtonOptions::default();
        SolverConfig { rtol: n.rtol, max_iter: n.max_iter, damping: None, load_steps: None }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldConfig {
    /// Drop Ω from the design domain (Ω = ∅).
    pub clear_omega: bool,
}

fn schema(path: &str, message: impl Into<String>) -> Error {
    Error::Config { path: path.to_string(), message: message.into() }
}

/// Apply one `a.b.c=value` override to a TOML table. The value is parsed as
/// TOML, falling back to a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| schema(assignment, "expected key=value"))?;
    let key = key.trim();
    let value = match format!("v = {}", raw.trim()).parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(schema(key, "empty key segment"));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| schema(key, format!("`{p}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Parse TOML text with overrides and validate.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| schema("<config>", e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| schema(&e.path().to_string(), e.inner().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, overrides)
    }

    /// Checks everything that can be checked without solving.
    pub fn validate(&self) -> Result<()> {
        self.spec()?;
        self.shapes()?;
        let m = &self.mesh;
        let positive = [("mesh.h_coarse", m.h_coarse), ("mesh.refine_radius", m.refine_radius), ("mesh.h_ball", m.h_ball), ("solver.rtol", self.solver.rtol)];
        for (k, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(schema(k, format!("must be positive, got {v}")));
            }
        }
        if let Some(h) = m.h_fine {
            if !(h.is_finite() && h > 0.0 && h <= m.h_coarse) {
                return Err(schema("mesh.h_fine", format!("must lie in (0, h_coarse], got {h}")));
            }
        }
        if !(m.radius.is_finite() && m.radius >= 8.0) {
            return Err(schema("mesh.R", format!("must be at least 8, got {}", m.radius)));
        }
        if !(m.grading.is_finite() && m.grading > 1.0) {
            return Err(schema("mesh.grading", format!("must exceed 1, got {}", m.grading)));
        }
        if m.taylor_layers == 0 {
            return Err(schema("mesh.taylor_layers", "must be positive"));
        }
        self.sweep().validate().map_err(|e| schema("sweep", e.to_string()))?;
        if self.solver.max_iter == 0 {
            return Err(schema("solver.max_iter", "must be positive"));
        }
        if let Some(d) = self.solver.damping {
            if !(d.is_finite() && d > 0.0 && d <= 1.0) {
                return Err(schema("solver.damping", format!("must lie in (0, 1], got {d}")));
            }
        }
        if self.solver.load_steps == Some(0) {
            return Err(schema("solver.load_steps", "must be positive"));
        }
        if self.threads == Some(0) {
            return Err(schema("threads", "must be positive"));
        }
        let spec = self.spec()?;
        let z = self.z(&spec);
        if !z.iter().all(|v| v.is_finite()) || !spec.geometry.contains(z) || spec.in_omega(z) {
            return Err(schema("point.z", format!("{z:?} must lie in D outside Ω")));
        }
        Ok(())
    }

    pub fn check_command(&self, cmd: Command) -> Result<()> {
        match self.command {
            Some(c) if c != cmd => Err(schema("command", format!("config is for `{}`, invoked as `{}`", c.name(), cmd.name()))),
            _ => Ok(()),
        }
    }

    /// The example with overrides (and Ω removed when asked to).
    pub fn spec(&self) -> Result<ProblemSpec> {
        let mut spec = build_example(&self.example, &self.overrides).map_err(|e| match e {
            Error::UnknownExample(_) => schema("example", e.to_string()),
            Error::UnknownOverride { ref key, .. } => schema(&format!("overrides.{key}"), e.to_string()),
            other => schema("overrides", other.to_string()),
        })?;
        if self.field.clear_omega {
            spec.geometry.subdomains.clear();
        }
        Ok(spec)
    }

    pub fn z(&self, spec: &ProblemSpec) -> Point {
        self.point.z.unwrap_or(spec.defaults.z)
    }

    /// (name, shape) pairs in configured order.
    pub fn shapes(&self) -> Result<Vec<(String, InclusionShape)>> {
        match &self.point.shapes {
            Some(names) => {
                if names.is_empty() {
                    return Err(schema("point.shapes", "empty shape list"));
                }
                names
                    .iter()
                    .enumerate()
                    .map(|(i, n)| InclusionShape::by_name(n).map(|s| (n.clone(), s)).map_err(|e| schema(&format!("point.shapes[{i}]"), e.to_string())))
                    .collect()
            }
            None => {
                let spec = build_example(&self.example, &self.overrides).map_err(|e| schema("example", e.to_string()))?;
                spec.defaults.shapes.iter().map(|&id| Ok((SHAPE_NAMES[id - 1].to_string(), InclusionShape::catalog(id)?))).collect()
            }
        }
    }

    pub fn sweep(&self) -> EpsilonSweep {
        EpsilonSweep { eps0: self.sweep.eps0, delta: self.sweep.delta, count: self.sweep.count }
    }

    pub fn domain_mesh(&self, spec: &ProblemSpec) -> DomainMeshOptions {
        let mut o = DomainMeshOptions::new(self.mesh.h_coarse);
        o.refine = self.mesh.h_fine.map(|h_fine| Refinement { z: self.z(spec), h_fine, radius: self.mesh.refine_radius });
        o
    }

    pub fn state_newton(&self, spec: &ProblemSpec) -> NewtonOptions {
        let mut n = NewtonOptions::default().with_load_steps(self.solver.load_steps.unwrap_or(spec.defaults.load_steps));
        n.rtol = self.solver.rtol;
        n.max_iter = self.solver.max_iter;
        n
    }

    pub fn corrector_newton(&self, spec: &ProblemSpec) -> NewtonOptions {
        let mut n = NewtonOptions::default().with_damping(self.solver.damping.unwrap_or(spec.defaults.corrector_damping));
        n.rtol = self.solver.rtol;
        n.max_iter = self.solver.max_iter;
        n
    }

    pub fn td_options(&self, spec: &ProblemSpec) -> TdOptions {
        TdOptions {
            domain_mesh: self.domain_mesh(spec),
            ball: BallOptions::new(self.mesh.radius, self.mesh.h_ball, self.mesh.grading),
            state_newton: self.state_newton(spec),
            corrector_newton: self.corrector_newton(spec),
        }
    }

    pub fn taylor_options(&self, spec: &ProblemSpec) -> TaylorOptions {
        let grading = TaylorOptions::grading_for(&self.sweep(), self.mesh.taylor_layers);
        TaylorOptions {
            domain_mesh: self.domain_mesh(spec),
            ball: BallOptions::new(self.mesh.radius, self.mesh.h_ball, grading),
            state_newton: self.state_newton(spec),
            corrector_newton: self.corrector_newton(spec),
        }
    }

    /// Output directory, honouring [`OUTPUT_DIR_ENV`].
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(d) if !d.is_empty() => PathBuf::from(d),
            _ => self.output_dir.clone(),
        }
    }
}
