use std::path::PathBuf;

use crate::Point;

/// Errors surfaced by every stage of the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A callback produced NaN/Inf.
    #[error("evaluation-domain error at x = ({}, {}): {what}", .point[0], .point[1])]
    EvaluationDomain { point: Point, what: String },

    #[error("invalid tangent direction {0}")]
    InvalidDirection(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("mesh construction failed: {0}")]
    Mesh(String),

    #[error("point ({}, {}) lies outside the mesh", .0[0], .0[1])]
    OutsideMesh(Point),

    #[error("linear solve failed in stage `{stage}`: {reason}")]
    LinearSolve { stage: String, reason: String },

    #[error("Newton did not converge at load step {step} after {iterations} iterations (residual norm {residual:e}, damping {damping})")]
    NewtonDivergence {
        step: usize,
        iterations: usize,
        residual: f64,
        damping: f64,
    },

    #[error("unknown example `{0}`")]
    UnknownExample(String),

    #[error("unknown override key `{key}` for example `{example}`")]
    UnknownOverride { example: String, key: String },

    #[error("coefficient is not linear: {0}")]
    NotLinear(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Root cause with stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit status used by the CLI: 2 schema/input, 3 solver, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config { .. }
            | Error::UnknownExample(_)
            | Error::UnknownOverride { .. }
            | Error::InvalidInput(_) => 2,
            Error::Io { .. } | Error::Format { .. } => 4,
            _ => 3,
        }
    }
}

/// Attach a stage name to an error.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage { stage, source: Box::new(e) })
    }
}
