use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh specification: {0}")]
    InvalidMeshSpec(String),

    #[error("degenerate mesh: element {element} has non-positive Jacobian {det_j:e} at Gauss point {gauss_point}")]
    DegenerateElement {
        element: usize,
        gauss_point: usize,
        det_j: f64,
    },

    #[error("boundary set `{0}` selects no degrees of freedom")]
    EmptySelection(String),

    #[error("boundary set `{0}` already exists with a different selection")]
    DuplicateBoundary(String),

    #[error("unknown boundary set `{0}`")]
    UnknownBoundary(String),

    #[error("inverted element {element}: J = {det_f:e} at Gauss point {gauss_point}")]
    InvertedElement {
        element: usize,
        gauss_point: usize,
        det_f: f64,
    },

    /// Raised at the material-point level before the element id is known.
    #[error("non-positive volume ratio J = {0:e}")]
    NonPositiveJacobian(f64),

    #[error("conflicting prescribed values on node {node}, dof {dof}: {first} vs {second}")]
    ConflictingConstraint {
        node: usize,
        dof: usize,
        first: f64,
        second: f64,
    },

    #[error("linear solver failure: {0}")]
    LinearSolver(String),

    #[error("Newton solver did not converge (last residual history: {history:?})")]
    NonConvergence { history: Vec<f64> },

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
