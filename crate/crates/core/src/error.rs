use thiserror::Error;

use crate::mesh::MeshError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),

    #[error("unsupported quadrature degree {0}")]
    UnsupportedDegree(usize),

    #[error("selected points inconsistent with mesh geometry in cell {cell}: {reason}")]
    SelectedPoints { cell: usize, reason: String },

    #[error("nonpositive length scale {0}")]
    NonpositiveScale(f64),

    #[error("zero direction vector")]
    ZeroDirection,

    #[error("non-finite value in {what} at cell {cell}")]
    NonFinite { what: &'static str, cell: usize },

    #[error("non-finite state after stage {stage}")]
    NonFiniteStage { stage: usize },

    #[error(
        "cell {cell}: average {average} outside bounds [{lower}, {upper}] (time step violates the CFL bound?)"
    )]
    AverageOutOfBounds {
        cell: usize,
        average: f64,
        lower: f64,
        upper: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("conjugate gradients did not converge in {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
