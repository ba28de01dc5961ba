use thiserror::Error;

use crate::sdp::SolveStatus;

/// Errors raised by operator algebra, channel construction, solvers and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("label collision: `{0}` appears in both layouts")]
    LabelCollision(String),

    #[error("duplicate label `{0}` in layout")]
    DuplicateLabel(String),

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("invalid dimension {dim} for factor `{label}`")]
    InvalidDimension { label: String, dim: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("not a density operator: minimum eigenvalue {min_eig:.3e}, trace {trace:.12}")]
    NotDensity { min_eig: f64, trace: f64 },

    #[error("not a quantum channel: {0}")]
    NotChannel(String),

    #[error("map is not linear (deviation {0:.3e})")]
    Nonlinear(f64),

    #[error("channel is not completely PPT-preserving (min eigenvalue {0:.3e})")]
    NotCpptp(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed problem: {0}")]
    MalformedProblem(String),

    #[error("solver did not reach optimality: {status:?} after {iterations} iterations")]
    Solver { status: SolveStatus, iterations: usize },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
