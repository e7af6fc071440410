use std::path::PathBuf;

use thiserror::Error;

use crate::morton::PointId;

/// Errors raised by the library and the command-line harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported dimension {0}: only 2 and 3 are supported")]
    Dimension(usize),

    #[error("bit budget exceeded: {bits_per_dim} bits x {dim} dimensions > {max}")]
    BitBudget {
        dim: usize,
        bits_per_dim: u32,
        max: u32,
    },

    #[error("degenerate universe box on axis {axis}: lo {lo} must be < hi {hi}")]
    DegenerateBox { axis: usize, lo: f64, hi: f64 },

    #[error("point {id} has {got} coordinates, expected {expected}")]
    CoordCount {
        id: PointId,
        got: usize,
        expected: usize,
    },

    #[error("point {id} has a non-finite coordinate on axis {axis}")]
    NonFinite { id: PointId, axis: usize },

    #[error("point {id} lies outside the universe box on axis {axis} (value {value})")]
    OutOfBox { id: PointId, axis: usize, value: f64 },

    #[error("point id {0} appears more than once in the batch")]
    DuplicateId(PointId),

    #[error("point id {0} is already stored in the tree")]
    IdPresent(PointId),

    #[error("point {0} does not belong to the tree's grid")]
    OutsideUniverse(PointId),

    #[error("query is not contained in the starting node's box")]
    QueryOutsideNode,

    #[error("k must be at least 1")]
    ZeroK,

    #[error("leaf cutoff must be at least 1")]
    ZeroLeafCutoff,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unknown distribution `{0}`")]
    UnknownDistribution(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
