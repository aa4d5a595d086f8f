//! Tactile signal processing: depth from surface gradients, raw-moment
//! contact features, Lucas-Kanade flow and flow-distribution entropy.

mod flow;
mod grid;
mod moments;
mod pgm;
mod poisson;

pub use flow::{
    flow_entropy, lucas_kanade, write_flow_table, FlowField, FlowStatus, EIGEN_THRESHOLD,
    ENTROPY_BINS, ENTROPY_RANGE,
};
pub use grid::{DepthGrid, GradientField, Image};
pub use moments::{moments_features, Moments};
pub use pgm::{read_pgm, write_pgm, PgmData, PGM_MAX};
pub use poisson::{depth_from_gradients, PoissonSolution};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TactileError {
    #[error("grid must be at least 2x2 with {expected} values, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("non-finite value in input")]
    NonFinite,
    #[error("depth values must be non-negative")]
    NegativeDepth,
    #[error("image intensities must lie in [0, 1]")]
    Intensity,
    #[error("{0}")]
    InvalidArgument(String),
    #[error("no valid flow vectors: frame pair unusable")]
    NoValidVectors,
    #[error("pgm parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for TactileError {
    fn from(e: std::io::Error) -> Self {
        TactileError::Io(e.to_string())
    }
}

/// Contact observation: centroid and total indentation from the depth image,
/// flow entropies along x and y.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TactileFeatures {
    pub centroid: (f64, f64),
    pub sum: f64,
    pub entropy_x: f64,
    pub entropy_y: f64,
}
