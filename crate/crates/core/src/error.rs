use std::path::PathBuf;

use crate::volume::Dims;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid dimensions {0:?}: {1}")]
    InvalidDims([usize; 3], &'static str),
    #[error("voxel spacing must be finite and strictly positive, got {0:?}")]
    InvalidSpacing([f64; 3]),
    #[error("data length {actual} does not match dims {dims} ({expected} voxels)")]
    LengthMismatch {
        dims: Dims,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value at linear index {0}")]
    NonFinite(usize),
    #[error("mask value {value} at linear index {index} is not 0 or 1")]
    InvalidMaskValue { index: usize, value: u8 },
    #[error("dimension mismatch: {0} vs {1}")]
    DimsMismatch(Dims, Dims),
    #[error("click {pos:?} lies outside volume {dims}")]
    OutOfBounds { pos: [usize; 3], dims: Dims },
    #[error("duplicate click at {0:?}")]
    DuplicateClick([usize; 3]),
    #[error("no clicks of the requested polarity")]
    NoClicks,
    #[error("seed set is empty")]
    EmptySeeds,
    #[error("volume of {0} voxels exceeds the Dijkstra oracle cap of 64^3")]
    TooLarge(usize),
    #[error("image required for {0} guidance")]
    MissingImage(&'static str),
    #[error("no unclicked error voxel left to correct")]
    NoError,
    #[error("binarized guidance is empty")]
    EmptyGuidance,
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("sidecar {path}: {reason}")]
    Sidecar { path: PathBuf, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
