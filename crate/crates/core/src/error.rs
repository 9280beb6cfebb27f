//! Error type shared by all toolkit modules.

use std::path::PathBuf;

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // Display omits the source; error-chain printers append it.
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed sidecar {path}: {reason}")]
    MalformedSidecar { path: PathBuf, reason: String },

    #[error("unknown voxel kind {0:?}")]
    UnknownVoxelKind(String),

    #[error("payload {path}: expected {expected} bytes, found {actual}")]
    PayloadLengthMismatch {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("expected a {expected} volume, found {actual}")]
    VoxelKindMismatch {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("dims mismatch: {left:?} vs {right:?}")]
    DimsMismatch {
        left: [usize; 3],
        right: [usize; 3],
    },

    #[error("slice index {index} out of range for axis {axis} of size {size}")]
    SliceIndexOutOfRange {
        axis: &'static str,
        index: usize,
        size: usize,
    },

    #[error("non-finite value at voxel {index}")]
    NonFiniteInput { index: usize },

    #[error("voxel class value {value} at voxel {index} is not in {{0, 1, 2}}")]
    InvalidClassValue { index: usize, value: u32 },

    #[error("marker {label} at voxel {index} lies on class-{class} ground, not on an object voxel")]
    MarkerOffObject { label: u32, index: usize, class: u8 },

    #[error("IoU of an empty voxel set is undefined")]
    EmptySegment,

    #[error("correlation matrix has no rows")]
    EmptyMatrix,

    #[error("cannot export an empty matrix as a heatmap")]
    EmptyHeatmap,

    #[error("stack manifest {path}: {reason}")]
    MalformedStack { path: PathBuf, reason: String },

    #[error("axis {axis}: stack holds {actual} slice maps, expected {expected}")]
    StackSliceCount {
        axis: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("phantom object {index} ({shape}) could not be placed after {attempts} attempts")]
    UnplaceableObject {
        index: usize,
        shape: String,
        attempts: usize,
    },

    #[error("phantom object {index} ({shape}) does not fit inside dims {dims:?}")]
    ObjectOutOfBounds {
        index: usize,
        shape: String,
        dims: [usize; 3],
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
