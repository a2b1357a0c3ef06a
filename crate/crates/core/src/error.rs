use std::path::PathBuf;

use thiserror::Error;

use crate::volume::Dims;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimsMismatch { expected: Dims, found: Dims },

    #[error("data length {found} does not match dims {dims:?} ({expected} voxels)")]
    LengthMismatch { dims: Dims, expected: usize, found: usize },

    #[error("invalid dims {0:?}: {1}")]
    InvalidDims(Dims, &'static str),

    #[error("invalid voxel size {0:?}: all spacings must be finite and > 0")]
    InvalidVoxelSize([f64; 3]),

    #[error("non-finite value at voxel {0}")]
    NonFinite(usize),

    #[error("invalid rotation matrix: {0}")]
    InvalidRotation(String),

    #[error("B0 direction must be nonzero")]
    ZeroDirection,

    #[error("mask is empty")]
    EmptyMask,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("at least 2 orientations are required, got {0}")]
    InsufficientOrientations(usize),

    #[error("mask too small: nothing survives erosion by {radius_mm} mm")]
    MaskTooSmall { radius_mm: f64 },

    #[error("objective increased on two consecutive outer iterations (iteration {iteration})")]
    Diverged { iteration: usize },

    #[error("primitive {index} does not fit inside the FOV with a {margin_voxels}-voxel margin")]
    OutsideFov { index: usize, margin_voxels: usize },

    #[error("augmentation angle {0}° outside the ±30° protocol")]
    AngleOutOfRange(f64),

    #[error("volume {dims:?} too small: need at least {required} voxels per axis")]
    VolumeTooSmall { dims: Dims, required: usize },

    #[error("reference has zero norm inside the mask")]
    ZeroReference,

    #[error("ROI {0} has no voxels inside the mask")]
    EmptyRoi(u32),

    #[error("position vector must be nonzero")]
    ZeroRadius,

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format { path: path.into(), reason: reason.into() }
    }
}
