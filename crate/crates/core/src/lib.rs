//! Quantitative susceptibility mapping toolkit.
//!
//! The crate covers the full single-machine QSM chain on regular 3D grids:
//!
//! - [`volume`], [`kspace`], [`fft`], [`resample`]: the voxel container, the
//!   Fourier grid, the FFT contract and rigid rotation about the FOV center.
//! - [`dipole`]: the k-space dipole kernel, the forward field model and
//!   phase/field unit conversion.
//! - [`phantom`]: rasterized susceptibility phantoms and closed-form field
//!   oracles for spheres and infinite cylinders.
//! - [`phase`]: Laplacian phase unwrapping and V-SHARP background removal.
//! - [`recon`]: TKD, COSMOS and a MEDI-style edge-weighted inversion.
//! - [`metrics`]: pSNR / RMSE / HFEN / SSIM and multi-orientation ROI stats.
//! - [`training`]: rotate-back labels, rotation augmentation, 64³ patching,
//!   the `.qpatch` interchange format and the three training losses.
//!
//! All numeric code is generic over [`Real`] (`f32` or `f64`). The aliases
//! below fix the scalar for the common double-precision path.
//!
//! FFT convention: the forward transform is unnormalized, the inverse
//! carries the `1/N` factor. Data is stored x-fastest.

pub mod dipole;
pub mod error;
pub mod fft;
pub mod io;
pub mod kspace;
pub mod metrics;
pub mod ops;
pub mod phantom;
pub mod phase;
pub mod recon;
pub mod resample;
pub mod rotation;
pub mod scalar;
pub mod simulate;
pub mod training;
pub mod volume;

pub use error::{Error, Result};
pub use rotation::Rotation;
pub use scalar::Real;
pub use volume::{apply_mask, Dims, Mask, Unit, Volume3};

/// Double-precision volume.
pub type Volume = volume::Volume3<f64>;
/// Single-precision volume, the on-disk sample type.
pub type Volume32 = volume::Volume3<f32>;
/// Double-precision dipole kernel.
pub type Kernel = dipole::DipoleKernel<f64>;
/// Double-precision orientation scan.
pub type Scan = recon::OrientationScan<f64>;
/// Double-precision patch dataset.
pub type Patches = training::PatchDataset<f64>;
