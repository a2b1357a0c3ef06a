//! Dipole inversions: TKD, COSMOS and an edge-weighted regularized solver.
//!
//! All three return maps that are zero outside the mask and mean-free
//! inside it.

mod cg;
mod cosmos;
mod medi;
mod tkd;

pub use cg::{conjugate_gradient, CgReport};
pub use cosmos::{cosmos, CosmosConfig};
pub use medi::{edge_mask, medi_like, MediConfig, MediResult};
pub use tkd::{tkd, tkd_inverse, TkdConfig};

use crate::error::{Error, Result};
use crate::rotation::Rotation;
use crate::scalar::Real;
use crate::volume::{same_dims, Mask, Volume3};

/// One head orientation: local field in the common frame, the rotation of
/// the head relative to the reference scan, and the scan's mask.
#[derive(Clone, Debug, PartialEq)]
pub struct OrientationScan<T> {
    pub field: Volume3<T>,
    pub rotation: Rotation,
    pub mask: Mask,
}

impl<T: Real> OrientationScan<T> {
    pub fn new(field: Volume3<T>, rotation: Rotation, mask: Mask) -> Result<Self> {
        same_dims(field.dims(), mask.dims())?;
        let rotation = Rotation::new(rotation.matrix())?;
        Ok(Self { field, rotation, mask })
    }
}

pub(crate) fn check_scans<T: Real>(scans: &[OrientationScan<T>]) -> Result<()> {
    if scans.len() < 2 {
        return Err(Error::InsufficientOrientations(scans.len()));
    }
    let dims = scans[0].field.dims();
    for s in scans {
        same_dims(dims, s.field.dims())?;
        same_dims(dims, s.mask.dims())?;
    }
    Ok(())
}
