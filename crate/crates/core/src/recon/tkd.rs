use serde::{Deserialize, Serialize};

use crate::dipole::DipoleKernel;
use crate::error::{Error, Result};
use crate::fft::SpectralFilter;
use crate::scalar::Real;
use crate::volume::{same_dims, Mask, Unit, Volume3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TkdConfig {
    /// Largest allowed `|1/D|`; `|D| < 1/inverse_cap` is truncated.
    pub inverse_cap: f64,
}

impl Default for TkdConfig {
    fn default() -> Self {
        Self { inverse_cap: 5.0 }
    }
}

impl TkdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.inverse_cap.is_finite() && self.inverse_cap > 0.0) {
            return Err(Error::param("tkd.inverse_cap", "must be finite and > 0"));
        }
        Ok(())
    }
}

/// Truncated inverse `sign(D)·min(1/|D|, cap)`, 0 where `D = 0` and at DC.
pub fn tkd_inverse<T: Real>(kernel: &DipoleKernel<T>, cap: f64) -> Vec<T> {
    let cap = T::of(cap);
    let mut inv: Vec<T> = kernel
        .values()
        .iter()
        .map(|&d| if d == T::zero() { T::zero() } else { d.signum() * (T::one() / d.abs()).min(cap) })
        .collect();
    inv[0] = T::zero();
    inv
}

/// Truncated k-space division.
pub fn tkd<T: Real>(field: &Volume3<T>, kernel: &DipoleKernel<T>, cfg: &TkdConfig, mask: &Mask) -> Result<Volume3<T>> {
    cfg.validate()?;
    same_dims(kernel.dims(), field.dims())?;
    same_dims(field.dims(), mask.dims())?;
    let filter = SpectralFilter::new(field.dims(), tkd_inverse(kernel, cfg.inverse_cap))?;
    filter.apply(field)?.with_unit(Unit::Ppm).mean_referenced(mask)
}
