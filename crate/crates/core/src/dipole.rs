//! Dipole kernel, forward field model and phase/field units.

use crate::error::{Error, Result};
use crate::fft::SpectralFilter;
use crate::kspace::KGrid;
use crate::rotation::Rotation;
use crate::scalar::Real;
use crate::volume::{check_dims, check_voxel_size, same_dims, Dims, Unit, Volume3};

/// Proton gyromagnetic ratio over 2π, Hz/T.
pub const GAMMA_BAR: f64 = 42.577e6;

/// k-space dipole response `D(k) = 1/3 − (k·b̂)²/|k|²`.
///
/// On even grids the sample at a Nyquist index stands for both `+k` and
/// `−k`; for an oblique `b̂` those two have different `D`. Each value is
/// averaged with its conjugate-index partner so that the response is
/// exactly even and real inputs map to real fields.
#[derive(Clone, Debug, PartialEq)]
pub struct DipoleKernel<T> {
    dims: Dims,
    voxel_size: [f64; 3],
    b0_dir: [f64; 3],
    dc_value: T,
    data: Vec<T>,
}

impl<T: Real> DipoleKernel<T> {
    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn voxel_size(&self) -> [f64; 3] {
        self.voxel_size
    }

    /// Unit main-field direction in the object frame.
    pub fn b0_dir(&self) -> [f64; 3] {
        self.b0_dir
    }

    pub fn dc_value(&self) -> T {
        self.dc_value
    }

    pub fn values(&self) -> &[T] {
        &self.data
    }

    /// Replaces the `k = 0` sample.
    pub fn with_dc_value(mut self, dc: T) -> Self {
        self.dc_value = dc;
        self.data[0] = dc;
        self
    }

    /// Kernel as a dimensionless volume in FFT order, for export.
    pub fn to_volume(&self) -> Result<Volume3<T>> {
        Volume3::new(self.dims, self.voxel_size, Unit::Dimensionless, self.data.clone())
    }

    /// Multiplication filter with a fresh FFT plan.
    pub fn filter(&self) -> Result<SpectralFilter<T>> {
        SpectralFilter::new(self.dims, self.data.clone())
    }
}

pub fn dipole_kernel<T: Real>(dims: Dims, voxel_size: [f64; 3], b0_dir: [f64; 3]) -> Result<DipoleKernel<T>> {
    check_dims(dims)?;
    check_voxel_size(voxel_size)?;
    let norm = b0_dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::ZeroDirection);
    }
    let b = b0_dir.map(|v| v / norm);
    let grid = KGrid::new(dims, voxel_size)?;
    let raw = grid.map(|k| {
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if k2 == 0.0 {
            return 0.0;
        }
        let kb = k[0] * b[0] + k[1] * b[1] + k[2] * b[2];
        1.0 / 3.0 - kb * kb / k2
    });
    let mut data = Vec::with_capacity(raw.len());
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let own = raw[data.len()];
                let partner = raw[grid.conjugate(i, j, k)];
                data.push(T::of(0.5 * (own + partner)));
            }
        }
    }
    data[0] = T::zero();
    Ok(DipoleKernel { dims, voxel_size, b0_dir: b, dc_value: T::zero(), data })
}

/// Kernel for a head rotated by `r`: main field along `Rᵀ·ẑ` in the object frame.
pub fn rotated_kernel<T: Real>(dims: Dims, voxel_size: [f64; 3], r: &Rotation) -> Result<DipoleKernel<T>> {
    let r = Rotation::new(r.matrix())?;
    dipole_kernel(dims, voxel_size, r.b0_direction())
}

/// Local field `d ∗ χ` in ppm.
pub fn forward_field<T: Real>(chi: &Volume3<T>, kernel: &DipoleKernel<T>) -> Result<Volume3<T>> {
    same_dims(kernel.dims, chi.dims())?;
    Ok(kernel.filter()?.apply(chi)?.with_unit(Unit::Ppm))
}

/// Phase accrued per ppm of field: `2π·γ̄·B0·TE·1e-6` rad.
pub fn radians_per_ppm(te_s: f64, b0_t: f64) -> Result<f64> {
    if !(te_s.is_finite() && te_s > 0.0) {
        return Err(Error::param("te_s", format!("must be > 0, got {te_s}")));
    }
    if !(b0_t.is_finite() && b0_t > 0.0) {
        return Err(Error::param("b0_t", format!("must be > 0, got {b0_t}")));
    }
    Ok(std::f64::consts::TAU * GAMMA_BAR * b0_t * te_s * 1e-6)
}

pub fn field_from_phase<T: Real>(phase: &Volume3<T>, te_s: f64, b0_t: f64) -> Result<Volume3<T>> {
    let s = T::of(1.0 / radians_per_ppm(te_s, b0_t)?);
    Ok(phase.scale(s).with_unit(Unit::Ppm))
}

pub fn phase_from_field<T: Real>(field: &Volume3<T>, te_s: f64, b0_t: f64) -> Result<Volume3<T>> {
    let s = T::of(radians_per_ppm(te_s, b0_t)?);
    Ok(field.scale(s).with_unit(Unit::Radians))
}

/// Wraps a phase value into `[−π, π)`.
pub fn wrap<T: Real>(x: T) -> T {
    let tau = T::TAU();
    let w = x - tau * ((x + T::PI()) / tau).floor();
    // (x + π)/τ can round up to an integer for x just below π
    if w >= T::PI() { w - tau } else { w }
}

pub fn wrap_phase<T: Real>(phase: &Volume3<T>) -> Volume3<T> {
    phase.map(wrap).with_unit(Unit::Radians)
}
