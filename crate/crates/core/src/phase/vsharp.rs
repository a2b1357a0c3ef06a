use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft3;
use crate::scalar::Real;
use crate::volume::{linear_index, same_dims, Dims, Mask, Unit, Volume3};

/// Inclusion threshold for "the sphere fits inside the mask".
const FIT_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VSharpConfig {
    /// Strictly descending sphere radii, mm.
    pub radii_mm: Vec<f64>,
    /// Spectral truncation threshold for the deconvolution, in (0, 1).
    pub tsvd_threshold: f64,
}

impl Default for VSharpConfig {
    fn default() -> Self {
        Self { radii_mm: (1..=10).rev().map(f64::from).collect(), tsvd_threshold: 0.05 }
    }
}

impl VSharpConfig {
    pub fn validate(&self, voxel_size: [f64; 3]) -> Result<()> {
        if self.radii_mm.is_empty() {
            return Err(Error::param("vsharp.radii_mm", "at least one radius is required"));
        }
        if self.radii_mm.iter().any(|r| !r.is_finite()) {
            return Err(Error::param("vsharp.radii_mm", "radii must be finite"));
        }
        if self.radii_mm.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::param("vsharp.radii_mm", "radii must be strictly descending"));
        }
        let smallest = *self.radii_mm.last().unwrap_or(&0.0);
        let min_voxel = voxel_size.iter().copied().fold(f64::INFINITY, f64::min);
        if smallest < min_voxel {
            return Err(Error::param(
                "vsharp.radii_mm",
                format!("smallest radius {smallest} mm is below one voxel ({min_voxel} mm)"),
            ));
        }
        if !(self.tsvd_threshold > 0.0 && self.tsvd_threshold < 1.0) {
            return Err(Error::param("vsharp.tsvd_threshold", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Unit-sum ball of radius `radius_mm` centered at the origin with
/// wraparound, rasterized by voxel-center inclusion.
pub fn smv_kernel<T: Real>(dims: Dims, voxel_size: [f64; 3], radius_mm: f64) -> Result<Volume3<T>> {
    let mut data = vec![0.0f64; dims[0] * dims[1] * dims[2]];
    let ext = [0, 1, 2].map(|a| (radius_mm / voxel_size[a]).floor() as isize);
    let mut count = 0usize;
    for dz in -ext[2]..=ext[2] {
        for dy in -ext[1]..=ext[1] {
            for dx in -ext[0]..=ext[0] {
                let p = [dx as f64 * voxel_size[0], dy as f64 * voxel_size[1], dz as f64 * voxel_size[2]];
                if p[0] * p[0] + p[1] * p[1] + p[2] * p[2] > radius_mm * radius_mm {
                    continue;
                }
                let w = |d: isize, n: usize| d.rem_euclid(n as isize) as usize;
                data[linear_index(dims, w(dx, dims[0]), w(dy, dims[1]), w(dz, dims[2]))] += 1.0;
                count += 1;
            }
        }
    }
    let inv = 1.0 / count as f64;
    Volume3::new(dims, voxel_size, Unit::Dimensionless, data.into_iter().map(|v| T::of(v * inv)).collect())
}

/// Real spectrum of an even kernel.
fn real_spectrum<T: Real>(plan: &Fft3<T>, kernel: &Volume3<T>) -> Result<Vec<T>> {
    let mut buf: Vec<Complex<T>> = kernel.data().iter().map(|&v| Complex::new(v, T::zero())).collect();
    plan.forward(&mut buf)?;
    Ok(buf.into_iter().map(|c| c.re).collect())
}

/// V-SHARP background field removal.
///
/// For each radius (largest first) the high-pass field `f − sᵣ∗f` is valid
/// where the ball fits in the mask; each voxel takes the value from the
/// largest valid radius. The composite is deconvolved by `1 − S` of the
/// largest radius with spectral truncation below `tsvd_threshold`.
/// Returns the local field (masked, mean-referenced) and the mask eroded by
/// the smallest radius.
pub fn vsharp<T: Real>(field: &Volume3<T>, mask: &Mask, cfg: &VSharpConfig) -> Result<(Volume3<T>, Mask)> {
    same_dims(field.dims(), mask.dims())?;
    mask.require_nonempty()?;
    cfg.validate(field.voxel_size())?;
    let dims = field.dims();
    let n = field.len();
    let plan = Fft3::<T>::new(dims)?;
    let one = T::one();
    let fit = T::of(1.0 - FIT_TOL);

    // field in the real part, mask in the imaginary part: every radius needs
    // one inverse transform for both convolutions.
    let mut packed: Vec<Complex<T>> = field
        .data()
        .iter()
        .zip(mask.data())
        .map(|(&f, &m)| Complex::new(f, if m { one } else { T::zero() }))
        .collect();
    plan.forward(&mut packed)?;

    let mut composite = vec![T::zero(); n];
    let mut assigned = vec![false; n];
    let mut valid = vec![false; n];
    let mut largest: Option<Vec<T>> = None;
    for &r in &cfg.radii_mm {
        let s = real_spectrum(&plan, &smv_kernel::<T>(dims, field.voxel_size(), r)?)?;
        let mut buf: Vec<Complex<T>> = packed.iter().zip(&s).map(|(&c, &h)| c * h).collect();
        plan.inverse(&mut buf)?;
        for idx in 0..n {
            valid[idx] = mask.data()[idx] && buf[idx].im > fit;
            if valid[idx] && !assigned[idx] {
                composite[idx] = field.data()[idx] - buf[idx].re;
                assigned[idx] = true;
            }
        }
        if largest.is_none() {
            largest = Some(s);
        }
    }
    let out_mask = Mask::new(dims, valid)?;
    if out_mask.is_empty() {
        return Err(Error::MaskTooSmall { radius_mm: *cfg.radii_mm.last().unwrap_or(&0.0) });
    }

    let s_max = largest.unwrap_or_default();
    let thr = T::of(cfg.tsvd_threshold);
    let mut buf: Vec<Complex<T>> = composite.iter().map(|&v| Complex::new(v, T::zero())).collect();
    plan.forward(&mut buf)?;
    for (c, &s) in buf.iter_mut().zip(&s_max) {
        let h = one - s;
        *c = if h.abs() < thr { Complex::new(T::zero(), T::zero()) } else { *c / h };
    }
    plan.inverse(&mut buf)?;
    let local = field.with_data(buf.iter().map(|c| c.re).collect())?.with_unit(Unit::Ppm);
    Ok((local.mean_referenced(&out_mask)?, out_mask))
}
