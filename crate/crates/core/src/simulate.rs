//! Multi-orientation field simulation.
//!
//! A scan with registration rotation `R` sees the main field along `Rᵀẑ`
//! in the common frame. Its native-frame object is
//! `resample_rotated(χ, Rᵀ)`, imaged with the ẑ kernel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dipole::{dipole_kernel, forward_field, rotated_kernel};
use crate::error::{Error, Result};
use crate::recon::OrientationScan;
use crate::resample::resample_rotated;
use crate::rotation::Rotation;
use crate::scalar::Real;
use crate::volume::{same_dims, Mask, Unit, Volume3};

/// Tilt sets built from ±`deg` rotations about x and y.
///
/// 1: identity; 3: identity, +x, −y; 5: identity, ±x, ±y.
pub fn standard_tilts(count: usize, deg: f64) -> Result<Vec<Rotation>> {
    let i = Rotation::IDENTITY;
    match count {
        1 => Ok(vec![i]),
        3 => Ok(vec![i, Rotation::about_x(deg), Rotation::about_y(-deg)]),
        5 => Ok(vec![i, Rotation::about_x(deg), Rotation::about_x(-deg), Rotation::about_y(deg), Rotation::about_y(-deg)]),
        n => Err(Error::param("orientations", format!("standard sets have 1, 3 or 5 orientations, got {n}"))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub rotations: Vec<Rotation>,
    /// Standard deviation of additive Gaussian field noise, ppm.
    pub noise_sigma_ppm: f64,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { rotations: vec![Rotation::IDENTITY], noise_sigma_ppm: 0.0, seed: 0 }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rotations.is_empty() {
            return Err(Error::param("simulate.rotations", "at least one rotation is required"));
        }
        for r in &self.rotations {
            Rotation::new(r.matrix())?;
        }
        if !(self.noise_sigma_ppm.is_finite() && self.noise_sigma_ppm >= 0.0) {
            return Err(Error::param("simulate.noise_sigma_ppm", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Adds N(0, σ²) noise to every voxel; one stream per `(seed, stream)`.
pub fn add_noise<T: Real>(v: &Volume3<T>, sigma: f64, seed: u64, stream: u64) -> Result<Volume3<T>> {
    if sigma == 0.0 {
        return Ok(v.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::param("noise_sigma_ppm", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    Ok(v.map(|x| x + T::of(normal.sample(&mut rng))))
}

/// Registered-frame field maps, one scan per rotation, each with the given
/// mask. Scan `i` draws noise from stream `i` of `cfg.seed`.
pub fn simulate_orientations<T: Real>(chi: &Volume3<T>, mask: &Mask, cfg: &SimulationConfig) -> Result<Vec<OrientationScan<T>>> {
    cfg.validate()?;
    same_dims(chi.dims(), mask.dims())?;
    cfg.rotations
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let kernel = rotated_kernel(chi.dims(), chi.voxel_size(), r)?;
            let field = add_noise(&forward_field(chi, &kernel)?, cfg.noise_sigma_ppm, cfg.seed, i as u64)?;
            OrientationScan::new(field, *r, mask.clone())
        })
        .collect()
}

/// Field of the same object imaged in the scanner frame of rotation `r`
/// (before registration), with the matching native-frame mask.
pub fn native_field<T: Real>(chi: &Volume3<T>, mask: &Mask, r: &Rotation) -> Result<(Volume3<T>, Mask)> {
    same_dims(chi.dims(), mask.dims())?;
    let back = Rotation::new(r.matrix())?.transpose();
    let native = resample_rotated(chi, &back, T::zero())?;
    let kernel = dipole_kernel(chi.dims(), chi.voxel_size(), [0.0, 0.0, 1.0])?;
    let native_mask = if back.is_identity() {
        mask.clone()
    } else {
        Mask::from_volume(&resample_rotated(&mask.to_volume::<f64>(chi.voxel_size())?, &back, 0.0)?, 0.5 - 1e-9)
    };
    Ok((forward_field(&native, &kernel)?.with_unit(Unit::Ppm), native_mask))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tilt_sets() {
        assert_eq!(standard_tilts(1, 20.0).unwrap(), vec![Rotation::IDENTITY]);
        assert_eq!(standard_tilts(5, 20.0).unwrap().len(), 5);
        assert!(standard_tilts(4, 20.0).is_err());
    }

    #[test]
    fn noise_is_seeded() {
        let v = Volume3::<f64>::zeros([8; 3], [1.0; 3], Unit::Ppm).unwrap();
        let a = add_noise(&v, 0.01, 3, 0).unwrap();
        assert_eq!(a, add_noise(&v, 0.01, 3, 0).unwrap());
        assert_ne!(a, add_noise(&v, 0.01, 3, 1).unwrap());
        let sd = (a.data().iter().map(|x| x * x).sum::<f64>() / 512.0).sqrt();
        assert!((sd - 0.01).abs() < 0.002);
    }
}
