use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dipole::{dipole_kernel, forward_field, DipoleKernel};
use crate::error::{Error, Result};
use crate::resample::resample_rotated;
use crate::rotation::Rotation;
use crate::scalar::Real;
use crate::volume::{apply_mask, same_dims, Mask, Volume3};

/// Largest tilt, in degrees, used for augmentation.
pub const MAX_AUGMENT_DEG: f64 = 30.0;

/// Aligned network input (local field, ppm), label (χ, ppm) and mask.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingPair<T> {
    pub input: Volume3<T>,
    pub label: Volume3<T>,
    pub mask: Mask,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugmentAxis {
    X,
    Y,
}

impl AugmentAxis {
    pub fn rotation(self, deg: f64) -> Rotation {
        match self {
            AugmentAxis::X => Rotation::about_x(deg),
            AugmentAxis::Y => Rotation::about_y(deg),
        }
    }
}

fn rotate_mask(mask: &Mask, voxel_size: [f64; 3], r: &Rotation) -> Result<Mask> {
    if r.is_identity() {
        return Ok(mask.clone());
    }
    let v = resample_rotated(&mask.to_volume::<f64>(voxel_size)?, r, 0.0)?;
    Ok(Mask::from_volume(&v, 0.5 - 1e-9))
}

/// Rotates a registered COSMOS map back into the native frame of a scan
/// whose registration rotation is `r`, and pairs it with that scan's
/// unregistered field. Both are masked by the rotated-back mask, which is
/// returned with them.
pub fn make_label_pair<T: Real>(
    cosmos_map: &Volume3<T>,
    r: &Rotation,
    field_unreg: &Volume3<T>,
    mask: &Mask,
) -> Result<TrainingPair<T>> {
    same_dims(cosmos_map.dims(), field_unreg.dims())?;
    same_dims(cosmos_map.dims(), mask.dims())?;
    let back = Rotation::new(r.matrix())?.transpose();
    let native_mask = rotate_mask(mask, cosmos_map.voxel_size(), &back)?;
    let label = apply_mask(&resample_rotated(cosmos_map, &back, T::zero())?, &native_mask)?;
    let input = apply_mask(field_unreg, &native_mask)?;
    Ok(TrainingPair { input, label, mask: native_mask })
}

/// Tilts `label` by `angle_deg` about `axis` and regenerates the field with
/// the ẑ kernel `kernel`, so that `d∗label == input` inside the new mask.
pub fn augment_with_kernel<T: Real>(
    label: &Volume3<T>,
    mask: &Mask,
    angle_deg: f64,
    axis: AugmentAxis,
    kernel: &DipoleKernel<T>,
) -> Result<TrainingPair<T>> {
    if !(angle_deg.is_finite() && angle_deg.abs() <= MAX_AUGMENT_DEG) {
        return Err(Error::AngleOutOfRange(angle_deg));
    }
    same_dims(label.dims(), mask.dims())?;
    same_dims(label.dims(), kernel.dims())?;
    let r = if angle_deg == 0.0 { Rotation::IDENTITY } else { axis.rotation(angle_deg) };
    let new_mask = rotate_mask(mask, label.voxel_size(), &r)?;
    let new_label = apply_mask(&resample_rotated(label, &r, T::zero())?, &new_mask)?;
    let input = apply_mask(&forward_field(&new_label, kernel)?, &new_mask)?;
    Ok(TrainingPair { input, label: new_label, mask: new_mask })
}

/// [`augment_with_kernel`] with a freshly built ẑ kernel.
pub fn augment<T: Real>(label: &Volume3<T>, mask: &Mask, angle_deg: f64, axis: AugmentAxis) -> Result<TrainingPair<T>> {
    let kernel = dipole_kernel(label.dims(), label.voxel_size(), [0.0, 0.0, 1.0])?;
    augment_with_kernel(label, mask, angle_deg, axis, &kernel)
}

/// Returns the originals followed by one augmented copy of each, with
/// angles drawn uniformly from ±30° and the axis alternating x, y, x, ...
pub fn augment_dataset<T: Real>(pairs: &[TrainingPair<T>], seed: u64) -> Result<Vec<TrainingPair<T>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = pairs.to_vec();
    let mut kernel: Option<DipoleKernel<T>> = None;
    for (n, p) in pairs.iter().enumerate() {
        let angle = rng.random_range(-MAX_AUGMENT_DEG..=MAX_AUGMENT_DEG);
        let axis = if n % 2 == 0 { AugmentAxis::X } else { AugmentAxis::Y };
        let k = match &kernel {
            Some(k) if k.dims() == p.label.dims() && k.voxel_size() == p.label.voxel_size() => k,
            _ => kernel.insert(dipole_kernel(p.label.dims(), p.label.voxel_size(), [0.0, 0.0, 1.0])?),
        };
        out.push(augment_with_kernel(&p.label, &p.mask, angle, axis, k)?);
    }
    Ok(out)
}
