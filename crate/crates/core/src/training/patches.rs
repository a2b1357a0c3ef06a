use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::volume::{same_dims, Dims, Mask, Volume3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatchConfig {
    pub patch_size: usize,
    /// Per-axis overlap fraction between neighbouring patches.
    pub overlap: f64,
}

impl Default for PatchConfig {
    fn default() -> Self {
        Self { patch_size: 64, overlap: 2.0 / 3.0 }
    }
}

/// `round(patch_size·(1 − overlap))`, at least 1.
pub fn patch_stride(patch_size: usize, overlap: f64) -> Result<usize> {
    if patch_size == 0 {
        return Err(Error::param("patch_size", "must be >= 1"));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::param("overlap", "must lie in [0, 1)"));
    }
    Ok(((patch_size as f64 * (1.0 - overlap)).round() as usize).max(1))
}

/// Patch origins along one axis: multiples of `stride` that fit, with the
/// last one moved flush to the far edge. The origin itself never moves; if
/// it is the only grid point, the flush position is appended instead.
pub fn patch_positions(n: usize, patch_size: usize, stride: usize) -> Vec<usize> {
    if n < patch_size || stride == 0 {
        return Vec::new();
    }
    let last = n - patch_size;
    let mut pos: Vec<usize> = (0..=last).step_by(stride).collect();
    match pos.len() {
        1 if last > 0 => pos.push(last),
        1 => {}
        len => pos[len - 1] = last,
    }
    pos
}

#[derive(Clone, Debug, PartialEq)]
pub struct PatchRecord<T> {
    /// Corner voxel in the source volume; unknown for records read from disk.
    pub origin: Option<[usize; 3]>,
    pub input: Vec<T>,
    pub label: Vec<T>,
    pub mask: Vec<bool>,
}

/// Aligned cubic patches (x-fastest, `patch_size³` each).
#[derive(Clone, Debug, PartialEq)]
pub struct PatchDataset<T> {
    pub patch_size: usize,
    pub stride: usize,
    pub voxel_size: [f64; 3],
    pub records: Vec<PatchRecord<T>>,
    pub provenance: Vec<String>,
}

impl<T: Real> PatchDataset<T> {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Appends another dataset with the same patch geometry.
    pub fn extend(&mut self, other: PatchDataset<T>) -> Result<()> {
        if other.patch_size != self.patch_size {
            return Err(Error::param("patch_size", format!("{} vs {}", other.patch_size, self.patch_size)));
        }
        self.records.extend(other.records);
        self.provenance.extend(other.provenance);
        Ok(())
    }
}

fn crop<U: Copy>(data: &[U], dims: Dims, origin: [usize; 3], ps: usize) -> Vec<U> {
    let mut out = Vec::with_capacity(ps * ps * ps);
    for k in 0..ps {
        for j in 0..ps {
            let start = origin[0] + dims[0] * ((origin[1] + j) + dims[1] * (origin[2] + k));
            out.extend_from_slice(&data[start..start + ps]);
        }
    }
    out
}

/// Cuts aligned `patch_size³` patches on the stride grid, dropping patches
/// whose mask is empty.
pub fn extract_patches<T: Real>(
    input: &Volume3<T>,
    label: &Volume3<T>,
    mask: &Mask,
    cfg: &PatchConfig,
) -> Result<PatchDataset<T>> {
    same_dims(input.dims(), label.dims())?;
    same_dims(input.dims(), mask.dims())?;
    let ps = cfg.patch_size;
    let stride = patch_stride(ps, cfg.overlap)?;
    let dims = input.dims();
    if dims.iter().any(|&n| n < ps) {
        return Err(Error::VolumeTooSmall { dims, required: ps });
    }
    let axes = dims.map(|n| patch_positions(n, ps, stride));
    let mut origins = Vec::new();
    for &z in &axes[2] {
        for &y in &axes[1] {
            for &x in &axes[0] {
                origins.push([x, y, z]);
            }
        }
    }
    let records: Vec<PatchRecord<T>> = origins
        .par_iter()
        .filter_map(|&o| {
            let m = crop(mask.data(), dims, o, ps);
            m.iter().any(|&b| b).then(|| PatchRecord {
                origin: Some(o),
                input: crop(input.data(), dims, o, ps),
                label: crop(label.data(), dims, o, ps),
                mask: m,
            })
        })
        .collect();
    let provenance = records
        .iter()
        .map(|r| {
            let o = r.origin.unwrap_or_default();
            format!("dims={}x{}x{} origin={},{},{}", dims[0], dims[1], dims[2], o[0], o[1], o[2])
        })
        .collect();
    Ok(PatchDataset { patch_size: ps, stride, voxel_size: input.voxel_size(), records, provenance })
}
