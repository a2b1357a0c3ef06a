//! Voxel grids and masks.
//!
//! Every map in the toolkit lives in a [`Volume3`]: a dense `nx × ny × nz`
//! grid stored x-fastest (the NIfTI-1 layout), with a physical voxel size
//! in millimetres and a unit tag.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub type Dims = [usize; 3];

/// Linear index of voxel `(i, j, k)` in x-fastest order.
#[inline(always)]
pub fn linear_index(dims: Dims, i: usize, j: usize, k: usize) -> usize {
    i + dims[0] * (j + dims[1] * k)
}

/// Inverse of [`linear_index`].
#[inline]
pub fn voxel_coords(dims: Dims, idx: usize) -> [usize; 3] {
    let plane = dims[0] * dims[1];
    [idx % dims[0], (idx % plane) / dims[0], idx / plane]
}

pub(crate) fn voxel_count(dims: Dims) -> usize {
    dims[0] * dims[1] * dims[2]
}

pub(crate) fn check_dims(dims: Dims) -> Result<()> {
    if dims.contains(&0) {
        return Err(Error::InvalidDims(dims, "every axis needs at least one voxel"));
    }
    Ok(())
}

pub(crate) fn check_voxel_size(voxel_size: [f64; 3]) -> Result<()> {
    if voxel_size.iter().any(|&d| !(d.is_finite() && d > 0.0)) {
        return Err(Error::InvalidVoxelSize(voxel_size));
    }
    Ok(())
}

pub(crate) fn same_dims(expected: Dims, found: Dims) -> Result<()> {
    if expected != found {
        return Err(Error::DimsMismatch { expected, found });
    }
    Ok(())
}

/// Physical unit of the values stored in a volume.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Ppm,
    Radians,
    Hz,
    Dimensionless,
}

impl Unit {
    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Ppm => "ppm",
            Unit::Radians => "radians",
            Unit::Hz => "hz",
            Unit::Dimensionless => "dimensionless",
        }
    }

    pub fn parse(s: &str) -> Option<Unit> {
        match s {
            "ppm" => Some(Unit::Ppm),
            "radians" => Some(Unit::Radians),
            "hz" => Some(Unit::Hz),
            "dimensionless" => Some(Unit::Dimensionless),
            _ => None,
        }
    }
}

/// Dense 3D scalar grid.
///
/// Invariants: `data.len() == nx·ny·nz`, voxel sizes are positive, and the
/// values produced by the constructors and by every operation in this crate
/// are finite.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume3<T> {
    dims: Dims,
    voxel_size: [f64; 3],
    unit: Unit,
    data: Vec<T>,
}

impl<T: Real> Volume3<T> {
    pub fn new(dims: Dims, voxel_size: [f64; 3], unit: Unit, data: Vec<T>) -> Result<Self> {
        check_dims(dims)?;
        check_voxel_size(voxel_size)?;
        let expected = voxel_count(dims);
        if data.len() != expected {
            return Err(Error::LengthMismatch { dims, expected, found: data.len() });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(Self { dims, voxel_size, unit, data })
    }

    pub fn zeros(dims: Dims, voxel_size: [f64; 3], unit: Unit) -> Result<Self> {
        check_dims(dims)?;
        check_voxel_size(voxel_size)?;
        Ok(Self { dims, voxel_size, unit, data: vec![T::zero(); voxel_count(dims)] })
    }

    /// Builds a volume by evaluating `f(i, j, k)` at every voxel.
    pub fn from_fn(
        dims: Dims,
        voxel_size: [f64; 3],
        unit: Unit,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Result<Self> {
        check_dims(dims)?;
        let mut data = Vec::with_capacity(voxel_count(dims));
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    data.push(f(i, j, k));
                }
            }
        }
        Self::new(dims, voxel_size, unit, data)
    }

    /// Same grid and unit as `self`, new data. Length is checked.
    pub fn with_data(&self, data: Vec<T>) -> Result<Self> {
        Self::new(self.dims, self.voxel_size, self.unit, data)
    }

    pub(crate) fn with_data_unchecked(&self, data: Vec<T>, unit: Unit) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Self { dims: self.dims, voxel_size: self.voxel_size, unit, data }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn voxel_size(&self) -> [f64; 3] {
        self.voxel_size
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn with_unit(mut self, unit: Unit) -> Self {
        self.unit = unit;
        self
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// Mutable access to the voxels. Callers must keep values finite.
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        linear_index(self.dims, i, j, k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        self.data[self.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: T) {
        let idx = self.index(i, j, k);
        self.data[idx] = value;
    }

    /// Physical position (mm) of a voxel center; voxel `(0,0,0)` sits at the origin.
    pub fn position_mm(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            i as f64 * self.voxel_size[0],
            j as f64 * self.voxel_size[1],
            k as f64 * self.voxel_size[2],
        ]
    }

    /// Geometric center of the field of view (mm), in voxel-center coordinates.
    pub fn center_mm(&self) -> [f64; 3] {
        fov_center_mm(self.dims, self.voxel_size)
    }

    pub fn same_grid<U>(&self, other: &Volume3<U>) -> Result<()> {
        same_dims(self.dims, other.dims)
    }

    pub fn map(&self, mut f: impl FnMut(T) -> T) -> Self {
        self.with_data_unchecked(self.data.iter().map(|&v| f(v)).collect(), self.unit)
    }

    pub fn scale(&self, a: T) -> Self {
        self.map(|v| v * a)
    }

    /// `a·self + b·other`.
    pub fn axpby(&self, a: T, other: &Self, b: T) -> Result<Self> {
        self.same_grid(other)?;
        let data = self.data.iter().zip(&other.data).map(|(&x, &y)| a * x + b * y).collect();
        Ok(self.with_data_unchecked(data, self.unit))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpby(T::one(), other, -T::one())
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn mean(&self) -> T {
        self.sum() / T::of(self.len() as f64)
    }

    /// Converts the sample type, e.g. `f64 → f32` for storage.
    pub fn cast<U: Real>(&self) -> Volume3<U> {
        Volume3 {
            dims: self.dims,
            voxel_size: self.voxel_size,
            unit: self.unit,
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }

    /// Mean over the voxels selected by `mask`.
    pub fn masked_mean(&self, mask: &Mask) -> Result<T> {
        same_dims(self.dims, mask.dims())?;
        let n = mask.count();
        if n == 0 {
            return Err(Error::EmptyMask);
        }
        let s: T = mask.indices().map(|i| self.data[i]).sum();
        Ok(s / T::of(n as f64))
    }

    /// Zeroes the outside of `mask` and removes the in-mask mean.
    ///
    /// This is the referencing convention shared by every inversion: the
    /// dipole model cannot observe a uniform offset.
    pub fn mean_referenced(&self, mask: &Mask) -> Result<Self> {
        let mean = self.masked_mean(mask)?;
        let data = self
            .data
            .iter()
            .zip(mask.data())
            .map(|(&v, &m)| if m { v - mean } else { T::zero() })
            .collect();
        Ok(self.with_data_unchecked(data, self.unit))
    }
}

pub fn fov_center_mm(dims: Dims, voxel_size: [f64; 3]) -> [f64; 3] {
    [
        (dims[0] as f64 - 1.0) * 0.5 * voxel_size[0],
        (dims[1] as f64 - 1.0) * 0.5 * voxel_size[1],
        (dims[2] as f64 - 1.0) * 0.5 * voxel_size[2],
    ]
}

/// Per-voxel boolean gate with the same dims as the volume it applies to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    dims: Dims,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(dims: Dims, data: Vec<bool>) -> Result<Self> {
        check_dims(dims)?;
        let expected = voxel_count(dims);
        if data.len() != expected {
            return Err(Error::LengthMismatch { dims, expected, found: data.len() });
        }
        Ok(Self { dims, data })
    }

    pub fn full(dims: Dims) -> Result<Self> {
        Self::new(dims, vec![true; voxel_count(dims)])
    }

    pub fn empty(dims: Dims) -> Result<Self> {
        Self::new(dims, vec![false; voxel_count(dims)])
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> bool) -> Result<Self> {
        check_dims(dims)?;
        let mut data = Vec::with_capacity(voxel_count(dims));
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    data.push(f(i, j, k));
                }
            }
        }
        Self::new(dims, data)
    }

    /// Voxels strictly above `threshold`.
    pub fn from_volume<T: Real>(v: &Volume3<T>, threshold: T) -> Self {
        Self { dims: v.dims(), data: v.data().iter().map(|&x| x > threshold).collect() }
    }

    /// 1 inside, 0 outside.
    pub fn to_volume<T: Real>(&self, voxel_size: [f64; 3]) -> Result<Volume3<T>> {
        let data = self.data.iter().map(|&m| if m { T::one() } else { T::zero() }).collect();
        Volume3::new(self.dims, voxel_size, Unit::Dimensionless, data)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [bool] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.data[linear_index(self.dims, i, j, k)]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&m| m)
    }

    /// Errors with [`Error::EmptyMask`] unless at least one voxel is set.
    pub fn require_nonempty(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptyMask);
        }
        Ok(())
    }

    /// Linear indices of the set voxels.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.data.iter().enumerate().filter_map(|(i, &m)| m.then_some(i))
    }

    pub fn and(&self, other: &Mask) -> Result<Mask> {
        same_dims(self.dims, other.dims)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a && b).collect();
        Ok(Mask { dims: self.dims, data })
    }

    pub fn or(&self, other: &Mask) -> Result<Mask> {
        same_dims(self.dims, other.dims)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a || b).collect();
        Ok(Mask { dims: self.dims, data })
    }

    /// Binary dilation by a ball of `radius` voxels (index units).
    pub fn dilate(&self, radius: usize) -> Mask {
        let r = radius as isize;
        let offsets: Vec<[isize; 3]> = (-r..=r)
            .flat_map(|a| (-r..=r).flat_map(move |b| (-r..=r).map(move |c| [a, b, c])))
            .filter(|o| o[0] * o[0] + o[1] * o[1] + o[2] * o[2] <= r * r)
            .collect();
        let d = self.dims;
        let mut out = vec![false; self.data.len()];
        for idx in self.indices() {
            let [i, j, k] = voxel_coords(d, idx);
            for o in &offsets {
                let (x, y, z) = (i as isize + o[0], j as isize + o[1], k as isize + o[2]);
                if x < 0 || y < 0 || z < 0 {
                    continue;
                }
                let (x, y, z) = (x as usize, y as usize, z as usize);
                if x < d[0] && y < d[1] && z < d[2] {
                    out[linear_index(d, x, y, z)] = true;
                }
            }
        }
        Mask { dims: d, data: out }
    }

    /// Binary erosion by a ball of `radius` voxels; the outside of the FOV
    /// counts as unset.
    pub fn erode(&self, radius: usize) -> Mask {
        let r = radius as isize;
        let offsets: Vec<[isize; 3]> = (-r..=r)
            .flat_map(|a| (-r..=r).flat_map(move |b| (-r..=r).map(move |c| [a, b, c])))
            .filter(|o| o[0] * o[0] + o[1] * o[1] + o[2] * o[2] <= r * r)
            .collect();
        let d = self.dims;
        let keep = |idx: usize| {
            let [i, j, k] = voxel_coords(d, idx);
            offsets.iter().all(|o| {
                let (x, y, z) = (i as isize + o[0], j as isize + o[1], k as isize + o[2]);
                x >= 0
                    && y >= 0
                    && z >= 0
                    && (x as usize) < d[0]
                    && (y as usize) < d[1]
                    && (z as usize) < d[2]
                    && self.data[linear_index(d, x as usize, y as usize, z as usize)]
            })
        };
        let data = (0..self.data.len()).map(|idx| self.data[idx] && keep(idx)).collect();
        Mask { dims: d, data }
    }
}

/// Sets values outside `mask` to zero; values inside are unchanged.
pub fn apply_mask<T: Real>(v: &Volume3<T>, mask: &Mask) -> Result<Volume3<T>> {
    same_dims(v.dims(), mask.dims())?;
    let data = v
        .data()
        .iter()
        .zip(mask.data())
        .map(|(&x, &m)| if m { x } else { T::zero() })
        .collect();
    Ok(v.with_data_unchecked(data, v.unit()))
}
