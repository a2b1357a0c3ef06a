//! Rasterized susceptibility phantoms and closed-form field oracles.
//!
//! A [`PhantomSpec`] is a JSON document:
//!
//! ```json
//! {
//!   "primitives": [
//!     {"shape": "sphere", "center_mm": [32, 32, 32], "radius_mm": 8, "chi_ppm": 1.0, "label": 1},
//!     {"shape": "cylinder_z", "center_mm": [20, 20, 32], "radius_mm": 3, "length_mm": 60, "chi_ppm": 0.2},
//!     {"shape": "box", "center_mm": [40, 40, 30], "half_extent_mm": [3, 4, 5], "chi_ppm": -0.1}
//!   ],
//!   "head": {"center_mm": [32, 32, 32], "semi_axes_mm": [20, 24, 20]}
//! }
//! ```
//!
//! `label` and `head` are optional.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::volume::{check_dims, check_voxel_size, fov_center_mm, Dims, Mask, Unit, Volume3};

/// Minimum clearance between a primitive and the FOV faces, in voxels.
pub const MARGIN_VOXELS: usize = 4;
/// Dilation applied to the primitive union when building the mask.
pub const MASK_DILATION_VOXELS: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    Sphere { radius_mm: f64 },
    /// Finite cylinder with its axis along z.
    CylinderZ { radius_mm: f64, length_mm: f64 },
    Box { half_extent_mm: [f64; 3] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    #[serde(flatten)]
    pub shape: Shape,
    pub center_mm: [f64; 3],
    pub chi_ppm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u32>,
}

impl Primitive {
    pub fn sphere(center_mm: [f64; 3], radius_mm: f64, chi_ppm: f64) -> Self {
        Self { shape: Shape::Sphere { radius_mm }, center_mm, chi_ppm, label: None }
    }

    pub fn cylinder_z(center_mm: [f64; 3], radius_mm: f64, length_mm: f64, chi_ppm: f64) -> Self {
        Self { shape: Shape::CylinderZ { radius_mm, length_mm }, center_mm, chi_ppm, label: None }
    }

    pub fn cuboid(center_mm: [f64; 3], half_extent_mm: [f64; 3], chi_ppm: f64) -> Self {
        Self { shape: Shape::Box { half_extent_mm }, center_mm, chi_ppm, label: None }
    }

    pub fn labeled(mut self, label: u32) -> Self {
        self.label = Some(label);
        self
    }

    /// Half extent of the axis-aligned bounding box.
    pub fn half_extent(&self) -> [f64; 3] {
        match self.shape {
            Shape::Sphere { radius_mm } => [radius_mm; 3],
            Shape::CylinderZ { radius_mm, length_mm } => [radius_mm, radius_mm, 0.5 * length_mm],
            Shape::Box { half_extent_mm } => half_extent_mm,
        }
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        let d = [p[0] - self.center_mm[0], p[1] - self.center_mm[1], p[2] - self.center_mm[2]];
        match self.shape {
            Shape::Sphere { radius_mm } => d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= radius_mm * radius_mm,
            Shape::CylinderZ { radius_mm, length_mm } => {
                d[0] * d[0] + d[1] * d[1] <= radius_mm * radius_mm && d[2].abs() <= 0.5 * length_mm
            }
            Shape::Box { half_extent_mm: h } => (0..3).all(|a| d[a].abs() <= h[a]),
        }
    }

    fn validate(&self, index: usize) -> Result<()> {
        let sizes_ok = match self.shape {
            Shape::Sphere { radius_mm } => radius_mm > 0.0,
            Shape::CylinderZ { radius_mm, length_mm } => radius_mm > 0.0 && length_mm > 0.0,
            Shape::Box { half_extent_mm } => half_extent_mm.iter().all(|&h| h > 0.0),
        };
        let finite = self.chi_ppm.is_finite()
            && self.center_mm.iter().all(|c| c.is_finite())
            && self.half_extent().iter().all(|h| h.is_finite());
        if !(sizes_ok && finite) {
            return Err(Error::param("primitives", format!("primitive {index} has non-positive or non-finite geometry")));
        }
        if self.label == Some(0) {
            return Err(Error::param("primitives", format!("primitive {index}: label 0 is reserved for background")));
        }
        Ok(())
    }
}

/// Ellipsoidal head region added to the mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub center_mm: [f64; 3],
    pub semi_axes_mm: [f64; 3],
}

impl Ellipsoid {
    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3)
            .map(|a| ((p[a] - self.center_mm[a]) / self.semi_axes_mm[a]).powi(2))
            .sum::<f64>()
            <= 1.0
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    #[serde(default)]
    pub primitives: Vec<Primitive>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head: Option<Ellipsoid>,
}

impl PhantomSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Checks geometry, label uniqueness and the FOV margin.
    ///
    /// `cylinder_z` primitives are exempt from the margin along z so they
    /// can model the infinite-cylinder case by spanning the whole FOV.
    pub fn validate(&self, dims: Dims, voxel_size: [f64; 3]) -> Result<()> {
        check_dims(dims)?;
        check_voxel_size(voxel_size)?;
        let mut seen = std::collections::HashSet::new();
        for (index, p) in self.primitives.iter().enumerate() {
            p.validate(index)?;
            if let Some(l) = p.label {
                if !seen.insert(l) {
                    return Err(Error::param("primitives", format!("label {l} used more than once")));
                }
            }
            let h = p.half_extent();
            for a in 0..3 {
                if a == 2 && matches!(p.shape, Shape::CylinderZ { .. }) {
                    continue;
                }
                let lo = MARGIN_VOXELS as f64 * voxel_size[a];
                let hi = (dims[a] - 1) as f64 * voxel_size[a] - lo;
                if p.center_mm[a] - h[a] < lo - 1e-9 || p.center_mm[a] + h[a] > hi + 1e-9 {
                    return Err(Error::OutsideFov { index, margin_voxels: MARGIN_VOXELS });
                }
            }
        }
        if let Some(e) = &self.head {
            if e.semi_axes_mm.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
                return Err(Error::param("head", "semi-axes must be finite and > 0"));
            }
        }
        Ok(())
    }

    /// Explicit head, or the default: centered on the primitives' bounding
    /// box with semi-axes 1.5× its half extent. Without primitives the head
    /// is the FOV-centered ellipsoid with semi-axes 0.75× the half FOV.
    pub fn head_or_default(&self, dims: Dims, voxel_size: [f64; 3]) -> Ellipsoid {
        if let Some(e) = &self.head {
            return e.clone();
        }
        if self.primitives.is_empty() {
            return Ellipsoid {
                center_mm: fov_center_mm(dims, voxel_size),
                semi_axes_mm: [0, 1, 2].map(|a| 0.75 * 0.5 * dims[a] as f64 * voxel_size[a]),
            };
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.primitives {
            let h = p.half_extent();
            for a in 0..3 {
                lo[a] = lo[a].min(p.center_mm[a] - h[a]);
                hi[a] = hi[a].max(p.center_mm[a] + h[a]);
            }
        }
        Ellipsoid {
            center_mm: [0, 1, 2].map(|a| 0.5 * (lo[a] + hi[a])),
            semi_axes_mm: [0, 1, 2].map(|a| 0.75 * (hi[a] - lo[a])),
        }
    }
}

/// Labels of the built-in five-structure phantom.
pub const ROI_NAMES: [(u32, &str); 5] = [(1, "PUT"), (2, "GP"), (3, "CAU"), (4, "RN"), (5, "SN")];

pub fn roi_name(label: u32) -> Option<&'static str> {
    ROI_NAMES.iter().find(|(l, _)| *l == label).map(|(_, n)| *n)
}

/// Five labeled deep-gray-matter stand-ins inside a centered ellipsoidal head.
///
/// Positions and sizes scale with the FOV; at least 32 voxels per axis are
/// required for the margins to hold.
pub fn brain_like(dims: Dims, voxel_size: [f64; 3]) -> Result<PhantomSpec> {
    check_dims(dims)?;
    check_voxel_size(voxel_size)?;
    if dims.iter().any(|&n| n < 32) {
        return Err(Error::VolumeTooSmall { dims, required: 32 });
    }
    let l = [0, 1, 2].map(|a| dims[a] as f64 * voxel_size[a]);
    let lmin = l.iter().copied().fold(f64::INFINITY, f64::min);
    let c = fov_center_mm(dims, voxel_size);
    let at = |f: [f64; 3]| [c[0] + f[0] * l[0], c[1] + f[1] * l[1], c[2] + f[2] * l[2]];
    let half = |f: [f64; 3]| [f[0] * l[0], f[1] * l[1], f[2] * l[2]];
    Ok(PhantomSpec {
        primitives: vec![
            Primitive::sphere(at([-0.20, 0.06, 0.08]), 0.07 * lmin, 0.04).labeled(1),
            Primitive::sphere(at([-0.08, 0.06, 0.08]), 0.045 * lmin, 0.13).labeled(2),
            Primitive::cuboid(at([0.12, 0.16, 0.12]), half([0.04, 0.06, 0.05]), 0.05).labeled(3),
            Primitive::sphere(at([0.05, -0.10, -0.06]), 0.04 * lmin, 0.10).labeled(4),
            Primitive::cuboid(at([0.16, -0.12, -0.12]), half([0.05, 0.03, 0.03]), 0.12).labeled(5),
        ],
        head: Some(Ellipsoid { center_mm: c, semi_axes_mm: [0.4 * l[0], 0.4 * l[1], 0.4 * l[2]] }),
    })
}

/// Rendered phantom: susceptibility (ppm), mask and integer labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Phantom<T> {
    pub chi: Volume3<T>,
    pub mask: Mask,
    pub labels: Volume3<T>,
}

impl<T: Real> Phantom<T> {
    /// Synthetic magnitude: 1 in the mask, darkened where χ is paramagnetic.
    pub fn magnitude(&self) -> Volume3<T> {
        let half = T::of(0.5);
        let data = self
            .chi
            .data()
            .iter()
            .zip(self.mask.data())
            .map(|(&x, &m)| if m { (T::one() - half * x).max(T::zero()) } else { T::zero() })
            .collect();
        self.chi.with_data_unchecked(data, Unit::Dimensionless)
    }
}

/// Rasterizes `spec` by voxel-center inclusion; later primitives overwrite
/// earlier ones. Unlabeled primitives contribute χ but no label.
pub fn render_phantom<T: Real>(spec: &PhantomSpec, dims: Dims, voxel_size: [f64; 3]) -> Result<Phantom<T>> {
    spec.validate(dims, voxel_size)?;
    let mut chi = Volume3::<T>::zeros(dims, voxel_size, Unit::Ppm)?;
    let mut labels = Volume3::<T>::zeros(dims, voxel_size, Unit::Dimensionless)?;
    let mut inside = Mask::empty(dims)?;
    for p in &spec.primitives {
        let h = p.half_extent();
        let lo = [0, 1, 2].map(|a| (((p.center_mm[a] - h[a]) / voxel_size[a]).floor().max(0.0)) as usize);
        let hi = [0, 1, 2].map(|a| {
            (((p.center_mm[a] + h[a]) / voxel_size[a]).ceil().max(0.0) as usize).min(dims[a] - 1)
        });
        for k in lo[2]..=hi[2] {
            for j in lo[1]..=hi[1] {
                for i in lo[0]..=hi[0] {
                    if !p.contains(chi.position_mm(i, j, k)) {
                        continue;
                    }
                    let idx = chi.index(i, j, k);
                    chi.data_mut()[idx] = T::of(p.chi_ppm);
                    labels.data_mut()[idx] = T::of(p.label.unwrap_or(0) as f64);
                    inside.data_mut()[idx] = true;
                }
            }
        }
    }
    let head = spec.head_or_default(dims, voxel_size);
    let head_mask = Mask::from_fn(dims, |i, j, k| head.contains(chi.position_mm(i, j, k)))?;
    let mask = inside.dilate(MASK_DILATION_VOXELS).or(&head_mask)?;
    Ok(Phantom { chi, mask, labels })
}

/// Field (ppm) of a uniform sphere of susceptibility `chi` and radius `radius`
/// at offset `r_vec` from its center, for main field along `b0_dir`.
///
/// Zero inside, following the Lorentz-corrected local-field convention of
/// the dipole kernel.
pub fn analytic_sphere_field(chi: f64, radius: f64, r_vec: [f64; 3], b0_dir: [f64; 3]) -> Result<f64> {
    let r = r_vec.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        return Err(Error::ZeroRadius);
    }
    let bn = b0_dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bn == 0.0 {
        return Err(Error::ZeroDirection);
    }
    if r <= radius {
        return Ok(0.0);
    }
    let cos = (r_vec[0] * b0_dir[0] + r_vec[1] * b0_dir[1] + r_vec[2] * b0_dir[2]) / (r * bn);
    Ok(chi / 3.0 * (radius / r).powi(3) * (3.0 * cos * cos - 1.0))
}

/// Field (ppm) of an infinite cylinder of radius `radius` whose axis makes
/// angle `tilt` (radians) with the main field. `azimuth` is measured in the
/// transverse plane from the projection of the field direction.
pub fn analytic_cylinder_field(chi: f64, radius: f64, r_perp: f64, azimuth: f64, tilt: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::param("radius", "must be > 0"));
    }
    if !(r_perp >= 0.0) {
        return Err(Error::param("r_perp", "must be >= 0"));
    }
    if r_perp < radius {
        return Ok(chi / 6.0 * (3.0 * tilt.cos().powi(2) - 1.0));
    }
    Ok(chi / 2.0 * tilt.sin().powi(2) * (radius / r_perp).powi(2) * (2.0 * azimuth).cos())
}
