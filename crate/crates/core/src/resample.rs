//! Rigid rotation about the FOV center with trilinear interpolation.

use rayon::prelude::*;

use crate::error::Result;
use crate::rotation::Rotation;
use crate::scalar::Real;
use crate::volume::{voxel_coords, Volume3};

/// Resamples `v` under the rotation `r` about the geometric FOV center (mm).
///
/// Output voxel `x` samples the input at `R(x − c) + c`, so the content
/// itself turns by `Rᵀ` and `resample_rotated(·, Rᵀ)` undoes
/// `resample_rotated(·, R)`. Points outside the source grid take `fill`.
/// The identity rotation returns an exact copy.
pub fn resample_rotated<T: Real>(v: &Volume3<T>, r: &Rotation, fill: T) -> Result<Volume3<T>> {
    // Re-validate: a Rotation can only be built through checked paths, but
    // deserialized or composed matrices drift.
    let r = Rotation::new(r.matrix())?;
    if r.is_identity() {
        return Ok(v.clone());
    }
    let dims = v.dims();
    let h = v.voxel_size();
    let c = v.center_mm();
    let src = v.data();
    let sample = |p: [f64; 3]| -> T {
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            let x = p[a] / h[a];
            let n = dims[a];
            // tolerate round-off at the far face
            if !(x > -1e-9 && x < (n - 1) as f64 + 1e-9) {
                return fill;
            }
            let x = x.clamp(0.0, (n - 1) as f64);
            let i = (x.floor() as usize).min(n.saturating_sub(2));
            base[a] = i;
            frac[a] = if n == 1 { 0.0 } else { x - i as f64 };
        }
        let mut acc = 0.0;
        for dz in 0..2 {
            let wz = if dz == 0 { 1.0 - frac[2] } else { frac[2] };
            if wz == 0.0 {
                continue;
            }
            for dy in 0..2 {
                let wy = if dy == 0 { 1.0 - frac[1] } else { frac[1] };
                if wy == 0.0 {
                    continue;
                }
                for dx in 0..2 {
                    let wx = if dx == 0 { 1.0 - frac[0] } else { frac[0] };
                    if wx == 0.0 {
                        continue;
                    }
                    let idx = (base[0] + dx) + dims[0] * ((base[1] + dy) + dims[1] * (base[2] + dz));
                    acc += wx * wy * wz * src[idx].as_f64();
                }
            }
        }
        T::of(acc)
    };
    let data: Vec<T> = (0..v.len())
        .into_par_iter()
        .map(|idx| {
            let [i, j, k] = voxel_coords(dims, idx);
            let x = [i as f64 * h[0] - c[0], j as f64 * h[1] - c[1], k as f64 * h[2] - c[2]];
            let q = r.apply(x);
            sample([q[0] + c[0], q[1] + c[1], q[2] + c[2]])
        })
        .collect();
    v.with_data(data)
}
