//! Discrete Fourier grid in cycles/mm, DC at index 0, numpy `fftfreq` order.

use crate::error::Result;
use crate::volume::{check_dims, check_voxel_size, linear_index, Dims};

/// Frequency of FFT bin `i` on an `n`-point axis with spacing `d` mm.
#[inline]
pub fn fft_frequency(i: usize, n: usize, d: f64) -> f64 {
    let signed = if i < n.div_ceil(2) { i as f64 } else { i as f64 - n as f64 };
    signed / (n as f64 * d)
}

/// Index of `-i` modulo `n`.
#[inline]
pub fn conjugate_index(i: usize, n: usize) -> usize {
    (n - i) % n
}

/// Per-axis frequency tables; the full k-vector at `(i,j,k)` is
/// `(kx[i], ky[j], kz[k])`.
#[derive(Clone, Debug, PartialEq)]
pub struct KGrid {
    dims: Dims,
    voxel_size: [f64; 3],
    axes: [Vec<f64>; 3],
}

impl KGrid {
    pub fn new(dims: Dims, voxel_size: [f64; 3]) -> Result<Self> {
        check_dims(dims)?;
        check_voxel_size(voxel_size)?;
        let axis = |a: usize| (0..dims[a]).map(|i| fft_frequency(i, dims[a], voxel_size[a])).collect();
        Ok(Self { dims, voxel_size, axes: [axis(0), axis(1), axis(2)] })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn voxel_size(&self) -> [f64; 3] {
        self.voxel_size
    }

    pub fn axis(&self, a: usize) -> &[f64] {
        &self.axes[a]
    }

    #[inline]
    pub fn k(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [self.axes[0][i], self.axes[1][j], self.axes[2][k]]
    }

    /// `|k|²` for every voxel, x-fastest.
    pub fn k_squared(&self) -> Vec<f64> {
        self.map(|k| k[0] * k[0] + k[1] * k[1] + k[2] * k[2])
    }

    /// Evaluates `f(k)` at every grid point, x-fastest.
    pub fn map<T>(&self, mut f: impl FnMut([f64; 3]) -> T) -> Vec<T> {
        let d = self.dims;
        let mut out = Vec::with_capacity(d[0] * d[1] * d[2]);
        for k in 0..d[2] {
            for j in 0..d[1] {
                for i in 0..d[0] {
                    out.push(f(self.k(i, j, k)));
                }
            }
        }
        out
    }

    /// Linear index of the point at `-k`.
    #[inline]
    pub fn conjugate(&self, i: usize, j: usize, k: usize) -> usize {
        let d = self.dims;
        linear_index(d, conjugate_index(i, d[0]), conjugate_index(j, d[1]), conjugate_index(k, d[2]))
    }
}

pub fn make_kgrid(dims: Dims, voxel_size: [f64; 3]) -> Result<KGrid> {
    KGrid::new(dims, voxel_size)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_point_frequencies() {
        let g = make_kgrid([4, 4, 4], [1.0; 3]).unwrap();
        assert_eq!(g.axis(0), &[0.0, 0.25, -0.5, -0.25]);
    }

    #[test]
    fn nyquist_and_anisotropy() {
        let g = make_kgrid([64, 64, 64], [1.0; 3]).unwrap();
        assert_eq!(g.axis(0).iter().fold(0.0f64, |m, v| m.max(v.abs())), 0.5);
        let g = make_kgrid([8, 8, 8], [1.0, 1.0, 2.0]).unwrap();
        assert_eq!(g.axis(2).iter().fold(0.0f64, |m, v| m.max(v.abs())), 0.25);
    }

    #[test]
    fn dc_at_origin() {
        let g = make_kgrid([5, 6, 7], [0.7, 1.0, 1.3]).unwrap();
        assert_eq!(g.k(0, 0, 0), [0.0; 3]);
    }

    #[test]
    fn conjugate_symmetry_exhaustive() {
        let dims = [4, 6, 8];
        let g = make_kgrid(dims, [1.0, 0.8, 1.5]).unwrap();
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let (ci, cj, ck) =
                        (conjugate_index(i, 4), conjugate_index(j, 6), conjugate_index(k, 8));
                    assert_eq!(g.conjugate(ci, cj, ck), linear_index(dims, i, j, k));
                    let (a, b) = (g.k(i, j, k), g.k(ci, cj, ck));
                    let nyq = [i == 2, j == 3, k == 4];
                    for ax in 0..3 {
                        if nyq[ax] {
                            assert_eq!(a[ax], b[ax]);
                        } else {
                            assert_eq!(a[ax], -b[ax]);
                        }
                    }
                }
            }
        }
    }
}
