//! Finite differences on x-fastest grids.
//!
//! The gradient is a forward difference with the last plane along each
//! axis set to 0 (no wraparound).

use crate::scalar::Real;
use crate::volume::Dims;

fn stride(dims: Dims, axis: usize) -> usize {
    match axis {
        0 => 1,
        1 => dims[0],
        _ => dims[0] * dims[1],
    }
}

fn coord(dims: Dims, idx: usize, axis: usize) -> usize {
    match axis {
        0 => idx % dims[0],
        1 => (idx / dims[0]) % dims[1],
        _ => idx / (dims[0] * dims[1]),
    }
}

/// `(u[i+1] − u[i]) / h` along `axis`, 0 on the last plane.
pub fn forward_diff<T: Real>(u: &[T], dims: Dims, axis: usize, h: T) -> Vec<T> {
    let s = stride(dims, axis);
    let last = dims[axis] - 1;
    let inv = T::one() / h;
    (0..u.len())
        .map(|idx| if coord(dims, idx, axis) == last { T::zero() } else { (u[idx + s] - u[idx]) * inv })
        .collect()
}

/// Adjoint of [`forward_diff`]: `⟨forward_diff(u), g⟩ = ⟨u, forward_diff_adjoint(g)⟩`.
pub fn forward_diff_adjoint<T: Real>(g: &[T], dims: Dims, axis: usize, h: T) -> Vec<T> {
    let s = stride(dims, axis);
    let last = dims[axis] - 1;
    let inv = T::one() / h;
    (0..g.len())
        .map(|idx| {
            let c = coord(dims, idx, axis);
            let own = if c < last { g[idx] } else { T::zero() };
            let prev = if c > 0 { g[idx - s] } else { T::zero() };
            (prev - own) * inv
        })
        .collect()
}

/// Three forward-difference components scaled by the voxel spacing.
pub fn gradient<T: Real>(u: &[T], dims: Dims, voxel_size: [f64; 3]) -> [Vec<T>; 3] {
    [0, 1, 2].map(|a| forward_diff(u, dims, a, T::of(voxel_size[a])))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_derivative() {
        let dims = [4, 3, 2];
        let u: Vec<f64> = (0..24).map(|i| (i % 4) as f64 * 2.0).collect();
        let g = forward_diff(&u, dims, 0, 0.5);
        for (idx, &v) in g.iter().enumerate() {
            let want = if idx % 4 == 3 { 0.0 } else { 4.0 };
            assert_eq!(v, want);
        }
        assert!(forward_diff(&u, dims, 2, 1.0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn adjoint_identity() {
        let dims = [5, 4, 3];
        let u: Vec<f64> = (0..60).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let g: Vec<f64> = (0..60).map(|i| ((i * 13) % 7) as f64 * 0.3).collect();
        for axis in 0..3 {
            let du = forward_diff(&u, dims, axis, 1.3);
            let dtg = forward_diff_adjoint(&g, dims, axis, 1.3);
            let lhs: f64 = du.iter().zip(&g).map(|(a, b)| a * b).sum();
            let rhs: f64 = u.iter().zip(&dtg).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }
}
