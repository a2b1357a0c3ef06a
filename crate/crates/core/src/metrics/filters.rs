//! Separable zero-padded filters used by the image-quality metrics.

use rayon::prelude::*;

use crate::volume::Dims;

/// Convolves along one axis with an odd-length centered kernel; samples
/// outside the grid count as zero. Output has the input's size.
pub fn convolve_axis(data: &[f64], dims: Dims, axis: usize, taps: &[f64]) -> Vec<f64> {
    let half = (taps.len() / 2) as isize;
    let n = dims[axis] as isize;
    let stride = match axis {
        0 => 1,
        1 => dims[0],
        _ => dims[0] * dims[1],
    };
    (0..data.len())
        .into_par_iter()
        .map(|idx| {
            let c = match axis {
                0 => idx % dims[0],
                1 => (idx / dims[0]) % dims[1],
                _ => idx / (dims[0] * dims[1]),
            } as isize;
            let mut acc = 0.0;
            for (t, &w) in taps.iter().enumerate() {
                // correlation with a flipped kernel; the kernels here are symmetric
                let off = half - t as isize;
                let p = c - off;
                if p < 0 || p >= n {
                    continue;
                }
                acc += w * data[(idx as isize - off * stride as isize) as usize];
            }
            acc
        })
        .collect()
}

pub fn separable(data: &[f64], dims: Dims, taps: [&[f64]; 3]) -> Vec<f64> {
    let x = convolve_axis(data, dims, 0, taps[0]);
    let y = convolve_axis(&x, dims, 1, taps[1]);
    convolve_axis(&y, dims, 2, taps[2])
}

/// Normalized 1D Gaussian with `2·radius + 1` taps.
pub fn gaussian_taps(sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    let g: Vec<f64> = (-r..=r).map(|x| (-(x * x) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// 3D Laplacian-of-Gaussian filter of size `(2·radius + 1)³`, in the
/// normalized-Gaussian form `h·(r² − 3σ²)/σ⁴` with its mean removed so the
/// kernel sums to zero. Applied as three separable terms minus a box.
#[derive(Clone, Debug)]
pub struct LogFilter {
    gauss: Vec<f64>,
    second: Vec<f64>,
    box_taps: Vec<f64>,
    offset: f64,
}

impl LogFilter {
    pub fn new(sigma: f64, radius: usize) -> Self {
        let gauss = gaussian_taps(sigma, radius);
        let r = radius as isize;
        let s2 = sigma * sigma;
        // h·(x² + y² + z² − 3σ²)/σ⁴ = Σₐ q(xₐ)·g·g with q = g·(x²/σ⁴ − 1/σ²)
        let second: Vec<f64> =
            (-r..=r).zip(&gauss).map(|(x, &g)| g * ((x * x) as f64 / (s2 * s2) - 1.0 / s2)).collect();
        let gsum: f64 = gauss.iter().sum();
        let qsum: f64 = second.iter().sum();
        let len = (2 * radius + 1) as f64;
        let offset = 3.0 * qsum * gsum * gsum / len.powi(3);
        Self { gauss, second, box_taps: vec![1.0; 2 * radius + 1], offset }
    }

    /// Dense kernel values, x-fastest, for inspection.
    pub fn dense(&self) -> Vec<f64> {
        let n = self.gauss.len();
        let (g, q) = (&self.gauss, &self.second);
        let mut out = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    out.push(q[i] * g[j] * g[k] + g[i] * q[j] * g[k] + g[i] * g[j] * q[k] - self.offset);
                }
            }
        }
        out
    }

    pub fn apply(&self, data: &[f64], dims: Dims) -> Vec<f64> {
        let (g, q) = (self.gauss.as_slice(), self.second.as_slice());
        let mut out = separable(data, dims, [q, g, g]);
        for terms in [[g, q, g], [g, g, q]] {
            let t = separable(data, dims, terms);
            out.iter_mut().zip(&t).for_each(|(o, v)| *o += v);
        }
        let b = self.box_taps.as_slice();
        let boxed = separable(data, dims, [b, b, b]);
        out.iter_mut().zip(&boxed).for_each(|(o, v)| *o -= self.offset * v);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_kernel_sums_to_zero_and_matches_dense_form() {
        let f = LogFilter::new(1.5, 7);
        let dense = f.dense();
        assert!(dense.iter().sum::<f64>().abs() < 1e-12);
        let s = 1.5f64;
        let mut h = Vec::new();
        for k in -7..=7i32 {
            for j in -7..=7i32 {
                for i in -7..=7i32 {
                    let r2 = (i * i + j * j + k * k) as f64;
                    h.push(((-r2 / (2.0 * s * s)).exp(), r2));
                }
            }
        }
        let hs: f64 = h.iter().map(|p| p.0).sum();
        let l: Vec<f64> = h.iter().map(|&(g, r2)| g / hs * (r2 - 3.0 * s * s) / s.powi(4)).collect();
        let mean = l.iter().sum::<f64>() / l.len() as f64;
        for (a, b) in dense.iter().zip(&l) {
            assert!((a - (b - mean)).abs() < 1e-14);
        }
    }

    #[test]
    fn separable_apply_matches_direct_convolution() {
        let dims = [9, 8, 7];
        let data: Vec<f64> = (0..504).map(|i| ((i * 29) % 13) as f64 - 6.0).collect();
        let f = LogFilter::new(1.0, 2);
        let fast = f.apply(&data, dims);
        let dense = f.dense();
        let n = 5isize;
        for &(i, j, k) in &[(0usize, 0usize, 0usize), (4, 4, 3), (8, 7, 6), (2, 5, 1)] {
            let mut acc = 0.0;
            for c in 0..n {
                for b in 0..n {
                    for a in 0..n {
                        let (x, y, z) = (i as isize + a - 2, j as isize + b - 2, k as isize + c - 2);
                        if x < 0 || y < 0 || z < 0 || x >= 9 || y >= 8 || z >= 7 {
                            continue;
                        }
                        let w = dense[(a + n * (b + n * c)) as usize];
                        acc += w * data[crate::volume::linear_index(dims, x as usize, y as usize, z as usize)];
                    }
                }
            }
            assert!((fast[crate::volume::linear_index(dims, i, j, k)] - acc).abs() < 1e-12);
        }
    }
}
