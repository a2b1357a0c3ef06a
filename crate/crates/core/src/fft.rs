//! 3D FFT over x-fastest volumes.
//!
//! Convention: the forward transform is unnormalized,
//! `X[k] = Σ x[n]·exp(-2πi k·n/N)`, and the inverse carries `1/N`, so
//! `ifft3(fft3(v)) == v` and `‖v‖² = ‖fft3(v)‖²/N`.
//!
//! An [`Fft3`] plan owns its rustfft plans and can be shared across threads;
//! each call allocates its own scratch, so execution is re-entrant.

use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::volume::{check_dims, check_voxel_size, same_dims, voxel_count, Dims, Unit, Volume3};

/// Complex grid with the geometry of the volume it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexVolume<T> {
    dims: Dims,
    voxel_size: [f64; 3],
    data: Vec<Complex<T>>,
}

impl<T: Real> ComplexVolume<T> {
    pub fn new(dims: Dims, voxel_size: [f64; 3], data: Vec<Complex<T>>) -> Result<Self> {
        check_dims(dims)?;
        check_voxel_size(voxel_size)?;
        let expected = voxel_count(dims);
        if data.len() != expected {
            return Err(Error::LengthMismatch { dims, expected, found: data.len() });
        }
        Ok(Self { dims, voxel_size, data })
    }

    pub fn from_real(v: &Volume3<T>) -> Self {
        Self {
            dims: v.dims(),
            voxel_size: v.voxel_size(),
            data: v.data().iter().map(|&x| Complex::new(x, T::zero())).collect(),
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn voxel_size(&self) -> [f64; 3] {
        self.voxel_size
    }

    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex<T>> {
        self.data
    }

    /// Real part as a volume tagged `unit`.
    pub fn real_part(&self, unit: Unit) -> Result<Volume3<T>> {
        Volume3::new(self.dims, self.voxel_size, unit, self.data.iter().map(|c| c.re).collect())
    }

    pub fn imag_part(&self, unit: Unit) -> Result<Volume3<T>> {
        Volume3::new(self.dims, self.voxel_size, unit, self.data.iter().map(|c| c.im).collect())
    }
}

/// Reusable 3D transform plan for one grid size.
#[derive(Clone)]
pub struct Fft3<T: Real> {
    dims: Dims,
    forward: [Arc<dyn Fft<T>>; 3],
    inverse: [Arc<dyn Fft<T>>; 3],
}

impl<T: Real> std::fmt::Debug for Fft3<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft3").field("dims", &self.dims).finish()
    }
}

impl<T: Real> Fft3<T> {
    pub fn new(dims: Dims) -> Result<Self> {
        check_dims(dims)?;
        if dims.iter().any(|&n| n < 2) {
            return Err(Error::InvalidDims(dims, "FFT needs at least 2 voxels per axis"));
        }
        let mut planner = FftPlanner::new();
        let forward = dims.map(|n| planner.plan_fft_forward(n));
        let inverse = dims.map(|n| planner.plan_fft_inverse(n));
        Ok(Self { dims, forward, inverse })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn len(&self) -> usize {
        voxel_count(self.dims)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// In-place unnormalized forward transform.
    pub fn forward(&self, data: &mut [Complex<T>]) -> Result<()> {
        self.check_len(data)?;
        self.run(&self.forward, data);
        Ok(())
    }

    /// In-place inverse transform including the `1/N` factor.
    pub fn inverse(&self, data: &mut [Complex<T>]) -> Result<()> {
        self.check_len(data)?;
        self.run(&self.inverse, data);
        let scale = T::one() / T::of(data.len() as f64);
        data.par_iter_mut().for_each(|c| *c = *c * scale);
        Ok(())
    }

    fn check_len(&self, data: &[Complex<T>]) -> Result<()> {
        let expected = self.len();
        if data.len() != expected {
            return Err(Error::LengthMismatch { dims: self.dims, expected, found: data.len() });
        }
        Ok(())
    }

    fn run(&self, plans: &[Arc<dyn Fft<T>>; 3], data: &mut [Complex<T>]) {
        let [nx, ny, nz] = self.dims;
        process_lines(plans[0].as_ref(), data);

        let mut buf = vec![Complex::new(T::zero(), T::zero()); data.len()];
        // y lines: transpose each xy plane to y-fastest
        let plane = nx * ny;
        for (src, dst) in data.chunks(plane).zip(buf.chunks_mut(plane)) {
            transpose(src, dst, nx, ny);
        }
        process_lines(plans[1].as_ref(), &mut buf);
        for (src, dst) in buf.chunks(plane).zip(data.chunks_mut(plane)) {
            transpose(src, dst, ny, nx);
        }

        // z lines: view as (nx·ny) × nz and transpose to z-fastest
        transpose(data, &mut buf, plane, nz);
        process_lines(plans[2].as_ref(), &mut buf);
        transpose(&buf, data, nz, plane);
    }
}

/// Transforms every contiguous run of `fft.len()` samples.
fn process_lines<T: Real>(fft: &dyn Fft<T>, data: &mut [Complex<T>]) {
    let n = fft.len();
    let scratch_len = fft.get_inplace_scratch_len();
    let lines_per_task = (16384 / n).max(1);
    data.par_chunks_mut(n * lines_per_task).for_each_init(
        || vec![Complex::new(T::zero(), T::zero()); scratch_len],
        |scratch, chunk| fft.process_with_scratch(chunk, scratch),
    );
}

/// `src` is `rows × cols` with cols fastest; `dst` becomes `cols × rows`.
fn transpose<T: Copy + Send + Sync>(src: &[T], dst: &mut [T], cols: usize, rows: usize) {
    const B: usize = 16;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

pub fn fft3<T: Real>(v: &Volume3<T>) -> Result<ComplexVolume<T>> {
    let mut out = ComplexVolume::from_real(v);
    Fft3::new(v.dims())?.forward(&mut out.data)?;
    Ok(out)
}

pub fn fft3_complex<T: Real>(v: &ComplexVolume<T>) -> Result<ComplexVolume<T>> {
    let mut out = v.clone();
    Fft3::new(v.dims)?.forward(&mut out.data)?;
    Ok(out)
}

pub fn ifft3<T: Real>(v: &ComplexVolume<T>) -> Result<ComplexVolume<T>> {
    let mut out = v.clone();
    Fft3::new(v.dims)?.inverse(&mut out.data)?;
    Ok(out)
}

/// Real k-space response applied by multiplication, with its plan cached.
///
/// For a real input the output is `Re(ifft3(H·fft3(v)))`. When `H` is
/// even (`H(k) = H(-k)`), the imaginary part is zero and two real volumes
/// can be filtered with one transform pair via [`SpectralFilter::apply_pair`].
#[derive(Clone, Debug)]
pub struct SpectralFilter<T: Real> {
    plan: Fft3<T>,
    response: Vec<T>,
}

impl<T: Real> SpectralFilter<T> {
    pub fn new(dims: Dims, response: Vec<T>) -> Result<Self> {
        let plan = Fft3::new(dims)?;
        if response.len() != plan.len() {
            return Err(Error::LengthMismatch { dims, expected: plan.len(), found: response.len() });
        }
        Ok(Self { plan, response })
    }

    pub fn with_plan(plan: Fft3<T>, response: Vec<T>) -> Result<Self> {
        if response.len() != plan.len() {
            return Err(Error::LengthMismatch {
                dims: plan.dims(),
                expected: plan.len(),
                found: response.len(),
            });
        }
        Ok(Self { plan, response })
    }

    pub fn dims(&self) -> Dims {
        self.plan.dims()
    }

    pub fn plan(&self) -> &Fft3<T> {
        &self.plan
    }

    pub fn response(&self) -> &[T] {
        &self.response
    }

    pub fn apply(&self, v: &Volume3<T>) -> Result<Volume3<T>> {
        same_dims(self.dims(), v.dims())?;
        let mut buf = ComplexVolume::from_real(v).data;
        self.filter_in_place(&mut buf)?;
        Ok(v.with_data_unchecked(buf.iter().map(|c| c.re).collect(), v.unit()))
    }

    /// Filters `a` and `b` together as `a + i·b`. Exact only for even responses.
    pub fn apply_pair(&self, a: &[T], b: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        let n = self.plan.len();
        if a.len() != n || b.len() != n {
            return Err(Error::LengthMismatch {
                dims: self.dims(),
                expected: n,
                found: a.len().min(b.len()),
            });
        }
        let mut buf: Vec<Complex<T>> = a.iter().zip(b).map(|(&x, &y)| Complex::new(x, y)).collect();
        self.filter_in_place(&mut buf)?;
        Ok((buf.iter().map(|c| c.re).collect(), buf.iter().map(|c| c.im).collect()))
    }

    /// `buf ← ifft3(H · fft3(buf))`.
    pub fn filter_in_place(&self, buf: &mut [Complex<T>]) -> Result<()> {
        self.plan.forward(buf)?;
        buf.par_iter_mut().zip(self.response.par_iter()).for_each(|(c, &h)| *c = *c * h);
        self.plan.inverse(buf)
    }
}
