use num_complex::Complex;

use crate::error::Result;
use crate::fft::Fft3;
use crate::kspace::KGrid;
use crate::scalar::Real;
use crate::volume::{same_dims, Mask, Unit, Volume3};

/// Laplacian phase unwrapping.
///
/// Uses `∇²φ = cos φw·∇² sin φw − sin φw·∇² cos φw` with spectral Laplacians
/// (`−4π²|k|²`) over the full FOV, then inverts the Laplacian with the DC
/// term set to 0. The result is masked and mean-free inside `mask`; any
/// harmonic component of the true phase is not recoverable.
pub fn laplacian_unwrap<T: Real>(wrapped: &Volume3<T>, mask: &Mask) -> Result<Volume3<T>> {
    same_dims(wrapped.dims(), mask.dims())?;
    mask.require_nonempty()?;
    let plan = Fft3::<T>::new(wrapped.dims())?;
    let k2 = KGrid::new(wrapped.dims(), wrapped.voxel_size())?.k_squared();
    let four_pi2 = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
    let lap: Vec<T> = k2.iter().map(|&q| T::of(-four_pi2 * q)).collect();

    // cos and sin share one complex transform; the multiplier is real and even.
    let mut z: Vec<Complex<T>> = wrapped.data().iter().map(|&p| Complex::new(p.cos(), p.sin())).collect();
    plan.forward(&mut z)?;
    z.iter_mut().zip(&lap).for_each(|(c, &l)| *c = *c * l);
    plan.inverse(&mut z)?;

    let mut rhs: Vec<Complex<T>> = wrapped
        .data()
        .iter()
        .zip(&z)
        .map(|(&p, l)| Complex::new(p.cos() * l.im - p.sin() * l.re, T::zero()))
        .collect();
    plan.forward(&mut rhs)?;
    rhs[0] = Complex::new(T::zero(), T::zero());
    rhs.iter_mut().zip(&lap).skip(1).for_each(|(c, &l)| *c = *c / l);
    plan.inverse(&mut rhs)?;

    let phi = wrapped.with_data(rhs.iter().map(|c| c.re).collect())?.with_unit(Unit::Radians);
    phi.mean_referenced(mask)
}
