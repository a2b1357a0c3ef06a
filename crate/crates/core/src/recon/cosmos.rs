use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::{check_scans, OrientationScan};
use crate::dipole::rotated_kernel;
use crate::error::{Error, Result};
use crate::fft::Fft3;
use crate::scalar::Real;
use crate::volume::Unit;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CosmosConfig {
    /// Floor on `Σ Dᵢ²`.
    pub eps: f64,
}

impl Default for CosmosConfig {
    fn default() -> Self {
        Self { eps: 1e-6 }
    }
}

/// Multi-orientation least squares: `χ̂ = Σ DᵢF̂ᵢ / max(Σ Dᵢ², eps)`.
///
/// Each field is used as given (it should already be background-removed
/// and zero outside its mask). The output is restricted to the
/// intersection of the scan masks and mean-referenced there.
pub fn cosmos<T: Real>(scans: &[OrientationScan<T>], eps: f64) -> Result<crate::volume::Volume3<T>> {
    check_scans(scans)?;
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::param("cosmos.eps", "must be finite and > 0"));
    }
    let first = &scans[0].field;
    let dims = first.dims();
    let plan = Fft3::<T>::new(dims)?;
    let zero = Complex::new(T::zero(), T::zero());
    let mut num = vec![zero; first.len()];
    let mut den = vec![T::zero(); first.len()];
    let mut mask = scans[0].mask.clone();
    for s in scans {
        let d = rotated_kernel::<T>(dims, first.voxel_size(), &s.rotation)?;
        let mut f: Vec<Complex<T>> = s.field.data().iter().map(|&v| Complex::new(v, T::zero())).collect();
        plan.forward(&mut f)?;
        for ((n, dn), (&fi, &di)) in num.iter_mut().zip(den.iter_mut()).zip(f.iter().zip(d.values())) {
            *n = *n + fi * di;
            *dn = *dn + di * di;
        }
        mask = mask.and(&s.mask)?;
    }
    mask.require_nonempty()?;
    let eps = T::of(eps);
    for (n, &dn) in num.iter_mut().zip(&den) {
        *n = *n / dn.max(eps);
    }
    num[0] = zero;
    plan.inverse(&mut num)?;
    let chi = first.with_data(num.iter().map(|c| c.re).collect())?.with_unit(Unit::Ppm);
    chi.mean_referenced(&mask)
}
