//! Training losses as per-voxel means.
//!
//! - model loss: `mean |d∗χ − d∗y|` over the interior left after discarding
//!   [`EDGE_DISCARD`] voxels at every face;
//! - L1 loss: `mean |χ − y|` over the full volume;
//! - gradient loss: `Σₐ mean |∂ₐχ − ∂ₐy|` over the full volume plus
//!   `Σₐ mean |∂ₐ(d∗χ) − ∂ₐ(d∗y)|` over the interior, with unit-spacing
//!   forward differences (last plane 0).

use serde::{Deserialize, Serialize};

use crate::dipole::DipoleKernel;
use crate::error::{Error, Result};
use crate::ops::forward_diff;
use crate::scalar::Real;
use crate::volume::{same_dims, voxel_coords, Dims, Volume3};

/// Boundary voxels dropped from every convolution term.
pub const EDGE_DISCARD: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { w1: 1.0, w2: 1.0, w3: 0.1 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.w1, self.w2, self.w3];
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::param("loss.weights", "weights must be finite and >= 0"));
        }
        if w.iter().all(|&v| v == 0.0) {
            return Err(Error::param("loss.weights", "at least one weight must be positive"));
        }
        Ok(())
    }
}

impl std::str::FromStr for LossWeights {
    type Err = Error;

    /// Parses `"w1,w2,w3"`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::param("loss.weights", format!("{s:?}: {e}")))?;
        let [w1, w2, w3] = parts[..] else {
            return Err(Error::param("loss.weights", format!("expected three comma-separated values, got {s:?}")));
        };
        let w = LossWeights { w1, w2, w3 };
        w.validate()?;
        Ok(w)
    }
}

/// Component values and their weighted sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub model: f64,
    pub l1: f64,
    pub gradient: f64,
    pub total: f64,
}

fn check<T: Real>(chi: &Volume3<T>, y: &Volume3<T>, kernel: &DipoleKernel<T>, discard: usize) -> Result<()> {
    same_dims(y.dims(), chi.dims())?;
    same_dims(kernel.dims(), chi.dims())?;
    interior_check(chi.dims(), discard)
}

fn interior_check(dims: Dims, discard: usize) -> Result<()> {
    if dims.iter().any(|&n| n <= 2 * discard) {
        return Err(Error::VolumeTooSmall { dims, required: 2 * discard + 1 });
    }
    Ok(())
}

fn interior_mean_abs<T: Real>(v: &[T], dims: Dims, discard: usize) -> f64 {
    let inside = |idx: usize| voxel_coords(dims, idx).iter().zip(dims).all(|(&c, n)| c >= discard && c < n - discard);
    let count: usize = dims.iter().map(|&n| n - 2 * discard).product();
    let sum: f64 = v.iter().enumerate().filter(|&(i, _)| inside(i)).map(|(_, x)| x.as_f64().abs()).sum();
    sum / count as f64
}

fn mean_abs<T: Real>(v: &[T]) -> f64 {
    v.iter().map(|x| x.as_f64().abs()).sum::<f64>() / v.len() as f64
}

fn difference<T: Real>(chi: &Volume3<T>, y: &Volume3<T>) -> Vec<T> {
    chi.data().iter().zip(y.data()).map(|(&a, &b)| a - b).collect()
}

/// `d∗(χ − y)`; by linearity this equals `d∗χ − d∗y`.
fn convolved_difference<T: Real>(chi: &Volume3<T>, y: &Volume3<T>, kernel: &DipoleKernel<T>) -> Result<Vec<T>> {
    let diff = chi.with_data(difference(chi, y))?;
    Ok(kernel.filter()?.apply(&diff)?.into_data())
}

pub fn loss_model<T: Real>(chi: &Volume3<T>, y: &Volume3<T>, kernel: &DipoleKernel<T>, edge_discard: usize) -> Result<f64> {
    check(chi, y, kernel, edge_discard)?;
    let conv = convolved_difference(chi, y, kernel)?;
    Ok(interior_mean_abs(&conv, chi.dims(), edge_discard))
}

pub fn loss_l1<T: Real>(chi: &Volume3<T>, y: &Volume3<T>) -> Result<f64> {
    same_dims(y.dims(), chi.dims())?;
    Ok(mean_abs(&difference(chi, y)))
}

fn gradient_terms<T: Real>(diff: &[T], conv: &[T], dims: Dims) -> f64 {
    let mut total = 0.0;
    for a in 0..3 {
        total += mean_abs(&forward_diff(diff, dims, a, T::one()));
        total += interior_mean_abs(&forward_diff(conv, dims, a, T::one()), dims, EDGE_DISCARD);
    }
    total
}

pub fn loss_gradient<T: Real>(chi: &Volume3<T>, y: &Volume3<T>, kernel: &DipoleKernel<T>) -> Result<f64> {
    check(chi, y, kernel, EDGE_DISCARD)?;
    let conv = convolved_difference(chi, y, kernel)?;
    Ok(gradient_terms(&difference(chi, y), &conv, chi.dims()))
}

/// `w1·model + w2·l1 + w3·gradient` with every component reported.
pub fn total_loss<T: Real>(chi: &Volume3<T>, y: &Volume3<T>, kernel: &DipoleKernel<T>, w: &LossWeights) -> Result<LossBreakdown> {
    w.validate()?;
    check(chi, y, kernel, EDGE_DISCARD)?;
    let diff = difference(chi, y);
    let conv = convolved_difference(chi, y, kernel)?;
    let dims = chi.dims();
    let model = interior_mean_abs(&conv, dims, EDGE_DISCARD);
    let l1 = mean_abs(&diff);
    let gradient = gradient_terms(&diff, &conv, dims);
    Ok(LossBreakdown { model, l1, gradient, total: w.w1 * model + w.w2 * l1 + w.w3 * gradient })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_weights() {
        let w: LossWeights = "1, 1, 0.1".parse().unwrap();
        assert_eq!(w, LossWeights::default());
        assert!("1,1".parse::<LossWeights>().is_err());
        assert!("0,0,0".parse::<LossWeights>().is_err());
        assert!("1,-1,0".parse::<LossWeights>().is_err());
        assert!("a,b,c".parse::<LossWeights>().is_err());
    }
}
