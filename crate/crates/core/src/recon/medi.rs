use serde::{Deserialize, Serialize};

use super::cg::conjugate_gradient;
use crate::dipole::{radians_per_ppm, DipoleKernel};
use crate::error::{Error, Result};
use crate::ops::{forward_diff, forward_diff_adjoint};
use crate::scalar::Real;
use crate::volume::{same_dims, Mask, Unit, Volume3};

/// Edge-weighted total-variation inversion settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MediConfig {
    /// Weight of the smoothed L1 gradient penalty, in ppm-domain units.
    pub lambda: f64,
    pub max_iters: usize,
    pub cg_iters: usize,
    pub smooth_eps: f64,
    /// Fraction of in-mask voxels, per axis, treated as edges.
    pub edge_fraction: f64,
}

impl Default for MediConfig {
    fn default() -> Self {
        Self {
            lambda: Self::lambda_from_phase_scale(3000.0, 0.025, 3.0).unwrap_or(1.66e-5),
            max_iters: 10,
            cg_iters: 30,
            smooth_eps: 1e-3,
            edge_fraction: 0.3,
        }
    }
}

impl MediConfig {
    /// Converts a data-fidelity weight stated for a phase-domain data term
    /// (`λ_phase·‖m(φ(Dχ) − φ)‖²` with the penalty at unit weight) to this
    /// solver's ppm-domain penalty weight, `1 / (λ_phase · rad/ppm)`.
    pub fn lambda_from_phase_scale(lambda_phase: f64, te_s: f64, b0_t: f64) -> Result<f64> {
        if !(lambda_phase.is_finite() && lambda_phase > 0.0) {
            return Err(Error::param("lambda_phase", "must be finite and > 0"));
        }
        Ok(1.0 / (lambda_phase * radians_per_ppm(te_s, b0_t)?))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::param("medi.lambda", "must be finite and > 0"));
        }
        if self.max_iters == 0 {
            return Err(Error::param("medi.max_iters", "must be >= 1"));
        }
        if self.cg_iters == 0 {
            return Err(Error::param("medi.cg_iters", "must be >= 1"));
        }
        if !(self.smooth_eps.is_finite() && self.smooth_eps > 0.0) {
            return Err(Error::param("medi.smooth_eps", "must be finite and > 0"));
        }
        if !(self.edge_fraction > 0.0 && self.edge_fraction < 1.0) {
            return Err(Error::param("medi.edge_fraction", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MediResult<T> {
    pub chi: Volume3<T>,
    /// Objective before the first and after every outer iteration.
    pub objective: Vec<f64>,
    pub cg_iterations: Vec<usize>,
}

impl<T> MediResult<T> {
    pub fn final_objective(&self) -> f64 {
        self.objective.last().copied().unwrap_or(f64::NAN)
    }
}

/// Per-axis edge sets: voxels whose magnitude gradient along that axis is
/// strictly above the `(1 − edge_fraction)` quantile over the mask.
///
/// Depends only on the rank order of gradient magnitudes, so scaling the
/// magnitude by `a > 0` selects the same voxels.
pub fn edge_mask<T: Real>(magnitude: &Volume3<T>, mask: &Mask, edge_fraction: f64) -> Result<[Mask; 3]> {
    same_dims(magnitude.dims(), mask.dims())?;
    mask.require_nonempty()?;
    if !(edge_fraction > 0.0 && edge_fraction < 1.0) {
        return Err(Error::param("edge_fraction", "must lie in (0, 1)"));
    }
    let dims = magnitude.dims();
    let h = magnitude.voxel_size();
    let mut out = Vec::with_capacity(3);
    for a in 0..3 {
        let g: Vec<f64> =
            forward_diff(magnitude.data(), dims, a, T::of(h[a])).iter().map(|v| v.as_f64().abs()).collect();
        let mut inside: Vec<f64> = mask.indices().map(|i| g[i]).collect();
        inside.sort_by(f64::total_cmp);
        let pos = (((1.0 - edge_fraction) * inside.len() as f64) as usize).min(inside.len() - 1);
        let thr = inside[pos];
        out.push(Mask::new(dims, g.iter().map(|&v| v > thr).collect())?);
    }
    let [x, y, z]: [Mask; 3] = out.try_into().expect("three axes");
    Ok([x, y, z])
}

/// Edge-weighted smoothed-TV dipole inversion solved by IRLS.
///
/// Minimizes `‖m(d∗χ − f)‖² + λ·Σ √((M_E ∇χ)² + ε²)` where `M_E` removes the
/// edge voxels of the magnitude image from the penalty. Each outer
/// iteration freezes the weights `1/√((M_E∇χ)² + ε²)` and runs warm-started
/// CG on the normal equations, which cannot increase the objective.
pub fn medi_like<T: Real>(
    field: &Volume3<T>,
    kernel: &DipoleKernel<T>,
    magnitude: &Volume3<T>,
    cfg: &MediConfig,
    mask: &Mask,
) -> Result<MediResult<T>> {
    cfg.validate()?;
    same_dims(kernel.dims(), field.dims())?;
    same_dims(field.dims(), magnitude.dims())?;
    same_dims(field.dims(), mask.dims())?;
    mask.require_nonempty()?;
    if let Some(i) = magnitude.data().iter().position(|&v| v < T::zero()) {
        return Err(Error::param("magnitude", format!("negative value at voxel {i}")));
    }

    let dims = field.dims();
    let hs = field.voxel_size().map(T::of);
    let edges = edge_mask(magnitude, mask, cfg.edge_fraction)?;
    let keep: [Vec<bool>; 3] = [0, 1, 2].map(|a| edges[a].data().iter().map(|&e| !e).collect());
    let m: Vec<T> = mask.data().iter().map(|&b| if b { T::one() } else { T::zero() }).collect();
    let filter = kernel.filter()?;
    let dconv = |v: &[T]| -> Result<Vec<T>> {
        let vol = field.with_data(v.to_vec())?;
        Ok(filter.apply(&vol)?.into_data())
    };

    let lambda = cfg.lambda;
    let eps = cfg.smooth_eps;
    let masked_grad = |x: &[T], a: usize| -> Vec<T> {
        let mut g = forward_diff(x, dims, a, hs[a]);
        g.iter_mut().zip(&keep[a]).for_each(|(v, &k)| if !k { *v = T::zero() });
        g
    };
    let objective = |x: &[T]| -> Result<f64> {
        let dx = dconv(x)?;
        let data: f64 = dx
            .iter()
            .zip(field.data())
            .zip(&m)
            .map(|((&p, &f), &w)| (w * (p - f)).as_f64().powi(2))
            .sum();
        let mut tv = 0.0;
        for a in 0..3 {
            tv += masked_grad(x, a).iter().map(|g| (g.as_f64().powi(2) + eps * eps).sqrt()).sum::<f64>();
        }
        Ok(data + lambda * tv)
    };

    let mf: Vec<T> = field.data().iter().zip(&m).map(|(&f, &w)| f * w).collect();
    let b = dconv(&mf)?;
    let mut x = vec![T::zero(); field.len()];
    let mut trace = vec![objective(&x)?];
    let mut cg_trace = Vec::with_capacity(cfg.max_iters);
    let mut increases = 0;
    let half_lambda = T::of(0.5 * lambda);

    for iter in 1..=cfg.max_iters {
        let weights: [Vec<T>; 3] = [0, 1, 2].map(|a| {
            masked_grad(&x, a)
                .iter()
                .map(|g| T::of(1.0 / (g.as_f64().powi(2) + eps * eps).sqrt()))
                .collect()
        });
        let mut failure = None;
        let mut apply = |v: &[T]| -> Vec<T> {
            let dv = match dconv(v) {
                Ok(d) => d,
                Err(e) => {
                    failure = Some(e);
                    return vec![T::zero(); v.len()];
                }
            };
            let mdv: Vec<T> = dv.iter().zip(&m).map(|(&p, &w)| p * w).collect();
            let mut out = match dconv(&mdv) {
                Ok(d) => d,
                Err(e) => {
                    failure = Some(e);
                    return vec![T::zero(); v.len()];
                }
            };
            for a in 0..3 {
                let wg: Vec<T> = masked_grad(v, a)
                    .iter()
                    .zip(&weights[a])
                    .zip(&keep[a])
                    .map(|((&g, &w), &k)| if k { g * w } else { T::zero() })
                    .collect();
                let reg = forward_diff_adjoint(&wg, dims, a, hs[a]);
                out.iter_mut().zip(&reg).for_each(|(o, &r)| *o = *o + half_lambda * r);
            }
            out
        };
        let rep = conjugate_gradient(&mut apply, &b, &mut x, cfg.cg_iters, 1e-12);
        if let Some(e) = failure {
            return Err(e);
        }
        cg_trace.push(rep.iterations);
        let j = objective(&x)?;
        if !j.is_finite() {
            return Err(Error::Diverged { iteration: iter });
        }
        let prev = *trace.last().unwrap_or(&f64::INFINITY);
        trace.push(j);
        if j > prev {
            increases += 1;
            if increases >= 2 {
                return Err(Error::Diverged { iteration: iter });
            }
        } else {
            increases = 0;
        }
    }

    let chi = field.with_data(x)?.with_unit(Unit::Ppm).mean_referenced(mask)?;
    Ok(MediResult { chi, objective: trace, cg_iterations: cg_trace })
}
