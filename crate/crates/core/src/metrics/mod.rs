//! Reconstruction quality: pSNR, RMSE, HFEN, SSIM and ROI statistics.

pub mod filters;
mod roi;

pub use roi::{roi_stats, RoiStat, RoiStats};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::volume::{same_dims, Dims, Mask, Volume3};
use filters::{gaussian_taps, separable, LogFilter};

/// Reported pSNR when the error is exactly zero.
pub const PSNR_CAP_DB: f64 = 999.0;
pub const HFEN_SIGMA: f64 = 1.5;
/// Half-width of the 15³ LoG kernel.
pub const HFEN_RADIUS: usize = 7;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_RADIUS: usize = 5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub psnr_db: f64,
    pub rmse_percent: f64,
    pub hfen_percent: f64,
    pub ssim: f64,
}

/// Mean luminance, contrast and structure factors of SSIM over the mask.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsimTerms {
    pub luminance: f64,
    pub contrast: f64,
    pub structure: f64,
}

fn masked_pair<T: Real>(x: &Volume3<T>, reference: &Volume3<T>, mask: &Mask) -> Result<(Vec<f64>, Vec<f64>)> {
    same_dims(reference.dims(), x.dims())?;
    same_dims(reference.dims(), mask.dims())?;
    mask.require_nonempty()?;
    let pick = |v: &Volume3<T>| -> Vec<f64> {
        v.data().iter().zip(mask.data()).map(|(&a, &m)| if m { a.as_f64() } else { 0.0 }).collect()
    };
    Ok((pick(x), pick(reference)))
}

/// `100·‖x − ref‖/‖ref‖` over the mask.
pub fn rmse_percent<T: Real>(x: &Volume3<T>, reference: &Volume3<T>, mask: &Mask) -> Result<f64> {
    let (a, b) = masked_pair(x, reference, mask)?;
    let rn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if rn == 0.0 {
        return Err(Error::ZeroReference);
    }
    let en = a.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    Ok(100.0 * en / rn)
}

/// `20·log₁₀(peak/√MSE)`, peak = max |ref| in the mask, capped at 999 dB.
pub fn psnr_db<T: Real>(x: &Volume3<T>, reference: &Volume3<T>, mask: &Mask) -> Result<f64> {
    let (a, b) = masked_pair(x, reference, mask)?;
    let peak = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Err(Error::ZeroReference);
    }
    let mse = a.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>() / mask.count() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((20.0 * (peak / mse.sqrt()).log10()).min(PSNR_CAP_DB))
}

/// High-frequency error norm: relative L2 error after 15³ LoG filtering of
/// the masked volumes, in percent.
pub fn hfen_percent<T: Real>(x: &Volume3<T>, reference: &Volume3<T>, mask: &Mask) -> Result<f64> {
    let (a, b) = masked_pair(x, reference, mask)?;
    let dims = x.dims();
    let log = LogFilter::new(HFEN_SIGMA, HFEN_RADIUS);
    let la = log.apply(&a, dims);
    let lb = log.apply(&b, dims);
    let rn = lb.iter().map(|v| v * v).sum::<f64>().sqrt();
    if rn == 0.0 {
        return Err(Error::ZeroReference);
    }
    let en = la.iter().zip(&lb).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    Ok(100.0 * en / rn)
}

struct LocalStats {
    mu_x: Vec<f64>,
    mu_y: Vec<f64>,
    var_x: Vec<f64>,
    var_y: Vec<f64>,
    cov: Vec<f64>,
    c1: f64,
    c2: f64,
}

fn local_stats(x: &[f64], y: &[f64], dims: Dims, mask: &Mask) -> Result<LocalStats> {
    let g = gaussian_taps(SSIM_SIGMA, SSIM_RADIUS);
    let blur = |v: &[f64]| separable(v, dims, [&g, &g, &g]);
    let norm = blur(&vec![1.0; x.len()]);
    let mean = |v: &[f64]| -> Vec<f64> { blur(v).iter().zip(&norm).map(|(a, n)| a / n).collect() };
    let mu_x = mean(x);
    let mu_y = mean(y);
    let sq = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| p * q).collect() };
    let exx = mean(&sq(x, x));
    let eyy = mean(&sq(y, y));
    let exy = mean(&sq(x, y));
    let n = x.len();
    let var_x = (0..n).map(|i| (exx[i] - mu_x[i] * mu_x[i]).max(0.0)).collect();
    let var_y = (0..n).map(|i| (eyy[i] - mu_y[i] * mu_y[i]).max(0.0)).collect();
    let cov = (0..n).map(|i| exy[i] - mu_x[i] * mu_y[i]).collect();

    let (lo, hi) = mask.indices().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| (lo.min(y[i]), hi.max(y[i])));
    let mut range = hi - lo;
    if range == 0.0 {
        range = mask.indices().fold(0.0f64, |m, i| m.max(y[i].abs()));
    }
    if range == 0.0 {
        return Err(Error::ZeroReference);
    }
    let c1 = (SSIM_K1 * range).powi(2);
    let c2 = (SSIM_K2 * range).powi(2);
    Ok(LocalStats { mu_x, mu_y, var_x, var_y, cov, c1, c2 })
}

/// Mean local SSIM over the mask (3D Gaussian window, σ = 1.5 voxels).
///
/// Windows are zero-padded at the FOV boundary and renormalized by the
/// window mass inside the grid. The dynamic range is `max − min` of the
/// reference in the mask, or `max |ref|` when the reference is constant.
pub fn ssim<T: Real>(x: &Volume3<T>, reference: &Volume3<T>, mask: &Mask) -> Result<f64> {
    let (a, b) = masked_pair(x, reference, mask)?;
    let s = local_stats(&a, &b, x.dims(), mask)?;
    let total: f64 = mask
        .indices()
        .map(|i| {
            let num = (2.0 * s.mu_x[i] * s.mu_y[i] + s.c1) * (2.0 * s.cov[i] + s.c2);
            let den = (s.mu_x[i].powi(2) + s.mu_y[i].powi(2) + s.c1) * (s.var_x[i] + s.var_y[i] + s.c2);
            num / den
        })
        .sum();
    Ok(total / mask.count() as f64)
}

/// SSIM factored as luminance · contrast · structure with `C3 = C2/2`.
pub fn ssim_terms<T: Real>(x: &Volume3<T>, reference: &Volume3<T>, mask: &Mask) -> Result<SsimTerms> {
    let (a, b) = masked_pair(x, reference, mask)?;
    let s = local_stats(&a, &b, x.dims(), mask)?;
    let c3 = s.c2 / 2.0;
    let (mut l, mut c, mut st) = (0.0, 0.0, 0.0);
    for i in mask.indices() {
        let (sx, sy) = (s.var_x[i].sqrt(), s.var_y[i].sqrt());
        l += (2.0 * s.mu_x[i] * s.mu_y[i] + s.c1) / (s.mu_x[i].powi(2) + s.mu_y[i].powi(2) + s.c1);
        c += (2.0 * sx * sy + s.c2) / (s.var_x[i] + s.var_y[i] + s.c2);
        st += (s.cov[i] + c3) / (sx * sy + c3);
    }
    let n = mask.count() as f64;
    Ok(SsimTerms { luminance: l / n, contrast: c / n, structure: st / n })
}

pub fn compute_metrics<T: Real>(x: &Volume3<T>, reference: &Volume3<T>, mask: &Mask) -> Result<MetricReport> {
    Ok(MetricReport {
        psnr_db: psnr_db(x, reference, mask)?,
        rmse_percent: rmse_percent(x, reference, mask)?,
        hfen_percent: hfen_percent(x, reference, mask)?,
        ssim: ssim(x, reference, mask)?,
    })
}
