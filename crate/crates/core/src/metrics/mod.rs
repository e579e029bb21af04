//! Full-reference image metrics (PSNR, SSIM) and the correlation statistics
//! used to score quality predictors against embodied-task scores.

mod correlation;
mod fit;
mod stats;

pub use correlation::{correlate, krcc, pearson, plcc, srcc, CorrelationReport, Mapping, PlccResult};
pub use fit::{fit_logistic4, fit_poly3, Logistic4, Poly3};
pub use stats::{group_stats, normalize_scores, CellStats, ColumnExtremes, GroupRecord, GroupStats, KindSummary};

use thiserror::Error;

use crate::image::ImageBuf;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("shape mismatch: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("image side {side} is below the {min}-pixel window")]
    TooSmall { side: usize, min: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("correlation undefined: {0} input is constant")]
    Constant(&'static str),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("degenerate range: max equals min ({0})")]
    Degenerate(f64),
}

/// SSIM window side.
pub const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 1e-4;
const SSIM_C2: f64 = 9e-4;

fn check_shapes(a: &ImageBuf, b: &ImageBuf) -> Result<(), MetricError> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(MetricError::ShapeMismatch(a.height(), a.width(), b.height(), b.width()));
    }
    Ok(())
}

/// `10 log10(1 / MSE)` over all RGB components with peak 1. Identical images
/// give `f64::INFINITY`.
pub fn psnr(reference: &ImageBuf, distorted: &ImageBuf) -> Result<f64, MetricError> {
    check_shapes(reference, distorted)?;
    let n = reference.data().len() as f64;
    let mse = reference
        .data()
        .iter()
        .zip(distorted.data())
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum::<f64>()
        / n;
    Ok(if mse == 0.0 { f64::INFINITY } else { -10.0 * mse.log10() })
}

/// Mean single-scale SSIM on Rec. 601 luma over every full 11x11 Gaussian
/// window (sigma 1.5).
pub fn ssim(reference: &ImageBuf, distorted: &ImageBuf) -> Result<f64, MetricError> {
    check_shapes(reference, distorted)?;
    let (h, w) = (reference.height(), reference.width());
    if h.min(w) < SSIM_WINDOW {
        return Err(MetricError::TooSmall {
            side: h.min(w),
            min: SSIM_WINDOW,
        });
    }
    let x = reference.luma();
    let y = distorted.luma();
    let taps: Vec<f64> = window_taps();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
    let filt = |p: &[f64]| valid_filter(p, h, w, &taps);
    let (mx, my, sxx, syy, sxy) = (filt(&x), filt(&y), filt(&xx), filt(&yy), filt(&xy));
    let total: f64 = (0..mx.len())
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cxy = sxy[i] - ux * uy;
            ((2.0 * ux * uy + SSIM_C1) * (2.0 * cxy + SSIM_C2))
                / ((ux * ux + uy * uy + SSIM_C1) * (vx + vy + SSIM_C2))
        })
        .sum();
    Ok(total / mx.len() as f64)
}

fn window_taps() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as i32;
    let taps: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Separable filtering keeping only positions where the window fits.
fn valid_filter(p: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().enumerate().map(|(i, t)| t * p[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps.iter().enumerate().map(|(i, t)| t * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

#[cfg(test)]
mod tests;
