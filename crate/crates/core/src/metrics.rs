//! Full-reference quality metrics: PSNR, SSIM and PSNR-B.
//!
//! PSNR-B follows the usual blocking-effect factor. With `B`-pixel blocks,
//! `D_B` is the mean squared difference between horizontally or vertically
//! adjacent pixels that straddle a block boundary, and `D_Bc` is the same
//! mean over adjacent pairs that do not. The factor is measured on the
//! reconstruction:
//!
//! ```text
//! BEF = eta * (D_B - D_Bc)   if D_B > D_Bc, else 0
//! eta = log2(B) / log2(min(H, W))
//! PSNR-B = 10 log10(peak^2 / (MSE + BEF))
//! ```
//!
//! Identical images score the cap in all three PSNR variants.

use serde::Serialize;
use thiserror::Error;

use crate::image::{ImageBuffer, ImageError};

/// Score reported when the two images are identical.
pub const PSNR_CAP: f64 = 100.0;
pub const PEAK: f64 = 255.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("image {width}x{height} is smaller than the {window}x{window} SSIM window")]
    TooSmall { width: usize, height: usize, window: usize },
    #[error("expected 3 channels, got {0}")]
    Channels(usize),
    #[error("block size must be at least 2")]
    Block,
}

pub fn mse(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64, MetricError> {
    a.check_same_size(b)?;
    let sum: f64 = a.pixels().iter().zip(b.pixels()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.pixels().len() as f64)
}

fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP
    } else {
        (10.0 * (peak * peak / mse).log10()).min(PSNR_CAP)
    }
}

pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64, MetricError> {
    psnr_with_peak(a, b, PEAK)
}

pub fn psnr_with_peak(a: &ImageBuffer, b: &ImageBuffer, peak: f64) -> Result<f64, MetricError> {
    Ok(psnr_from_mse(mse(a, b)?, peak))
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let x = i as f64 - half;
        *v = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= sum);
    w
}

/// Separable "valid" filtering of a row-major plane.
fn filter_valid(data: &[f64], width: usize, height: usize, g: &[f64]) -> Vec<f64> {
    let n = g.len();
    let ow = width - n + 1;
    let oh = height - n + 1;
    let mut horiz = vec![0.0; ow * height];
    for r in 0..height {
        let row = &data[r * width..(r + 1) * width];
        for c in 0..ow {
            horiz[r * ow + c] = g.iter().zip(&row[c..c + n]).map(|(w, x)| w * x).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = g.iter().enumerate().map(|(t, w)| w * horiz[(r + t) * ow + c]).sum();
        }
    }
    out
}

/// Mean SSIM over all fully contained 11x11 Gaussian windows.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64, MetricError> {
    a.check_same_size(b)?;
    let (w, h) = a.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(MetricError::TooSmall {
            width: w,
            height: h,
            window: SSIM_WINDOW,
        });
    }
    let g = gaussian_window();
    let x = a.pixels();
    let y = b.pixels();
    let prod = |f: fn(f64, f64) -> f64| -> Vec<f64> { x.iter().zip(y).map(|(&p, &q)| f(p, q)).collect() };
    let mu_x = filter_valid(x, w, h, &g);
    let mu_y = filter_valid(y, w, h, &g);
    let xx = filter_valid(&prod(|p, _| p * p), w, h, &g);
    let yy = filter_valid(&prod(|_, q| q * q), w, h, &g);
    let xy = filter_valid(&prod(|p, q| p * q), w, h, &g);

    let mut total = 0.0;
    for i in 0..mu_x.len() {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let vx = xx[i] - mx * mx;
        let vy = yy[i] - my * my;
        let cov = xy[i] - mx * my;
        total += ((2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2))
            / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2));
    }
    Ok((total / mu_x.len() as f64).clamp(-1.0, 1.0))
}

/// Blocking-effect factor of `image` for `block`-pixel blocks.
pub fn blocking_effect_factor(image: &ImageBuffer, block: usize) -> Result<f64, MetricError> {
    if block < 2 {
        return Err(MetricError::Block);
    }
    let (w, h) = image.dims();
    let (mut db, mut nb, mut dc, mut nc) = (0.0, 0usize, 0.0, 0usize);
    let mut pair = |p: f64, q: f64, boundary: bool| {
        let d = (p - q) * (p - q);
        if boundary {
            db += d;
            nb += 1;
        } else {
            dc += d;
            nc += 1;
        }
    };
    for r in 0..h {
        for c in 0..w.saturating_sub(1) {
            pair(image.get(r, c), image.get(r, c + 1), (c + 1) % block == 0);
        }
    }
    for r in 0..h.saturating_sub(1) {
        for c in 0..w {
            pair(image.get(r, c), image.get(r + 1, c), (r + 1) % block == 0);
        }
    }
    if nb == 0 || nc == 0 {
        return Ok(0.0);
    }
    let db = db / nb as f64;
    let dc = dc / nc as f64;
    let side = w.min(h) as f64;
    if db <= dc || side <= 1.0 {
        return Ok(0.0);
    }
    let eta = (block as f64).log2() / side.log2();
    Ok(eta * (db - dc))
}

/// PSNR with the blocking-effect factor of `reconstruction` added to the MSE.
pub fn psnr_b(reference: &ImageBuffer, reconstruction: &ImageBuffer, block: usize) -> Result<f64, MetricError> {
    let m = mse(reference, reconstruction)?;
    let bef = blocking_effect_factor(reconstruction, block)?;
    if m <= 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok(psnr_from_mse(m + bef, PEAK))
}

/// BT.601 studio-swing luma of interleaved 8-bit RGB.
pub fn rgb_to_y(width: usize, height: usize, channels: usize, data: &[u8]) -> Result<ImageBuffer, MetricError> {
    if channels != 3 {
        return Err(MetricError::Channels(channels));
    }
    let y = data
        .chunks_exact(3)
        .map(|p| {
            let (r, g, b) = (f64::from(p[0]), f64::from(p[1]), f64::from(p[2]));
            16.0 + (65.481 * r + 128.553 * g + 24.966 * b) / 255.0
        })
        .collect();
    Ok(ImageBuffer::new(width, height, y)?)
}

/// Evaluation protocol knobs.
#[derive(Clone, Copy, Debug)]
pub struct EvalOptions {
    /// Pixels shaved from every side before measuring (SR uses the scale).
    pub border: usize,
    /// Block size for PSNR-B; `None` skips it.
    pub block: Option<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            border: 0,
            block: Some(8),
        }
    }
}

impl EvalOptions {
    pub fn for_scale(scale: usize) -> Self {
        Self {
            border: if scale > 1 { scale } else { 0 },
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricRow {
    pub dataset: String,
    pub image: String,
    pub psnr: f64,
    pub ssim: f64,
    pub psnr_b: Option<f64>,
}

pub fn evaluate(
    dataset: &str,
    image: &str,
    reference: &ImageBuffer,
    output: &ImageBuffer,
    opts: EvalOptions,
) -> Result<MetricRow, MetricError> {
    reference.check_same_size(output)?;
    let a = reference.shave(opts.border);
    let b = output.shave(opts.border);
    Ok(MetricRow {
        dataset: dataset.to_string(),
        image: image.to_string(),
        psnr: psnr(&a, &b)?,
        ssim: ssim(&a, &b)?,
        psnr_b: opts.block.map(|blk| psnr_b(&a, &b, blk)).transpose()?,
    })
}

/// Per-image rows plus their arithmetic mean.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
}

impl MetricReport {
    pub fn push(&mut self, row: MetricRow) {
        self.rows.push(row);
    }

    /// Mean row labelled `mean`; `None` when empty.
    pub fn aggregate(&self) -> Option<MetricRow> {
        let n = self.rows.len();
        if n == 0 {
            return None;
        }
        let mean = |f: &dyn Fn(&MetricRow) -> f64| self.rows.iter().map(f).sum::<f64>() / n as f64;
        let psnr_b = if self.rows.iter().all(|r| r.psnr_b.is_some()) {
            Some(mean(&|r| r.psnr_b.unwrap_or_default()))
        } else {
            None
        };
        let dataset = if self.rows.iter().all(|r| r.dataset == self.rows[0].dataset) {
            self.rows[0].dataset.clone()
        } else {
            "all".to_string()
        };
        Some(MetricRow {
            dataset,
            image: "mean".to_string(),
            psnr: mean(&|r| r.psnr),
            ssim: mean(&|r| r.ssim),
            psnr_b,
        })
    }
}
