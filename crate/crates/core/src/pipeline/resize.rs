//! Separable bicubic resampling with the Keys kernel (a = -0.5).
//!
//! Sample positions follow the pixel-centre convention
//! `src = (dst + 0.5) / scale - 0.5`. When shrinking, the kernel is widened
//! by `1 / scale` (antialiasing) and the taps are renormalized. Samples
//! outside the raster replicate the nearest edge pixel.

use crate::image::{ImageBuffer, ImageError};

const KEYS_A: f64 = -0.5;

/// The Keys cubic convolution kernel.
pub fn keys_kernel(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((KEYS_A + 2.0) * x - (KEYS_A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((KEYS_A * x - 5.0 * KEYS_A) * x + 8.0 * KEYS_A) * x - 4.0 * KEYS_A
    } else {
        0.0
    }
}

struct Taps {
    start: Vec<isize>,
    weights: Vec<Vec<f64>>,
}

fn taps(src_len: usize, dst_len: usize) -> Taps {
    let scale = dst_len as f64 / src_len as f64;
    let stretch = if scale < 1.0 { 1.0 / scale } else { 1.0 };
    let support = 2.0 * stretch;
    let mut start = Vec::with_capacity(dst_len);
    let mut weights = Vec::with_capacity(dst_len);
    for d in 0..dst_len {
        let center = (d as f64 + 0.5) / scale - 0.5;
        let lo = (center - support).floor() as isize;
        let hi = (center + support).ceil() as isize;
        let mut w: Vec<f64> = (lo..=hi)
            .map(|j| keys_kernel((center - j as f64) / stretch))
            .collect();
        let sum: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= sum);
        start.push(lo);
        weights.push(w);
    }
    Taps { start, weights }
}

/// Resamples to exactly `width x height`.
pub fn bicubic_resize_to(image: &ImageBuffer, width: usize, height: usize) -> Result<ImageBuffer, ImageError> {
    if width == 0 || height == 0 {
        return Err(ImageError::Empty { width, height });
    }
    let (w0, h0) = image.dims();
    let tx = taps(w0, width);
    let ty = taps(h0, height);

    let mut horiz = vec![0.0; width * h0];
    for r in 0..h0 {
        for c in 0..width {
            let mut acc = 0.0;
            for (t, &wt) in tx.weights[c].iter().enumerate() {
                acc += wt * image.get_clamped(r as isize, tx.start[c] + t as isize);
            }
            horiz[r * width + c] = acc;
        }
    }
    let clamp_row = |r: isize| r.clamp(0, h0 as isize - 1) as usize;
    let mut out = vec![0.0; width * height];
    for r in 0..height {
        for c in 0..width {
            let mut acc = 0.0;
            for (t, &wt) in ty.weights[r].iter().enumerate() {
                acc += wt * horiz[clamp_row(ty.start[r] + t as isize) * width + c];
            }
            out[r * width + c] = acc;
        }
    }
    ImageBuffer::new(width, height, out)
}

/// Resamples by `scale`, rounding the output size to the nearest pixel.
pub fn bicubic_resize(image: &ImageBuffer, scale: f64) -> Result<ImageBuffer, ImageError> {
    let w = (image.width() as f64 * scale).round();
    let h = (image.height() as f64 * scale).round();
    if !(scale > 0.0) || w < 1.0 || h < 1.0 {
        return Err(ImageError::Empty {
            width: w.max(0.0) as usize,
            height: h.max(0.0) as usize,
        });
    }
    bicubic_resize_to(image, w as usize, h as usize)
}
