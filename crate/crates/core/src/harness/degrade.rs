//! Synthetic degradations: bicubic downsampling and additive white Gaussian noise.
//!
//! Noise is counter based. Image `i` uses ChaCha8 stream `i` of the recipe
//! seed, and pixel `p` reads the generator at word `4p`. Two 64-bit draws
//! feed one Box-Muller sample, so each pixel's noise depends only on
//! `(seed, i, p)`.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use super::HarnessError;
use crate::image::ImageBuffer;
use crate::pipeline::bicubic_resize_to;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DegradationRecipe {
    BicubicDown { scale: usize },
    Awgn { sigma: f64, seed: u64 },
}

impl DegradationRecipe {
    pub fn validate(&self) -> Result<(), HarnessError> {
        match *self {
            DegradationRecipe::BicubicDown { scale } if !(2..=4).contains(&scale) => {
                Err(HarnessError::Invalid(format!("downsampling scale {scale} outside 2..=4")))
            }
            DegradationRecipe::Awgn { sigma, .. } if !(sigma > 0.0 && sigma.is_finite()) => {
                Err(HarnessError::Invalid(format!("noise sigma {sigma} must be positive")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for DegradationRecipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DegradationRecipe::BicubicDown { scale } => write!(f, "@bicubic_down:{scale}"),
            DegradationRecipe::Awgn { sigma, seed } => write!(f, "@awgn:{sigma}:{seed}"),
        }
    }
}

impl FromStr for DegradationRecipe {
    type Err = HarnessError;

    /// `@bicubic_down:<scale>` or `@awgn:<sigma>:<seed>`.
    fn from_str(s: &str) -> Result<Self, HarnessError> {
        let bad = || HarnessError::Format(format!("invalid degradation recipe {s:?}"));
        let body = s.strip_prefix('@').ok_or_else(bad)?;
        let parts: Vec<&str> = body.split(':').collect();
        let recipe = match parts.as_slice() {
            ["bicubic_down", scale] => DegradationRecipe::BicubicDown {
                scale: scale.parse().map_err(|_| bad())?,
            },
            ["awgn", sigma, seed] => DegradationRecipe::Awgn {
                sigma: sigma.parse().map_err(|_| bad())?,
                seed: seed.parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        recipe.validate()?;
        Ok(recipe)
    }
}

/// Unit-variance Gaussian noise for `len` pixels of image `stream`.
pub fn gaussian_noise(seed: u64, stream: u64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let unit = |x: u64| (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    (0..len)
        .map(|p| {
            rng.set_word_pos(4 * p as u128);
            let u1 = 1.0 - unit(rng.next_u64());
            let u2 = unit(rng.next_u64());
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        })
        .collect()
}

/// Applies `recipe` to `image` (the `index`-th image of its dataset).
pub fn degrade(image: &ImageBuffer, recipe: DegradationRecipe, index: u64) -> Result<ImageBuffer, HarnessError> {
    recipe.validate()?;
    match recipe {
        DegradationRecipe::BicubicDown { scale } => {
            let (w, h) = image.dims();
            if w % scale != 0 || h % scale != 0 {
                return Err(HarnessError::Invalid(format!(
                    "{w}x{h} image is not divisible by scale {scale}"
                )));
            }
            Ok(bicubic_resize_to(image, w / scale, h / scale)?.quantized())
        }
        DegradationRecipe::Awgn { sigma, seed } => {
            let noise = gaussian_noise(seed, index, image.pixels().len());
            let mut out = image.clone();
            for (v, n) in out.pixels_mut().iter_mut().zip(noise) {
                *v += sigma * n;
            }
            Ok(out.quantized())
        }
    }
}
