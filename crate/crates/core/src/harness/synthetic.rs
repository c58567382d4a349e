//! Seeded synthetic corpus of oriented stripes and ramps.
//!
//! Image `i` draws its parameters from ChaCha8 stream `i` of the seed, so
//! any single image can be regenerated alone. Three in four images are
//! sinusoidal stripes at a random angle and period (5 to 16 pixels); the
//! rest are linear ramps with a gentle stripe overlay.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::degrade::{degrade, DegradationRecipe};
use super::pnm::write_pgm;
use super::HarnessError;
use crate::image::ImageBuffer;
use crate::training::TrainPair;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub count: usize,
    /// Side of the clean (high-resolution) images.
    pub size: usize,
    pub scale: usize,
    /// Leading images that form the training split; the rest are validation.
    pub train: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            seed: 2024,
            count: 64,
            size: 48,
            scale: 2,
            train: 48,
        }
    }
}

pub fn synthetic_image(seed: u64, index: usize, size: usize) -> Result<ImageBuffer, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let angle: f64 = rng.gen_range(0.0..PI);
    let (s, c) = angle.sin_cos();
    let phase: f64 = rng.gen_range(0.0..TAU);
    let img = if index % 4 != 3 {
        let period: f64 = rng.gen_range(5.0..16.0);
        let amp: f64 = rng.gen_range(40.0..100.0);
        let mean: f64 = rng.gen_range(110.0..146.0);
        ImageBuffer::from_fn(size, size, |r, col| {
            let t = (col as f64 * c + r as f64 * s) / period;
            mean + amp * (TAU * t + phase).sin()
        })?
    } else {
        let slope: f64 = rng.gen_range(1.0..4.0);
        let period: f64 = rng.gen_range(8.0..16.0);
        let half = size as f64 / 2.0;
        ImageBuffer::from_fn(size, size, |r, col| {
            let (x, y) = (col as f64 - half, r as f64 - half);
            let ramp = 128.0 + slope * (x * c + y * s);
            ramp + 15.0 * (TAU * (y * c - x * s) / period + phase).sin()
        })?
    };
    Ok(img.quantized())
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.count == 0 || self.train > self.count {
            return Err(HarnessError::Invalid(format!(
                "synthetic corpus needs 0 < train ({}) <= count ({})",
                self.train, self.count
            )));
        }
        DegradationRecipe::BicubicDown { scale: self.scale }.validate()?;
        if self.size % self.scale != 0 {
            return Err(HarnessError::Invalid(format!(
                "size {} is not divisible by scale {}",
                self.size, self.scale
            )));
        }
        Ok(())
    }

    pub fn clean_images(&self) -> Result<Vec<ImageBuffer>, HarnessError> {
        self.validate()?;
        (0..self.count).map(|i| synthetic_image(self.seed, i, self.size)).collect()
    }

    /// (train, val) pairs of bicubic-downsampled inputs and clean targets.
    pub fn pairs(&self) -> Result<(Vec<TrainPair>, Vec<TrainPair>), HarnessError> {
        let recipe = DegradationRecipe::BicubicDown { scale: self.scale };
        let mut pairs = self
            .clean_images()?
            .into_iter()
            .enumerate()
            .map(|(i, target)| {
                Ok(TrainPair {
                    input: degrade(&target, recipe, i as u64)?,
                    target,
                })
            })
            .collect::<Result<Vec<_>, HarnessError>>()?;
        let val = pairs.split_off(self.train);
        Ok((pairs, val))
    }

    /// Writes clean images and a manifest with bicubic recipes into `dir`;
    /// returns the manifest path.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<PathBuf, HarnessError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let mut manifest = String::from("# name: synthetic\n");
        for (i, img) in self.clean_images()?.iter().enumerate() {
            let file = format!("img{i:03}.pgm");
            write_pgm(dir.join(&file), img)?;
            let split = if i < self.train { "train" } else { "val" };
            let _ = writeln!(manifest, "{split}\t{file}\t@bicubic_down:{}", self.scale);
        }
        let path = dir.join("synthetic.tsv");
        std::fs::write(&path, manifest).map_err(|e| HarnessError::io(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::manifest::{DatasetManifest, Split};

    #[test]
    fn images_are_reproducible_and_distinct() {
        let a = synthetic_image(1, 5, 48).unwrap();
        assert_eq!(a, synthetic_image(1, 5, 48).unwrap());
        assert_ne!(a, synthetic_image(1, 6, 48).unwrap());
        assert_ne!(a, synthetic_image(2, 5, 48).unwrap());
        assert!(a.pixels().iter().all(|v| (0.0..=255.0).contains(v)));
    }

    #[test]
    fn default_corpus_shape() {
        let spec = SyntheticSpec::default();
        let (train, val) = spec.pairs().unwrap();
        assert_eq!((train.len(), val.len()), (48, 16));
        assert_eq!(train[0].input.dims(), (24, 24));
        assert_eq!(train[0].target.dims(), (48, 48));
    }

    #[test]
    fn written_manifest_matches_pairs() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SyntheticSpec {
            count: 4,
            train: 3,
            size: 16,
            ..Default::default()
        };
        let path = spec.write(dir.path()).unwrap();
        let m = DatasetManifest::load(path).unwrap();
        assert_eq!(m.name, "synthetic");
        let val = m.load_pairs(Split::Val).unwrap();
        let (_, expected) = spec.pairs().unwrap();
        assert_eq!(val[0].degraded, expected[0].input);
        assert_eq!(val[0].clean, expected[0].target);
    }
}
