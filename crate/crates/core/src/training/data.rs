use rand::Rng;

use super::TrainError;
use crate::image::ImageBuffer;
use crate::pipeline::residual_base;

/// Degraded input and its clean target (`scale` times larger for SR).
#[derive(Clone, Debug)]
pub struct TrainPair {
    pub input: ImageBuffer,
    pub target: ImageBuffer,
}

/// One augmented copy of a pair, ready for anchor lookups.
#[derive(Clone, Debug)]
pub(crate) struct Variant {
    pub padded: ImageBuffer,
    pub width: usize,
    pub height: usize,
    /// Residual baseline at target resolution, if training residuals.
    pub base: Option<ImageBuffer>,
    pub target: ImageBuffer,
}

/// An anchor in one augmented pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sample {
    pub variant: usize,
    pub row: usize,
    pub col: usize,
}

/// Training pairs expanded by the dihedral augmentations and padded once.
#[derive(Clone, Debug)]
pub struct TrainSet {
    pub(crate) variants: Vec<Variant>,
    pub(crate) pad: usize,
    pub(crate) scale: usize,
    pairs: usize,
}

fn transforms(rotate: bool, flip: bool) -> Vec<u8> {
    match (rotate, flip) {
        (true, true) => (0..8).collect(),
        (true, false) => (0..4).collect(),
        (false, true) => vec![0, 4],
        (false, false) => vec![0],
    }
}

impl TrainSet {
    pub fn new(
        pairs: &[TrainPair],
        scale: usize,
        residual: bool,
        pad: usize,
        rotate: bool,
        flip: bool,
    ) -> Result<Self, TrainError> {
        if pairs.is_empty() {
            return Err(TrainError::Config("no training pairs".into()));
        }
        let mut variants = Vec::new();
        for (i, p) in pairs.iter().enumerate() {
            let (w, h) = p.input.dims();
            if p.target.dims() != (w * scale, h * scale) {
                return Err(TrainError::Config(format!(
                    "pair {i}: target {:?} is not {scale}x input {:?}",
                    p.target.dims(),
                    p.input.dims()
                )));
            }
            for t in transforms(rotate, flip) {
                let input = p.input.dihedral(t);
                let base = if residual { Some(residual_base(&input, scale)?) } else { None };
                variants.push(Variant {
                    padded: input.pad_replicate(pad),
                    width: input.width(),
                    height: input.height(),
                    base,
                    target: p.target.dihedral(t),
                });
            }
        }
        Ok(Self {
            variants,
            pad,
            scale,
            pairs: pairs.len(),
        })
    }

    pub fn pairs(&self) -> usize {
        self.pairs
    }

    pub fn variants(&self) -> usize {
        self.variants.len()
    }

    /// Each anchor is drawn from a random `patch x patch` crop of a random
    /// augmented pair.
    pub fn sample_batch(&self, rng: &mut impl Rng, batch: usize, patch: usize) -> Vec<Sample> {
        (0..batch)
            .map(|_| {
                let variant = rng.gen_range(0..self.variants.len());
                let v = &self.variants[variant];
                let ch = patch.min(v.height);
                let cw = patch.min(v.width);
                let r0 = rng.gen_range(0..=v.height - ch);
                let c0 = rng.gen_range(0..=v.width - cw);
                Sample {
                    variant,
                    row: r0 + rng.gen_range(0..ch),
                    col: c0 + rng.gen_range(0..cw),
                }
            })
            .collect()
    }

    /// Every anchor of every variant, in raster order.
    pub fn all_samples(&self) -> Vec<Sample> {
        let mut out = Vec::new();
        for (variant, v) in self.variants.iter().enumerate() {
            for row in 0..v.height {
                for col in 0..v.width {
                    out.push(Sample { variant, row, col });
                }
            }
        }
        out
    }
}
