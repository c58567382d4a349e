//! Direct optimization of table entries through interpolated queries.
//!
//! Training runs a single-stage pipeline in real arithmetic without the
//! output clamp. Gradients reach restoration entries through the
//! multilinear corner weights, coefficient logits through the softmax and
//! the generalized-median temperature through its log. Restoration entries
//! are held in normalized units (intensity / 255) so learning rates are
//! comparable to the usual [0, 1] image convention; logits are unscaled.
//!
//! The objective per anchor is the mean fidelity loss over its output
//! block plus `lambda * sum_i a_i ln a_i` over the orientation weights of
//! orientation-aware pooling, which pushes the weights toward uniform.

mod checkpoint;
mod data;
mod export;
mod model;
mod optim;
mod run;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use data::{Sample, TrainPair, TrainSet};
pub use export::{export_coefficients, export_table, ExportReport, ExportedModel};
pub use model::{batch_loss, forward_backward, BatchResult, Gradients, ParamBuffer, TrainableLut, TrainableModel, TrainablePooling};
pub use optim::{Adam, CosineSchedule};
pub use run::{finetune, train, validation_psnr, FinetuneConfig, LogRow, TrainOutcome};

use thiserror::Error;

use crate::image::ImageError;
use crate::lut::LutError;
use crate::metrics::MetricError;
use crate::orientation::OrientationError;
use crate::pipeline::PipelineError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("non-finite loss {loss} at step {step} (batch of {batch}, first bad sample {sample})")]
    NonFinite { loss: f64, step: usize, batch: usize, sample: usize },
    #[error("step {step} is beyond the schedule horizon {total}")]
    Schedule { step: usize, total: usize },
    #[error(transparent)]
    Lut(#[from] LutError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Orientation(#[from] OrientationError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Per-element fidelity loss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Loss {
    Charbonnier { epsilon: f64 },
    L1,
    L2,
}

impl Default for Loss {
    fn default() -> Self {
        Loss::Charbonnier { epsilon: 1e-3 }
    }
}

impl Loss {
    /// Loss and its derivative at residual `d = pred - target`.
    #[inline]
    pub fn eval(self, d: f64) -> (f64, f64) {
        match self {
            Loss::Charbonnier { epsilon } => {
                let s = (d * d + epsilon * epsilon).sqrt();
                (s, d / s)
            }
            Loss::L1 => (d.abs(), if d > 0.0 { 1.0 } else if d < 0.0 { -1.0 } else { 0.0 }),
            Loss::L2 => (d * d, 2.0 * d),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Regularizer {
    #[default]
    Entropy,
    None,
}

/// Mean of `sqrt((p - t)^2 + epsilon^2)`.
pub fn charbonnier(pred: &[f64], target: &[f64], epsilon: f64) -> f64 {
    let loss = Loss::Charbonnier { epsilon };
    pred.iter().zip(target).map(|(p, t)| loss.eval(p - t).0).sum::<f64>() / pred.len() as f64
}

/// `sum_i a_i ln a_i` (negative entropy), with `0 ln 0 = 0`.
pub fn entropy_regularizer(weights: &[f64]) -> f64 {
    weights.iter().filter(|&&a| a > 0.0).map(|&a| a * a.ln()).sum()
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub loss: Loss,
    pub lambda: f64,
    pub regularizer: Regularizer,
    /// Initial learning rate of the cosine schedule.
    pub lr: f64,
    /// Learning-rate multiplier for restoration entries.
    pub restoration_lr_factor: f64,
    /// Learning-rate multiplier for coefficient logits and the temperature.
    pub pooling_lr_factor: f64,
    /// Anchors per step.
    pub batch: usize,
    /// Side of the random input crop anchors are drawn from.
    pub patch: usize,
    pub iterations: usize,
    pub seed: u64,
    pub rotate: bool,
    pub flip: bool,
    /// Validation interval in steps (0 disables periodic validation).
    pub eval_every: usize,
    pub execution: crate::Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: Loss::default(),
            lambda: 1e-3,
            regularizer: Regularizer::default(),
            lr: 1e-4,
            restoration_lr_factor: 1.0,
            pooling_lr_factor: 1.0,
            batch: 32,
            patch: 48,
            iterations: 1000,
            seed: 0,
            rotate: true,
            flip: true,
            eval_every: 0,
            execution: crate::Execution::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        if let Loss::Charbonnier { epsilon } = self.loss {
            if !(epsilon > 0.0) {
                return bad("Charbonnier epsilon must be positive");
            }
        }
        if !(self.lambda >= 0.0) {
            return bad("lambda must be non-negative");
        }
        if self.restoration_lr_factor < 0.0 || self.pooling_lr_factor < 0.0 {
            return bad("learning-rate factors must be non-negative");
        }
        if self.batch == 0 || self.patch == 0 {
            return bad("batch and patch size must be positive");
        }
        Ok(())
    }

    /// Regularizer weight actually applied.
    pub fn effective_lambda(&self) -> f64 {
        match self.regularizer {
            Regularizer::Entropy => self.lambda,
            Regularizer::None => 0.0,
        }
    }
}
