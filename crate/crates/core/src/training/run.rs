use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::data::{TrainPair, TrainSet};
use super::model::{forward_backward, TrainableModel, TrainablePooling};
use super::optim::{Adam, CosineSchedule};
use super::{TrainConfig, TrainError};
use crate::metrics::{psnr, EvalOptions};
use crate::par::Execution;
use crate::pipeline;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogRow {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
    pub val_psnr: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub log: Vec<LogRow>,
    /// Validation PSNR before the first update.
    pub initial_val_psnr: Option<f64>,
    /// Validation PSNR of the returned parameters.
    pub final_val_psnr: Option<f64>,
    /// Step whose parameters were kept (the last step unless selecting the best).
    pub kept_step: usize,
}

impl TrainOutcome {
    pub fn write_log(&self, path: impl AsRef<Path>) -> Result<(), TrainError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| TrainError::Checkpoint(e.to_string()))?;
        for row in &self.log {
            w.serialize(row).map_err(|e| TrainError::Checkpoint(e.to_string()))?;
        }
        w.flush().map_err(|e| TrainError::Checkpoint(e.to_string()))?;
        Ok(())
    }

    /// Losses of all logged steps, in order.
    pub fn losses(&self) -> Vec<f64> {
        self.log.iter().map(|r| r.loss).collect()
    }
}

/// Mean PSNR of the model's 8-bit output over `pairs`, shaving `scale`
/// pixels from each border for super-resolution.
pub fn validation_psnr(model: &TrainableModel, pairs: &[TrainPair], execution: Execution) -> Result<f64, TrainError> {
    let config = model.to_pipeline(execution)?;
    pipeline_psnr(&config, pairs)
}

pub(crate) fn pipeline_psnr(config: &pipeline::PipelineConfig, pairs: &[TrainPair]) -> Result<f64, TrainError> {
    if pairs.is_empty() {
        return Err(TrainError::Config("empty validation split".into()));
    }
    let border = EvalOptions::for_scale(config.task.scale()).border;
    let mut total = 0.0;
    for p in pairs {
        let out = pipeline::restore_image(&p.input, config)?;
        total += psnr(&p.target.shave(border), &out.shave(border))?;
    }
    Ok(total / pairs.len() as f64)
}

fn optimize(
    model: &mut TrainableModel,
    set: &TrainSet,
    val: &[TrainPair],
    config: &TrainConfig,
    keep_best: bool,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    model.validate()?;
    let validate = !val.is_empty();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let schedule = CosineSchedule::new(config.lr, config.iterations);
    let adam = Adam::default();
    let train_pooling = match &model.pooling {
        TrainablePooling::Average => false,
        TrainablePooling::Gmp { trainable, .. } => *trainable,
        TrainablePooling::Oap(_) => true,
    };

    let initial = if validate {
        Some(validation_psnr(model, val, config.execution)?)
    } else {
        None
    };
    let mut best = (initial, model.clone(), 0usize);
    let mut log = Vec::with_capacity(config.iterations);
    for step in 0..config.iterations {
        let samples = set.sample_batch(&mut rng, config.batch, config.patch);
        let r = forward_backward(model, set, &samples, config).map_err(|e| match e {
            TrainError::NonFinite { loss, batch, sample, .. } => TrainError::NonFinite { loss, step, batch, sample },
            e => e,
        })?;
        let lr = schedule.lr(step)?;
        if config.restoration_lr_factor > 0.0 {
            for (t, g) in model.tables.iter_mut().zip(&r.gradients.tables) {
                adam.step(&mut t.params, g, step, lr * config.restoration_lr_factor);
            }
        }
        if train_pooling && config.pooling_lr_factor > 0.0 {
            if let Some(p) = model.pooling_params_mut() {
                adam.step(p, &r.gradients.pooling, step, lr * config.pooling_lr_factor);
            }
        }
        let last = step + 1 == config.iterations;
        let due = config.eval_every > 0 && (step + 1) % config.eval_every == 0;
        let val_psnr = if validate && (due || last) {
            Some(validation_psnr(model, val, config.execution)?)
        } else {
            None
        };
        if keep_best {
            if let (Some(v), Some(b)) = (val_psnr, best.0) {
                if v > b {
                    best = (Some(v), model.clone(), step + 1);
                }
            }
        }
        log.push(LogRow {
            step,
            lr,
            loss: r.loss,
            val_psnr,
        });
    }

    let (final_val, kept) = if keep_best && validate {
        let (v, m, s) = best;
        *model = m;
        (v, s)
    } else {
        let v = log.last().and_then(|r| r.val_psnr).or(initial);
        (v, config.iterations)
    };
    Ok(TrainOutcome {
        log,
        initial_val_psnr: initial,
        final_val_psnr: final_val,
        kept_step: kept,
    })
}

/// Trains from the model's current parameters with the cosine schedule.
pub fn train(
    model: &mut TrainableModel,
    set: &TrainSet,
    val: &[TrainPair],
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    optimize(model, set, val, config, false)
}

/// Short joint schedule after pretraining.
#[derive(Clone, Debug)]
pub struct FinetuneConfig {
    pub train: TrainConfig,
}

impl FinetuneConfig {
    /// A tenth of the main iterations, restoration learning rate scaled by 0.1.
    pub fn after(main: &TrainConfig) -> Self {
        Self {
            train: TrainConfig {
                iterations: (main.iterations / 10).max(1),
                restoration_lr_factor: 0.1,
                seed: main.seed.wrapping_add(1),
                ..main.clone()
            },
        }
    }
}

/// Swaps in `pooling` (zero logits for a fresh coefficient table) and
/// optimizes jointly with fresh optimizer moments. With a validation split
/// the best checkpoint seen, including the starting point, is kept.
pub fn finetune(
    model: &mut TrainableModel,
    pooling: TrainablePooling,
    set: &TrainSet,
    val: &[TrainPair],
    config: &FinetuneConfig,
) -> Result<TrainOutcome, TrainError> {
    model.pooling = pooling;
    for t in &mut model.tables {
        t.params.reset_moments();
    }
    optimize(model, set, val, &config.train, true)
}
