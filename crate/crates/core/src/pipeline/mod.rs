//! Whole-image restoration with rotation-ensemble fusion.
//!
//! Each stage visits every anchor pixel of its input, queries one table per
//! kernel pattern under every orientation, averages the pattern outputs,
//! fuses the orientations with the configured pooling rule and places the
//! fused block. Intermediate stages are single-output and run at input
//! resolution; the last stage of a super-resolution pipeline emits
//! `scale * scale` values per anchor, laid out as a pixel-shuffle block.

mod resize;

pub use resize::{bicubic_resize, bicubic_resize_to, keys_kernel};

use std::sync::Arc;

use thiserror::Error;

use crate::image::{ImageBuffer, ImageError};
use crate::lut::{LutError, PatchTable};
use crate::orientation::{block_permutation, KernelPattern, OrientationError, OrientationSet};
use crate::par::{self, Execution};
use crate::pooling::{average_weights, combine, gmp_weights, CoeffLut, Norm, PoolingError, PoolingSpec};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid pipeline configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Orientation(#[from] OrientationError),
    #[error(transparent)]
    Pooling(#[from] PoolingError),
    #[error(transparent)]
    Lut(#[from] LutError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    SuperResolution { scale: usize },
    /// Same-size restoration (denoise, deblock, deblur).
    Restore,
}

impl Task {
    pub fn scale(self) -> usize {
        match self {
            Task::SuperResolution { scale } => scale,
            Task::Restore => 1,
        }
    }
}

/// One table per kernel pattern.
#[derive(Clone)]
pub struct Stage {
    pub tables: Vec<Arc<dyn PatchTable>>,
}

impl Stage {
    pub fn single(table: Arc<dyn PatchTable>) -> Self {
        Self { tables: vec![table] }
    }

    pub fn outputs(&self) -> usize {
        self.tables.first().map_or(0, |t| t.outputs())
    }

    pub fn storage_bytes(&self) -> u64 {
        self.tables.iter().map(|t| t.storage_bytes()).sum()
    }
}

impl std::fmt::Debug for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stage")
            .field("tables", &self.tables.len())
            .field("outputs", &self.outputs())
            .finish()
    }
}

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub task: Task,
    pub patterns: Vec<KernelPattern>,
    pub orientations: OrientationSet,
    pub pooling: PoolingSpec,
    pub residual: bool,
    pub stages: Vec<Stage>,
    /// Query the coefficient table once (on the first stage's input) and
    /// reuse the weights in every stage.
    pub share_oap_across_stages: bool,
    /// Replicate-padding width; `None` uses the smallest sufficient width.
    pub padding: Option<usize>,
    pub execution: Execution,
}

impl PipelineConfig {
    /// Single-pattern, single-stage pipeline over the square 2x2 kernel.
    pub fn single(task: Task, table: Arc<dyn PatchTable>, pooling: PoolingSpec, residual: bool) -> Self {
        Self {
            task,
            patterns: vec![KernelPattern::square()],
            orientations: OrientationSet::default(),
            pooling,
            residual,
            stages: vec![Stage::single(table)],
            share_oap_across_stages: true,
            padding: None,
            execution: Execution::default(),
        }
    }

    fn required_padding(&self) -> usize {
        let patterns = self.patterns.iter().map(|p| p.reach()).max().unwrap_or(0);
        let coeff = match self.pooling {
            PoolingSpec::Oap(_) => KernelPattern::square().reach(),
            _ => 0,
        };
        patterns.max(coeff)
    }

    pub fn padding(&self) -> usize {
        self.padding.unwrap_or_else(|| self.required_padding())
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.stages.is_empty() {
            return bad("at least one stage is required".into());
        }
        if self.patterns.is_empty() {
            return bad("at least one kernel pattern is required".into());
        }
        if let Task::SuperResolution { scale } = self.task {
            if scale < 2 {
                return bad(format!("super-resolution scale {scale} must be at least 2"));
            }
        }
        let last = self.stages.len() - 1;
        for (s, stage) in self.stages.iter().enumerate() {
            if stage.tables.len() != self.patterns.len() {
                return bad(format!(
                    "stage {s} has {} tables for {} patterns",
                    stage.tables.len(),
                    self.patterns.len()
                ));
            }
            let want = if s == last { self.task.scale().pow(2) } else { 1 };
            for (table, pattern) in stage.tables.iter().zip(&self.patterns) {
                if table.inputs() != pattern.n() {
                    return bad(format!(
                        "stage {s}: table reads {} inputs, pattern {} has {}",
                        table.inputs(),
                        pattern.name(),
                        pattern.n()
                    ));
                }
                if table.outputs() != want {
                    return bad(format!(
                        "stage {s}: table has {} outputs, expected {want}",
                        table.outputs()
                    ));
                }
            }
        }
        match &self.pooling {
            PoolingSpec::Gmp { tau, .. } if !(tau.is_finite() && *tau > 0.0) => {
                return Err(PoolingError::Temperature(*tau).into());
            }
            PoolingSpec::Oap(c) => {
                if c.k() != self.orientations.k() {
                    return Err(PoolingError::CoeffShape {
                        m: c.k(),
                        k: self.orientations.k(),
                    }
                    .into());
                }
                if c.n() != KernelPattern::square().n() {
                    return bad(format!("coefficient table reads {} inputs, expected 4", c.n()));
                }
            }
            _ => {}
        }
        if self.padding() < self.required_padding() {
            return bad(format!(
                "padding {} is smaller than the kernel reach {}",
                self.padding(),
                self.required_padding()
            ));
        }
        Ok(())
    }

    /// Bytes of every table the pipeline reads.
    pub fn table_bytes(&self) -> u64 {
        let stages: u64 = self.stages.iter().map(Stage::storage_bytes).sum();
        let coeff = match &self.pooling {
            PoolingSpec::Oap(c) => c.table().storage_bytes(),
            _ => 0,
        };
        stages + coeff
    }
}

/// Table queries issued per anchor pixel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CostModel {
    pub lut_queries_per_pixel: u64,
    pub coeff_queries_per_pixel: u64,
}

/// `k * stages * patterns` restoration queries; one coefficient query per
/// anchor for shared OAP weights, one per stage otherwise.
pub fn query_cost_model(config: &PipelineConfig) -> CostModel {
    let stages = config.stages.len() as u64;
    let k = config.orientations.k() as u64;
    let coeff = match config.pooling {
        PoolingSpec::Oap(_) if config.share_oap_across_stages => 1,
        PoolingSpec::Oap(_) => stages,
        _ => 0,
    };
    CostModel {
        lut_queries_per_pixel: k * stages * config.patterns.len() as u64,
        coeff_queries_per_pixel: coeff,
    }
}

/// Instrumented query counts of one run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QueryStats {
    /// Anchor pixels per stage (input pixels).
    pub anchors: u64,
    pub lut_queries: u64,
    pub coeff_queries: u64,
}

impl std::ops::AddAssign for QueryStats {
    fn add_assign(&mut self, o: Self) {
        self.lut_queries += o.lut_queries;
        self.coeff_queries += o.coeff_queries;
    }
}

/// Elementwise `base + residual`, clamped to `[0, 255]`.
pub fn apply_residual(base: &ImageBuffer, residual: &ImageBuffer) -> Result<ImageBuffer, PipelineError> {
    base.check_same_size(residual)?;
    let data = base
        .pixels()
        .iter()
        .zip(residual.pixels())
        .map(|(b, r)| (b + r).clamp(0.0, 255.0))
        .collect();
    Ok(ImageBuffer::new(base.width(), base.height(), data)?)
}

/// Baseline the residual is added to: the input itself, or its bicubic
/// upsampling for super-resolution.
pub fn residual_base(input: &ImageBuffer, scale: usize) -> Result<ImageBuffer, PipelineError> {
    if scale == 1 {
        Ok(input.clone())
    } else {
        Ok(bicubic_resize_to(input, input.width() * scale, input.height() * scale)?)
    }
}

/// Flat offsets into a padded plane for each orientation and pattern.
struct Gather {
    width: usize,
    pad: usize,
    /// `[rotation][pattern]` -> offsets relative to the anchor.
    deltas: Vec<Vec<Vec<isize>>>,
    coeff: Vec<isize>,
}

impl Gather {
    fn new(config: &PipelineConfig, padded_width: usize, pad: usize) -> Self {
        let flat = |offs: Vec<(isize, isize)>| -> Vec<isize> {
            offs.into_iter().map(|(r, c)| r * padded_width as isize + c).collect()
        };
        let deltas = config
            .orientations
            .rotations()
            .iter()
            .map(|&rot| config.patterns.iter().map(|p| flat(p.rotated_offsets(rot))).collect())
            .collect();
        Self {
            width: padded_width,
            pad,
            deltas,
            coeff: flat(KernelPattern::square().offsets().to_vec()),
        }
    }

    #[inline]
    fn anchor(&self, row: usize, col: usize) -> isize {
        ((row + self.pad) * self.width + col + self.pad) as isize
    }

    #[inline]
    fn read(plane: &[f64], anchor: isize, deltas: &[isize], out: &mut [f64]) {
        for (o, d) in out.iter_mut().zip(deltas) {
            *o = plane[(anchor + d) as usize];
        }
    }
}

/// Coefficient weights for every anchor of `input` (k per pixel).
fn coefficient_map(
    input: &ImageBuffer,
    coeff: &CoeffLut,
    config: &PipelineConfig,
) -> Result<Vec<f64>, PipelineError> {
    let pad = config.padding();
    let padded = input.pad_replicate(pad);
    let gather = Gather::new(config, padded.width(), pad);
    let (w, k) = (input.width(), coeff.k());
    let mut alphas = vec![0.0; input.width() * input.height() * k];
    let rows = par::map_chunks_mut(config.execution, &mut alphas, w * k, |row, chunk| {
        let mut patch = [0.0; 4];
        for (col, a) in chunk.chunks_mut(k).enumerate() {
            Gather::read(padded.pixels(), gather.anchor(row, col), &gather.coeff, &mut patch);
            coeff.weights_into(&patch, a)?;
        }
        Ok::<_, PipelineError>(())
    });
    rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(alphas)
}

enum Weights<'a> {
    Average,
    Gmp { tau: f64, norm: Norm },
    Oap(&'a CoeffLut),
    Shared(&'a [f64]),
}

/// Runs one stage. Returns unclamped fused values (plus baseline if
/// residual) and the query counts.
fn run_stage(
    input: &ImageBuffer,
    stage: &Stage,
    scale: usize,
    weights: Weights<'_>,
    config: &PipelineConfig,
) -> Result<(ImageBuffer, QueryStats), PipelineError> {
    let pad = config.padding();
    let padded = input.pad_replicate(pad);
    let gather = Gather::new(config, padded.width(), pad);
    let (w, h) = input.dims();
    let k = config.orientations.k();
    let m = scale * scale;
    let patterns = config.patterns.len();
    let perms: Vec<Vec<usize>> = config
        .orientations
        .rotations()
        .iter()
        .map(|&r| block_permutation(m, r))
        .collect::<Result<_, _>>()?;
    let pattern_scale = 1.0 / patterns as f64;
    let out_w = w * scale;

    let mut out = vec![0.0; w * h * m];
    let rows = par::map_chunks_mut(config.execution, &mut out, w * m, |row, chunk| {
        let mut stats = QueryStats::default();
        let mut xs = vec![0.0; k * m];
        let mut raw = vec![0.0; m];
        let mut alpha = vec![0.0; k];
        let mut mean = vec![0.0; m];
        let mut block = vec![0.0; m];
        let mut patch = Vec::new();
        for col in 0..w {
            let anchor = gather.anchor(row, col);
            xs.fill(0.0);
            for (i, per_pattern) in gather.deltas.iter().enumerate() {
                let x = &mut xs[i * m..(i + 1) * m];
                for (table, deltas) in stage.tables.iter().zip(per_pattern) {
                    patch.resize(deltas.len(), 0.0);
                    Gather::read(padded.pixels(), anchor, deltas, &mut patch);
                    table.eval(&patch, &mut raw)?;
                    stats.lut_queries += 1;
                    for (j, &dst) in perms[i].iter().enumerate() {
                        x[dst] += raw[j] * pattern_scale;
                    }
                }
            }
            match weights {
                Weights::Average => average_weights(&mut alpha),
                Weights::Gmp { tau, norm } => gmp_weights(&xs, m, tau, norm, &mut mean, &mut alpha),
                Weights::Oap(coeff) => {
                    let mut p = [0.0; 4];
                    Gather::read(padded.pixels(), anchor, &gather.coeff, &mut p);
                    coeff.weights_into(&p, &mut alpha)?;
                    stats.coeff_queries += 1;
                }
                Weights::Shared(all) => {
                    let base = (row * w + col) * k;
                    alpha.copy_from_slice(&all[base..base + k]);
                }
            }
            combine(&xs, &alpha, &mut block);
            for (j, &v) in block.iter().enumerate() {
                let (bi, bj) = (j / scale, j % scale);
                chunk[bi * out_w + col * scale + bj] = v;
            }
        }
        Ok::<_, PipelineError>(stats)
    });
    let mut stats = QueryStats {
        anchors: (w * h) as u64,
        ..Default::default()
    };
    for r in rows {
        stats += r?;
    }

    let mut result = ImageBuffer::new(out_w, h * scale, out)?;
    if config.residual {
        let base = residual_base(input, scale)?;
        for (v, b) in result.pixels_mut().iter_mut().zip(base.pixels()) {
            *v += b;
        }
    }
    Ok((result, stats))
}

/// Runs every stage; the output is clamped and, if `quantize`, rounded to 8-bit levels.
pub fn run(
    image: &ImageBuffer,
    config: &PipelineConfig,
    quantize: bool,
) -> Result<(ImageBuffer, QueryStats), PipelineError> {
    config.validate()?;
    let mut total = QueryStats {
        anchors: (image.width() * image.height()) as u64,
        ..Default::default()
    };
    let shared = match &config.pooling {
        PoolingSpec::Oap(c) if config.share_oap_across_stages => {
            total.coeff_queries += total.anchors;
            Some(coefficient_map(image, c, config)?)
        }
        _ => None,
    };
    let last = config.stages.len() - 1;
    let mut current = image.clone();
    for (s, stage) in config.stages.iter().enumerate() {
        let scale = if s == last { config.task.scale() } else { 1 };
        let weights = match (&config.pooling, &shared) {
            (_, Some(alpha)) => Weights::Shared(alpha),
            (PoolingSpec::Average, _) => Weights::Average,
            (PoolingSpec::Gmp { tau, norm, .. }, _) => Weights::Gmp { tau: *tau, norm: *norm },
            (PoolingSpec::Oap(c), None) => Weights::Oap(c),
        };
        let (next, stats) = run_stage(&current, stage, scale, weights, config)?;
        total += stats;
        current = next.clamped();
    }
    if quantize {
        current = current.quantized();
    }
    Ok((current, total))
}

/// Restores `image`, returning 8-bit-level output.
pub fn restore_image(image: &ImageBuffer, config: &PipelineConfig) -> Result<ImageBuffer, PipelineError> {
    run(image, config, true).map(|(img, _)| img)
}

/// Same as [`restore_image`], with query counts.
pub fn restore_instrumented(
    image: &ImageBuffer,
    config: &PipelineConfig,
) -> Result<(ImageBuffer, QueryStats), PipelineError> {
    run(image, config, true)
}

/// Multi-stage restoration: each stage reads the previous stage's clamped output.
pub fn cascade(image: &ImageBuffer, config: &PipelineConfig) -> Result<ImageBuffer, PipelineError> {
    restore_image(image, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lut::{bake, FnTable, Lut, QuantizedLut, RealLut};
    use rand::{Rng, SeedableRng};

    fn identity_lut() -> Arc<dyn PatchTable> {
        let (lut, _) = bake(
            |p: &[f64], out: &mut [f64]| {
                out[0] = p[0];
                Ok(())
            },
            4,
            4,
            1,
            8,
            false,
        )
        .unwrap();
        Arc::new(lut)
    }

    fn random_image(seed: u64, w: usize, h: usize) -> ImageBuffer {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        ImageBuffer::from_fn(w, h, |_, _| f64::from(rng.gen::<u8>())).unwrap()
    }

    /// Values below the top lattice cell, where an 8-bit identity table is exact.
    fn random_image_below_top_cell(seed: u64, w: usize, h: usize) -> ImageBuffer {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        ImageBuffer::from_fn(w, h, |_, _| f64::from(rng.gen_range(0u8..=240))).unwrap()
    }

    fn random_sr_lut(seed: u64) -> QuantizedLut {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut lut = QuantizedLut::new(4, 4, 4, 8, false).unwrap();
        for p in 0..lut.lattice().num_points() {
            for c in 0..4 {
                lut.set(p, c, rng.gen_range(0.0..255.0));
            }
        }
        lut
    }

    #[test]
    fn identity_restore_reproduces_input() {
        let config = PipelineConfig::single(Task::Restore, identity_lut(), PoolingSpec::Average, false);
        let img = random_image_below_top_cell(1, 12, 9);
        assert_eq!(restore_image(&img, &config).unwrap(), img);
        // The top lattice entry (256) is stored as 255, so the last cell is
        // compressed by 15/16 and outputs there drift by at most one level.
        let img = random_image(1, 12, 9);
        let out = restore_image(&img, &config).unwrap();
        for (a, b) in out.pixels().iter().zip(img.pixels()) {
            assert!((a - b).abs() <= 1.0);
        }
    }

    #[test]
    fn zero_residual_is_bicubic() {
        let img = random_image(2, 10, 8);
        let zero = QuantizedLut::new(4, 4, 4, 8, true).unwrap();
        let config = PipelineConfig::single(
            Task::SuperResolution { scale: 2 },
            Arc::new(zero),
            PoolingSpec::Average,
            true,
        );
        let out = restore_image(&img, &config).unwrap();
        let expected = bicubic_resize(&img, 2.0).unwrap().quantized();
        assert_eq!(out, expected);
    }

    #[test]
    fn constant_image_gives_constant_output() {
        let img = ImageBuffer::filled(8, 8, 128.0).unwrap();
        let config = PipelineConfig::single(
            Task::SuperResolution { scale: 2 },
            Arc::new(random_sr_lut(3)),
            PoolingSpec::gmp(2.0, Norm::L2).unwrap(),
            false,
        );
        let out = restore_image(&img, &config).unwrap();
        assert_eq!(out.dims(), (16, 16));
        // Every anchor produces the same block (possibly different within it).
        for r in 0..16 {
            for c in 0..16 {
                assert_eq!(out.get(r, c), out.get(r % 2, c % 2));
            }
        }
    }

    #[test]
    fn apply_residual_clamps() {
        let b = ImageBuffer::new(3, 1, vec![250.0, 100.0, 40.0]).unwrap();
        let r = ImageBuffer::new(3, 1, vec![10.0, -128.0, 0.0]).unwrap();
        assert_eq!(apply_residual(&b, &r).unwrap().pixels(), &[255.0, 0.0, 40.0]);
        let wrong = ImageBuffer::filled(2, 1, 0.0).unwrap();
        assert!(apply_residual(&b, &wrong).is_err());
    }

    #[test]
    fn cascade_of_identities() {
        let img = random_image_below_top_cell(4, 11, 7);
        let mut config = PipelineConfig::single(Task::Restore, identity_lut(), PoolingSpec::Average, false);
        config.stages.push(Stage::single(identity_lut()));
        assert_eq!(cascade(&img, &config).unwrap(), img);
    }

    #[test]
    fn shared_and_per_stage_constant_coefficients_agree() {
        let img = random_image(5, 9, 9);
        let lut: Arc<dyn PatchTable> = Arc::new(random_sr_lut(6));
        let mid: Arc<dyn PatchTable> = Arc::new(FnTable::new(4, 1, |p: &[f64], o: &mut [f64]| {
            o[0] = 0.5 * p[0] + 0.25 * p[1] + 0.25 * p[3];
        }));
        let coeff = CoeffLut::uniform(5, 4, 4).unwrap();
        let mut config = PipelineConfig::single(
            Task::SuperResolution { scale: 2 },
            mid,
            PoolingSpec::Oap(coeff),
            false,
        );
        config.stages.push(Stage::single(lut));
        let shared = restore_instrumented(&img, &config).unwrap();
        config.share_oap_across_stages = false;
        let per_stage = restore_instrumented(&img, &config).unwrap();
        assert_eq!(shared.0, per_stage.0);
        assert_eq!(shared.1.coeff_queries, 81);
        assert_eq!(per_stage.1.coeff_queries, 162);
        assert_eq!(shared.1.lut_queries, 2 * 4 * 81);
    }

    #[test]
    fn multi_pattern_stage_averages_patterns() {
        let img = random_image(7, 10, 10);
        let plus: Arc<dyn PatchTable> =
            Arc::new(FnTable::new(4, 1, |p: &[f64], o: &mut [f64]| o[0] = p[0] + 10.0));
        let minus: Arc<dyn PatchTable> =
            Arc::new(FnTable::new(4, 1, |p: &[f64], o: &mut [f64]| o[0] = p[0] - 10.0));
        let config = PipelineConfig {
            patterns: vec![KernelPattern::square(), KernelPattern::diagonal()],
            stages: vec![Stage {
                tables: vec![plus, minus],
            }],
            ..PipelineConfig::single(Task::Restore, identity_lut(), PoolingSpec::Average, false)
        };
        assert_eq!(config.padding(), 3);
        let (out, stats) = restore_instrumented(&img, &config).unwrap();
        assert_eq!(out, img);
        assert_eq!(stats.lut_queries, 100 * 4 * 2);
        assert_eq!(
            query_cost_model(&config),
            CostModel {
                lut_queries_per_pixel: 8,
                coeff_queries_per_pixel: 0
            }
        );
    }

    #[test]
    fn validation_catches_shape_errors() {
        let sr = Arc::new(random_sr_lut(8)) as Arc<dyn PatchTable>;
        let cfg = PipelineConfig::single(Task::Restore, sr.clone(), PoolingSpec::Average, false);
        assert!(matches!(cfg.validate(), Err(PipelineError::Config(_))));
        let mut cfg = PipelineConfig::single(Task::SuperResolution { scale: 2 }, sr.clone(), PoolingSpec::Average, false);
        cfg.stages.push(Stage::single(sr.clone()));
        assert!(cfg.validate().is_err());
        let bad_coeff = CoeffLut::new(Lut::Real(RealLut::zeros(5, 4, 3).unwrap()), 3).unwrap();
        let cfg = PipelineConfig::single(Task::SuperResolution { scale: 2 }, sr.clone(), PoolingSpec::Oap(bad_coeff), false);
        assert!(matches!(cfg.validate(), Err(PipelineError::Pooling(_))));
        let mut cfg = PipelineConfig::single(Task::SuperResolution { scale: 2 }, sr, PoolingSpec::Average, false);
        cfg.padding = Some(0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn cost_model_examples() {
        let lut = Arc::new(random_sr_lut(9)) as Arc<dyn PatchTable>;
        let mut cfg = PipelineConfig::single(Task::SuperResolution { scale: 2 }, lut, PoolingSpec::Average, false);
        assert_eq!(query_cost_model(&cfg), CostModel { lut_queries_per_pixel: 4, coeff_queries_per_pixel: 0 });
        cfg.pooling = PoolingSpec::Oap(CoeffLut::uniform(5, 4, 4).unwrap());
        assert_eq!(query_cost_model(&cfg), CostModel { lut_queries_per_pixel: 4, coeff_queries_per_pixel: 1 });
        cfg.stages.insert(0, Stage::single(identity_lut()));
        assert_eq!(query_cost_model(&cfg), CostModel { lut_queries_per_pixel: 8, coeff_queries_per_pixel: 1 });
        cfg.share_oap_across_stages = false;
        assert_eq!(query_cost_model(&cfg).coeff_queries_per_pixel, 2);
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let img = random_image(10, 20, 13);
        let mut cfg = PipelineConfig::single(
            Task::SuperResolution { scale: 2 },
            Arc::new(random_sr_lut(11)),
            PoolingSpec::gmp(3.0, Norm::L1).unwrap(),
            true,
        );
        let a = restore_image(&img, &cfg).unwrap();
        cfg.execution = Execution::Sequential;
        let b = restore_image(&img, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
