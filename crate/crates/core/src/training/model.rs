use std::sync::Arc;

use super::data::{Sample, TrainSet};
use super::{Loss, TrainConfig, TrainError};
use crate::lut::{Corners, Lattice, Lut, RealLut};
use crate::orientation::{block_permutation, KernelPattern, OrientationSet};
use crate::par::{self, Execution};
use crate::pipeline::{PipelineConfig, Stage, Task};
use crate::pooling::{mean_distances, softmax_in_place, CoeffLut, Norm, PoolingSpec};

/// Intensity units per normalized restoration unit.
pub(crate) const INTENSITY: f64 = 255.0;

/// Parameter values with their Adam moments.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamBuffer {
    pub values: Vec<f64>,
    pub moment1: Vec<f64>,
    pub moment2: Vec<f64>,
}

impl ParamBuffer {
    pub fn new(values: Vec<f64>) -> Self {
        let n = values.len();
        Self {
            values,
            moment1: vec![0.0; n],
            moment2: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Clears the optimizer moments, keeping the values.
    pub fn reset_moments(&mut self) {
        self.moment1.iter_mut().for_each(|v| *v = 0.0);
        self.moment2.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Real-valued table entries being optimized. Stored parameters are table
/// values divided by `scale`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainableLut {
    lattice: Lattice,
    m: usize,
    scale: f64,
    pub params: ParamBuffer,
}

impl TrainableLut {
    pub fn zeros(q: u8, n: usize, m: usize, scale: f64) -> Result<Self, TrainError> {
        let lattice = Lattice::new(q, n)?;
        Ok(Self {
            lattice,
            m,
            scale,
            params: ParamBuffer::new(vec![0.0; lattice.num_points() * m]),
        })
    }

    pub fn from_params(q: u8, n: usize, m: usize, scale: f64, params: ParamBuffer) -> Result<Self, TrainError> {
        let mut t = Self::zeros(q, n, m, scale)?;
        let len = t.params.len();
        if params.values.len() != len || params.moment1.len() != len || params.moment2.len() != len {
            return Err(TrainError::Config(format!("expected {len} parameters")));
        }
        t.params = params;
        Ok(t)
    }

    pub fn from_real(lut: &RealLut, scale: f64) -> Self {
        Self {
            lattice: lut.lattice(),
            m: lut.m(),
            scale,
            params: ParamBuffer::new(lut.values().iter().map(|v| v / scale).collect()),
        }
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Table value (in table units) of flat entry `i`.
    pub fn value(&self, i: usize) -> f64 {
        self.params.values[i] * self.scale
    }

    pub fn to_real(&self) -> RealLut {
        let values = self.params.values.iter().map(|v| v * self.scale).collect();
        RealLut::from_values(self.lattice.q(), self.lattice.n(), self.m, values).expect("shape is consistent")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainablePooling {
    Average,
    /// Temperature stored as `ln tau` (one parameter).
    Gmp {
        log_tau: ParamBuffer,
        norm: Norm,
        trainable: bool,
    },
    /// Coefficient logits over the 2x2 square patch, one per orientation.
    Oap(TrainableLut),
}

impl TrainablePooling {
    pub fn gmp(tau: f64, norm: Norm, trainable: bool) -> Self {
        TrainablePooling::Gmp {
            log_tau: ParamBuffer::new(vec![tau.ln()]),
            norm,
            trainable,
        }
    }

    /// All-zero logits: uniform weights at every patch.
    pub fn oap_zero(q: u8, k: usize) -> Result<Self, TrainError> {
        Ok(TrainablePooling::Oap(TrainableLut::zeros(q, 4, k, 1.0)?))
    }

    pub fn tau(&self) -> Option<f64> {
        match self {
            TrainablePooling::Gmp { log_tau, .. } => Some(log_tau.values[0].exp()),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TrainablePooling::Average => "avg",
            TrainablePooling::Gmp { .. } => "gmp",
            TrainablePooling::Oap(_) => "oap",
        }
    }

    fn len(&self) -> usize {
        match self {
            TrainablePooling::Average => 0,
            TrainablePooling::Gmp { .. } => 1,
            TrainablePooling::Oap(t) => t.params.len(),
        }
    }
}

/// A single-stage pipeline whose tables are being trained.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainableModel {
    pub task: Task,
    pub patterns: Vec<KernelPattern>,
    pub orientations: OrientationSet,
    /// One table per pattern, `scale^2` outputs each.
    pub tables: Vec<TrainableLut>,
    pub pooling: TrainablePooling,
    pub residual: bool,
}

impl TrainableModel {
    /// Zero-initialized tables at sampling interval `q`.
    pub fn new(
        task: Task,
        patterns: Vec<KernelPattern>,
        orientations: OrientationSet,
        q: u8,
        pooling: TrainablePooling,
        residual: bool,
    ) -> Result<Self, TrainError> {
        let m = task.scale().pow(2);
        let tables = patterns
            .iter()
            .map(|p| TrainableLut::zeros(q, p.n(), m, INTENSITY))
            .collect::<Result<_, _>>()?;
        let model = Self {
            task,
            patterns,
            orientations,
            tables,
            pooling,
            residual,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if self.patterns.is_empty() || self.patterns.len() != self.tables.len() {
            return bad(format!("{} patterns for {} tables", self.patterns.len(), self.tables.len()));
        }
        let m = self.outputs();
        for (p, t) in self.patterns.iter().zip(&self.tables) {
            if t.lattice().n() != p.n() || t.m() != m {
                return bad(format!("table shape does not fit pattern {}", p.name()));
            }
        }
        if let TrainablePooling::Oap(c) = &self.pooling {
            if c.m() != self.orientations.k() || c.lattice().n() != 4 {
                return bad("coefficient table must map 4 inputs to k logits".into());
            }
        }
        Ok(())
    }

    pub fn outputs(&self) -> usize {
        self.task.scale().pow(2)
    }

    pub fn pad(&self) -> usize {
        let reach = self.patterns.iter().map(|p| p.reach()).max().unwrap_or(0);
        reach.max(KernelPattern::square().reach())
    }

    pub fn parameter_count(&self) -> usize {
        self.tables.iter().map(|t| t.params.len()).sum::<usize>() + self.pooling.len()
    }

    /// Inference pipeline over the current real-valued tables.
    pub fn to_pipeline(&self, execution: Execution) -> Result<PipelineConfig, TrainError> {
        let tables = self
            .tables
            .iter()
            .map(|t| Arc::new(t.to_real()) as Arc<dyn crate::lut::PatchTable>)
            .collect();
        let pooling = match &self.pooling {
            TrainablePooling::Average => PoolingSpec::Average,
            TrainablePooling::Gmp { log_tau, norm, trainable } => PoolingSpec::Gmp {
                tau: log_tau.values[0].exp(),
                norm: *norm,
                tau_trainable: *trainable,
            },
            TrainablePooling::Oap(c) => {
                let k = self.orientations.k();
                let lut = Lut::Real(c.to_real().with_orientations(k as u32));
                PoolingSpec::Oap(CoeffLut::new(lut, k).map_err(crate::pipeline::PipelineError::from)?)
            }
        };
        Ok(self.pipeline_with(tables, pooling, execution))
    }

    pub(crate) fn pipeline_with(
        &self,
        tables: Vec<Arc<dyn crate::lut::PatchTable>>,
        pooling: PoolingSpec,
        execution: Execution,
    ) -> PipelineConfig {
        PipelineConfig {
            task: self.task,
            patterns: self.patterns.clone(),
            orientations: self.orientations.clone(),
            pooling,
            residual: self.residual,
            stages: vec![Stage { tables }],
            share_oap_across_stages: true,
            padding: None,
            execution,
        }
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            tables: self.tables.iter().map(|t| vec![0.0; t.params.len()]).collect(),
            pooling: vec![0.0; self.pooling.len()],
        }
    }

    /// Pooling parameters as a flat buffer (empty for average pooling).
    pub fn pooling_params(&self) -> Option<&ParamBuffer> {
        match &self.pooling {
            TrainablePooling::Average => None,
            TrainablePooling::Gmp { log_tau, .. } => Some(log_tau),
            TrainablePooling::Oap(c) => Some(&c.params),
        }
    }

    pub fn pooling_params_mut(&mut self) -> Option<&mut ParamBuffer> {
        match &mut self.pooling {
            TrainablePooling::Average => None,
            TrainablePooling::Gmp { log_tau, .. } => Some(log_tau),
            TrainablePooling::Oap(c) => Some(&mut c.params),
        }
    }
}

/// Dense gradients matching the model's parameter buffers.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub tables: Vec<Vec<f64>>,
    /// Coefficient logits, or `[d/d ln tau]` for generalized median pooling.
    pub pooling: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct BatchResult {
    /// Fidelity plus weighted regularizer, averaged over the batch.
    pub loss: f64,
    pub fidelity: f64,
    pub regularizer: f64,
    pub gradients: Gradients,
}

const POOLING_SLOT: u32 = u32::MAX;

/// One sparse gradient contribution.
#[derive(Clone, Copy)]
struct Entry {
    slot: u32,
    index: u32,
    grad: f64,
}

/// Geometry shared by every sample of a batch.
struct Plan {
    k: usize,
    m: usize,
    scale: usize,
    /// `[rotation][pattern]` offsets.
    offsets: Vec<Vec<Vec<(isize, isize)>>>,
    perms: Vec<Vec<usize>>,
    coeff: Vec<(isize, isize)>,
}

impl Plan {
    fn new(model: &TrainableModel) -> Result<Self, TrainError> {
        let m = model.outputs();
        let rots = model.orientations.rotations();
        Ok(Self {
            k: rots.len(),
            m,
            scale: model.task.scale(),
            offsets: rots
                .iter()
                .map(|&r| model.patterns.iter().map(|p| p.rotated_offsets(r)).collect())
                .collect(),
            perms: rots.iter().map(|&r| block_permutation(m, r)).collect::<Result<_, _>>()?,
            coeff: KernelPattern::square().offsets().to_vec(),
        })
    }
}

struct Scratch {
    xs: Vec<f64>,
    raw: Vec<f64>,
    corners: Vec<Corners>,
    coeff_corners: Corners,
    alpha: Vec<f64>,
    dist: Vec<f64>,
    mean: Vec<f64>,
    pix: Vec<f64>,
    yhat: Vec<f64>,
    g: Vec<f64>,
    gx: Vec<f64>,
    gs: Vec<f64>,
    sum_u: Vec<f64>,
    patch: Vec<f64>,
}

impl Scratch {
    fn new(plan: &Plan, patterns: usize) -> Self {
        let (k, m) = (plan.k, plan.m);
        Self {
            xs: vec![0.0; k * m],
            raw: vec![0.0; m],
            corners: vec![Corners::default(); k * patterns],
            coeff_corners: Corners::default(),
            alpha: vec![0.0; k],
            dist: vec![0.0; k],
            mean: vec![0.0; m],
            pix: vec![0.0; k * m],
            yhat: vec![0.0; m],
            g: vec![0.0; m],
            gx: vec![0.0; k * m],
            gs: vec![0.0; k],
            sum_u: vec![0.0; m],
            patch: Vec::new(),
        }
    }
}

/// Prediction for one anchor, in normalized units, left in `s.yhat`.
fn forward(model: &TrainableModel, plan: &Plan, set: &TrainSet, sample: Sample, s: &mut Scratch) -> Result<(), TrainError> {
    let v = &set.variants[sample.variant];
    let (ar, ac) = ((sample.row + set.pad) as isize, (sample.col + set.pad) as isize);
    let read = |(dr, dc): (isize, isize)| v.padded.get((ar + dr) as usize, (ac + dc) as usize);
    let (k, m) = (plan.k, plan.m);
    let patterns = model.tables.len();
    let inv_p = 1.0 / patterns as f64;

    s.xs.fill(0.0);
    for i in 0..k {
        for (p, table) in model.tables.iter().enumerate() {
            s.patch.clear();
            s.patch.extend(plan.offsets[i][p].iter().map(|&o| read(o)));
            let corners = table.lattice().corners(&s.patch)?;
            s.raw.fill(0.0);
            let values = &table.params.values;
            for (pt, w) in corners.iter() {
                for (r, &e) in s.raw.iter_mut().zip(&values[pt * m..(pt + 1) * m]) {
                    *r += w * e;
                }
            }
            for (j, &dst) in plan.perms[i].iter().enumerate() {
                s.xs[i * m + dst] += s.raw[j] * inv_p;
            }
            s.corners[i * patterns + p] = corners;
        }
    }

    match &model.pooling {
        TrainablePooling::Average => s.alpha.fill(1.0 / k as f64),
        TrainablePooling::Gmp { log_tau, norm, .. } => {
            let tau = log_tau.values[0].exp();
            for (p, &x) in s.pix.iter_mut().zip(&s.xs) {
                *p = x * INTENSITY;
            }
            mean_distances(&s.pix, m, *norm, &mut s.mean, &mut s.dist);
            for (a, &d) in s.alpha.iter_mut().zip(&s.dist) {
                *a = -d / tau;
            }
            softmax_in_place(&mut s.alpha);
        }
        TrainablePooling::Oap(c) => {
            let patch: Vec<f64> = plan.coeff.iter().map(|&o| read(o)).collect();
            s.coeff_corners = c.lattice().corners(&patch)?;
            s.alpha.fill(0.0);
            for (pt, w) in s.coeff_corners.iter() {
                for (a, &z) in s.alpha.iter_mut().zip(&c.params.values[pt * k..(pt + 1) * k]) {
                    *a += w * z;
                }
            }
            softmax_in_place(&mut s.alpha);
        }
    }

    for j in 0..m {
        let mut y = 0.0;
        for i in 0..k {
            y += s.alpha[i] * s.xs[i * m + j];
        }
        if let Some(base) = &v.base {
            y += base.get(sample.row * plan.scale + j / plan.scale, sample.col * plan.scale + j % plan.scale) / INTENSITY;
        }
        s.yhat[j] = y;
    }
    Ok(())
}

fn target(set: &TrainSet, plan: &Plan, sample: Sample, j: usize) -> f64 {
    let v = &set.variants[sample.variant];
    v.target.get(sample.row * plan.scale + j / plan.scale, sample.col * plan.scale + j % plan.scale) / INTENSITY
}

/// Loss of one anchor; with `out`, appends its gradient contributions.
#[allow(clippy::too_many_arguments)]
fn sample_loss(
    model: &TrainableModel,
    plan: &Plan,
    set: &TrainSet,
    sample: Sample,
    loss: Loss,
    lambda: f64,
    s: &mut Scratch,
    out: Option<&mut Vec<Entry>>,
) -> Result<(f64, f64), TrainError> {
    forward(model, plan, set, sample, s)?;
    let (k, m) = (plan.k, plan.m);
    let mut fidelity = 0.0;
    for j in 0..m {
        let (l, dl) = loss.eval(s.yhat[j] - target(set, plan, sample, j));
        fidelity += l;
        s.g[j] = dl / m as f64;
    }
    fidelity /= m as f64;
    let regularize = lambda > 0.0 && matches!(model.pooling, TrainablePooling::Oap(_));
    let reg = if regularize {
        lambda * super::entropy_regularizer(&s.alpha)
    } else {
        0.0
    };
    let Some(out) = out else {
        return Ok((fidelity, reg));
    };

    // d/d alpha_i, then through the softmax to the pre-softmax scores.
    let mut weighted = 0.0;
    for i in 0..k {
        let mut ga: f64 = (0..m).map(|j| s.g[j] * s.xs[i * m + j]).sum();
        if regularize && s.alpha[i] > 0.0 {
            ga += lambda * (s.alpha[i].ln() + 1.0);
        }
        s.gs[i] = ga;
        weighted += s.alpha[i] * ga;
    }
    for i in 0..k {
        s.gs[i] = s.alpha[i] * (s.gs[i] - weighted);
        for j in 0..m {
            s.gx[i * m + j] = s.alpha[i] * s.g[j];
        }
    }

    match &model.pooling {
        TrainablePooling::Average => {}
        TrainablePooling::Oap(_) => {
            for (pt, w) in s.coeff_corners.iter() {
                for i in 0..k {
                    out.push(Entry {
                        slot: POOLING_SLOT,
                        index: (pt * k + i) as u32,
                        grad: w * s.gs[i],
                    });
                }
            }
        }
        TrainablePooling::Gmp { log_tau, norm, trainable } => {
            // d_i = |255 (x_i - mean)|, so d d_i / d x_j = 255 u_i (delta_ij - 1/k).
            let tau = log_tau.values[0].exp();
            s.sum_u.fill(0.0);
            for i in 0..k {
                for j in 0..m {
                    let u = unit(s.pix[i * m + j] - s.mean[j], s.dist[i], *norm);
                    s.pix[i * m + j] = u;
                    s.sum_u[j] += s.gs[i] * u;
                }
            }
            let c = -INTENSITY / tau;
            for i in 0..k {
                for j in 0..m {
                    s.gx[i * m + j] += c * (s.gs[i] * s.pix[i * m + j] - s.sum_u[j] / k as f64);
                }
            }
            if *trainable {
                let g: f64 = (0..k).map(|i| s.gs[i] * s.dist[i] / tau).sum();
                out.push(Entry {
                    slot: POOLING_SLOT,
                    index: 0,
                    grad: g,
                });
            }
        }
    }

    let patterns = model.tables.len();
    let inv_p = 1.0 / patterns as f64;
    for i in 0..k {
        for j in 0..m {
            s.raw[j] = s.gx[i * m + plan.perms[i][j]] * inv_p;
        }
        for p in 0..patterns {
            for (pt, w) in s.corners[i * patterns + p].iter() {
                for j in 0..m {
                    out.push(Entry {
                        slot: p as u32,
                        index: (pt * m + j) as u32,
                        grad: w * s.raw[j],
                    });
                }
            }
        }
    }
    Ok((fidelity, reg))
}

/// Direction of `diff` for the given distance: unit vector (L2) or sign (L1).
#[inline]
fn unit(diff: f64, dist: f64, norm: Norm) -> f64 {
    match norm {
        Norm::L2 if dist > 0.0 => diff / dist,
        Norm::L2 => 0.0,
        Norm::L1 => {
            if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            }
        }
    }
}

const CHUNK: usize = 64;

/// Mean loss over `samples` and its gradient with respect to every
/// trainable parameter. Per-sample contributions are reduced in sample
/// order, so the result does not depend on the execution mode.
pub fn forward_backward(
    model: &TrainableModel,
    set: &TrainSet,
    samples: &[Sample],
    config: &TrainConfig,
) -> Result<BatchResult, TrainError> {
    evaluate_batch(model, set, samples, config, true)
}

fn evaluate_batch(
    model: &TrainableModel,
    set: &TrainSet,
    samples: &[Sample],
    config: &TrainConfig,
    want_grad: bool,
) -> Result<BatchResult, TrainError> {
    if samples.is_empty() {
        return Err(TrainError::Config("empty batch".into()));
    }
    if set.pad < model.pad() || set.scale != model.task.scale() {
        return Err(TrainError::Config("training set was prepared for a different model".into()));
    }
    let plan = Plan::new(model)?;
    let lambda = config.effective_lambda();
    let chunks = samples.len().div_ceil(CHUNK);
    let parts = par::map_range(config.execution, chunks, |c| {
        let mut scratch = Scratch::new(&plan, model.tables.len());
        let mut entries = Vec::new();
        let mut losses = Vec::with_capacity(CHUNK);
        for &sample in &samples[c * CHUNK..((c + 1) * CHUNK).min(samples.len())] {
            let sink = if want_grad { Some(&mut entries) } else { None };
            losses.push(sample_loss(model, &plan, set, sample, config.loss, lambda, &mut scratch, sink)?);
        }
        Ok::<_, TrainError>((losses, entries))
    });

    let scale = 1.0 / samples.len() as f64;
    let mut grads = model.zero_gradients();
    let (mut fidelity, mut reg) = (0.0, 0.0);
    let mut index = 0;
    for part in parts {
        let (losses, entries) = part?;
        for (f, r) in losses {
            if !(f + r).is_finite() {
                return Err(TrainError::NonFinite {
                    loss: f + r,
                    step: 0,
                    batch: samples.len(),
                    sample: index,
                });
            }
            fidelity += f;
            reg += r;
            index += 1;
        }
        for e in entries {
            let target = if e.slot == POOLING_SLOT {
                &mut grads.pooling
            } else {
                &mut grads.tables[e.slot as usize]
            };
            target[e.index as usize] += e.grad * scale;
        }
    }
    fidelity *= scale;
    reg *= scale;
    Ok(BatchResult {
        loss: fidelity + reg,
        fidelity,
        regularizer: reg,
        gradients: grads,
    })
}

/// Mean loss without gradients.
pub fn batch_loss(
    model: &TrainableModel,
    set: &TrainSet,
    samples: &[Sample],
    config: &TrainConfig,
) -> Result<f64, TrainError> {
    evaluate_batch(model, set, samples, config, false).map(|r| r.loss)
}

/// Normalized prediction block of one anchor.
#[cfg(test)]
pub(crate) fn predict(model: &TrainableModel, set: &TrainSet, sample: Sample) -> Result<Vec<f64>, TrainError> {
    let plan = Plan::new(model)?;
    let mut s = Scratch::new(&plan, model.tables.len());
    forward(model, &plan, set, sample, &mut s)?;
    Ok(s.yhat)
}
