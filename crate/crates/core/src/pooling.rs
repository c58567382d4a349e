//! Fusion of oriented predictions into one output.
//!
//! Every rule produces weights on the probability simplex and returns the
//! convex combination `sum_i w_i * x_i`. The flat helpers operate on a
//! `k * m` buffer (orientation-major) and are what the pipeline calls per
//! anchor; the `fuse_*` functions wrap them for owned inputs.

use std::sync::Arc;

use thiserror::Error;

use crate::lut::{query_into, Lut, LutError};

#[derive(Debug, Error)]
pub enum PoolingError {
    #[error("no predictions to fuse")]
    Empty,
    #[error("predictions have unequal lengths")]
    Ragged,
    #[error("non-finite prediction value {0}")]
    NonFinite(f64),
    #[error("temperature must be positive and finite, got {0}")]
    Temperature(f64),
    #[error("coefficient table has {m} outputs but {k} orientations are fused")]
    CoeffShape { m: usize, k: usize },
    #[error(transparent)]
    Lut(#[from] LutError),
}

/// Distance used by generalized median pooling.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Norm {
    L1,
    #[default]
    L2,
}

/// Tiny table predicting one weight per orientation from the input patch.
///
/// Real-valued tables hold logits and are normalized with a softmax.
/// Integer tables hold non-negative weights normalized by their sum, with a
/// uniform fallback when every weight is zero.
#[derive(Clone, Debug)]
pub struct CoeffLut {
    table: Arc<Lut>,
    k: usize,
}

impl CoeffLut {
    pub fn new(table: impl Into<Arc<Lut>>, k: usize) -> Result<Self, PoolingError> {
        let table = table.into();
        if table.m() != k || k == 0 {
            return Err(PoolingError::CoeffShape { m: table.m(), k });
        }
        Ok(Self { table, k })
    }

    /// Every entry equal: yields uniform weights in either storage mode.
    pub fn uniform(q: u8, n: usize, k: usize) -> Result<Self, PoolingError> {
        let lut = crate::lut::RealLut::zeros(q, n, k)?.with_orientations(k as u32);
        Self::new(Lut::Real(lut), k)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.table.lattice().n()
    }

    pub fn table(&self) -> &Lut {
        &self.table
    }

    pub fn is_logit(&self) -> bool {
        matches!(*self.table, Lut::Real(_))
    }

    /// Weights for `patch`, written into `weights` (length k).
    pub fn weights_into(&self, patch: &[f64], weights: &mut [f64]) -> Result<(), PoolingError> {
        debug_assert_eq!(weights.len(), self.k);
        match &*self.table {
            Lut::Real(t) => {
                query_into(t, patch, weights)?;
                softmax_in_place(weights);
            }
            Lut::Quantized(t) => {
                query_into(t, patch, weights)?;
                normalize_in_place(weights);
            }
        }
        Ok(())
    }
}

/// Which fusion rule a pipeline applies.
#[derive(Clone, Debug, Default)]
pub enum PoolingSpec {
    #[default]
    Average,
    Gmp {
        tau: f64,
        norm: Norm,
        tau_trainable: bool,
    },
    Oap(CoeffLut),
}

impl PoolingSpec {
    pub fn gmp(tau: f64, norm: Norm) -> Result<Self, PoolingError> {
        check_tau(tau)?;
        Ok(PoolingSpec::Gmp {
            tau,
            norm,
            tau_trainable: false,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            PoolingSpec::Average => "avg",
            PoolingSpec::Gmp { .. } => "gmp",
            PoolingSpec::Oap(_) => "oap",
        }
    }
}

fn check_tau(tau: f64) -> Result<(), PoolingError> {
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(PoolingError::Temperature(tau))
    }
}

/// Fused output and the weights that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionResult {
    pub output: Vec<f64>,
    pub weights: Vec<f64>,
}

/// `out[c] = sum_i weights[i] * xs[i*m + c]`, summed in orientation order.
#[inline]
pub fn combine(xs: &[f64], weights: &[f64], out: &mut [f64]) {
    let m = out.len();
    out.fill(0.0);
    for (i, &w) in weights.iter().enumerate() {
        for (o, &x) in out.iter_mut().zip(&xs[i * m..(i + 1) * m]) {
            *o += w * x;
        }
    }
}

pub fn average_weights(weights: &mut [f64]) {
    let w = 1.0 / weights.len() as f64;
    weights.fill(w);
}

/// Numerically stable softmax (max-shifted).
pub fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Divides by the sum; uniform when all values are equal or the sum is not positive.
pub fn normalize_in_place(v: &mut [f64]) {
    let all_equal = v.windows(2).all(|p| p[0] == p[1]);
    let sum: f64 = v.iter().map(|x| x.max(0.0)).sum();
    if all_equal || sum <= 0.0 {
        average_weights(v);
        return;
    }
    for x in v.iter_mut() {
        *x = x.max(0.0) / sum;
    }
}

/// Distance of each orientation from the cross-orientation mean.
pub fn mean_distances(xs: &[f64], m: usize, norm: Norm, mean: &mut [f64], dist: &mut [f64]) {
    let k = dist.len();
    mean.fill(0.0);
    for i in 0..k {
        for (mu, &x) in mean.iter_mut().zip(&xs[i * m..(i + 1) * m]) {
            *mu += x;
        }
    }
    for mu in mean.iter_mut() {
        *mu /= k as f64;
    }
    for (i, d) in dist.iter_mut().enumerate() {
        let row = &xs[i * m..(i + 1) * m];
        *d = match norm {
            Norm::L1 => row.iter().zip(mean.iter()).map(|(x, mu)| (x - mu).abs()).sum(),
            Norm::L2 => row
                .iter()
                .zip(mean.iter())
                .map(|(x, mu)| (x - mu) * (x - mu))
                .sum::<f64>()
                .sqrt(),
        };
    }
}

/// Softmin of the mean distances at temperature `tau`.
pub fn gmp_weights(xs: &[f64], m: usize, tau: f64, norm: Norm, mean: &mut [f64], weights: &mut [f64]) {
    mean_distances(xs, m, norm, mean, weights);
    for w in weights.iter_mut() {
        *w = -*w / tau;
    }
    softmax_in_place(weights);
}

fn flatten<V: AsRef<[f64]>>(xs: &[V]) -> Result<(Vec<f64>, usize), PoolingError> {
    let first = xs.first().ok_or(PoolingError::Empty)?.as_ref().len();
    if first == 0 {
        return Err(PoolingError::Empty);
    }
    let mut flat = Vec::with_capacity(xs.len() * first);
    for x in xs {
        let x = x.as_ref();
        if x.len() != first {
            return Err(PoolingError::Ragged);
        }
        flat.extend_from_slice(x);
    }
    Ok((flat, first))
}

fn finish(flat: &[f64], m: usize, weights: Vec<f64>) -> FusionResult {
    let mut output = vec![0.0; m];
    combine(flat, &weights, &mut output);
    FusionResult { output, weights }
}

pub fn fuse_average<V: AsRef<[f64]>>(xs: &[V]) -> Result<FusionResult, PoolingError> {
    let (flat, m) = flatten(xs)?;
    let mut weights = vec![0.0; xs.len()];
    average_weights(&mut weights);
    Ok(finish(&flat, m, weights))
}

pub fn fuse_gmp<V: AsRef<[f64]>>(xs: &[V], tau: f64, norm: Norm) -> Result<FusionResult, PoolingError> {
    check_tau(tau)?;
    let (flat, m) = flatten(xs)?;
    if let Some(&bad) = flat.iter().find(|v| !v.is_finite()) {
        return Err(PoolingError::NonFinite(bad));
    }
    let mut weights = vec![0.0; xs.len()];
    let mut mean = vec![0.0; m];
    gmp_weights(&flat, m, tau, norm, &mut mean, &mut weights);
    Ok(finish(&flat, m, weights))
}

pub fn fuse_oap<V: AsRef<[f64]>>(xs: &[V], patch: &[f64], coeff: &CoeffLut) -> Result<FusionResult, PoolingError> {
    let (flat, m) = flatten(xs)?;
    if xs.len() != coeff.k() {
        return Err(PoolingError::CoeffShape { m: coeff.k(), k: xs.len() });
    }
    let mut weights = vec![0.0; xs.len()];
    coeff.weights_into(patch, &mut weights)?;
    Ok(finish(&flat, m, weights))
}

/// True when `weights` is a point of the probability simplex (tolerance 1e-9).
pub fn simplex_project_check(weights: &[f64]) -> bool {
    let sum: f64 = weights.iter().sum();
    weights.iter().all(|&w| w >= -1e-9) && (sum - 1.0).abs() <= 1e-9
}
