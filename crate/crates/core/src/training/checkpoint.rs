//! Training checkpoints.
//!
//! A checkpoint is a directory holding `model.toml` (architecture, pooling,
//! step) and, per table, `<name>.lut` plus `<name>.adam`. Both are float
//! containers in the LUT format. `.lut` holds the raw parameters (table
//! values divided by the table's scale). `.adam` holds the Adam moments as
//! a table with `2m` outputs per point (first moments then second moments)
//! and its orientation field set to the step count.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{ParamBuffer, TrainableLut, TrainableModel, TrainablePooling};
use super::TrainError;
use crate::lut::{Lut, RealLut};
use crate::orientation::{KernelPattern, OrientationSet, Rotation};
use crate::pipeline::Task;
use crate::pooling::Norm;

#[derive(Debug, Serialize, Deserialize)]
struct PatternSpec {
    name: String,
    offsets: Vec<(isize, isize)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    scale: usize,
    residual: bool,
    rotations: Vec<u8>,
    step: u64,
    pooling: String,
    #[serde(default)]
    norm: Option<String>,
    #[serde(default)]
    tau_trainable: bool,
    /// `[ln tau, first moment, second moment]`.
    #[serde(default)]
    log_tau: Option<[f64; 3]>,
    table_scale: f64,
    patterns: Vec<PatternSpec>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: TrainableModel,
    pub step: u64,
}

fn err(e: impl std::fmt::Display) -> TrainError {
    TrainError::Checkpoint(e.to_string())
}

fn write_table(dir: &Path, name: &str, t: &TrainableLut, step: u64) -> Result<(), TrainError> {
    let l = t.lattice();
    let params = RealLut::from_values(l.q(), l.n(), t.m(), t.params.values.clone())?;
    Lut::Real(params).write(dir.join(format!("{name}.lut")))?;
    let m = t.m();
    let mut moments = Vec::with_capacity(2 * t.params.len());
    for (a, b) in t.params.moment1.chunks_exact(m).zip(t.params.moment2.chunks_exact(m)) {
        moments.extend_from_slice(a);
        moments.extend_from_slice(b);
    }
    let k = u32::try_from(step).map_err(err)?;
    let adam = RealLut::from_values(l.q(), l.n(), 2 * m, moments)?.with_orientations(k);
    Lut::Real(adam).write(dir.join(format!("{name}.adam")))?;
    Ok(())
}

fn read_table(dir: &Path, name: &str, scale: f64) -> Result<TrainableLut, TrainError> {
    let params = Lut::read(dir.join(format!("{name}.lut")))?.to_real();
    let adam = Lut::read(dir.join(format!("{name}.adam")))?.to_real();
    let m = params.m();
    if adam.m() != 2 * m || adam.lattice() != params.lattice() {
        return Err(err(format!("{name}.adam does not match {name}.lut")));
    }
    let (mut m1, mut m2) = (Vec::new(), Vec::new());
    for point in adam.values().chunks_exact(2 * m) {
        m1.extend_from_slice(&point[..m]);
        m2.extend_from_slice(&point[m..]);
    }
    let buf = ParamBuffer {
        values: params.values().to_vec(),
        moment1: m1,
        moment2: m2,
    };
    let l = params.lattice();
    TrainableLut::from_params(l.q(), l.n(), m, scale, buf)
}

pub fn save_checkpoint(dir: impl AsRef<Path>, model: &TrainableModel, step: u64) -> Result<(), TrainError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(err)?;
    for (p, t) in model.tables.iter().enumerate() {
        write_table(dir, &format!("table{p}"), t, step)?;
    }
    let (norm, tau_trainable, log_tau) = match &model.pooling {
        TrainablePooling::Gmp { log_tau, norm, trainable } => (
            Some(format!("{norm:?}").to_lowercase()),
            *trainable,
            Some([log_tau.values[0], log_tau.moment1[0], log_tau.moment2[0]]),
        ),
        TrainablePooling::Oap(c) => {
            write_table(dir, "coeff", c, step)?;
            (None, false, None)
        }
        TrainablePooling::Average => (None, false, None),
    };
    let manifest = Manifest {
        scale: model.task.scale(),
        residual: model.residual,
        rotations: model.orientations.rotations().iter().map(|r| r.quarter_turns()).collect(),
        step,
        pooling: model.pooling.name().to_string(),
        norm,
        tau_trainable,
        log_tau,
        table_scale: model.tables.first().map_or(1.0, |t| t.scale()),
        patterns: model
            .patterns
            .iter()
            .map(|p| PatternSpec {
                name: p.name().to_string(),
                offsets: p.offsets().to_vec(),
            })
            .collect(),
    };
    fs::write(dir.join("model.toml"), toml::to_string(&manifest).map_err(err)?).map_err(err)?;
    Ok(())
}

pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<Checkpoint, TrainError> {
    let dir = dir.as_ref();
    let text = fs::read_to_string(dir.join("model.toml")).map_err(err)?;
    let mf: Manifest = toml::from_str(&text).map_err(err)?;
    let task = if mf.scale > 1 {
        Task::SuperResolution { scale: mf.scale }
    } else {
        Task::Restore
    };
    let patterns = mf
        .patterns
        .into_iter()
        .map(|p| KernelPattern::new(p.name, p.offsets))
        .collect::<Result<Vec<_>, _>>()?;
    let orientations = OrientationSet::new(mf.rotations.into_iter().map(Rotation::new).collect())?;
    let tables = (0..patterns.len())
        .map(|p| read_table(dir, &format!("table{p}"), mf.table_scale))
        .collect::<Result<Vec<_>, _>>()?;
    let pooling = match mf.pooling.as_str() {
        "avg" => TrainablePooling::Average,
        "gmp" => {
            let [v, a, b] = mf.log_tau.ok_or_else(|| err("gmp checkpoint without log_tau"))?;
            let norm = match mf.norm.as_deref() {
                Some("l1") => Norm::L1,
                _ => Norm::L2,
            };
            TrainablePooling::Gmp {
                log_tau: ParamBuffer {
                    values: vec![v],
                    moment1: vec![a],
                    moment2: vec![b],
                },
                norm,
                trainable: mf.tau_trainable,
            }
        }
        "oap" => TrainablePooling::Oap(read_table(dir, "coeff", 1.0)?),
        other => return Err(err(format!("unknown pooling {other}"))),
    };
    let model = TrainableModel {
        task,
        patterns,
        orientations,
        tables,
        pooling,
        residual: mf.residual,
    };
    model.validate()?;
    Ok(Checkpoint { model, step: mf.step })
}
