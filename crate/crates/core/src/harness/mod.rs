//! Files, datasets, degradations, configuration and reports around the core.

pub mod bench;
pub mod config;
pub mod degrade;
pub mod eval;
pub mod manifest;
pub mod pnm;
pub mod synthetic;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::image::ImageError;
use crate::lut::LutError;
use crate::metrics::MetricError;
use crate::pipeline::PipelineError;
use crate::pooling::PoolingError;
use crate::training::TrainError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed input: {0}")]
    Format(String),
    #[error("invalid: {0}")]
    Invalid(String),
    #[error(transparent)]
    Lut(#[from] LutError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Pooling(#[from] PoolingError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Image(#[from] ImageError),
}

impl HarnessError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    /// 2 for I/O failures, 3 for everything else (validation, shape, format).
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Io { .. } | HarnessError::Lut(LutError::Io(_)) => 2,
            HarnessError::Pipeline(PipelineError::Lut(LutError::Io(_))) => 2,
            HarnessError::Train(TrainError::Lut(LutError::Io(_))) => 2,
            _ => 3,
        }
    }
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> HarnessError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => HarnessError::io(path, io),
        k => HarnessError::Format(format!("{}: {k:?}", path.display())),
    }
}
