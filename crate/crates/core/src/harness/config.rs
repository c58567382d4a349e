//! TOML run configuration.
//!
//! ```toml
//! [pipeline]
//! task = "sr"            # or "restore"
//! scale = 2
//! patterns = ["S"]       # builtins S, D, Y, or { name = "h2", offsets = [[0, 0], [0, 1]] }
//! orientations = 4
//! residual = true
//! share_oap = true
//! stages = ["stage1.lut"]   # one entry per stage; a list per stage for several patterns
//!
//! [pipeline.pooling]
//! kind = "oap"           # avg | gmp | oap
//! tau = 1.0
//! norm = "l2"
//! coeff_lut = "coeff.lut"
//!
//! [train]
//! q = 4
//! lr = 1e-4
//! iterations = 1000
//! ```
//!
//! Relative paths resolve against the configuration file's directory.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::lut::{Lut, PatchTable};
use crate::orientation::{KernelPattern, OrientationSet};
use crate::par::Execution;
use crate::pipeline::{PipelineConfig, Stage, Task};
use crate::pooling::{CoeffLut, Norm, PoolingSpec};
use crate::training::{Loss, Regularizer, TrainConfig};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub pipeline: PipelineSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PatternSpec {
    Builtin(String),
    Custom { name: String, offsets: Vec<(isize, isize)> },
}

impl PatternSpec {
    pub fn build(&self) -> Result<KernelPattern, HarnessError> {
        match self {
            PatternSpec::Builtin(n) => {
                KernelPattern::builtin(n).ok_or_else(|| HarnessError::Invalid(format!("unknown kernel pattern {n:?}")))
            }
            PatternSpec::Custom { name, offsets } => {
                KernelPattern::new(name.clone(), offsets.clone()).map_err(|e| HarnessError::Invalid(e.to_string()))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StageSpec {
    One(String),
    PerPattern(Vec<String>),
}

impl StageSpec {
    pub fn paths(&self) -> Vec<&str> {
        match self {
            StageSpec::One(p) => vec![p.as_str()],
            StageSpec::PerPattern(ps) => ps.iter().map(String::as_str).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoolingSection {
    pub kind: String,
    pub tau: f64,
    pub norm: String,
    pub coeff_lut: Option<String>,
}

impl Default for PoolingSection {
    fn default() -> Self {
        Self {
            kind: "avg".into(),
            tau: 1.0,
            norm: "l2".into(),
            coeff_lut: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSection {
    pub task: String,
    pub scale: usize,
    pub patterns: Vec<PatternSpec>,
    pub orientations: usize,
    pub residual: bool,
    pub share_oap: bool,
    pub padding: Option<usize>,
    pub stages: Vec<StageSpec>,
    pub pooling: PoolingSection,
    pub execution: String,
}

impl Default for PipelineSection {
    fn default() -> Self {
        Self {
            task: "sr".into(),
            scale: 2,
            patterns: vec![PatternSpec::Builtin("S".into())],
            orientations: 4,
            residual: true,
            share_oap: true,
            padding: None,
            stages: Vec::new(),
            pooling: PoolingSection::default(),
            execution: "parallel".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub q: u8,
    pub loss: String,
    pub epsilon: f64,
    pub lambda: f64,
    pub regularizer: String,
    pub lr: f64,
    pub iterations: usize,
    pub batch: usize,
    pub patch: usize,
    pub seed: u64,
    pub rotate: bool,
    pub flip: bool,
    pub eval_every: usize,
    /// Fine-tune length; defaults to a tenth of `iterations`.
    pub finetune_iterations: Option<usize>,
    pub finetune_restoration_lr_factor: f64,
    pub pooling_lr_factor: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            q: 4,
            loss: "charbonnier".into(),
            epsilon: 1e-3,
            lambda: 1e-3,
            regularizer: "entropy".into(),
            lr: 1e-4,
            iterations: 1000,
            batch: 32,
            patch: 48,
            seed: 0,
            rotate: true,
            flip: true,
            eval_every: 0,
            finetune_iterations: None,
            finetune_restoration_lr_factor: 0.1,
            pooling_lr_factor: 1.0,
        }
    }
}

pub fn parse_norm(s: &str) -> Result<Norm, HarnessError> {
    match s.to_ascii_lowercase().as_str() {
        "l1" => Ok(Norm::L1),
        "l2" => Ok(Norm::L2),
        _ => Err(HarnessError::Invalid(format!("unknown norm {s:?}"))),
    }
}

pub fn parse_execution(s: &str) -> Result<Execution, HarnessError> {
    match s {
        "parallel" => Ok(Execution::Parallel),
        "sequential" => Ok(Execution::Sequential),
        _ => Err(HarnessError::Invalid(format!("unknown execution mode {s:?}"))),
    }
}

impl ConfigFile {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, HarnessError> {
        let mut c: ConfigFile = toml::from_str(text).map_err(|e| HarnessError::Format(e.to_string()))?;
        c.base_dir = base_dir.to_path_buf();
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or_else(|| Path::new(".")))
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        self.base_dir.join(p)
    }
}

impl PipelineSection {
    pub fn task(&self) -> Result<Task, HarnessError> {
        match self.task.as_str() {
            "sr" => Ok(Task::SuperResolution { scale: self.scale }),
            "restore" => Ok(Task::Restore),
            t => Err(HarnessError::Invalid(format!("unknown task {t:?}"))),
        }
    }

    pub fn kernel_patterns(&self) -> Result<Vec<KernelPattern>, HarnessError> {
        self.patterns.iter().map(PatternSpec::build).collect()
    }

    pub fn orientation_set(&self) -> Result<OrientationSet, HarnessError> {
        OrientationSet::first(self.orientations).map_err(|e| HarnessError::Invalid(e.to_string()))
    }

    pub fn pooling_spec(&self, base: &Path) -> Result<PoolingSpec, HarnessError> {
        let p = &self.pooling;
        match p.kind.as_str() {
            "avg" | "average" => Ok(PoolingSpec::Average),
            "gmp" => Ok(PoolingSpec::gmp(p.tau, parse_norm(&p.norm)?)?),
            "oap" => {
                let path = p
                    .coeff_lut
                    .as_ref()
                    .ok_or_else(|| HarnessError::Invalid("oap pooling needs coeff_lut".into()))?;
                let lut = Lut::read(base.join(path))?;
                Ok(PoolingSpec::Oap(CoeffLut::new(lut, self.orientations)?))
            }
            k => Err(HarnessError::Invalid(format!("unknown pooling {k:?}"))),
        }
    }

    /// Loads every table and assembles a validated pipeline.
    pub fn build(&self, base: &Path) -> Result<PipelineConfig, HarnessError> {
        if self.stages.is_empty() {
            return Err(HarnessError::Invalid("pipeline has no stages".into()));
        }
        let stages = self
            .stages
            .iter()
            .map(|s| {
                let tables = s
                    .paths()
                    .into_iter()
                    .map(|p| Ok(Arc::new(Lut::read(base.join(p))?) as Arc<dyn PatchTable>))
                    .collect::<Result<Vec<_>, HarnessError>>()?;
                Ok(Stage { tables })
            })
            .collect::<Result<Vec<_>, HarnessError>>()?;
        let config = PipelineConfig {
            task: self.task()?,
            patterns: self.kernel_patterns()?,
            orientations: self.orientation_set()?,
            pooling: self.pooling_spec(base)?,
            residual: self.residual,
            stages,
            share_oap_across_stages: self.share_oap,
            padding: self.padding,
            execution: parse_execution(&self.execution)?,
        };
        config.validate()?;
        Ok(config)
    }
}

impl TrainSection {
    pub fn loss(&self) -> Result<Loss, HarnessError> {
        match self.loss.as_str() {
            "charbonnier" => Ok(Loss::Charbonnier { epsilon: self.epsilon }),
            "l1" => Ok(Loss::L1),
            "l2" => Ok(Loss::L2),
            l => Err(HarnessError::Invalid(format!("unknown loss {l:?}"))),
        }
    }

    pub fn train_config(&self, execution: Execution) -> Result<TrainConfig, HarnessError> {
        let regularizer = match self.regularizer.as_str() {
            "entropy" => Regularizer::Entropy,
            "none" => Regularizer::None,
            r => return Err(HarnessError::Invalid(format!("unknown regularizer {r:?}"))),
        };
        let c = TrainConfig {
            loss: self.loss()?,
            lambda: self.lambda,
            regularizer,
            lr: self.lr,
            restoration_lr_factor: 1.0,
            pooling_lr_factor: self.pooling_lr_factor,
            batch: self.batch,
            patch: self.patch,
            iterations: self.iterations,
            seed: self.seed,
            rotate: self.rotate,
            flip: self.flip,
            eval_every: self.eval_every,
            execution,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn finetune_config(&self, execution: Execution) -> Result<crate::training::FinetuneConfig, HarnessError> {
        let main = self.train_config(execution)?;
        let mut ft = crate::training::FinetuneConfig::after(&main);
        if let Some(n) = self.finetune_iterations {
            ft.train.iterations = n;
        }
        ft.train.restoration_lr_factor = self.finetune_restoration_lr_factor;
        ft.train.validate()?;
        Ok(ft)
    }
}

/// Writes an exported model's tables next to a `pipeline.toml` that
/// references them; returns the config path.
pub fn write_exported(
    dir: impl AsRef<Path>,
    model: &crate::training::TrainableModel,
    exported: &crate::training::ExportedModel,
) -> Result<PathBuf, HarnessError> {
    use crate::training::TrainablePooling;
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut stage = Vec::new();
    for (i, t) in exported.tables.iter().enumerate() {
        let name = format!("table{i}.lut");
        Lut::Quantized(t.clone()).write(dir.join(&name))?;
        stage.push(name);
    }
    let mut pooling = PoolingSection::default();
    match &model.pooling {
        TrainablePooling::Average => {}
        TrainablePooling::Gmp { norm, .. } => {
            pooling.kind = "gmp".into();
            pooling.tau = model.pooling.tau().unwrap_or(1.0);
            pooling.norm = match norm {
                Norm::L1 => "l1".into(),
                Norm::L2 => "l2".into(),
            };
        }
        TrainablePooling::Oap(_) => {
            let c = exported
                .coefficients
                .as_ref()
                .ok_or_else(|| HarnessError::Invalid("exported model has no coefficient table".into()))?;
            Lut::Quantized(c.clone()).write(dir.join("coeff.lut"))?;
            pooling.kind = "oap".into();
            pooling.coeff_lut = Some("coeff.lut".into());
        }
    }
    let section = PipelineSection {
        task: match model.task {
            Task::SuperResolution { .. } => "sr".into(),
            Task::Restore => "restore".into(),
        },
        scale: model.task.scale(),
        patterns: model
            .patterns
            .iter()
            .map(|p| PatternSpec::Custom {
                name: p.name().to_string(),
                offsets: p.offsets().to_vec(),
            })
            .collect(),
        orientations: model.orientations.k(),
        residual: model.residual,
        stages: vec![StageSpec::PerPattern(stage)],
        pooling,
        ..PipelineSection::default()
    };
    let file = ConfigFile {
        pipeline: section,
        ..ConfigFile::default()
    };
    let text = toml::to_string(&file).map_err(|e| HarnessError::Format(e.to_string()))?;
    let path = dir.join("pipeline.toml");
    std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
    Ok(path)
}
