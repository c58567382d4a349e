//! Dataset manifests.
//!
//! One item per line, tab separated: `split <TAB> clean <TAB> degraded`,
//! where `degraded` is a path or a recipe such as `@bicubic_down:2`.
//! Relative paths resolve against the manifest's directory. Blank lines and
//! lines starting with `#` are skipped, except `# name: <name>`, which names
//! the dataset (default: the file stem).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::degrade::{degrade, DegradationRecipe};
use super::pnm::read_gray;
use super::HarnessError;
use crate::image::ImageBuffer;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl FromStr for Split {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(HarnessError::Format(format!("unknown split {s:?}"))),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Degraded {
    Path(PathBuf),
    Recipe(DegradationRecipe),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestItem {
    pub split: Split,
    pub clean: PathBuf,
    pub degraded: Degraded,
}

impl ManifestItem {
    /// File stem of the clean image.
    pub fn name(&self) -> String {
        self.clean
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub items: Vec<ManifestItem>,
}

/// A loaded (clean, degraded) pair.
#[derive(Clone, Debug)]
pub struct LoadedPair {
    pub name: String,
    pub clean: ImageBuffer,
    pub degraded: ImageBuffer,
}

impl DatasetManifest {
    /// Parses manifest text; `base` resolves relative paths. Paths are not checked.
    pub fn parse(text: &str, base: &Path, default_name: &str) -> Result<Self, HarnessError> {
        let mut name = default_name.to_string();
        let mut items = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(n) = comment.trim().strip_prefix("name:") {
                    name = n.trim().to_string();
                }
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [split, clean, degraded] = fields.as_slice() else {
                return Err(HarnessError::Format(format!(
                    "manifest line {}: expected 3 tab-separated fields, got {}",
                    i + 1,
                    fields.len()
                )));
            };
            let degraded = if degraded.starts_with('@') {
                Degraded::Recipe(degraded.parse()?)
            } else {
                Degraded::Path(base.join(degraded))
            };
            items.push(ManifestItem {
                split: split.trim().parse()?,
                clean: base.join(clean),
                degraded,
            });
        }
        Ok(Self { name, items })
    }

    /// Reads a manifest and checks that every referenced file exists.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let m = Self::parse(&text, base, &stem)?;
        for item in &m.items {
            let mut paths = vec![&item.clean];
            if let Degraded::Path(p) = &item.degraded {
                paths.push(p);
            }
            for p in paths {
                if !p.is_file() {
                    return Err(HarnessError::io(
                        p,
                        std::io::Error::new(std::io::ErrorKind::NotFound, "listed in manifest but missing"),
                    ));
                }
            }
        }
        Ok(m)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestItem> {
        self.items.iter().filter(move |i| i.split == split)
    }

    /// Loads the pairs of one split. Recipe noise streams are indexed by
    /// the item's position in the whole manifest.
    pub fn load_pairs(&self, split: Split) -> Result<Vec<LoadedPair>, HarnessError> {
        self.items
            .iter()
            .enumerate()
            .filter(|(_, it)| it.split == split)
            .map(|(i, it)| {
                let clean = read_gray(&it.clean)?;
                let degraded = match &it.degraded {
                    Degraded::Path(p) => read_gray(p)?,
                    Degraded::Recipe(r) => degrade(&clean, *r, i as u64)?,
                };
                Ok(LoadedPair {
                    name: it.name(),
                    clean,
                    degraded,
                })
            })
            .collect()
    }
}
