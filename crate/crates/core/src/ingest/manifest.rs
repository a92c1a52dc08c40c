//! Run manifest: the single TOML file that describes a study.
//!
//! ```toml
//! [params]
//! delta = 80                 # window height in rows
//! gamma = 20                 # minimum run length of the duration rule
//! shifts = { min = -9, max = 10 }
//! intensity_variants = 4     # intensity variants per translated point
//! r_max = 0.1                # upper bound of the intensity boost r
//! sigma_fraction = 0.25      # Gaussian width as a fraction of endRT - startRT
//! negative_ratio = 1.0       # negatives per augmented positive
//! targets = 30               # number of target compounds K
//! seed = 42
//!
//! [[voc]]
//! label = 1
//! name = "Acetone"
//!
//! [[sample]]
//! sample_id = "Train-01"
//! matrix = "Train-01.csv"           # relative to the manifest's directory
//! annotations = "Train-01.ann.csv"  # optional
//! participant = "P01"
//! column_epoch = 1                  # optional, defaults to 1
//! split = "train"                   # or "test"
//! ```
//!
//! Every key under `[params]` is optional and falls back to the values shown.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::ShiftRange;
use crate::error::{Error, Result};
use crate::matrix::{DEFAULT_DELTA, DEFAULT_TARGETS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub delta: usize,
    pub gamma: usize,
    pub shifts: ShiftRange,
    pub intensity_variants: usize,
    pub r_max: f64,
    pub sigma_fraction: f64,
    pub negative_ratio: f64,
    pub targets: u16,
    pub seed: u64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            delta: DEFAULT_DELTA,
            gamma: 20,
            shifts: ShiftRange::default(),
            intensity_variants: 4,
            r_max: 0.1,
            sigma_fraction: 0.25,
            negative_ratio: 1.0,
            targets: DEFAULT_TARGETS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VocEntry {
    pub label: u16,
    pub name: String,
}

fn default_epoch() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleEntry {
    pub sample_id: String,
    pub matrix: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations: Option<PathBuf>,
    pub participant: String,
    #[serde(default = "default_epoch")]
    pub column_epoch: u32,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub params: Params,
    #[serde(default, rename = "voc")]
    pub voc_table: Vec<VocEntry>,
    #[serde(default, rename = "sample")]
    pub samples: Vec<SampleEntry>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn from_toml(text: &str) -> Result<Self> {
        let m: Manifest = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut m = Self::from_toml(&text)?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for s in &self.samples {
            if !ids.insert(s.sample_id.as_str()) {
                return Err(Error::validation(
                    "manifest",
                    format!("duplicate sample id `{}`", s.sample_id),
                ));
            }
        }

        let mut labels: Vec<u16> = self.voc_table.iter().map(|v| v.label).collect();
        labels.sort_unstable();
        if labels.iter().enumerate().any(|(i, &l)| l as usize != i + 1) {
            return Err(Error::validation(
                "manifest",
                format!("voc labels must be unique and contiguous from 1, got {labels:?}"),
            ));
        }
        if labels.len() > self.params.targets as usize {
            return Err(Error::validation(
                "manifest",
                format!(
                    "{} vocs listed but targets = {}",
                    labels.len(),
                    self.params.targets
                ),
            ));
        }

        let mut participant_split: BTreeMap<&str, Split> = BTreeMap::new();
        for s in &self.samples {
            if let Some(prev) = participant_split.insert(&s.participant, s.split) {
                if prev != s.split {
                    return Err(Error::validation(
                        "manifest",
                        format!(
                            "participant `{}` has samples in both train and test",
                            s.participant
                        ),
                    ));
                }
            }
        }

        let p = &self.params;
        if p.delta < 2 || p.gamma == 0 {
            return Err(Error::validation("manifest", "delta must be >= 2 and gamma >= 1"));
        }
        if p.shifts.min > p.shifts.max {
            return Err(Error::validation("manifest", "shifts.min exceeds shifts.max"));
        }
        if !(p.r_max > 0.0 && p.sigma_fraction > 0.0 && p.negative_ratio >= 0.0) {
            return Err(Error::validation(
                "manifest",
                "r_max and sigma_fraction must be positive, negative_ratio non-negative",
            ));
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn samples_in(&self, split: Split) -> impl Iterator<Item = &SampleEntry> {
        self.samples.iter().filter(move |s| s.split == split)
    }

    pub fn sample(&self, id: &str) -> Option<&SampleEntry> {
        self.samples.iter().find(|s| s.sample_id == id)
    }
}
