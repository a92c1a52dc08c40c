//! Window classifiers: a probability distribution over the negative class and
//! `K` target compounds for one normalized `delta x channels` window.

mod centroid;
mod convnet;

pub use centroid::{train_centroid, CentroidModel};
pub use convnet::{train_convnet, ConvBlock, ConvNet, ConvNetConfig, EpochStats, TrainingReport};

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{normalize_values, DataPoint};
use crate::error::{Error, Result};
use crate::matrix::{AbundanceMatrix, VocLabel};

/// Probabilities of classes `0..=K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn p(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Most probable class; exact ties go to the smaller label.
    pub fn argmax(&self) -> (VocLabel, f64) {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate().skip(1) {
            if p > self.0[best] {
                best = i;
            }
        }
        (VocLabel(best as u16), self.0[best])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Numerically stable softmax.
pub fn softmax(x: &[f64]) -> ProbVector {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut e: Vec<f64> = x.iter().map(|&v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter_mut().for_each(|v| *v /= s);
    ProbVector(e)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    ConvNet,
    Centroid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelMeta {
    /// Number of target compounds `K`; the model has `K + 1` outputs.
    pub targets: u16,
    pub delta: usize,
    pub channels: usize,
    pub kind: ModelKind,
}

impl ModelMeta {
    pub fn classes(&self) -> usize {
        self.targets as usize + 1
    }

    pub fn input_len(&self) -> usize {
        self.delta * self.channels
    }

    pub(crate) fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input_len() {
            return Err(Error::Contract(format!(
                "input has {len} values, model expects {} x {}",
                self.delta, self.channels
            )));
        }
        Ok(())
    }

    pub(crate) fn check_matrix(&self, a: &AbundanceMatrix, windows: &Range<usize>) -> Result<()> {
        if a.channels() != self.channels {
            return Err(Error::Contract(format!(
                "sample {} has {} channels, model expects {}",
                a.sample_id(),
                a.channels(),
                self.channels
            )));
        }
        if windows.end > a.window_count(self.delta) {
            return Err(Error::Bounds {
                start: windows.end.saturating_sub(1),
                delta: self.delta,
                rows: a.rows(),
            });
        }
        Ok(())
    }
}

pub trait ClassifierModel: Send + Sync {
    fn meta(&self) -> &ModelMeta;

    /// Class probabilities for a normalized row-major `delta x channels` block.
    fn predict(&self, values: &[f64]) -> Result<ProbVector>;

    /// Probabilities for the windows starting at each row in `starts`, each
    /// normalized on its own. Implementations may share work between
    /// overlapping windows but must agree with [`predict`] within 1e-9.
    ///
    /// [`predict`]: ClassifierModel::predict
    fn predict_windows(&self, a: &AbundanceMatrix, starts: Range<usize>) -> Result<Vec<ProbVector>> {
        predict_windows_naive(self, a, starts)
    }
}

/// Normalizes every window and calls `predict` on it.
pub fn predict_windows_naive<M: ClassifierModel + ?Sized>(
    model: &M,
    a: &AbundanceMatrix,
    starts: Range<usize>,
) -> Result<Vec<ProbVector>> {
    let meta = model.meta();
    meta.check_matrix(a, &starts)?;
    let mut buf = vec![0.0; meta.input_len()];
    starts
        .map(|s| {
            buf.copy_from_slice(a.window(s, meta.delta)?.values);
            normalize_values(&mut buf);
            model.predict(&buf)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub label: VocLabel,
    pub confidence: f64,
    pub probs: ProbVector,
}

impl From<ProbVector> for Classification {
    fn from(probs: ProbVector) -> Self {
        let (label, confidence) = probs.argmax();
        Self {
            label,
            confidence,
            probs,
        }
    }
}

/// Label `argmax P`, confidence `max P`.
pub fn classify<M: ClassifierModel + ?Sized>(model: &M, dp: &DataPoint) -> Result<Classification> {
    let meta = model.meta();
    if !dp.normalized {
        return Err(Error::Contract("classify needs a normalized data point".into()));
    }
    if dp.delta() != meta.delta || dp.channels != meta.channels {
        return Err(Error::Contract(format!(
            "point is {} x {}, model expects {} x {}",
            dp.delta(),
            dp.channels,
            meta.delta,
            meta.channels
        )));
    }
    Ok(model.predict(&dp.values)?.into())
}

/// Any model the pipeline knows how to store.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainedModel {
    ConvNet(ConvNet),
    Centroid(CentroidModel),
}

pub const MODEL_FORMAT: &str = "vocscan-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: TrainedModel,
}

impl TrainedModel {
    pub fn as_model(&self) -> &dyn ClassifierModel {
        match self {
            TrainedModel::ConvNet(m) => m,
            TrainedModel::Centroid(m) => m,
        }
    }

    /// Versioned JSON container: `{"format", "version", "model": {"kind", ...}}`.
    pub fn save<W: Write>(&self, w: W) -> Result<()> {
        #[derive(Serialize)]
        struct Out<'a> {
            format: &'a str,
            version: u32,
            model: &'a TrainedModel,
        }
        serde_json::to_writer(
            w,
            &Out {
                format: MODEL_FORMAT,
                version: MODEL_VERSION,
                model: self,
            },
        )
        .map_err(|e| Error::Format(e.to_string()))
    }

    pub fn load<R: Read>(r: R) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_reader(r).map_err(|e| Error::Format(format!("model file: {e}")))?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Format(format!("unknown model format `{}`", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::Format(format!(
                "model version {} is not supported (expected {MODEL_VERSION})",
                file.version
            )));
        }
        file.model.validate()?;
        Ok(file.model)
    }

    fn validate(&self) -> Result<()> {
        match self {
            TrainedModel::ConvNet(m) => m.validate(),
            TrainedModel::Centroid(m) => m.validate(),
        }
    }

    pub fn save_file(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.save(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load_file(path: &Path) -> Result<Self> {
        Self::load(BufReader::new(File::open(path)?))
    }
}

impl ClassifierModel for TrainedModel {
    fn meta(&self) -> &ModelMeta {
        self.as_model().meta()
    }

    fn predict(&self, values: &[f64]) -> Result<ProbVector> {
        self.as_model().predict(values)
    }

    fn predict_windows(&self, a: &AbundanceMatrix, starts: Range<usize>) -> Result<Vec<ProbVector>> {
        self.as_model().predict_windows(a, starts)
    }
}
