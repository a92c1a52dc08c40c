//! Detection of target volatile organic compounds in untargeted GC-MS runs.
//!
//! A classifier labels every `delta`-row window of a sample's abundance
//! matrix (phase A); runs of equal labels are then filtered into at most one
//! detection per compound (phase B). The crate also contains the data
//! preparation, a synthetic sample generator and the evaluation protocols.

pub mod classifier;
pub mod dataset;
pub mod detector;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod matrix;
pub mod scanner;
pub mod seed;
pub mod synth;

pub use classifier::{
    classify, softmax, ClassifierModel, ConvNet, ConvNetConfig, ModelMeta, ProbVector, TrainedModel,
};
pub use dataset::{DataPoint, LabeledDataset};
pub use detector::{detect, detect_stages, Detection, DetectionRecord, DetectionStages};
pub use error::{Error, Result};
pub use matrix::{AbundanceMatrix, GroundTruthAnnotation, RtAxis, RtInterval, VocLabel};
pub use scanner::{scan, scan_with, ScanOptions, ScanResult};
