//! Readers and writers for every on-disk format the pipeline uses.
//!
//! | file | layout |
//! |------|--------|
//! | sample matrix | CSV, header `rt,mz_40,...,mz_450`, one row per retention-time point |
//! | annotations | CSV, header `sample_id,label,start_rt,peak_rt,end_rt` |
//! | detections | CSV `label,start_rt,end_rt,confidence,sample_id` or a JSON array |
//! | manifest | TOML, see [`manifest`] |
//! | dataset cache | little-endian binary, see [`cache`] |
//!
//! Reals are written with Rust's shortest round-trip representation, padded
//! with zeros to a minimum number of decimals where a column asks for it.

mod annotations;
pub mod cache;
mod detections;
pub mod manifest;
mod matrix_csv;

pub use annotations::{emit_annotations, parse_annotations};
pub use detections::{emit_detections, parse_detections, DetectionFormat};
pub use manifest::{Manifest, Params, SampleEntry, Split, VocEntry};
pub use matrix_csv::{emit_sample, parse_sample};

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::Result;
use crate::matrix::{AbundanceMatrix, GroundTruthAnnotation};

/// Shortest round-trip decimal for `x`, padded to at least `min_decimals`.
pub fn format_real(x: f64, min_decimals: usize) -> String {
    let mut s = format!("{x}");
    if !x.is_finite() {
        return s;
    }
    let decimals = s.find('.').map(|p| s.len() - p - 1);
    match decimals {
        None if min_decimals > 0 => {
            s.push('.');
            s.extend(std::iter::repeat_n('0', min_decimals));
        }
        Some(d) if d < min_decimals => s.extend(std::iter::repeat_n('0', min_decimals - d)),
        _ => {}
    }
    s
}

pub fn read_sample_file(path: &Path) -> Result<AbundanceMatrix> {
    parse_sample(BufReader::new(File::open(path)?))
}

pub fn write_sample_file(path: &Path, m: &AbundanceMatrix) -> Result<()> {
    emit_sample(m, BufWriter::new(File::create(path)?))
}

pub fn read_annotation_file(path: &Path) -> Result<Vec<GroundTruthAnnotation>> {
    parse_annotations(BufReader::new(File::open(path)?))
}

pub fn write_annotation_file(path: &Path, anns: &[GroundTruthAnnotation]) -> Result<()> {
    emit_annotations(anns, BufWriter::new(File::create(path)?))
}
