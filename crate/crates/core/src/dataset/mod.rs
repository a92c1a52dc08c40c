//! Training data preparation.
//!
//! A data point is a `delta x channels` block of an abundance matrix. Points
//! of a target compound are centred on the elution mid-point
//! `(startRT + endRT) / 2`; negative points are random windows that touch no
//! annotated elution interval.

mod augment;
mod builder;
mod split;

pub use augment::{
    augment_full, augment_intensity, augment_translation, augmented_count, for_each_augmented,
    AugmentConfig, IntensityVariation, ShiftRange,
};
pub use builder::{AugmentedSet, SampleData, TrainingSet};
pub use split::{split_by_participant, Fold};

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{AbundanceMatrix, GroundTruthAnnotation, RtInterval, VocLabel};

/// Rows of slack a window needs around an elution to host every translation.
pub const TRANSLATION_SLACK: usize = 19;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub sample_id: String,
    /// First matrix row of the point after any shift.
    pub anchor: usize,
    pub shift: i32,
    /// 0 for the translated point itself, `1..` for intensity variants.
    pub variant: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    /// Row-major `delta x channels` intensities.
    pub values: Vec<f64>,
    /// Retention time of each row.
    pub rts: Vec<f64>,
    pub channels: usize,
    pub label: VocLabel,
    pub provenance: Provenance,
    pub normalized: bool,
}

impl DataPoint {
    /// Copies rows `start..start + delta` of `a`.
    pub fn from_window(
        a: &AbundanceMatrix,
        start: usize,
        delta: usize,
        label: VocLabel,
        shift: i32,
    ) -> Result<Self> {
        let w = a.window(start, delta)?;
        Ok(Self {
            values: w.values.to_vec(),
            rts: w.rts.to_vec(),
            channels: a.channels(),
            label,
            provenance: Provenance {
                sample_id: a.sample_id().to_string(),
                anchor: start,
                shift,
                variant: 0,
            },
            normalized: false,
        })
    }

    #[inline]
    pub fn delta(&self) -> usize {
        self.rts.len()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.channels..(r + 1) * self.channels]
    }
}

/// Row nearest to the elution mid-point.
pub fn centre_row(a: &AbundanceMatrix, ann: &GroundTruthAnnotation) -> usize {
    a.axis().nearest_row(ann.mu())
}

/// Inclusive row count between the rows nearest to start and end.
pub fn elution_rows(a: &AbundanceMatrix, ann: &GroundTruthAnnotation) -> usize {
    let axis = a.axis();
    axis.nearest_row(ann.end_rt) - axis.nearest_row(ann.start_rt) + 1
}

/// Rows left over in a window of height `delta` after the elution.
pub fn translation_slack(a: &AbundanceMatrix, ann: &GroundTruthAnnotation, delta: usize) -> isize {
    delta as isize - elution_rows(a, ann) as isize
}

/// First row of the window centred on the annotation.
pub(crate) fn centred_start(
    a: &AbundanceMatrix,
    ann: &GroundTruthAnnotation,
    delta: usize,
) -> Result<usize> {
    let m = centre_row(a, ann);
    let half = delta / 2;
    if m < half || m + (delta - half) > a.rows() {
        return Err(Error::Extraction(format!(
            "label {} centred at row {m} does not fit a window of {delta} rows in {} rows",
            ann.label,
            a.rows()
        )));
    }
    Ok(m - half)
}

/// The point centred on `ann`, with the mid-point row at offset `delta / 2`.
pub fn extract_datapoint(
    a: &AbundanceMatrix,
    ann: &GroundTruthAnnotation,
    delta: usize,
) -> Result<DataPoint> {
    let start = centred_start(a, ann, delta)?;
    let slack = translation_slack(a, ann, delta);
    if slack < TRANSLATION_SLACK as isize {
        log::warn!(
            "sample {} label {}: elution spans {} rows, leaving {slack} < {TRANSLATION_SLACK} rows for translation",
            a.sample_id(),
            ann.label,
            elution_rows(a, ann)
        );
    }
    DataPoint::from_window(a, start, delta, ann.label, 0)
}

fn window_interval(a: &AbundanceMatrix, start: usize, delta: usize) -> RtInterval {
    let rts = a.axis().values();
    RtInterval::new(rts[start], rts[start + delta - 1])
}

/// Window starts whose retention-time span touches no annotation.
pub fn free_window_starts(
    a: &AbundanceMatrix,
    anns: &[GroundTruthAnnotation],
    delta: usize,
) -> Vec<usize> {
    let intervals: Vec<RtInterval> = anns.iter().map(|x| x.interval()).collect();
    (0..a.window_count(delta))
        .filter(|&s| {
            let w = window_interval(a, s, delta);
            intervals.iter().all(|iv| !iv.intersects(&w))
        })
        .collect()
}

/// `count` distinct annotation-free window starts, drawn uniformly.
pub fn sample_negative_starts<R: Rng + ?Sized>(
    a: &AbundanceMatrix,
    anns: &[GroundTruthAnnotation],
    count: usize,
    delta: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let mut free = free_window_starts(a, anns, delta);
    if free.len() < count {
        return Err(Error::Sampling(format!(
            "sample {} has {} annotation-free windows of {delta} rows, {count} requested",
            a.sample_id(),
            free.len()
        )));
    }
    // partial Fisher-Yates
    for i in 0..count {
        let j = rng.random_range(i..free.len());
        free.swap(i, j);
    }
    free.truncate(count);
    Ok(free)
}

/// Random negative-class points whose rows avoid every annotated interval.
pub fn sample_negatives<R: Rng + ?Sized>(
    a: &AbundanceMatrix,
    anns: &[GroundTruthAnnotation],
    count: usize,
    delta: usize,
    rng: &mut R,
) -> Result<Vec<DataPoint>> {
    sample_negative_starts(a, anns, count, delta, rng)?
        .into_iter()
        .map(|s| DataPoint::from_window(a, s, delta, VocLabel::NEGATIVE, 0))
        .collect()
}

/// Min-max scales `values` to `[0, 1]` in place; constant input becomes 0.
pub fn normalize_values(values: &mut [f64]) {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = hi - lo;
    if !(range > 0.0) {
        values.fill(0.0);
        return;
    }
    for v in values.iter_mut() {
        *v = (*v - lo) / range;
    }
}

/// Global min-max normalization of the whole point.
pub fn normalize(dp: &DataPoint) -> DataPoint {
    let mut out = dp.clone();
    normalize_values(&mut out.values);
    out.normalized = true;
    out
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledDataset {
    pub points: Vec<DataPoint>,
    pub class_counts: BTreeMap<VocLabel, usize>,
}

impl LabeledDataset {
    pub fn new(points: Vec<DataPoint>) -> Self {
        let mut class_counts = BTreeMap::new();
        for p in &points {
            *class_counts.entry(p.label).or_insert(0) += 1;
        }
        Self {
            points,
            class_counts,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Fraction of points in the negative class.
    pub fn negative_fraction(&self) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        *self.class_counts.get(&VocLabel::NEGATIVE).unwrap_or(&0) as f64 / self.len() as f64
    }
}
