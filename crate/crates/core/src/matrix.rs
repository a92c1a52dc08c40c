//! Abundance matrices, retention-time axes and the windows cut from them.
//!
//! Rows are retention-time points and columns are unit-resolution m/z
//! channels. Row indices are 0-based throughout the crate: the window that
//! starts at row `start` covers rows `start..start + delta` and its retention
//! time is that of row `start + delta / 2`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of m/z channels measured from 40 to 450 m/z at unit resolution.
pub const DEFAULT_CHANNELS: usize = 411;
/// The m/z value of the first channel.
pub const DEFAULT_FIRST_MZ: u32 = 40;
/// Height of a data point along the retention-time axis, in rows.
pub const DEFAULT_DELTA: usize = 80;
/// Number of target compounds (labels `1..=K`).
pub const DEFAULT_TARGETS: u16 = 30;

/// Strictly increasing retention times in minutes, one per matrix row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RtAxis(Vec<f64>);

impl RtAxis {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(
                "retention-time axis",
                format!("non-finite value at row {i}"),
            ));
        }
        if let Some(i) = values.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::validation(
                "retention-time axis",
                format!(
                    "not strictly increasing between rows {i} and {} ({} -> {})",
                    i + 1,
                    values[i],
                    values[i + 1]
                ),
            ));
        }
        Ok(Self(values))
    }

    /// `len` evenly spaced points `start, start + step, ...`.
    pub fn uniform(start: f64, step: f64, len: usize) -> Result<Self> {
        Self::new((0..len).map(|i| start + step * i as f64).collect())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn get(&self, row: usize) -> Option<f64> {
        self.0.get(row).copied()
    }

    pub fn first(&self) -> Option<f64> {
        self.0.first().copied()
    }

    pub fn last(&self) -> Option<f64> {
        self.0.last().copied()
    }

    /// Length of the axis in minutes.
    pub fn span(&self) -> f64 {
        match (self.first(), self.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// Row whose retention time is closest to `rt`; ties go to the earlier row.
    ///
    /// Panics on an empty axis.
    pub fn nearest_row(&self, rt: f64) -> usize {
        assert!(!self.0.is_empty(), "nearest_row on an empty axis");
        let idx = self.0.partition_point(|&v| v < rt);
        if idx == 0 {
            return 0;
        }
        if idx == self.0.len() {
            return idx - 1;
        }
        let below = rt - self.0[idx - 1];
        let above = self.0[idx] - rt;
        if above < below {
            idx
        } else {
            idx - 1
        }
    }
}

impl TryFrom<Vec<f64>> for RtAxis {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<RtAxis> for Vec<f64> {
    fn from(axis: RtAxis) -> Self {
        axis.0
    }
}

/// Closed retention-time interval `[lo, hi]` in minutes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RtInterval {
    pub lo: f64,
    pub hi: f64,
}

impl RtInterval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "inverted interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    #[inline]
    pub fn intersects(&self, other: &RtInterval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    #[inline]
    pub fn contains(&self, rt: f64) -> bool {
        self.lo <= rt && rt <= self.hi
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Class label: 0 is the negative class, `1..=K` are target compounds.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct VocLabel(pub u16);

impl VocLabel {
    pub const NEGATIVE: VocLabel = VocLabel(0);

    #[inline]
    pub fn is_negative(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Checks `0 <= label <= targets`.
    pub fn checked(value: u16, targets: u16) -> Result<Self> {
        if value > targets {
            return Err(Error::validation(
                "label",
                format!("{value} exceeds the number of targets {targets}"),
            ));
        }
        Ok(VocLabel(value))
    }
}

impl fmt::Display for VocLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One expert-reported compound instance in a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthAnnotation {
    pub sample_id: String,
    pub label: VocLabel,
    pub start_rt: f64,
    pub peak_rt: f64,
    pub end_rt: f64,
}

impl GroundTruthAnnotation {
    pub fn new(
        sample_id: impl Into<String>,
        label: VocLabel,
        start_rt: f64,
        peak_rt: f64,
        end_rt: f64,
    ) -> Result<Self> {
        let ann = Self {
            sample_id: sample_id.into(),
            label,
            start_rt,
            peak_rt,
            end_rt,
        };
        ann.validate()?;
        Ok(ann)
    }

    pub fn validate(&self) -> Result<()> {
        if self.label.is_negative() {
            return Err(Error::validation(
                "annotation",
                "label 0 is the negative class",
            ));
        }
        if ![self.start_rt, self.peak_rt, self.end_rt]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::validation("annotation", "non-finite retention time"));
        }
        if !(self.start_rt <= self.peak_rt && self.peak_rt <= self.end_rt) {
            return Err(Error::validation(
                "annotation",
                format!(
                    "expected start <= peak <= end, got {} / {} / {}",
                    self.start_rt, self.peak_rt, self.end_rt
                ),
            ));
        }
        Ok(())
    }

    /// Mid-point of the elution, `(start + end) / 2`.
    #[inline]
    pub fn mu(&self) -> f64 {
        0.5 * (self.start_rt + self.end_rt)
    }

    #[inline]
    pub fn interval(&self) -> RtInterval {
        RtInterval::new(self.start_rt, self.end_rt)
    }
}

/// A raw GC-MS sample: `rows x channels` non-negative intensities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbundanceMatrix {
    sample_id: String,
    axis: RtAxis,
    channels: usize,
    first_mz: u32,
    column_epoch: u32,
    data: Vec<f64>,
}

impl AbundanceMatrix {
    /// Builds a matrix from row-major intensities.
    pub fn new(axis: RtAxis, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::validation("abundance matrix", "zero channels"));
        }
        if data.len() != axis.len() * channels {
            return Err(Error::validation(
                "abundance matrix",
                format!(
                    "{} values do not fill {} rows x {} channels",
                    data.len(),
                    axis.len(),
                    channels
                ),
            ));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::validation(
                "abundance matrix",
                format!(
                    "intensity {} at row {} channel {} is negative or non-finite",
                    data[i],
                    i / channels,
                    i % channels
                ),
            ));
        }
        Ok(Self {
            sample_id: String::new(),
            axis,
            channels,
            first_mz: DEFAULT_FIRST_MZ,
            column_epoch: 1,
            data,
        })
    }

    pub fn with_sample_id(mut self, id: impl Into<String>) -> Self {
        self.sample_id = id.into();
        self
    }

    pub fn with_column_epoch(mut self, epoch: u32) -> Self {
        self.column_epoch = epoch;
        self
    }

    pub fn with_first_mz(mut self, mz: u32) -> Self {
        self.first_mz = mz;
        self
    }

    pub fn sample_id(&self) -> &str {
        &self.sample_id
    }

    pub fn axis(&self) -> &RtAxis {
        &self.axis
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.axis.len()
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn first_mz(&self) -> u32 {
        self.first_mz
    }

    pub fn column_epoch(&self) -> u32 {
        self.column_epoch
    }

    /// Row-major intensities.
    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.channels..(r + 1) * self.channels]
    }

    /// Total ion current per row.
    pub fn tic(&self) -> Vec<f64> {
        self.data
            .chunks_exact(self.channels)
            .map(|r| r.iter().sum())
            .collect()
    }

    /// Number of complete windows of height `delta`, `R - delta + 1`.
    pub fn window_count(&self, delta: usize) -> usize {
        if delta == 0 || self.rows() < delta {
            0
        } else {
            self.rows() - delta + 1
        }
    }

    fn check_window(&self, start: usize, delta: usize) -> Result<()> {
        if delta == 0 || start + delta > self.rows() {
            return Err(Error::Bounds {
                start,
                delta,
                rows: self.rows(),
            });
        }
        Ok(())
    }

    /// Rows `start..start + delta`, untouched.
    pub fn window(&self, start: usize, delta: usize) -> Result<Window<'_>> {
        self.check_window(start, delta)?;
        Ok(Window {
            start,
            delta,
            channels: self.channels,
            values: &self.data[start * self.channels..(start + delta) * self.channels],
            rts: &self.axis.values()[start..start + delta],
        })
    }

    /// Retention time of the window's middle row, `start + delta / 2`.
    pub fn rt_of_window(&self, start: usize, delta: usize) -> Result<f64> {
        self.check_window(start, delta)?;
        // delta == 1 keeps the middle row inside the window.
        let mid = (start + delta / 2).min(start + delta - 1);
        Ok(self.axis.values()[mid])
    }
}

/// A borrowed `delta x channels` block of a matrix.
#[derive(Debug, Clone, Copy)]
pub struct Window<'a> {
    pub start: usize,
    pub delta: usize,
    pub channels: usize,
    pub values: &'a [f64],
    pub rts: &'a [f64],
}

impl Window<'_> {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.channels..(r + 1) * self.channels]
    }
}
