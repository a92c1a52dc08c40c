//! Evaluation of detections against expert annotations.
//!
//! Protocol 1 matches detections to annotations by label and retention
//! time. Mismatches are re-examined against the retention-time ranges seen in
//! training: a detection inside its compound's range is a tentative true
//! positive (TTP), and a missed annotation whose compound was tentatively
//! found elsewhere in the sample is a tentative true negative (TTN).
//! Protocol 2 only asks whether each compound is present in each sample.

mod metrics;
mod protocol;
mod report;

pub use metrics::{average_precision, p_max, pr_curve, summarize, Metrics, PrPoint, Scored};
pub use protocol::{
    intersect_models, intersect_stage_lists, match_protocol1, presence_protocol2, tentative_analysis, MatchRule, Presence,
    Protocol1Match, TentativeResult,
};
pub use report::{evaluate, EvalOptions, EvaluationReport, LabelCurves, SampleInput};

use std::collections::BTreeMap;
use std::ops::AddAssign;

use serde::{Deserialize, Serialize, Serializer};

use crate::matrix::{GroundTruthAnnotation, RtInterval, VocLabel};

/// A ratio that may have a zero denominator; serialized as a number or `"undefined"`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metric(pub Option<f64>);

impl Metric {
    pub fn ratio(num: f64, den: f64) -> Self {
        if den > 0.0 {
            Metric(Some(num / den))
        } else {
            Metric(None)
        }
    }

    pub fn value(self) -> Option<f64> {
        self.0
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{v:.4}"),
            None => f.write_str("undefined"),
        }
    }
}

impl Serialize for Metric {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Some(v) => s.serialize_f64(v),
            None => s.serialize_str("undefined"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Tallies {
    pub tp: usize,
    pub ttp: usize,
    pub fp: usize,
    pub ttn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub fp_star: usize,
    pub ttp_star: usize,
}

impl AddAssign for Tallies {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.ttp += o.ttp;
        self.fp += o.fp;
        self.ttn += o.ttn;
        self.fn_ += o.fn_;
        self.tn += o.tn;
        self.fp_star += o.fp_star;
        self.ttp_star += o.ttp_star;
    }
}

/// `[min peakRT, max peakRT]` of each compound over the training
/// annotations, per column epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RtRangeTable {
    ranges: BTreeMap<(VocLabel, u32), RtInterval>,
}

#[derive(Serialize, Deserialize)]
struct RangeEntry {
    label: VocLabel,
    epoch: u32,
    min: f64,
    max: f64,
}

impl Serialize for RtRangeTable {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.ranges.iter().map(|(&(label, epoch), r)| RangeEntry {
            label,
            epoch,
            min: r.lo,
            max: r.hi,
        }))
    }
}

impl<'de> Deserialize<'de> for RtRangeTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let entries = Vec::<RangeEntry>::deserialize(d)?;
        let mut t = RtRangeTable::default();
        for e in entries {
            if !(e.min <= e.max) {
                return Err(serde::de::Error::custom(format!(
                    "range of label {} has min > max",
                    e.label
                )));
            }
            t.ranges.insert((e.label, e.epoch), RtInterval::new(e.min, e.max));
        }
        Ok(t)
    }
}

impl RtRangeTable {
    /// Builds the table from `(annotation, column epoch)` pairs.
    pub fn from_annotations<'a>(items: impl IntoIterator<Item = (&'a GroundTruthAnnotation, u32)>) -> Self {
        let mut t = Self::default();
        for (a, epoch) in items {
            t.ranges
                .entry((a.label, epoch))
                .and_modify(|r| {
                    r.lo = r.lo.min(a.peak_rt);
                    r.hi = r.hi.max(a.peak_rt);
                })
                .or_insert(RtInterval::new(a.peak_rt, a.peak_rt));
        }
        t
    }

    pub fn get(&self, label: VocLabel, epoch: u32) -> Option<RtInterval> {
        self.ranges.get(&(label, epoch)).copied()
    }

    pub fn insert(&mut self, label: VocLabel, epoch: u32, range: RtInterval) {
        self.ranges.insert((label, epoch), range);
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VocLabel, u32, RtInterval)> + '_ {
        self.ranges.iter().map(|(&(l, e), &r)| (l, e, r))
    }

    /// Longest range, 0 for an empty table.
    pub fn max_length(&self) -> f64 {
        self.ranges.values().map(|r| r.length()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_from_training_peaks() {
        let a = |label, peak| GroundTruthAnnotation::new("s", VocLabel(label), peak - 0.1, peak, peak + 0.1).unwrap();
        let anns = [a(3, 5.0), a(3, 5.4), a(3, 5.2), a(4, 7.0)];
        let t = RtRangeTable::from_annotations(anns.iter().map(|x| (x, 1)).chain([(&anns[0], 2)]));
        assert_eq!(t.get(VocLabel(3), 1), Some(RtInterval::new(5.0, 5.4)));
        assert_eq!(t.get(VocLabel(4), 1), Some(RtInterval::new(7.0, 7.0)));
        assert_eq!(t.get(VocLabel(3), 2), Some(RtInterval::new(5.0, 5.0)));
        assert_eq!(t.get(VocLabel(4), 2), None);
        assert!((t.max_length() - 0.4).abs() < 1e-12);
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(serde_json::from_str::<RtRangeTable>(&json).unwrap(), t);
    }

    #[test]
    fn undefined_metric_serializes_as_text() {
        assert_eq!(serde_json::to_string(&Metric::ratio(1.0, 0.0)).unwrap(), "\"undefined\"");
        assert_eq!(serde_json::to_string(&Metric::ratio(1.0, 4.0)).unwrap(), "0.25");
    }
}
