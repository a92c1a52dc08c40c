use std::cmp::Ordering;

use serde::Serialize;

use super::{Metric, RtRangeTable, Tallies};
use crate::detector::DetectionRecord;
use crate::error::{Error, Result};

/// One ranked detection for precision-recall analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub confidence: f64,
    pub sample_id: String,
    pub start_rt: f64,
    pub hit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub rank: usize,
    pub precision: f64,
    pub recall: f64,
}

fn ranking(a: &Scored, b: &Scored) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then_with(|| a.sample_id.cmp(&b.sample_id))
        .then_with(|| a.start_rt.total_cmp(&b.start_rt))
}

/// Precision and recall after each of the detections ranked by decreasing
/// confidence. Empty when `ground_truth` is 0.
pub fn pr_curve(scored: &[Scored], ground_truth: usize) -> Vec<PrPoint> {
    if ground_truth == 0 {
        return Vec::new();
    }
    let mut ranked: Vec<&Scored> = scored.iter().collect();
    ranked.sort_by(|a, b| ranking(a, b));
    let mut hits = 0usize;
    ranked
        .iter()
        .enumerate()
        .map(|(i, s)| {
            hits += s.hit as usize;
            PrPoint {
                rank: i + 1,
                precision: hits as f64 / (i + 1) as f64,
                recall: hits as f64 / ground_truth as f64,
            }
        })
        .collect()
}

/// `sum_n (Recall(n) - Recall(n-1)) * Precision(n)`; `None` without ground truth.
pub fn average_precision(scored: &[Scored], ground_truth: usize) -> Option<f64> {
    if ground_truth == 0 {
        return None;
    }
    let mut prev = 0.0;
    let mut ap = 0.0;
    for p in pr_curve(scored, ground_truth) {
        ap += (p.recall - prev) * p.precision;
        prev = p.recall;
    }
    Some(ap)
}

/// Upper bound on the chance that a random detection lands in a compound's
/// range: `(max |range| + max |DI|) / (R - max |DI|)`.
pub fn p_max(ranges: &RtRangeTable, detections: &[DetectionRecord], r_minutes: f64) -> Result<f64> {
    let max_di = detections
        .iter()
        .map(|d| d.end_rt - d.start_rt)
        .fold(0.0, f64::max);
    if !(r_minutes > max_di) {
        return Err(Error::Contract(format!(
            "run length {r_minutes} min must exceed the longest detection interval {max_di} min"
        )));
    }
    Ok((ranges.max_length() + max_di) / (r_minutes - max_di))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Metrics {
    pub expert_sensitivity: Metric,
    pub corrected_sensitivity: Metric,
    pub expert_specificity: Metric,
    pub corrected_specificity: Metric,
    pub expert_map: Metric,
    pub corrected_map: Metric,
}

fn mean_defined(aps: &[Option<f64>]) -> Metric {
    let defined: Vec<f64> = aps.iter().flatten().copied().collect();
    Metric::ratio(defined.iter().sum(), defined.len() as f64)
}

/// Sensitivity and specificity under the expert benchmark (the annotations as
/// given) and the corrected one (tentative positives counted as real), with
/// the mean of the defined average precisions.
pub fn summarize(t: &Tallies, expert_ap: &[Option<f64>], corrected_ap: &[Option<f64>]) -> Metrics {
    let f = |x: usize| x as f64;
    Metrics {
        expert_sensitivity: Metric::ratio(f(t.tp), f(t.tp + t.fn_ + t.ttn)),
        corrected_sensitivity: Metric::ratio(f(t.tp + t.ttp), f(t.tp + t.ttp + t.fn_)),
        expert_specificity: Metric::ratio(f(t.tn), f(t.tn + t.fp_star + t.ttp_star)),
        corrected_specificity: Metric::ratio(f(t.tn), f(t.tn + t.fp_star)),
        expert_map: mean_defined(expert_ap),
        corrected_map: mean_defined(corrected_ap),
    }
}
