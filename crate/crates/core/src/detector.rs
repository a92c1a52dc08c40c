//! Turns a scan into detections: duration, order and uniqueness rules.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::classifier::ClassifierModel;
use crate::error::{Error, Result};
use crate::ingest::format_real;
use crate::matrix::{AbundanceMatrix, RtInterval, VocLabel};
use crate::scanner::{scan_with, ScanOptions, ScanResult};

/// Default minimum run length.
pub const DEFAULT_GAMMA: usize = 20;

/// A run of at least `gamma` consecutive windows with the same target label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub label: VocLabel,
    pub start_index: usize,
    pub length: usize,
    pub start_rt: f64,
    pub end_rt: f64,
    pub confidence: f64,
    pub sample_id: String,
}

impl Detection {
    /// Detection interval `[sRT, eRT]`.
    pub fn interval(&self) -> RtInterval {
        RtInterval::new(self.start_rt, self.end_rt)
    }

    pub fn record(&self) -> DetectionRecord {
        DetectionRecord {
            label: self.label,
            start_rt: self.start_rt,
            end_rt: self.end_rt,
            confidence: self.confidence,
            sample_id: self.sample_id.clone(),
        }
    }
}

/// Final output tuple `(label, sRT, eRT, T)` of one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub label: VocLabel,
    pub start_rt: f64,
    pub end_rt: f64,
    pub confidence: f64,
    pub sample_id: String,
}

impl DetectionRecord {
    pub fn interval(&self) -> RtInterval {
        RtInterval::new(self.start_rt, self.end_rt)
    }
}

/// Largest mean over the `gamma`-long sub-slices of `t`.
pub fn detection_confidence(t: &[f64], gamma: usize) -> Result<f64> {
    if gamma == 0 || t.len() < gamma {
        return Err(Error::Contract(format!(
            "run of {} windows is shorter than gamma = {gamma}",
            t.len()
        )));
    }
    Ok(t.windows(gamma)
        .map(|w| w.iter().sum::<f64>() / gamma as f64)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// One detection per maximal constant-label run with label > 0 and length >= gamma.
pub fn duration_rule(scan: &ScanResult, gamma: usize) -> Result<Vec<Detection>> {
    if gamma == 0 {
        return Err(Error::Config("gamma must be at least 1".into()));
    }
    let mut out = Vec::new();
    let labels = &scan.labels;
    let mut start = 0;
    while start < labels.len() {
        let label = labels[start];
        let mut end = start + 1;
        while end < labels.len() && labels[end] == label {
            end += 1;
        }
        let length = end - start;
        if !label.is_negative() && length >= gamma {
            out.push(Detection {
                label,
                start_index: start,
                length,
                start_rt: scan.rts[start],
                end_rt: scan.rts[end - 1],
                confidence: detection_confidence(&scan.confidences[start..end], gamma)?,
                sample_id: scan.sample_id.clone(),
            });
        }
        start = end;
    }
    Ok(out)
}

/// Removes each detection of label `f` that starts no later than detections
/// of three distinct labels below `f`, or no earlier than detections of three
/// distinct labels above `f`. Every test runs against the input set.
pub fn order_rule(d: &[Detection]) -> Vec<Detection> {
    d.iter()
        .filter(|f| {
            let mut later_lower = BTreeSet::new();
            let mut earlier_higher = BTreeSet::new();
            for x in d {
                if x.label < f.label && x.start_rt >= f.start_rt {
                    later_lower.insert(x.label);
                }
                if x.label > f.label && x.start_rt <= f.start_rt {
                    earlier_higher.insert(x.label);
                }
            }
            later_lower.len() < 3 && earlier_higher.len() < 3
        })
        .cloned()
        .collect()
}

/// Keeps the most confident detection of each label (earlier sRT on ties),
/// sorted by sRT.
pub fn uniqueness_rule(d: &[Detection]) -> Vec<Detection> {
    let mut best: BTreeMap<VocLabel, &Detection> = BTreeMap::new();
    for x in d {
        best.entry(x.label)
            .and_modify(|b| {
                let better = x.confidence > b.confidence
                    || (x.confidence == b.confidence
                        && (x.start_rt, x.start_index) < (b.start_rt, b.start_index));
                if better {
                    *b = x;
                }
            })
            .or_insert(x);
    }
    let mut out: Vec<Detection> = best.into_values().cloned().collect();
    out.sort_by(|a, b| a.start_rt.total_cmp(&b.start_rt).then(a.label.cmp(&b.label)));
    out
}

/// The detection sets after each rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionStages {
    /// After the duration rule.
    pub all: Vec<Detection>,
    /// After the order rule.
    pub ordered: Vec<Detection>,
    /// After the uniqueness rule.
    pub unique: Vec<Detection>,
}

impl DetectionStages {
    pub fn records(&self) -> Vec<DetectionRecord> {
        self.unique.iter().map(Detection::record).collect()
    }
}

pub fn detect_stages(scan: &ScanResult, gamma: usize) -> Result<DetectionStages> {
    let all = duration_rule(scan, gamma)?;
    let ordered = order_rule(&all);
    let unique = uniqueness_rule(&ordered);
    Ok(DetectionStages {
        all,
        ordered,
        unique,
    })
}

/// Scan followed by the three rules; at most one record per label, sorted by sRT.
pub fn detect<M: ClassifierModel + ?Sized>(
    a: &AbundanceMatrix,
    model: &M,
    gamma: usize,
    opts: ScanOptions,
) -> Result<Vec<DetectionRecord>> {
    let s = scan_with(a, model, model.meta().delta, opts)?;
    Ok(detect_stages(&s, gamma)?.records())
}

/// CSV `rt,tic,labels` for plotting: the total ion current of each row and
/// the labels (`;`-separated) whose detection interval covers it.
pub fn write_chromatogram<W: Write>(a: &AbundanceMatrix, detections: &[DetectionRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Format(e.to_string());
    out.write_record(["rt", "tic", "labels"]).map_err(err)?;
    for (&rt, tic) in a.axis().values().iter().zip(a.tic()) {
        let labels: Vec<String> = detections
            .iter()
            .filter(|d| d.interval().contains(rt))
            .map(|d| d.label.0.to_string())
            .collect();
        out.write_record([format_real(rt, 3), format!("{tic}"), labels.join(";")])
            .map_err(err)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scan_of(labels: &[u16], conf: &[f64]) -> ScanResult {
        ScanResult {
            sample_id: "s".into(),
            delta: 80,
            labels: labels.iter().map(|&l| VocLabel(l)).collect(),
            confidences: conf.to_vec(),
            rts: (0..labels.len()).map(|i| 1.0 + i as f64 * 0.01).collect(),
        }
    }

    fn runs(spec: &[(u16, usize)]) -> Vec<u16> {
        spec.iter().flat_map(|&(l, n)| std::iter::repeat_n(l, n)).collect()
    }

    fn det(label: u16, srt: f64, t: f64) -> Detection {
        Detection {
            label: VocLabel(label),
            start_index: (srt * 100.0) as usize,
            length: 20,
            start_rt: srt,
            end_rt: srt + 0.2,
            confidence: t,
            sample_id: "s".into(),
        }
    }

    #[test]
    fn duration_rule_keeps_long_runs() {
        let labels = runs(&[(0, 5), (7, 25), (0, 3), (7, 10), (0, 40)]);
        let s = scan_of(&labels, &vec![0.9; labels.len()]);
        let d = duration_rule(&s, 20).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!((d[0].label, d[0].start_index, d[0].length), (VocLabel(7), 5, 25));
        assert_eq!(d[0].start_rt, s.rts[5]);
        assert_eq!(d[0].end_rt, s.rts[29]);
    }

    #[test]
    fn duration_rule_boundaries() {
        let zeros = vec![0u16; 50];
        assert!(duration_rule(&scan_of(&zeros, &[0.5; 50]), 20).unwrap().is_empty());
        let exact = runs(&[(0, 3), (4, 20), (0, 3)]);
        assert_eq!(duration_rule(&scan_of(&exact, &[0.5; 26]), 20).unwrap().len(), 1);
        let short = runs(&[(0, 3), (4, 19), (0, 3)]);
        assert!(duration_rule(&scan_of(&short, &[0.5; 25]), 20).unwrap().is_empty());
    }

    #[test]
    fn moving_average_confidence() {
        assert!((detection_confidence(&[0.5, 0.7, 0.9], 2).unwrap() - 0.8).abs() < 1e-12);
        assert!((detection_confidence(&[0.9; 30], 20).unwrap() - 0.9).abs() < 1e-12);
        let t = [0.2, 0.4, 0.9];
        assert!((detection_confidence(&t, 3).unwrap() - 0.5).abs() < 1e-12);
        assert!(detection_confidence(&t, 4).is_err());
    }

    #[test]
    fn order_rule_example() {
        let d = vec![det(1, 1.0, 0.9), det(9, 2.0, 0.9), det(2, 3.0, 0.9), det(3, 4.0, 0.9), det(4, 5.0, 0.9)];
        let kept: Vec<u16> = order_rule(&d).iter().map(|x| x.label.0).collect();
        assert_eq!(kept, vec![1, 2, 3, 4]);
    }

    #[test]
    fn order_rule_leaves_ordered_and_small_sets() {
        let ordered: Vec<Detection> = (1..=8).map(|l| det(l, l as f64, 0.9)).collect();
        assert_eq!(order_rule(&ordered), ordered);
        let three = vec![det(9, 1.0, 0.9), det(1, 2.0, 0.9), det(2, 3.0, 0.9)];
        assert_eq!(order_rule(&three), three);
    }

    #[test]
    fn order_rule_needs_distinct_witnesses() {
        // three later detections, but only two distinct lower labels
        let d = vec![det(9, 1.0, 0.9), det(2, 2.0, 0.9), det(2, 3.0, 0.9), det(3, 4.0, 0.9)];
        assert_eq!(order_rule(&d).len(), 4);
    }

    #[test]
    fn uniqueness_rule_examples() {
        let d = vec![det(6, 1.0, 0.8), det(6, 3.0, 0.95)];
        let u = uniqueness_rule(&d);
        assert_eq!(u.len(), 1);
        assert_eq!(u[0].confidence, 0.95);
        let tie = vec![det(6, 6.0, 0.9), det(6, 5.0, 0.9)];
        assert_eq!(uniqueness_rule(&tie)[0].start_rt, 5.0);
        let distinct = vec![det(1, 1.0, 0.5), det(2, 2.0, 0.6)];
        assert_eq!(uniqueness_rule(&distinct), distinct);
    }

    #[test]
    fn stages_nest() {
        let labels = runs(&[(0, 5), (3, 25), (0, 3), (3, 30), (0, 10), (5, 22), (0, 5)]);
        let conf: Vec<f64> = (0..labels.len()).map(|i| 0.5 + (i % 7) as f64 * 0.05).collect();
        let st = detect_stages(&scan_of(&labels, &conf), 20).unwrap();
        assert_eq!(st.all.len(), 3);
        assert_eq!(st.unique.len(), 2);
        assert!(st.unique.iter().all(|d| st.ordered.contains(d)));
        assert!(st.ordered.iter().all(|d| st.all.contains(d)));
    }

    #[test]
    fn chromatogram_dump() {
        use crate::matrix::RtAxis;
        let a = AbundanceMatrix::new(RtAxis::uniform(1.0, 0.5, 4).unwrap(), 2, vec![1.0; 8]).unwrap();
        let d = vec![DetectionRecord {
            label: VocLabel(3),
            start_rt: 1.4,
            end_rt: 2.0,
            confidence: 1.0,
            sample_id: "s".into(),
        }];
        let mut buf = Vec::new();
        write_chromatogram(&a, &d, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "rt,tic,labels\n1.000,2,\n1.500,2,3\n2.000,2,3\n2.500,2,\n");
    }
}
