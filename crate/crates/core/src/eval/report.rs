use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::{
    average_precision, match_protocol1, p_max, pr_curve, presence_protocol2, summarize, tentative_analysis,
    MatchRule, Metric, Metrics, PrPoint, RtRangeTable, Scored, Tallies,
};
use crate::detector::DetectionRecord;
use crate::error::Result;
use crate::matrix::{GroundTruthAnnotation, VocLabel};

/// Everything the protocols need about one test sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleInput {
    pub sample_id: String,
    pub column_epoch: u32,
    /// Length of the run in minutes.
    pub run_minutes: f64,
    /// Detections after all rules.
    pub detections: Vec<DetectionRecord>,
    /// Detections after the duration rule only.
    pub all: Vec<DetectionRecord>,
    pub truth: Vec<GroundTruthAnnotation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    pub targets: u16,
    pub rule: MatchRule,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub model: String,
    pub samples: usize,
    pub match_rule: MatchRule,
    pub tallies: Tallies,
    pub per_sample: BTreeMap<String, Tallies>,
    pub metrics: Metrics,
    pub expert_ap: BTreeMap<u16, Metric>,
    pub corrected_ap: BTreeMap<u16, Metric>,
    pub p_max: Metric,
    pub warnings: Vec<String>,
}

/// Per-label precision-recall points under both benchmarks.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LabelCurves {
    pub expert: BTreeMap<u16, Vec<PrPoint>>,
    pub corrected: BTreeMap<u16, Vec<PrPoint>>,
}

#[derive(Default)]
struct LabelStats {
    expert: Vec<Scored>,
    corrected: Vec<Scored>,
    annotations: usize,
    ttp: usize,
    ttn: usize,
}

fn scored(d: &DetectionRecord, hit: bool) -> Scored {
    Scored {
        confidence: d.confidence,
        sample_id: d.sample_id.clone(),
        start_rt: d.start_rt,
        hit,
    }
}

/// Runs both protocols over the test samples.
pub fn evaluate(
    model: &str,
    samples: &[SampleInput],
    ranges: &RtRangeTable,
    opts: EvalOptions,
) -> Result<(EvaluationReport, LabelCurves)> {
    let mut tallies = Tallies::default();
    let mut per_sample = BTreeMap::new();
    let mut stats: BTreeMap<VocLabel, LabelStats> = (1..=opts.targets)
        .map(|l| (VocLabel(l), LabelStats::default()))
        .collect();
    let mut warnings = Vec::new();

    for s in samples {
        let m = match_protocol1(&s.detections, &s.truth, opts.rule)?;
        let t = tentative_analysis(&m, &s.all, ranges, s.column_epoch, opts.rule);
        let p = presence_protocol2(&s.detections, &s.truth, ranges, s.column_epoch, opts.targets);
        let st = Tallies {
            tp: m.tp.len(),
            ttp: t.ttp.len(),
            fp: t.certain_fp.len(),
            ttn: t.ttn.len(),
            fn_: t.fn_.len(),
            tn: p.tn,
            fp_star: p.fp_star,
            ttp_star: p.ttp_star,
        };
        tallies += st;
        per_sample.insert(s.sample_id.clone(), st);
        for l in &t.unverifiable {
            warnings.push(format!(
                "sample {}: label {l} has no retention-time range for column epoch {}",
                s.sample_id, s.column_epoch
            ));
        }

        for d in &m.tp {
            let e = stats.entry(d.label).or_default();
            e.expert.push(scored(d, true));
            e.corrected.push(scored(d, true));
        }
        for d in &t.ttp {
            let e = stats.entry(d.label).or_default();
            e.expert.push(scored(d, false));
            e.corrected.push(scored(d, true));
            e.ttp += 1;
        }
        for d in &t.certain_fp {
            let e = stats.entry(d.label).or_default();
            e.expert.push(scored(d, false));
            e.corrected.push(scored(d, false));
        }
        for a in &s.truth {
            stats.entry(a.label).or_default().annotations += 1;
        }
        for a in &t.ttn {
            stats.entry(a.label).or_default().ttn += 1;
        }
    }

    let mut curves = LabelCurves::default();
    let mut expert_ap = BTreeMap::new();
    let mut corrected_ap = BTreeMap::new();
    let (mut expert_list, mut corrected_list) = (Vec::new(), Vec::new());
    let mut undefined = Vec::new();
    for (label, st) in &stats {
        let gt_expert = st.annotations;
        let gt_corrected = st.annotations - st.ttn + st.ttp;
        let e = average_precision(&st.expert, gt_expert);
        let c = average_precision(&st.corrected, gt_corrected);
        if e.is_none() {
            undefined.push(label.0.to_string());
        }
        expert_ap.insert(label.0, Metric(e));
        corrected_ap.insert(label.0, Metric(c));
        expert_list.push(e);
        corrected_list.push(c);
        curves.expert.insert(label.0, pr_curve(&st.expert, gt_expert));
        curves.corrected.insert(label.0, pr_curve(&st.corrected, gt_corrected));
    }
    if !undefined.is_empty() {
        warnings.push(format!(
            "no annotations for labels {}; their expert AP is undefined and left out of the mAP",
            undefined.join(", ")
        ));
    }

    let all: Vec<DetectionRecord> = samples.iter().flat_map(|s| s.all.iter().cloned()).collect();
    let run = samples.iter().map(|s| s.run_minutes).fold(0.0, f64::max);
    let p_max = match p_max(ranges, &all, run) {
        Ok(v) => Metric(Some(v)),
        Err(e) => {
            warnings.push(format!("P_max undefined: {e}"));
            Metric(None)
        }
    };
    for w in &warnings {
        log::warn!("{w}");
    }

    let report = EvaluationReport {
        model: model.to_string(),
        samples: samples.len(),
        match_rule: opts.rule,
        metrics: summarize(&tallies, &expert_list, &corrected_list),
        tallies,
        per_sample,
        expert_ap,
        corrected_ap,
        p_max,
        warnings,
    };
    Ok((report, curves))
}

impl EvaluationReport {
    /// Plain-text summary.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let t = &self.tallies;
        let _ = writeln!(s, "model {}  ({} samples, match rule {:?})", self.model, self.samples, self.match_rule);
        let _ = writeln!(
            s,
            "{:<12}{:>6}{:>6}{:>6}{:>6}{:>6}{:>6}{:>6}{:>6}",
            "", "TP", "TTP", "FP", "TTN", "FN", "TN", "FP*", "TTP*"
        );
        let mut row = |name: &str, t: &Tallies| {
            let _ = writeln!(
                s,
                "{:<12}{:>6}{:>6}{:>6}{:>6}{:>6}{:>6}{:>6}{:>6}",
                name, t.tp, t.ttp, t.fp, t.ttn, t.fn_, t.tn, t.fp_star, t.ttp_star
            );
        };
        for (id, st) in &self.per_sample {
            row(id, st);
        }
        row("total", t);
        let m = &self.metrics;
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<14}{:>12}{:>12}", "", "expert", "corrected");
        let _ = writeln!(s, "{:<14}{:>12}{:>12}", "sensitivity", m.expert_sensitivity.to_string(), m.corrected_sensitivity.to_string());
        let _ = writeln!(s, "{:<14}{:>12}{:>12}", "specificity", m.expert_specificity.to_string(), m.corrected_specificity.to_string());
        let _ = writeln!(s, "{:<14}{:>12}{:>12}", "mAP", m.expert_map.to_string(), m.corrected_map.to_string());
        let _ = writeln!(s, "P_max {}", self.p_max);
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<8}{:>12}{:>12}", "label", "AP expert", "AP corr.");
        for (l, ap) in &self.expert_ap {
            let _ = writeln!(s, "{:<8}{:>12}{:>12}", l, ap.to_string(), self.corrected_ap[l].to_string());
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::RtInterval;

    fn d(label: u16, s: f64, conf: f64) -> DetectionRecord {
        DetectionRecord {
            label: VocLabel(label),
            start_rt: s,
            end_rt: s + 0.1,
            confidence: conf,
            sample_id: "S1".into(),
        }
    }

    #[test]
    fn every_detection_and_annotation_counted_once() {
        let mut ranges = RtRangeTable::default();
        ranges.insert(VocLabel(2), 1, RtInterval::new(4.0, 5.0));
        let truth = vec![
            GroundTruthAnnotation::new("S1", VocLabel(1), 1.0, 1.05, 1.1).unwrap(),
            GroundTruthAnnotation::new("S1", VocLabel(2), 6.0, 6.05, 6.1).unwrap(),
            GroundTruthAnnotation::new("S1", VocLabel(3), 8.0, 8.05, 8.1).unwrap(),
        ];
        let dets = vec![d(1, 1.02, 0.9), d(2, 4.5, 0.8), d(4, 9.0, 0.7)];
        let input = SampleInput {
            sample_id: "S1".into(),
            column_epoch: 1,
            run_minutes: 60.0,
            all: dets.clone(),
            detections: dets,
            truth,
        };
        let (r, curves) = evaluate("m", &[input], &ranges, EvalOptions { targets: 5, rule: MatchRule::Overlap }).unwrap();
        let t = r.tallies;
        assert_eq!((t.tp, t.ttp, t.fp), (1, 1, 1));
        assert_eq!((t.ttn, t.fn_), (1, 1));
        // label 5 absent in both; 4 detected without range; 1..3 annotated
        assert_eq!((t.tn, t.fp_star, t.ttp_star), (1, 1, 0));
        assert_eq!(r.expert_ap[&1].value(), Some(1.0));
        assert_eq!(r.expert_ap[&2].value(), Some(0.0));
        assert_eq!(r.corrected_ap[&2].value(), Some(1.0));
        assert_eq!(r.expert_ap[&5].value(), None);
        assert!(r.warnings.iter().any(|w| w.contains("label 4")));
        assert!((r.p_max.value().unwrap() - 1.1 / 59.9).abs() < 1e-9);
        assert_eq!(curves.expert[&1].len(), 1);
        let text = r.to_table();
        assert!(text.contains("total") && text.contains("sensitivity"));
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["expert_ap"]["5"], "undefined");
        assert_eq!(json["tallies"]["fn"], 1);
    }
}
