use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::RtRangeTable;
use crate::detector::DetectionRecord;
use crate::error::{Error, Result};
use crate::matrix::{GroundTruthAnnotation, VocLabel};

/// When a detection is at the annotated position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchRule {
    /// The detection interval overlaps `[startRT, endRT]`.
    #[default]
    Overlap,
    /// The annotated peak lies inside the detection interval.
    PeakInDi,
}

impl MatchRule {
    pub fn matches(self, d: &DetectionRecord, a: &GroundTruthAnnotation) -> bool {
        d.label == a.label
            && match self {
                MatchRule::Overlap => d.interval().intersects(&a.interval()),
                MatchRule::PeakInDi => d.interval().contains(a.peak_rt),
            }
    }
}

impl std::str::FromStr for MatchRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "overlap" => Ok(Self::Overlap),
            "peak-in-di" => Ok(Self::PeakInDi),
            other => Err(Error::Config(format!("unknown match rule `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Protocol1Match {
    pub tp: Vec<DetectionRecord>,
    pub fp: Vec<DetectionRecord>,
    pub fn_: Vec<GroundTruthAnnotation>,
}

fn unique_labels<T>(items: &[T], label: impl Fn(&T) -> VocLabel, what: &str) -> Result<()> {
    let mut seen = BTreeSet::new();
    for x in items {
        if !seen.insert(label(x)) {
            return Err(Error::Contract(format!("label {} appears twice among the {what}", label(x))));
        }
    }
    Ok(())
}

/// Label-and-position matching of one sample's final detections.
pub fn match_protocol1(
    detections: &[DetectionRecord],
    truth: &[GroundTruthAnnotation],
    rule: MatchRule,
) -> Result<Protocol1Match> {
    unique_labels(detections, |d| d.label, "detections")?;
    unique_labels(truth, |a| a.label, "annotations")?;
    let mut out = Protocol1Match::default();
    let mut matched = BTreeSet::new();
    for d in detections {
        match truth.iter().find(|a| rule.matches(d, a)) {
            Some(a) => {
                matched.insert(a.label);
                out.tp.push(d.clone());
            }
            None => out.fp.push(d.clone()),
        }
    }
    out.fn_ = truth
        .iter()
        .filter(|a| !matched.contains(&a.label))
        .cloned()
        .collect();
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TentativeResult {
    pub ttp: Vec<DetectionRecord>,
    pub certain_fp: Vec<DetectionRecord>,
    pub ttn: Vec<GroundTruthAnnotation>,
    pub fn_: Vec<GroundTruthAnnotation>,
    /// Detected labels without a retention-time range for the epoch.
    pub unverifiable: Vec<VocLabel>,
}

fn in_range(d: &DetectionRecord, ranges: &RtRangeTable, epoch: u32) -> Option<bool> {
    ranges.get(d.label, epoch).map(|r| d.interval().intersects(&r))
}

/// Splits protocol-1 false positives into TTP and certain FP, and misses into
/// TTN and FN. A miss is a TTN when the pre-filter detections `all` hold a
/// detection of its label away from the annotation but inside the label's
/// range.
pub fn tentative_analysis(
    m: &Protocol1Match,
    all: &[DetectionRecord],
    ranges: &RtRangeTable,
    epoch: u32,
    rule: MatchRule,
) -> TentativeResult {
    let mut out = TentativeResult::default();
    for d in &m.fp {
        match in_range(d, ranges, epoch) {
            Some(true) => out.ttp.push(d.clone()),
            Some(false) => out.certain_fp.push(d.clone()),
            None => {
                log::warn!(
                    "sample {}: no retention-time range for label {} in column epoch {epoch}; counted as a false positive",
                    d.sample_id,
                    d.label
                );
                out.unverifiable.push(d.label);
                out.certain_fp.push(d.clone());
            }
        }
    }
    for a in &m.fn_ {
        let tentative = all
            .iter()
            .any(|d| d.label == a.label && !rule.matches(d, a) && in_range(d, ranges, epoch) == Some(true));
        if tentative {
            out.ttn.push(a.clone());
        } else {
            out.fn_.push(a.clone());
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Presence {
    pub tn: usize,
    pub fp_star: usize,
    pub ttp_star: usize,
}

/// Presence-only accounting over labels `1..=targets` of one sample.
pub fn presence_protocol2(
    detections: &[DetectionRecord],
    truth: &[GroundTruthAnnotation],
    ranges: &RtRangeTable,
    epoch: u32,
    targets: u16,
) -> Presence {
    let mut p = Presence::default();
    for label in (1..=targets).map(VocLabel) {
        let expert = truth.iter().any(|a| a.label == label);
        let found: Vec<&DetectionRecord> = detections.iter().filter(|d| d.label == label).collect();
        match (found.is_empty(), expert) {
            (true, false) => p.tn += 1,
            (false, false) => {
                if found.iter().any(|d| in_range(d, ranges, epoch) == Some(true)) {
                    p.ttp_star += 1;
                } else {
                    p.fp_star += 1;
                }
            }
            _ => {}
        }
    }
    p
}

/// Detections every model agrees on: same sample and label, pairwise
/// intersecting intervals. The consensus interval is the common intersection
/// and the confidence the mean over the models. Each list may hold at most
/// one detection per sample and label.
pub fn intersect_models(lists: &[Vec<DetectionRecord>]) -> Result<Vec<DetectionRecord>> {
    for list in lists {
        let mut seen = std::collections::BTreeSet::new();
        for d in list {
            if !seen.insert((d.sample_id.as_str(), d.label)) {
                return Err(Error::Contract(format!(
                    "label {} detected twice in sample {}",
                    d.label, d.sample_id
                )));
            }
        }
    }
    intersect_stage_lists(lists)
}

/// Like [`intersect_models`] for lists that may repeat a label within a
/// sample (duration-rule output): every choice of one detection per model
/// with pairwise intersecting intervals yields a consensus detection.
pub fn intersect_stage_lists(lists: &[Vec<DetectionRecord>]) -> Result<Vec<DetectionRecord>> {
    if lists.len() < 2 {
        return Err(Error::Contract("model intersection needs at least two lists".into()));
    }
    let grouped: Vec<BTreeMap<(&str, VocLabel), Vec<&DetectionRecord>>> = lists
        .iter()
        .map(|list| {
            let mut map: BTreeMap<_, Vec<_>> = BTreeMap::new();
            for d in list {
                map.entry((d.sample_id.as_str(), d.label)).or_default().push(d);
            }
            map
        })
        .collect();

    let mut out = Vec::new();
    for key in grouped[0].keys() {
        let Some(groups) = grouped.iter().map(|g| g.get(key)).collect::<Option<Vec<_>>>() else {
            continue;
        };
        // depth-first over one member per model, pruning on the first disjoint pair
        let mut chosen: Vec<&DetectionRecord> = Vec::with_capacity(groups.len());
        fn walk<'a>(
            groups: &[&Vec<&'a DetectionRecord>],
            chosen: &mut Vec<&'a DetectionRecord>,
            out: &mut Vec<DetectionRecord>,
        ) {
            let depth = chosen.len();
            if depth == groups.len() {
                let lo = chosen.iter().map(|d| d.start_rt).fold(f64::NEG_INFINITY, f64::max);
                let hi = chosen.iter().map(|d| d.end_rt).fold(f64::INFINITY, f64::min);
                out.push(DetectionRecord {
                    label: chosen[0].label,
                    start_rt: lo,
                    end_rt: hi,
                    confidence: chosen.iter().map(|d| d.confidence).sum::<f64>() / depth as f64,
                    sample_id: chosen[0].sample_id.clone(),
                });
                return;
            }
            for &d in groups[depth] {
                if chosen.iter().all(|c| c.interval().intersects(&d.interval())) {
                    chosen.push(d);
                    walk(groups, chosen, out);
                    chosen.pop();
                }
            }
        }
        walk(&groups, &mut chosen, &mut out);
    }
    out.sort_by(|a, b| {
        a.sample_id
            .cmp(&b.sample_id)
            .then(a.start_rt.total_cmp(&b.start_rt))
            .then(a.label.cmp(&b.label))
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::RtInterval;

    fn d(label: u16, s: f64, e: f64) -> DetectionRecord {
        DetectionRecord {
            label: VocLabel(label),
            start_rt: s,
            end_rt: e,
            confidence: 0.9,
            sample_id: "S".into(),
        }
    }

    fn a(label: u16, s: f64, e: f64) -> GroundTruthAnnotation {
        GroundTruthAnnotation::new("S", VocLabel(label), s, 0.5 * (s + e), e).unwrap()
    }

    #[test]
    fn protocol1_cases() {
        let m = match_protocol1(&[d(17, 9.588, 9.712)], &[a(17, 9.58, 9.72)], MatchRule::Overlap).unwrap();
        assert_eq!((m.tp.len(), m.fp.len(), m.fn_.len()), (1, 0, 0));

        let m = match_protocol1(&[d(17, 9.588, 9.712)], &[a(18, 9.58, 9.72)], MatchRule::Overlap).unwrap();
        assert_eq!((m.tp.len(), m.fp.len(), m.fn_.len()), (0, 1, 1));

        let m = match_protocol1(&[d(17, 9.0, 9.1)], &[a(17, 9.58, 9.72)], MatchRule::Overlap).unwrap();
        assert_eq!((m.tp.len(), m.fp.len(), m.fn_.len()), (0, 1, 1));
    }

    #[test]
    fn peak_rule_is_stricter() {
        let det = d(5, 3.0, 3.1);
        let ann = a(5, 3.05, 3.4);
        assert!(MatchRule::Overlap.matches(&det, &ann));
        assert!(!MatchRule::PeakInDi.matches(&det, &ann));
    }

    #[test]
    fn duplicate_labels_rejected() {
        let r = match_protocol1(&[d(3, 1.0, 1.1), d(3, 2.0, 2.1)], &[], MatchRule::Overlap);
        assert!(matches!(r, Err(Error::Contract(_))));
        let r = match_protocol1(&[], &[a(3, 1.0, 1.1), a(3, 2.0, 2.1)], MatchRule::Overlap);
        assert!(r.is_err());
    }

    #[test]
    fn tentative_cases() {
        let mut ranges = RtRangeTable::default();
        ranges.insert(VocLabel(15), 1, RtInterval::new(5.0, 6.0));
        ranges.insert(VocLabel(16), 1, RtInterval::new(7.0, 8.0));
        ranges.insert(VocLabel(2), 1, RtInterval::new(1.0, 1.2));
        let fin = vec![d(15, 5.2, 5.4), d(16, 7.5, 7.6), d(2, 3.0, 3.1), d(9, 4.0, 4.1)];
        let truth = vec![a(16, 7.9, 8.2)];
        let m = match_protocol1(&fin, &truth, MatchRule::Overlap).unwrap();
        assert_eq!(m.fp.len(), 4);
        assert_eq!(m.fn_.len(), 1);
        let t = tentative_analysis(&m, &fin, &ranges, 1, MatchRule::Overlap);
        let labels = |v: &[DetectionRecord]| v.iter().map(|x| x.label.0).collect::<Vec<_>>();
        assert_eq!(labels(&t.ttp), vec![15, 16]);
        assert_eq!(labels(&t.certain_fp), vec![2, 9]);
        assert_eq!(t.unverifiable, vec![VocLabel(9)]);
        assert_eq!(t.ttn.len(), 1);
        assert!(t.fn_.is_empty());

        // another epoch has no ranges at all
        let t2 = tentative_analysis(&m, &fin, &ranges, 2, MatchRule::Overlap);
        assert!(t2.ttp.is_empty() && t2.ttn.is_empty());
        assert_eq!(t2.certain_fp.len(), 4);
    }

    #[test]
    fn presence_cases() {
        let mut ranges = RtRangeTable::default();
        ranges.insert(VocLabel(6), 1, RtInterval::new(2.0, 2.5));
        ranges.insert(VocLabel(4), 1, RtInterval::new(9.0, 9.5));
        let dets = vec![d(6, 2.1, 2.2), d(4, 1.0, 1.1), d(3, 5.0, 5.1)];
        let truth = vec![a(3, 7.0, 7.2), a(1, 1.0, 1.1)];
        let p = presence_protocol2(&dets, &truth, &ranges, 1, 6);
        // labels 2 and 5 absent everywhere; 6 inside its range; 4 outside
        assert_eq!(p, Presence { tn: 2, fp_star: 1, ttp_star: 1 });
    }

    #[test]
    fn model_intersection() {
        let one = vec![d(1, 1.0, 1.2), d(2, 2.0, 2.2), d(3, 3.0, 3.2)];
        assert_eq!(intersect_models(&[one.clone(), one.clone()]).unwrap(), one);

        let two = vec![d(1, 1.1, 1.3), d(3, 4.0, 4.2)];
        let c = intersect_models(&[one.clone(), two]).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!((c[0].label.0, c[0].start_rt, c[0].end_rt), (1, 1.1, 1.2));
        assert!(intersect_models(&[one]).is_err());
    }

    #[test]
    fn stage_lists_may_repeat_labels() {
        let a = vec![d(1, 1.0, 1.2), d(1, 3.0, 3.2)];
        let b = vec![d(1, 1.1, 1.3), d(1, 3.1, 3.3), d(2, 5.0, 5.1)];
        assert!(intersect_models(&[a.clone(), b.clone()]).is_err());
        let c = intersect_stage_lists(&[a, b]).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!((c[0].start_rt, c[0].end_rt), (1.1, 1.2));
        assert_eq!((c[1].start_rt, c[1].end_rt), (3.1, 3.2));
    }
}
