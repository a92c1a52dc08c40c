//! Acceptance checks, one PASS/FAIL line each. Pass criterion numbers as
//! arguments to run a subset: `cargo test --test acceptance -- 1 2 9`.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vocscan_core::classifier::train_convnet;
use vocscan_core::dataset::{
    augment_translation, augmented_count, extract_datapoint, for_each_augmented, normalize, AugmentConfig,
    AugmentedSet, IntensityVariation, SampleData, TrainingSet,
};
use vocscan_core::detector::{duration_rule, order_rule, uniqueness_rule, Detection};
use vocscan_core::eval::{
    average_precision, evaluate, p_max, summarize, EvalOptions, MatchRule, RtRangeTable, SampleInput, Scored,
    Tallies,
};
use vocscan_core::matrix::{AbundanceMatrix, GroundTruthAnnotation, RtAxis, RtInterval, VocLabel};
use vocscan_core::synth::{default_template_set, synth_sample, synth_study, StudyConfig, SynthConfig};
use vocscan_core::{
    detect_stages, scan, scan_with, softmax, ClassifierModel, ConvNet, ConvNetConfig, DetectionRecord, Error,
    ModelMeta, ProbVector, ScanOptions, ScanResult,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn round4(x: f64) -> String {
    format!("{x:.4}")
}

fn c1_sensitivity_tallies() -> Outcome {
    let rows = [
        ((816, 226, 11, 18), ("0.9657", "0.9896")),
        ((808, 181, 22, 15), ("0.9562", "0.9782")),
        ((804, 187, 27, 14), ("0.9515", "0.9735")),
    ];
    let mut got = Vec::new();
    let mut ok = true;
    for ((tp, ttp, fn_, ttn), (e, c)) in rows {
        let m = summarize(&Tallies { tp, ttp, fn_, ttn, ..Tallies::default() }, &[], &[]);
        let (ge, gc) = (round4(m.expert_sensitivity.value().unwrap()), round4(m.corrected_sensitivity.value().unwrap()));
        ok &= ge == e && gc == c;
        got.push(format!("{ge}/{gc}"));
    }
    check(ok, got.join(", "))
}

fn c2_specificity_tallies() -> Outcome {
    let rows = [
        ((86, 1, 208), ("0.2915", "0.9885")),
        ((125, 4, 166), ("0.4237", "0.9690")),
        ((116, 6, 173), ("0.3932", "0.9508")),
        ((165, 0, 130), ("0.5593", "1.0000")),
    ];
    let mut got = Vec::new();
    let mut ok = true;
    for ((tn, fp_star, ttp_star), (e, c)) in rows {
        let m = summarize(&Tallies { tn, fp_star, ttp_star, ..Tallies::default() }, &[], &[]);
        let (ge, gc) = (round4(m.expert_specificity.value().unwrap()), round4(m.corrected_specificity.value().unwrap()));
        ok &= ge == e && gc == c;
        got.push(format!("{ge}/{gc}"));
    }
    check(ok, got.join(", "))
}

/// Small stand-in samples holding `total` annotations between them.
fn stand_in_samples(total: usize, per_sample: usize, cfg: &SynthConfig) -> Vec<SampleData> {
    let templates = default_template_set(per_sample, cfg);
    let mut out = Vec::new();
    let mut left = total;
    let mut i = 0u64;
    while left > 0 {
        let n = left.min(per_sample);
        let presence: Vec<bool> = (0..per_sample).map(|j| j < n).collect();
        let (matrix, annotations) =
            synth_sample(&format!("stand-in-{i}"), &templates, &presence, &cfg.with_seed(i)).unwrap();
        out.push(SampleData { matrix, annotations });
        left -= n;
        i += 1;
    }
    out
}

fn c3_augmentation_counts() -> Outcome {
    let t = Instant::now();
    let full = AugmentConfig::default();
    let shifts = AugmentConfig::shifts_only();
    let formula = (augmented_count(3736, &full), augmented_count(3736, &shifts));

    let cfg = SynthConfig { rows: 2000, channels: 16, ..SynthConfig::default() };
    let samples = stand_in_samples(3736, 10, &cfg);
    let originals: usize = samples.iter().map(|s| s.annotations.len()).sum();
    let lazy_full = AugmentedSet::build(&samples, 80, full, 0.0, 1).map_err(|e| e.to_string())?.positives();
    let lazy_shifts = AugmentedSet::build(&samples, 80, shifts, 0.0, 1).map_err(|e| e.to_string())?.positives();

    // generate every point of the full augmentation once
    let mut streamed = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for s in &samples {
        for a in &s.annotations {
            for_each_augmented(&s.matrix, a, 80, &full, &mut rng, |_| streamed += 1).map_err(|e| e.to_string())?;
        }
    }
    let elapsed = t.elapsed();
    check(
        originals == 3736
            && formula == (373_600, 74_720)
            && lazy_full == 373_600
            && lazy_shifts == 74_720
            && streamed == 373_600
            && elapsed < Duration::from_secs(60),
        format!(
            "{originals} originals -> {lazy_full} full ({streamed} generated), {lazy_shifts} shifts-only in {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

fn c4_augmentation_invariants() -> Outcome {
    let cfg = SynthConfig { rows: 3000, channels: 60, ..SynthConfig::default() };
    let templates = default_template_set(8, &cfg);
    let samples: Vec<(AbundanceMatrix, Vec<GroundTruthAnnotation>)> = (0..4)
        .map(|i| synth_sample(&format!("s{i}"), &templates, &[true; 8], &cfg.with_seed(100 + i)).unwrap())
        .collect();
    let iv = IntensityVariation::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut translation, mut ratio, mut untouched, mut range) = (0usize, 0usize, 0usize, 0usize);
    let mut scaled_rows = 0usize;
    for _ in 0..1000 {
        let (a, anns) = &samples[rng.random_range(0..samples.len())];
        let ann = &anns[rng.random_range(0..anns.len())];
        let centred = extract_datapoint(a, ann, 80).map_err(|e| e.to_string())?;
        let shifted = augment_translation(a, ann, 80, Default::default()).map_err(|e| e.to_string())?;
        let idx = rng.random_range(0..shifted.len());
        let dp = &shifted[idx];
        let n = dp.provenance.shift as isize;
        let start = centred.provenance.anchor as isize + n;

        // (a) values are the matrix rows moved by the shift
        let same_rows = (0..80).all(|r| dp.row(r) == a.row((start + r as isize) as usize));
        let overlap = (0..80isize)
            .filter(|&r| (0..80).contains(&(r + n)))
            .all(|r| dp.row(r as usize) == centred.row((r + n) as usize));
        translation += !(same_rows && overlap && dp.label == ann.label) as usize;

        // (b) intensity variation scales whole rows inside (startRT, endRT) only
        let varied = iv.apply(dp, ann, &mut rng);
        for r in 0..80 {
            let x = dp.rts[r];
            let (before, after) = (dp.row(r), varied.row(r));
            if ann.start_rt < x && x < ann.end_rt {
                scaled_rows += 1;
                let pos: Vec<usize> = (0..before.len()).filter(|&c| before[c] > 0.0).collect();
                if let Some(&b) = pos.first() {
                    for &c in &pos {
                        let want = before[c] / before[b];
                        let got = after[c] / after[b];
                        ratio += !rel_close(want, got, 1e-12) as usize;
                    }
                }
            } else {
                untouched += before
                    .iter()
                    .zip(after)
                    .any(|(p, q)| p.to_bits() != q.to_bits()) as usize;
            }
        }

        // (c) normalized values lie in [0, 1]
        for p in [normalize(dp), normalize(&varied)] {
            range += p.values.iter().any(|v| !(0.0..=1.0).contains(v)) as usize;
        }
    }
    check(
        translation + ratio + untouched + range == 0 && scaled_rows > 0,
        format!(
            "violations: translation {translation}, ratio {ratio}, outside-rows {untouched}, range {range} ({scaled_rows} scaled rows checked)"
        ),
    )
}

fn random_scan(rng: &mut ChaCha8Rng) -> ScanResult {
    let n = rng.random_range(1..=60);
    let mut labels = Vec::with_capacity(n);
    while labels.len() < n {
        let l = VocLabel(rng.random_range(0..=4));
        let run = rng.random_range(1..=15);
        labels.extend(std::iter::repeat_n(l, run));
    }
    labels.truncate(n);
    ScanResult {
        sample_id: "s".into(),
        delta: 80,
        confidences: (0..n).map(|_| rng.random_range(0.2..1.0)).collect(),
        rts: (0..n).map(|i| 1.0 + i as f64 * 0.01).collect(),
        labels,
    }
}

/// Every maximal constant run found by checking all `(i, j)` pairs.
fn duration_oracle(s: &ScanResult, gamma: usize) -> Vec<(u16, usize, usize, f64)> {
    let n = s.labels.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i..n {
            let l = s.labels[i];
            let constant = (i..=j).all(|k| s.labels[k] == l);
            let maximal = (i == 0 || s.labels[i - 1] != l) && (j + 1 == n || s.labels[j + 1] != l);
            if constant && maximal && l.0 > 0 && j - i + 1 >= gamma {
                let mut best = f64::NEG_INFINITY;
                for st in i..=j + 1 - gamma {
                    let mut sum = 0.0;
                    for k in st..st + gamma {
                        sum += s.confidences[k];
                    }
                    best = best.max(sum / gamma as f64);
                }
                out.push((l.0, i, j - i + 1, best));
            }
        }
    }
    out
}

fn random_detections(rng: &mut ChaCha8Rng) -> Vec<Detection> {
    let n = rng.random_range(0..=12);
    (0..n)
        .map(|i| {
            let s = rng.random_range(0..12) as f64 * 0.5;
            Detection {
                label: VocLabel(rng.random_range(1..=8)),
                start_index: i * 7,
                length: 20,
                start_rt: s,
                end_rt: s + 0.2,
                confidence: rng.random_range(0..5) as f64 * 0.2,
                sample_id: "s".into(),
            }
        })
        .collect()
}

/// Removal test by enumerating index triples of witnesses.
fn order_oracle(d: &[Detection]) -> Vec<Detection> {
    let removed = |f: &Detection| {
        let n = d.len();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let (a, b, c) = (&d[i], &d[j], &d[k]);
                    let distinct = a.label != b.label && b.label != c.label && a.label != c.label;
                    if !distinct {
                        continue;
                    }
                    let lower = [a, b, c].iter().all(|x| x.label < f.label && x.start_rt >= f.start_rt);
                    let higher = [a, b, c].iter().all(|x| x.label > f.label && x.start_rt <= f.start_rt);
                    if lower || higher {
                        return true;
                    }
                }
            }
        }
        false
    };
    d.iter().filter(|f| !removed(f)).cloned().collect()
}

fn uniqueness_oracle(d: &[Detection]) -> Vec<Detection> {
    let beats = |e: &Detection, x: &Detection| {
        e.confidence > x.confidence
            || (e.confidence == x.confidence && (e.start_rt < x.start_rt || (e.start_rt == x.start_rt && e.start_index < x.start_index)))
    };
    let mut out: Vec<Detection> = d
        .iter()
        .filter(|x| !d.iter().any(|e| e.label == x.label && beats(e, x)))
        .cloned()
        .collect();
    out.sort_by(|a, b| a.start_rt.total_cmp(&b.start_rt).then(a.label.cmp(&b.label)));
    out
}

fn c5_rule_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut dm, mut om, mut um) = (0, 0, 0);
    let mut found = 0usize;
    for _ in 0..10_000 {
        let s = random_scan(&mut rng);
        let gamma = rng.random_range(1..=12);
        let got: Vec<(u16, usize, usize, f64)> = duration_rule(&s, gamma)
            .map_err(|e| e.to_string())?
            .iter()
            .map(|d| {
                let ok_rt = d.start_rt == s.rts[d.start_index] && d.end_rt == s.rts[d.start_index + d.length - 1];
                (if ok_rt { d.label.0 } else { u16::MAX }, d.start_index, d.length, d.confidence)
            })
            .collect();
        let want = duration_oracle(&s, gamma);
        found += want.len();
        let same = got.len() == want.len()
            && got
                .iter()
                .zip(&want)
                .all(|(g, w)| (g.0, g.1, g.2) == (w.0, w.1, w.2) && (g.3 - w.3).abs() <= 1e-12);
        dm += !same as usize;
    }
    for _ in 0..10_000 {
        let d = random_detections(&mut rng);
        om += (order_rule(&d) != order_oracle(&d)) as usize;
    }
    for _ in 0..10_000 {
        let d = random_detections(&mut rng);
        um += (uniqueness_rule(&d) != uniqueness_oracle(&d)) as usize;
    }
    check(
        dm + om + um == 0,
        format!("mismatches: duration {dm}, order {om}, uniqueness {um} ({found} runs found)"),
    )
}

fn cross_entropy(net: &ConvNet, x: &[f64], label: usize) -> f64 {
    let z = net.logits(x).unwrap();
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    lse - z[label]
}

fn c6_gradient_check() -> Outcome {
    let cfg = ConvNetConfig { targets: 10, seed: 6, ..ConvNetConfig::default() };
    let net = ConvNet::init(80, 411, &cfg).map_err(|e| e.to_string())?;
    let groups = net.param_groups();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for trial in 0..10 {
        let x: Vec<f64> = (0..80 * 411).map(|_| rng.random::<f64>()).collect();
        let label = trial % 11;
        let (_, grad) = net.loss_and_gradient(&x, label).map_err(|e| e.to_string())?;
        // a random sample of every weight and bias group
        for (_, range) in &groups {
            for _ in 0..8 {
                let p = rng.random_range(range.clone());
                let mut params = net.params().to_vec();
                params[p] += h;
                let plus = cross_entropy(&net.with_params(params.clone()).unwrap(), &x, label);
                params[p] -= 2.0 * h;
                let minus = cross_entropy(&net.with_params(params).unwrap(), &x, label);
                let fd = (plus - minus) / (2.0 * h);
                let scale = fd.abs().max(grad[p].abs());
                if scale > 1e-8 {
                    worst = worst.max((fd - grad[p]).abs() / scale);
                    checked += 1;
                }
            }
        }
    }
    check(
        worst < 1e-4 && checked > 100,
        format!("max relative error {worst:.2e} over {checked} parameters of the 80 x 411 reference net"),
    )
}

fn c7_softmax() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut bad_sum, mut non_finite, mut shift) = (0, 0, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..100_000 {
        let n = rng.random_range(2..=31);
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let x: Vec<f64> = (0..n)
            .map(|_| match rng.random_range(0..10) {
                0 => 1e3,
                1 => -1e3,
                _ => rng.random_range(-1.0..1.0) * scale,
            })
            .collect();
        let p = softmax(&x);
        let sum: f64 = p.p().iter().sum();
        worst = worst.max((sum - 1.0).abs());
        bad_sum += ((sum - 1.0).abs() > 1e-9) as usize;
        non_finite += p.p().iter().any(|v| !v.is_finite()) as usize;
        let c = rng.random_range(-1e3..1e3);
        let moved: Vec<f64> = x.iter().map(|v| v + c).collect();
        shift += (softmax(&moved).argmax().0 != p.argmax().0) as usize;
    }
    let tie = softmax(&[0.0, 1.0, 1.0]);
    check(
        bad_sum + non_finite + shift == 0 && tie.argmax().0 == VocLabel(1),
        format!("bad sums {bad_sum} (worst {worst:.1e}), non-finite {non_finite}, argmax changes {shift}"),
    )
}

/// Labels every window by its argmax channel; enough to exercise the scanner.
struct ArgmaxChannel(ModelMeta);

impl ClassifierModel for ArgmaxChannel {
    fn meta(&self) -> &ModelMeta {
        &self.0
    }

    fn predict(&self, values: &[f64]) -> vocscan_core::Result<ProbVector> {
        let k = self.0.classes();
        let mut logits = vec![0.0; k];
        for (i, v) in values.iter().enumerate() {
            logits[i % k] += v;
        }
        Ok(softmax(&logits))
    }
}

fn c8_scanner() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut wrong_n = Vec::new();
    for _ in 0..50 {
        let delta = rng.random_range(2..=120);
        let rows = rng.random_range(delta..=delta + 400);
        let channels = 3;
        let axis = RtAxis::uniform(0.5, 0.01, rows).unwrap();
        let data = (0..rows * channels).map(|_| rng.random_range(0.0..100.0)).collect();
        let a = AbundanceMatrix::new(axis, channels, data).unwrap();
        let model = ArgmaxChannel(ModelMeta {
            targets: 4,
            delta,
            channels,
            kind: vocscan_core::classifier::ModelKind::Centroid,
        });
        let s = scan(&a, &model, delta).map_err(|e| e.to_string())?;
        let rts_ok = s.rts.iter().enumerate().all(|(i, &rt)| rt == a.axis().values()[i + delta / 2]);
        if s.len() != rows - delta + 1 || !rts_ok {
            wrong_n.push((rows, delta, s.len()));
        }
    }

    let cfg = SynthConfig { rows: 6000, ..SynthConfig::default() };
    let templates = default_template_set(10, &cfg);
    let net = ConvNet::init(80, 411, &ConvNetConfig { targets: 10, seed: 8, ..ConvNetConfig::default() })
        .map_err(|e| e.to_string())?;
    let mut differ = 0;
    for i in 0..5 {
        let presence: Vec<bool> = (0..10).map(|_| rng.random_bool(0.8)).collect();
        let (a, _) = synth_sample(&format!("p{i}"), &templates, &presence, &cfg.with_seed(800 + i)).unwrap();
        let serial = scan(&a, &net, 80).map_err(|e| e.to_string())?;
        let parallel = scan_with(&a, &net, 80, ScanOptions { workers: 4, chunk: 333 }).map_err(|e| e.to_string())?;
        let bits = |s: &ScanResult| s.confidences.iter().map(|c| c.to_bits()).collect::<Vec<_>>();
        differ += (serial.labels != parallel.labels || bits(&serial) != bits(&parallel) || serial.rts != parallel.rts)
            as usize;
    }
    check(
        wrong_n.is_empty() && differ == 0,
        format!("N mismatches {wrong_n:?}; {differ} of 5 samples differ between 1 and 4 workers"),
    )
}

/// Training settings of the synthetic end-to-end run.
const E2E_EPOCHS: usize = 5;
const E2E_NEGATIVE_RATIO: f64 = 1.0;

fn c9_end_to_end() -> Outcome {
    let t = Instant::now();
    let study = synth_study(&StudyConfig {
        synth: SynthConfig { rows: 6000, ..SynthConfig::default() },
        ..StudyConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let train: Vec<SampleData> = study
        .train
        .iter()
        .map(|s| SampleData { matrix: s.matrix.clone(), annotations: s.annotations.clone() })
        .collect();
    let set = AugmentedSet::build(&train, 80, AugmentConfig::shifts_only(), E2E_NEGATIVE_RATIO, 9)
        .map_err(|e| e.to_string())?;
    let cfg = ConvNetConfig { targets: 10, epochs: E2E_EPOCHS, seed: 9, ..ConvNetConfig::default() };
    let (net, report) = train_convnet(&set, &cfg).map_err(|e| e.to_string())?;
    let trained = t.elapsed();

    let ranges = RtRangeTable::from_annotations(train.iter().flat_map(|s| s.annotations.iter().map(|a| (a, 1))));
    let mut inputs = Vec::new();
    for s in &study.test {
        let result = scan(&s.matrix, &net, 80).map_err(|e| e.to_string())?;
        let stages = detect_stages(&result, 20).map_err(|e| e.to_string())?;
        inputs.push(SampleInput {
            sample_id: s.matrix.sample_id().to_string(),
            column_epoch: 1,
            run_minutes: s.matrix.axis().span(),
            detections: stages.records(),
            all: stages.all.iter().map(Detection::record).collect(),
            truth: s.annotations.clone(),
        });
    }
    let (r, _) = evaluate("reference", &inputs, &ranges, EvalOptions { targets: 10, rule: MatchRule::Overlap })
        .map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    let sens = r.metrics.expert_sensitivity.value().unwrap_or(0.0);
    let t_ = &r.tallies;
    check(
        sens >= 0.90 && t_.fp <= 2 && elapsed < Duration::from_secs(15 * 60),
        format!(
            "sensitivity {sens:.4}, certain FP {}, TP {} TTP {} FN {} TTN {}; {} training points, accuracy {:.4}; train {:.0} s, total {:.0} s",
            t_.fp,
            t_.tp,
            t_.ttp,
            t_.fn_,
            t_.ttn,
            set.len(),
            report.final_accuracy,
            trained.as_secs_f64(),
            elapsed.as_secs_f64()
        ),
    )
}

fn scored(c: f64, hit: bool, i: usize) -> Scored {
    Scored { confidence: c, sample_id: format!("s{i}"), start_rt: 1.0, hit }
}

fn c10_average_precision() -> Outcome {
    let mixed = average_precision(&[scored(0.9, true, 0), scored(0.8, false, 1), scored(0.7, true, 2)], 2).unwrap();
    let perfect = average_precision(&[scored(0.9, true, 0), scored(0.8, true, 1), scored(0.1, false, 2)], 2).unwrap();
    let zero = average_precision(&[scored(0.9, false, 0), scored(0.8, false, 1)], 2).unwrap();
    check(
        (mixed - 0.8333).abs() <= 1e-4 && perfect == 1.0 && zero == 0.0,
        format!("[TP, FP, TP] -> {mixed:.6}, perfect -> {perfect}, no hits -> {zero}"),
    )
}

fn c11_p_max() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let lo = rng.random_range(1.0..40.0);
        let hi = lo + rng.random_range(0.0..2.0);
        let s = rng.random_range(1.0..50.0);
        let e = s + rng.random_range(0.01..1.0);
        let r = rng.random_range(30.0..90.0);
        let mut ranges = RtRangeTable::default();
        ranges.insert(VocLabel(1), 1, RtInterval::new(lo, hi));
        let det = DetectionRecord { label: VocLabel(1), start_rt: s, end_rt: e, confidence: 1.0, sample_id: format!("{i}") };
        let got = p_max(&ranges, &[det], r).map_err(|e| e.to_string())?;
        let want = ((hi - lo) + (e - s)) / (r - (e - s));
        worst = worst.max((got - want).abs() / want.abs());
    }
    let det = DetectionRecord { label: VocLabel(1), start_rt: 2.0, end_rt: 3.5, confidence: 1.0, sample_id: "g".into() };
    let guard_eq = matches!(p_max(&RtRangeTable::default(), std::slice::from_ref(&det), 1.5), Err(Error::Contract(_)));
    let guard_lt = matches!(p_max(&RtRangeTable::default(), &[det], 1.0), Err(Error::Contract(_)));
    check(
        worst <= 1e-12 && guard_eq && guard_lt,
        format!("max relative error {worst:.1e}; guard raised for R = DI: {guard_eq}, R < DI: {guard_lt}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome); 11] = [
        (1, "sensitivity arithmetic", c1_sensitivity_tallies),
        (2, "specificity arithmetic", c2_specificity_tallies),
        (3, "augmentation counts", c3_augmentation_counts),
        (4, "augmentation invariants", c4_augmentation_invariants),
        (5, "rule oracles", c5_rule_oracles),
        (6, "gradient check", c6_gradient_check),
        (7, "softmax", c7_softmax),
        (8, "scanner arithmetic", c8_scanner),
        (9, "synthetic end-to-end", c9_end_to_end),
        (10, "average precision", c10_average_precision),
        (11, "p_max", c11_p_max),
    ];
    let wanted: BTreeSet<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, f) in criteria {
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {n:>2} {name}: {detail} [{secs:.1} s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {n:>2} {name}: {detail} [{secs:.1} s]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
