use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use vocscan_core::classifier::{train_centroid, train_convnet, TrainingReport};
use vocscan_core::dataset::{augmented_count, AugmentConfig, AugmentedSet, IntensityVariation, SampleData, TrainingSet};
use vocscan_core::detector::{detect_stages, write_chromatogram};
use vocscan_core::eval::{evaluate, intersect_models, intersect_stage_lists, EvalOptions, MatchRule, RtRangeTable, SampleInput};
use vocscan_core::ingest::cache::{read_dataset_file, CacheWriter};
use vocscan_core::ingest::{
    emit_detections, parse_detections, read_annotation_file, read_sample_file, write_annotation_file,
    write_sample_file, DetectionFormat, Manifest, Params, SampleEntry, Split, VocEntry,
};
use vocscan_core::scanner::write_scan_csv;
use vocscan_core::synth::{synth_study, StudyConfig, SynthConfig};
use vocscan_core::{scan_with, AbundanceMatrix, ConvNetConfig, GroundTruthAnnotation, ScanOptions, TrainedModel};

use crate::layout::{detections_in, Layout};
use crate::{Augment, AugmentArgs, Command, ModelChoice, Rule, RunConfig, SampleArgs};

pub fn run(cmd: &Command, run: &RunConfig, layout: &Layout) -> Result<()> {
    if run.workers == 0 {
        bail!(vocscan_core::Error::Config("--workers must be at least 1".into()));
    }
    fs::create_dir_all(&layout.out)
        .with_context(|| format!("creating output directory {}", layout.out.display()))?;
    match cmd {
        Command::Gen {
            templates,
            train,
            test,
            rows,
            channels,
            presence,
            background,
            background_presence,
            intensity_variants,
        } => {
            let study = StudyConfig {
                templates: *templates,
                train: *train,
                test: *test,
                presence: *presence,
                background: *background,
                background_presence: *background_presence,
                synth: SynthConfig {
                    rows: *rows,
                    channels: *channels,
                    seed: run.seed.unwrap_or(0),
                    ..SynthConfig::default()
                },
            };
            gen(&study, *intensity_variants, layout)
        }
        Command::Extract { augment } => extract(run, layout, augment),
        Command::Augment { augment, originals } => count(run, layout, augment, *originals),
        Command::Train {
            model,
            epochs,
            dataset,
            augment,
            net_config,
        } => train(run, layout, *model, *epochs, dataset.as_deref(), augment, net_config.as_deref()),
        Command::Scan { samples, model } => scan(run, layout, samples, model.as_deref()),
        Command::Detect {
            samples,
            model,
            gamma,
        } => detect(run, layout, samples, model.as_deref(), *gamma),
        Command::Eval { rule, intersect } => eval(run, layout, *rule, intersect),
        Command::Report { runs } => report(layout, runs),
    }
}

fn load_manifest(run: &RunConfig, layout: &Layout) -> Result<Manifest> {
    let mut m = Manifest::load(&layout.manifest)
        .with_context(|| format!("loading manifest {}", layout.manifest.display()))?;
    if let Some(seed) = run.seed {
        m.params.seed = seed;
    }
    Ok(m)
}

fn load_matrix(m: &Manifest, s: &SampleEntry) -> Result<AbundanceMatrix> {
    let path = m.resolve(&s.matrix);
    let a = read_sample_file(&path).with_context(|| format!("reading sample {}", path.display()))?;
    Ok(a.with_sample_id(&s.sample_id).with_column_epoch(s.column_epoch))
}

fn load_annotations(m: &Manifest, s: &SampleEntry) -> Result<Vec<GroundTruthAnnotation>> {
    let Some(rel) = &s.annotations else {
        bail!(vocscan_core::Error::Config(format!(
            "sample `{}` has no annotation file",
            s.sample_id
        )));
    };
    let path = m.resolve(rel);
    let anns = read_annotation_file(&path).with_context(|| format!("reading annotations {}", path.display()))?;
    if let Some(a) = anns.iter().find(|a| a.sample_id != s.sample_id) {
        bail!(vocscan_core::Error::Validation {
            what: "annotations",
            reason: format!(
                "{} lists sample `{}`, expected `{}`",
                path.display(),
                a.sample_id,
                s.sample_id
            ),
        });
    }
    Ok(anns)
}

fn training_samples(m: &Manifest) -> Result<Vec<SampleData>> {
    let out: Vec<SampleData> = m
        .samples_in(Split::Train)
        .map(|s| {
            Ok(SampleData {
                matrix: load_matrix(m, s)?,
                annotations: load_annotations(m, s)?,
            })
        })
        .collect::<Result<_>>()?;
    if out.is_empty() {
        bail!(vocscan_core::Error::Config("the manifest has no training samples".into()));
    }
    Ok(out)
}

fn selected<'a>(m: &'a Manifest, args: &SampleArgs) -> Result<Vec<&'a SampleEntry>> {
    if args.samples.is_empty() {
        return Ok(m.samples_in(Split::Test).collect());
    }
    args.samples
        .iter()
        .map(|id| {
            m.sample(id)
                .ok_or_else(|| vocscan_core::Error::Config(format!("no sample `{id}` in the manifest")).into())
        })
        .collect()
}

fn augment_config(p: &Params, args: &AugmentArgs) -> AugmentConfig {
    let choice = args.augment.unwrap_or(if p.intensity_variants > 0 {
        Augment::Full
    } else {
        Augment::Shifts
    });
    let shifts = match choice {
        Augment::None => vocscan_core::dataset::ShiftRange { min: 0, max: 0 },
        _ => p.shifts,
    };
    AugmentConfig {
        shifts,
        variants_per_shift: if choice == Augment::Full { p.intensity_variants } else { 0 },
        intensity: IntensityVariation {
            r_max: p.r_max,
            sigma_fraction: p.sigma_fraction,
        },
    }
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

/// Relative path from the manifest directory when possible.
fn relative_to(base: &Path, p: &Path) -> PathBuf {
    p.strip_prefix(base).map(Path::to_path_buf).unwrap_or_else(|_| p.to_path_buf())
}

fn gen(study: &StudyConfig, intensity_variants: usize, layout: &Layout) -> Result<()> {
    let s = synth_study(study)?;
    let base = layout.manifest.parent().unwrap_or(Path::new(".")).to_path_buf();
    let dir = layout.samples_dir();
    fs::create_dir_all(&dir)?;

    let mut entries = Vec::new();
    for (split, samples) in [(Split::Train, &s.train), (Split::Test, &s.test)] {
        for sample in samples {
            let id = sample.matrix.sample_id().to_string();
            // integer ion counts keep the files small and lossless
            let counts: Vec<f64> = sample.matrix.data().iter().map(|v| v.round()).collect();
            let a = AbundanceMatrix::new(sample.matrix.axis().clone(), sample.matrix.channels(), counts)?;
            let matrix = dir.join(format!("{id}.csv"));
            let ann = dir.join(format!("{id}.ann.csv"));
            write_sample_file(&matrix, &a)?;
            write_annotation_file(&ann, &sample.annotations)?;
            entries.push(SampleEntry {
                participant: format!("P-{id}"),
                sample_id: id,
                matrix: relative_to(&base, &matrix),
                annotations: Some(relative_to(&base, &ann)),
                column_epoch: 1,
                split,
            });
        }
    }
    let manifest = Manifest {
        params: Params {
            delta: study.synth.delta,
            targets: study.templates as u16,
            seed: study.synth.seed,
            intensity_variants,
            ..Params::default()
        },
        voc_table: s
            .templates
            .iter()
            .map(|t| VocEntry {
                label: t.label.0,
                name: format!("compound-{}", t.label.0),
            })
            .collect(),
        samples: entries,
        base_dir: base,
    };
    manifest.validate()?;
    manifest.save(&layout.manifest)?;
    write_json(&layout.templates(), &s.templates)?;
    log::info!(
        "wrote {} train and {} test samples to {}",
        s.train.len(),
        s.test.len(),
        dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct DatasetSummary {
    points: usize,
    positives: usize,
    negatives: usize,
    delta: usize,
    channels: usize,
    augment: AugmentConfig,
    negative_ratio: f64,
}

fn extract(run: &RunConfig, layout: &Layout, args: &AugmentArgs) -> Result<()> {
    let m = load_manifest(run, layout)?;
    let samples = training_samples(&m)?;
    let cfg = augment_config(&m.params, args);
    let set = AugmentedSet::build(&samples, m.params.delta, cfg, m.params.negative_ratio, m.params.seed)?;
    let mut w = CacheWriter::new(create(&layout.dataset())?, set.delta(), set.channels(), set.len() as u64)?;
    for i in 0..set.len() {
        w.push(&set.point(i))?;
    }
    w.finish()?.flush()?;
    let summary = DatasetSummary {
        points: set.len(),
        positives: set.positives(),
        negatives: set.len() - set.positives(),
        delta: set.delta(),
        channels: set.channels(),
        augment: cfg,
        negative_ratio: m.params.negative_ratio,
    };
    write_json(&layout.dataset_summary(), &summary)?;
    println!("{} points ({} positive) -> {}", summary.points, summary.positives, layout.dataset().display());
    Ok(())
}

fn count(run: &RunConfig, layout: &Layout, args: &AugmentArgs, originals: Option<usize>) -> Result<()> {
    let (params, originals) = match originals {
        Some(n) => (Params::default(), n),
        None => {
            let m = load_manifest(run, layout)?;
            let n = m
                .samples_in(Split::Train)
                .map(|s| load_annotations(&m, s).map(|a| a.len()))
                .sum::<Result<usize>>()?;
            (m.params, n)
        }
    };
    let cfg = augment_config(&params, args);
    println!(
        "{originals} originals x {} = {} augmented points",
        cfg.points_per_original(),
        augmented_count(originals, &cfg)
    );
    Ok(())
}

#[derive(Serialize)]
struct TrainingSummary {
    model: &'static str,
    points: usize,
    seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<TrainingReport>,
}

fn train(
    run: &RunConfig,
    layout: &Layout,
    choice: ModelChoice,
    epochs: usize,
    dataset: Option<&Path>,
    args: &AugmentArgs,
    net_config: Option<&Path>,
) -> Result<()> {
    let m = load_manifest(run, layout)?;
    let samples = training_samples(&m)?;
    let ranges = RtRangeTable::from_annotations(
        m.samples_in(Split::Train)
            .zip(&samples)
            .flat_map(|(e, s)| s.annotations.iter().map(move |a| (a, e.column_epoch))),
    );

    let cached;
    let lazy;
    let data: &dyn TrainingSet = match dataset {
        Some(p) => {
            cached = read_dataset_file(p).with_context(|| format!("reading dataset {}", p.display()))?;
            &cached
        }
        None => {
            let cfg = augment_config(&m.params, args);
            lazy = AugmentedSet::build(&samples, m.params.delta, cfg, m.params.negative_ratio, m.params.seed)?;
            &lazy
        }
    };
    log::info!("training on {} points", data.len());

    let start = Instant::now();
    let (model, report, name) = match choice {
        ModelChoice::Convnet => {
            let mut cfg = match net_config {
                Some(p) => toml::from_str::<ConvNetConfig>(&fs::read_to_string(p)?)
                    .map_err(|e| vocscan_core::Error::Config(format!("{}: {e}", p.display())))?,
                None => ConvNetConfig {
                    epochs,
                    ..ConvNetConfig::default()
                },
            };
            cfg.targets = m.params.targets;
            cfg.seed = m.params.seed;
            let (net, report) = train_convnet(data, &cfg)?;
            (TrainedModel::ConvNet(net), Some(report), "convnet")
        }
        ModelChoice::Centroid => (
            TrainedModel::Centroid(train_centroid(data, m.params.targets)?),
            None,
            "centroid",
        ),
    };
    let seconds = start.elapsed().as_secs_f64();
    model.save_file(&layout.model())?;
    write_json(&layout.ranges(), &ranges)?;
    write_json(
        &layout.training(),
        &TrainingSummary {
            model: name,
            points: data.len(),
            seconds,
            report,
        },
    )?;
    println!("trained {name} on {} points in {seconds:.1} s -> {}", data.len(), layout.model().display());
    Ok(())
}

fn load_model(layout: &Layout, path: Option<&Path>) -> Result<TrainedModel> {
    let p = path.map(Path::to_path_buf).unwrap_or_else(|| layout.model());
    TrainedModel::load_file(&p).with_context(|| format!("loading model {}", p.display()))
}

fn scan(run: &RunConfig, layout: &Layout, args: &SampleArgs, model: Option<&Path>) -> Result<()> {
    let m = load_manifest(run, layout)?;
    let model = load_model(layout, model)?;
    let opts = ScanOptions {
        workers: run.workers,
        ..ScanOptions::default()
    };
    let mut timing = csv::Writer::from_writer(create(&layout.timing())?);
    timing.write_record(["sample_id", "rows", "channels", "windows", "workers", "seconds"])?;
    for s in selected(&m, args)? {
        let a = load_matrix(&m, s)?;
        let t = Instant::now();
        let result = scan_with(&a, model.as_model(), model.as_model().meta().delta, opts)?;
        let secs = t.elapsed().as_secs_f64();
        write_scan_csv(&result, create(&layout.scan_dump(&s.sample_id))?)?;
        timing.write_record([
            s.sample_id.clone(),
            a.rows().to_string(),
            a.channels().to_string(),
            result.len().to_string(),
            run.workers.to_string(),
            format!("{secs:.3}"),
        ])?;
        println!("{}: {} windows in {secs:.2} s", s.sample_id, result.len());
    }
    timing.flush()?;
    Ok(())
}

/// Facts about a scanned sample that evaluation needs without re-reading it.
#[derive(Debug, Serialize, Deserialize)]
struct DetectionMeta {
    sample_id: String,
    rows: usize,
    run_minutes: f64,
    gamma: usize,
}

fn detect(
    run: &RunConfig,
    layout: &Layout,
    args: &SampleArgs,
    model: Option<&Path>,
    gamma: Option<usize>,
) -> Result<()> {
    let m = load_manifest(run, layout)?;
    let model = load_model(layout, model)?;
    let gamma = gamma.unwrap_or(m.params.gamma);
    let opts = ScanOptions {
        workers: run.workers,
        ..ScanOptions::default()
    };
    for s in selected(&m, args)? {
        let a = load_matrix(&m, s)?;
        let result = scan_with(&a, model.as_model(), model.as_model().meta().delta, opts)?;
        let stages = detect_stages(&result, gamma)?;
        let records = stages.records();
        let all: Vec<_> = stages.all.iter().map(|d| d.record()).collect();
        let id = &s.sample_id;
        emit_detections(&records, DetectionFormat::Csv, create(&layout.detections(id, "csv"))?)?;
        emit_detections(&records, DetectionFormat::Json, create(&layout.detections(id, "json"))?)?;
        emit_detections(&all, DetectionFormat::Csv, create(&layout.detections(id, "all.csv"))?)?;
        write_chromatogram(&a, &records, create(&layout.detections(id, "chrom.csv"))?)?;
        write_json(
            &layout.detections(id, "meta.json"),
            &DetectionMeta {
                sample_id: id.clone(),
                rows: a.rows(),
                run_minutes: a.axis().span(),
                gamma,
            },
        )?;
        println!("{id}: {} detections ({} before order and uniqueness rules)", records.len(), all.len());
    }
    Ok(())
}

fn read_detections(path: &Path) -> Result<Vec<vocscan_core::DetectionRecord>> {
    let f = File::open(path).with_context(|| format!("opening {} (run `detect` first)", path.display()))?;
    parse_detections(f, DetectionFormat::Csv).with_context(|| format!("parsing {}", path.display()))
}

fn eval(run: &RunConfig, layout: &Layout, rule: Rule, intersect: &[PathBuf]) -> Result<()> {
    let m = load_manifest(run, layout)?;
    if intersect.len() == 1 {
        bail!(vocscan_core::Error::Config("--intersect needs at least two runs".into()));
    }
    let ranges: RtRangeTable = match fs::read_to_string(layout.ranges()) {
        Ok(text) => serde_json::from_str(&text).context("parsing ranges.json")?,
        Err(_) => {
            log::warn!("no ranges.json; deriving retention-time ranges from the training annotations");
            let mut anns = Vec::new();
            for s in m.samples_in(Split::Train) {
                anns.extend(load_annotations(&m, s)?.into_iter().map(|a| (a, s.column_epoch)));
            }
            RtRangeTable::from_annotations(anns.iter().map(|(a, e)| (a, *e)))
        }
    };
    let runs: Vec<PathBuf> = if intersect.is_empty() {
        vec![layout.out.clone()]
    } else {
        intersect.to_vec()
    };

    let mut inputs = Vec::new();
    for s in m.samples_in(Split::Test) {
        let id = &s.sample_id;
        let meta_path = detections_in(&runs[0], id, "meta.json");
        let meta: DetectionMeta = serde_json::from_str(
            &fs::read_to_string(&meta_path).with_context(|| format!("reading {}", meta_path.display()))?,
        )?;
        let mut finals = Vec::new();
        let mut alls = Vec::new();
        for r in &runs {
            finals.push(read_detections(&detections_in(r, id, "csv"))?);
            alls.push(read_detections(&detections_in(r, id, "all.csv"))?);
        }
        let (detections, all) = if runs.len() > 1 {
            (intersect_models(&finals)?, intersect_stage_lists(&alls)?)
        } else {
            (finals.remove(0), alls.remove(0))
        };
        inputs.push(SampleInput {
            sample_id: id.clone(),
            column_epoch: s.column_epoch,
            run_minutes: meta.run_minutes,
            detections,
            all,
            truth: load_annotations(&m, s)?,
        });
    }
    if inputs.is_empty() {
        bail!(vocscan_core::Error::Config("the manifest has no test samples".into()));
    }
    let name = runs
        .iter()
        .map(|r| r.display().to_string())
        .collect::<Vec<_>>()
        .join(" & ");
    let opts = EvalOptions {
        targets: m.params.targets,
        rule: match rule {
            Rule::Overlap => MatchRule::Overlap,
            Rule::PeakInDi => MatchRule::PeakInDi,
        },
    };
    let (report, curves) = evaluate(&name, &inputs, &ranges, opts)?;
    write_json(&layout.eval_json(), &report)?;
    let table = report.to_table();
    fs::write(layout.eval_table(), &table)?;

    let mut w = csv::Writer::from_writer(create(&layout.pr_curves())?);
    w.write_record(["benchmark", "label", "rank", "precision", "recall"])?;
    for (bench, map) in [("expert", &curves.expert), ("corrected", &curves.corrected)] {
        for (label, points) in map {
            for p in points {
                w.write_record([
                    bench.to_string(),
                    label.to_string(),
                    p.rank.to_string(),
                    p.precision.to_string(),
                    p.recall.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    print!("{table}");
    Ok(())
}

#[derive(Deserialize)]
struct TimingRow {
    sample_id: String,
    rows: usize,
    windows: usize,
    seconds: f64,
}

fn report(layout: &Layout, others: &[PathBuf]) -> Result<()> {
    use std::fmt::Write as _;
    let mut runs = vec![layout.out.clone()];
    runs.extend(others.iter().cloned());
    let mut s = String::new();
    let mut rows: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let keys = [
        "expert_sensitivity",
        "corrected_sensitivity",
        "expert_specificity",
        "corrected_specificity",
        "expert_map",
        "corrected_map",
    ];
    for r in &runs {
        let path = r.join("eval.json");
        let text = fs::read_to_string(&path).with_context(|| format!("reading {} (run `eval` first)", path.display()))?;
        let v: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let cell = |x: &serde_json::Value| match x.as_f64() {
            Some(f) => format!("{f:.4}"),
            None => x.as_str().unwrap_or("-").to_string(),
        };
        for k in keys {
            rows.entry(k.to_string()).or_default().push(cell(&v["metrics"][k]));
        }
        for k in ["tp", "ttp", "fp", "ttn", "fn", "tn", "fp_star", "ttp_star"] {
            rows.entry(format!("tally {k}")).or_default().push(cell(&v["tallies"][k]));
        }
        rows.entry("p_max".into()).or_default().push(cell(&v["p_max"]));
    }
    let _ = write!(s, "{:<24}", "");
    for r in &runs {
        let _ = write!(s, "{:>16}", r.file_name().map_or_else(|| r.display().to_string(), |n| n.to_string_lossy().into()));
    }
    let _ = writeln!(s);
    for (k, cells) in &rows {
        let _ = write!(s, "{k:<24}");
        for c in cells {
            let _ = write!(s, "{c:>16}");
        }
        let _ = writeln!(s);
    }

    if let Ok(text) = fs::read_to_string(layout.training()) {
        let v: serde_json::Value = serde_json::from_str(&text)?;
        let _ = writeln!(
            s,
            "\ntraining: {} on {} points, {:.1} s",
            v["model"].as_str().unwrap_or("?"),
            v["points"],
            v["seconds"].as_f64().unwrap_or(f64::NAN)
        );
        if let Some(acc) = v["report"]["final_accuracy"].as_f64() {
            let _ = writeln!(s, "training accuracy {acc:.4}");
        }
    }
    if let Ok(mut rdr) = csv::Reader::from_path(layout.timing()) {
        let timing: Vec<TimingRow> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
        if !timing.is_empty() {
            let total: f64 = timing.iter().map(|t| t.seconds).sum();
            let slowest = timing
                .iter()
                .max_by(|a, b| a.seconds.total_cmp(&b.seconds))
                .expect("non-empty");
            let _ = writeln!(
                s,
                "scan: {} samples, mean {:.2} s per sample, slowest {} ({} rows, {} windows, {:.2} s)",
                timing.len(),
                total / timing.len() as f64,
                slowest.sample_id,
                slowest.rows,
                slowest.windows,
                slowest.seconds
            );
        }
    }
    fs::write(layout.report(), &s)?;
    print!("{s}");
    Ok(())
}
