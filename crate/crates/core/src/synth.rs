//! Synthetic GC-MS samples with known ground truth.
//!
//! Each present compound contributes a symmetric Gaussian elution profile to
//! its ion channels:
//!
//! `a * rel(ch) * exp(-(rt - c)^2 / (2 sigma^2))`
//!
//! on top of a flat baseline with Gaussian noise clipped at zero.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::TRANSLATION_SLACK;
use crate::error::{Error, Result};
use crate::matrix::{
    AbundanceMatrix, GroundTruthAnnotation, RtAxis, VocLabel, DEFAULT_CHANNELS, DEFAULT_DELTA,
};
use crate::seed;

/// An eluting compound. Label 0 marks a background compound: it adds signal
/// but no annotation, like the many non-target VOCs of a real breath run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocTemplate {
    pub label: VocLabel,
    /// `(channel index, relative abundance)`, maximum abundance 1.
    pub ion_pattern: Vec<(usize, f64)>,
    /// Range the elution centre is drawn from, minutes.
    pub rt_center_range: (f64, f64),
    /// Gaussian width of the elution profile, minutes.
    pub elution_sigma: f64,
    pub amplitude_range: (f64, f64),
}

impl VocTemplate {
    /// Channels sorted by decreasing abundance.
    pub fn top_ions(&self, n: usize) -> Vec<usize> {
        let mut ions = self.ion_pattern.clone();
        ions.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ions.into_iter().take(n).map(|(c, _)| c).collect()
    }

    fn validate(&self, cfg: &SynthConfig) -> Result<()> {
        let what = "voc template";
        let max = self
            .ion_pattern
            .iter()
            .map(|&(_, r)| r)
            .fold(f64::NEG_INFINITY, f64::max);
        if self.ion_pattern.is_empty() || (max - 1.0).abs() > 1e-12 {
            return Err(Error::validation(
                what,
                format!("label {}: relative abundances must peak at 1", self.label),
            ));
        }
        if let Some(&(c, r)) = self
            .ion_pattern
            .iter()
            .find(|&&(c, r)| c >= cfg.channels || !(r > 0.0 && r <= 1.0))
        {
            return Err(Error::validation(
                what,
                format!("label {}: ion ({c}, {r}) out of range", self.label),
            ));
        }
        if !(self.elution_sigma > 0.0) {
            return Err(Error::validation(what, "elution sigma must be positive"));
        }
        let elution_rows = 6.0 * self.elution_sigma / cfg.rt_step;
        let limit = cfg.delta.saturating_sub(TRANSLATION_SLACK) as f64;
        if elution_rows > limit {
            return Err(Error::validation(
                what,
                format!(
                    "label {}: elution spans {elution_rows:.1} rows, more than delta - {TRANSLATION_SLACK} = {limit}",
                    self.label
                ),
            ));
        }
        let (lo, hi) = self.rt_center_range;
        let first = cfg.rt_start;
        let last = cfg.rt_start + cfg.rt_step * (cfg.rows - 1) as f64;
        if !(lo <= hi && lo - 3.0 * self.elution_sigma >= first && hi + 3.0 * self.elution_sigma <= last)
        {
            return Err(Error::validation(
                what,
                format!(
                    "label {}: centre range [{lo}, {hi}] +- 3 sigma leaves the axis [{first}, {last}]",
                    self.label
                ),
            ));
        }
        let (amin, amax) = self.amplitude_range;
        if !(amin > 0.0 && amin <= amax) {
            return Err(Error::validation(what, "amplitude range must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub rows: usize,
    pub channels: usize,
    pub rt_start: f64,
    /// Minutes per row.
    pub rt_step: f64,
    pub baseline: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Window height the samples are meant for; bounds the elution width.
    pub delta: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            rows: 22_500,
            channels: DEFAULT_CHANNELS,
            rt_start: 0.5,
            // 6.25 Hz scan rate
            rt_step: 1.0 / 375.0,
            baseline: 100.0,
            noise_sigma: 10.0,
            seed: 0,
            delta: DEFAULT_DELTA,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rows < self.delta || self.delta < 2 {
            return Err(Error::Config(format!(
                "{} rows cannot hold a window of {} rows",
                self.rows, self.delta
            )));
        }
        if self.channels == 0 || !(self.rt_step > 0.0) {
            return Err(Error::Config("channels and rt_step must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.baseline >= 0.0) {
            return Err(Error::Config("noise_sigma and baseline must be non-negative".into()));
        }
        Ok(())
    }

    pub fn axis(&self) -> Result<RtAxis> {
        RtAxis::uniform(self.rt_start, self.rt_step, self.rows)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

/// The parameters drawn for one eluting compound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakInstance {
    pub label: VocLabel,
    pub center: f64,
    pub amplitude: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone)]
pub struct SynthSample {
    pub matrix: AbundanceMatrix,
    pub annotations: Vec<GroundTruthAnnotation>,
    pub peaks: Vec<PeakInstance>,
}

/// Generates one sample, returning the drawn peak parameters as well.
pub fn synth_sample_detailed(
    sample_id: &str,
    templates: &[VocTemplate],
    presence: &[bool],
    cfg: &SynthConfig,
) -> Result<SynthSample> {
    cfg.validate()?;
    if templates.len() != presence.len() {
        return Err(Error::Config(format!(
            "{} templates but {} presence flags",
            templates.len(),
            presence.len()
        )));
    }
    let mut seen = std::collections::HashSet::new();
    for t in templates.iter().zip(presence).filter(|(_, &p)| p).map(|(t, _)| t) {
        if !t.label.is_negative() && !seen.insert(t.label) {
            return Err(Error::Config(format!(
                "label {} would elute twice in one sample",
                t.label
            )));
        }
        t.validate(cfg)?;
    }

    let axis = cfg.axis()?;
    let rts = axis.values();
    let c = cfg.channels;
    let mut rng = seed::rng(cfg.seed, "synth", 0);
    let mut data = vec![0.0; cfg.rows * c];
    let mut peaks = Vec::new();
    let mut annotations = Vec::new();

    for t in templates.iter().zip(presence).filter(|(_, &p)| p).map(|(t, _)| t) {
        let (lo, hi) = t.rt_center_range;
        let center = if hi > lo { rng.random_range(lo..hi) } else { lo };
        let (amin, amax) = t.amplitude_range;
        let amplitude = if amax > amin { rng.random_range(amin..amax) } else { amin };
        let two_var = 2.0 * t.elution_sigma * t.elution_sigma;
        for (r, &rt) in rts.iter().enumerate() {
            let d = rt - center;
            let g = (-(d * d) / two_var).exp();
            if g == 0.0 {
                continue;
            }
            let row = &mut data[r * c..(r + 1) * c];
            for &(ch, rel) in &t.ion_pattern {
                row[ch] += amplitude * rel * g;
            }
        }
        peaks.push(PeakInstance {
            label: t.label,
            center,
            amplitude,
            sigma: t.elution_sigma,
        });
        if t.label.is_negative() {
            continue;
        }
        annotations.push(GroundTruthAnnotation::new(
            sample_id,
            t.label,
            center - 3.0 * t.elution_sigma,
            center,
            center + 3.0 * t.elution_sigma,
        )?);
    }

    if cfg.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
        for v in data.iter_mut() {
            *v = (*v + cfg.baseline + noise.sample(&mut rng)).max(0.0);
        }
    } else if cfg.baseline > 0.0 {
        data.iter_mut().for_each(|v| *v += cfg.baseline);
    }

    annotations.sort_by(|a, b| a.peak_rt.total_cmp(&b.peak_rt));
    let matrix = AbundanceMatrix::new(axis, c, data)?.with_sample_id(sample_id);
    Ok(SynthSample {
        matrix,
        annotations,
        peaks,
    })
}

pub fn synth_sample(
    sample_id: &str,
    templates: &[VocTemplate],
    presence: &[bool],
    cfg: &SynthConfig,
) -> Result<(AbundanceMatrix, Vec<GroundTruthAnnotation>)> {
    let s = synth_sample_detailed(sample_id, templates, presence, cfg)?;
    Ok((s.matrix, s.annotations))
}

/// Amplitudes of ordinary and low-concentration compounds.
const AMPLITUDE: (f64, f64) = (2000.0, 6000.0);
const LOW_AMPLITUDE: (f64, f64) = (300.0, 500.0);
const SHARED_ABUNDANCES: [f64; 3] = [1.0, 0.85, 0.7];

/// `k` templates spread in elution order over the axis, with the confounders:
///
/// * labels 1 and 2 share their three most abundant ions,
/// * label 3 (when `k >= 3`) is a low-amplitude compound,
/// * the last two labels (when `k >= 4`) have intersecting centre ranges.
pub fn default_template_set(k: usize, cfg: &SynthConfig) -> Vec<VocTemplate> {
    let k = k.max(1);
    let sigma = 6.0 * cfg.rt_step;
    let margin = (cfg.delta + 30) as f64 * cfg.rt_step;
    let first = cfg.rt_start + margin;
    let last = cfg.rt_start + cfg.rt_step * (cfg.rows.saturating_sub(1)) as f64 - margin;
    let slot = (last - first) / k as f64;
    let half = (0.2 * slot).min(0.25);

    let mut rng = seed::rng(cfg.seed, "templates", k as u64);
    let c = cfg.channels;
    let shared: Vec<usize> = index::sample(&mut rng, c, 3.min(c)).into_vec();
    let mut used: std::collections::HashSet<usize> = shared.iter().copied().collect();

    let mut fresh = |rng: &mut rand_chacha::ChaCha8Rng, n: usize| -> Vec<usize> {
        let mut out = Vec::new();
        let mut tries = 0;
        while out.len() < n && tries < 50 * n + 50 {
            tries += 1;
            let ch = rng.random_range(0..c);
            if used.len() >= c || used.insert(ch) {
                out.push(ch);
            }
        }
        out
    };

    let mut templates = Vec::with_capacity(k);
    for j in 0..k {
        let label = VocLabel(j as u16 + 1);
        let ion_pattern: Vec<(usize, f64)> = if j < 2 && k >= 2 {
            let mut ions: Vec<(usize, f64)> =
                shared.iter().copied().zip(SHARED_ABUNDANCES).collect();
            let extra = fresh(&mut rng, 4);
            ions.extend(extra.into_iter().map(|ch| (ch, rng.random_range(0.3..0.6))));
            ions
        } else {
            let n = rng.random_range(5..=9);
            let chans = fresh(&mut rng, n);
            let mut ions: Vec<(usize, f64)> = chans
                .into_iter()
                .map(|ch| (ch, rng.random_range(0.1..1.0)))
                .collect();
            if let Some(first) = ions.first_mut() {
                first.1 = 1.0;
            }
            ions
        };

        let centre = first + (j as f64 + 0.5) * slot;
        let mut range = (centre - half, centre + half);
        if k >= 4 && j + 2 >= k {
            let boundary = first + (k - 1) as f64 * slot;
            let shifted = if j + 2 == k {
                boundary - 0.9 * half
            } else {
                boundary + 0.9 * half
            };
            range = (shifted - half, shifted + half);
        }

        let amplitude_range = if j == 2 { LOW_AMPLITUDE } else { AMPLITUDE };
        templates.push(VocTemplate {
            label,
            ion_pattern,
            rt_center_range: range,
            elution_sigma: sigma,
            amplitude_range,
        });
    }
    templates
}

const BACKGROUND_AMPLITUDE: (f64, f64) = (1000.0, 5000.0);

/// `n` unannotated background compounds (label 0) with random ion patterns
/// over all channels, elution widths of 4 to 7 rows per sigma and centres
/// anywhere on the axis, so they may co-elute with targets.
pub fn background_template_set(n: usize, cfg: &SynthConfig) -> Vec<VocTemplate> {
    let mut rng = seed::rng(cfg.seed, "background", n as u64);
    let first = cfg.rt_start;
    let last = cfg.rt_start + cfg.rt_step * cfg.rows.saturating_sub(1) as f64;
    let half = 0.05;
    (0..n)
        .map(|_| {
            let sigma = rng.random_range(4.0..7.0) * cfg.rt_step;
            let lo = first + 3.0 * sigma + half;
            let hi = (last - 3.0 * sigma - half).max(lo);
            let centre = if hi > lo { rng.random_range(lo..hi) } else { lo };
            let ions = rng.random_range(4..=8).min(cfg.channels);
            let mut ion_pattern: Vec<(usize, f64)> = index::sample(&mut rng, cfg.channels, ions)
                .into_iter()
                .map(|ch| (ch, rng.random_range(0.1..1.0)))
                .collect();
            ion_pattern[0].1 = 1.0;
            VocTemplate {
                label: VocLabel::NEGATIVE,
                ion_pattern,
                rt_center_range: (centre - half, centre + half),
                elution_sigma: sigma,
                amplitude_range: BACKGROUND_AMPLITUDE,
            }
        })
        .collect()
}

/// Layout of a synthetic study: how many samples of each split to draw and
/// how likely each compound is to be present in a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub templates: usize,
    pub train: usize,
    pub test: usize,
    pub presence: f64,
    /// Size of the background compound library.
    pub background: usize,
    /// Probability that a background compound is present in a sample.
    pub background_presence: f64,
    pub synth: SynthConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            templates: 10,
            train: 30,
            test: 10,
            presence: 0.8,
            background: 20,
            background_presence: 0.5,
            synth: SynthConfig::default(),
        }
    }
}

/// A generated study; sample ids are `train-NN` and `test-NN`.
#[derive(Debug, Clone)]
pub struct SynthStudy {
    /// Target compounds only; the background is not listed.
    pub templates: Vec<VocTemplate>,
    pub train: Vec<SynthSample>,
    pub test: Vec<SynthSample>,
}

/// Draws templates, background compounds and samples from `cfg.synth.seed`.
/// Presence of each compound is an independent coin flip per sample; a sample's matrix
/// depends only on the study seed and its id.
pub fn synth_study(cfg: &StudyConfig) -> Result<SynthStudy> {
    for p in [cfg.presence, cfg.background_presence] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("presence probability {p} is outside [0, 1]")));
        }
    }
    let templates = default_template_set(cfg.templates, &cfg.synth);
    let mut compounds = templates.clone();
    compounds.extend(background_template_set(cfg.background, &cfg.synth));
    let split = |name: &str, n: usize| -> Result<Vec<SynthSample>> {
        (0..n)
            .map(|i| {
                let id = format!("{name}-{:02}", i + 1);
                let key = seed::key_index(&id);
                let mut rng = seed::rng(cfg.synth.seed, "presence", key);
                let presence: Vec<bool> = compounds
                    .iter()
                    .map(|t| {
                        let p = if t.label.is_negative() { cfg.background_presence } else { cfg.presence };
                        rng.random_bool(p)
                    })
                    .collect();
                let sc = cfg.synth.with_seed(seed::derive(cfg.synth.seed, "sample", key));
                synth_sample_detailed(&id, &compounds, &presence, &sc)
            })
            .collect()
    };
    Ok(SynthStudy {
        train: split("train", cfg.train)?,
        test: split("test", cfg.test)?,
        templates,
    })
}
