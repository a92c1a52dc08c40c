use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::matrix::{AbundanceMatrix, GroundTruthAnnotation, VocLabel};
use crate::seed;

use super::augment::shifted_start;
use super::{normalize_values, sample_negative_starts, AugmentConfig, DataPoint, LabeledDataset};

/// Indexed source of normalized training points.
pub trait TrainingSet: Sync {
    fn len(&self) -> usize;
    fn delta(&self) -> usize;
    fn channels(&self) -> usize;
    fn label(&self, index: usize) -> VocLabel;
    fn point(&self, index: usize) -> Cow<'_, DataPoint>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl TrainingSet for LabeledDataset {
    fn len(&self) -> usize {
        self.points.len()
    }

    fn delta(&self) -> usize {
        self.points.first().map_or(0, DataPoint::delta)
    }

    fn channels(&self) -> usize {
        self.points.first().map_or(0, |p| p.channels)
    }

    fn label(&self, index: usize) -> VocLabel {
        self.points[index].label
    }

    fn point(&self, index: usize) -> Cow<'_, DataPoint> {
        Cow::Borrowed(&self.points[index])
    }
}

/// A training sample with its expert annotations.
#[derive(Debug, Clone)]
pub struct SampleData {
    pub matrix: AbundanceMatrix,
    pub annotations: Vec<GroundTruthAnnotation>,
}

#[derive(Debug, Clone, Copy)]
enum Recipe {
    Voc {
        sample: u32,
        ann: u32,
        start: usize,
        shift: i32,
        variant: u32,
    },
    Negative {
        sample: u32,
        start: usize,
    },
}

/// Augmented dataset whose points are cut from the source matrices on
/// demand. Memory stays proportional to the matrices, not to the number of
/// augmented points; every point is reproducible from the run seed.
pub struct AugmentedSet<'a> {
    samples: &'a [SampleData],
    delta: usize,
    channels: usize,
    cfg: AugmentConfig,
    seed: u64,
    recipes: Vec<Recipe>,
}

impl<'a> AugmentedSet<'a> {
    /// Every annotation contributes `cfg.points_per_original()` points; each
    /// sample contributes `round(negative_ratio * positives)` negatives.
    pub fn build(
        samples: &'a [SampleData],
        delta: usize,
        cfg: AugmentConfig,
        negative_ratio: f64,
        seed: u64,
    ) -> Result<Self> {
        let channels = samples.first().map_or(0, |s| s.matrix.channels());
        let mut recipes = Vec::new();
        for (si, s) in samples.iter().enumerate() {
            if s.matrix.channels() != channels {
                return Err(Error::Contract(format!(
                    "sample {} has {} channels, expected {channels}",
                    s.matrix.sample_id(),
                    s.matrix.channels()
                )));
            }
            let mut positives = 0usize;
            for (ai, ann) in s.annotations.iter().enumerate() {
                for shift in cfg.shifts.iter() {
                    let start = shifted_start(&s.matrix, ann, delta, shift)?;
                    for variant in 0..=cfg.variants_per_shift as u32 {
                        recipes.push(Recipe::Voc {
                            sample: si as u32,
                            ann: ai as u32,
                            start,
                            shift,
                            variant,
                        });
                        positives += 1;
                    }
                }
            }
            let count = (negative_ratio * positives as f64).round() as usize;
            let mut rng = seed::rng(seed, "negatives", seed::key_index(s.matrix.sample_id()));
            for start in sample_negative_starts(&s.matrix, &s.annotations, count, delta, &mut rng)? {
                recipes.push(Recipe::Negative {
                    sample: si as u32,
                    start,
                });
            }
        }
        Ok(Self {
            samples,
            delta,
            channels,
            cfg,
            seed,
            recipes,
        })
    }

    pub fn materialize(&self) -> LabeledDataset {
        LabeledDataset::new((0..self.len()).map(|i| self.point(i).into_owned()).collect())
    }

    fn variant_rng(&self, sample: u32, ann: u32, shift: i32, variant: u32) -> rand_chacha::ChaCha8Rng {
        let id = self.samples[sample as usize].matrix.sample_id();
        let base = seed::derive(self.seed, "intensity", seed::key_index(id));
        let item = ((ann as u64) << 32) ^ (((shift as i64 + 1024) as u64) << 16) ^ variant as u64;
        seed::rng(base, "intensity-item", item)
    }

    /// Un-normalized point for a recipe.
    fn raw_point(&self, index: usize) -> DataPoint {
        match self.recipes[index] {
            Recipe::Voc {
                sample,
                ann,
                start,
                shift,
                variant,
            } => {
                let s = &self.samples[sample as usize];
                let a = &s.annotations[ann as usize];
                let dp = DataPoint::from_window(&s.matrix, start, self.delta, a.label, shift)
                    .expect("recipe validated at build time");
                if variant == 0 {
                    dp
                } else {
                    let mut rng = self.variant_rng(sample, ann, shift, variant);
                    let mut out = self.cfg.intensity.apply(&dp, a, &mut rng);
                    out.provenance.variant = variant;
                    out
                }
            }
            Recipe::Negative { sample, start } => DataPoint::from_window(
                &self.samples[sample as usize].matrix,
                start,
                self.delta,
                VocLabel::NEGATIVE,
                0,
            )
            .expect("negative start drawn from valid windows"),
        }
    }

    pub fn positives(&self) -> usize {
        self.recipes
            .iter()
            .filter(|r| matches!(r, Recipe::Voc { .. }))
            .count()
    }
}

impl TrainingSet for AugmentedSet<'_> {
    fn len(&self) -> usize {
        self.recipes.len()
    }

    fn delta(&self) -> usize {
        self.delta
    }

    fn channels(&self) -> usize {
        self.channels
    }

    fn label(&self, index: usize) -> VocLabel {
        match self.recipes[index] {
            Recipe::Voc { sample, ann, .. } => {
                self.samples[sample as usize].annotations[ann as usize].label
            }
            Recipe::Negative { .. } => VocLabel::NEGATIVE,
        }
    }

    fn point(&self, index: usize) -> Cow<'_, DataPoint> {
        let mut dp = self.raw_point(index);
        normalize_values(&mut dp.values);
        dp.normalized = true;
        Cow::Owned(dp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::RtAxis;

    fn sample(id: &str) -> SampleData {
        let rows = 1000;
        let channels = 4;
        let axis = RtAxis::uniform(0.5, 0.01, rows).unwrap();
        let data = (0..rows * channels)
            .map(|i| ((i * 7919) % 101) as f64)
            .collect();
        let matrix = AbundanceMatrix::new(axis, channels, data)
            .unwrap()
            .with_sample_id(id);
        let rts = matrix.axis().values().to_vec();
        let annotations = vec![
            GroundTruthAnnotation::new(id, VocLabel(1), rts[100], rts[110], rts[120]).unwrap(),
            GroundTruthAnnotation::new(id, VocLabel(2), rts[250], rts[255], rts[262]).unwrap(),
        ];
        SampleData {
            matrix,
            annotations,
        }
    }

    #[test]
    fn sizes_and_balance() {
        let samples = vec![sample("a"), sample("b")];
        let set = AugmentedSet::build(&samples, 80, AugmentConfig::default(), 1.0, 3).unwrap();
        assert_eq!(set.positives(), 2 * 2 * 100);
        assert_eq!(set.len(), 800);
        let ds = set.materialize();
        assert_eq!(ds.negative_fraction(), 0.5);
        assert!(ds
            .points
            .iter()
            .all(|p| p.normalized && p.values.iter().all(|v| (0.0..=1.0).contains(v))));
    }

    #[test]
    fn points_are_reproducible() {
        let samples = vec![sample("a")];
        let one = AugmentedSet::build(&samples, 80, AugmentConfig::default(), 1.0, 11).unwrap();
        let two = AugmentedSet::build(&samples, 80, AugmentConfig::default(), 1.0, 11).unwrap();
        for i in [0, 3, 57, 199, 250] {
            assert_eq!(one.point(i), two.point(i));
        }
    }
}
