//! Translation along retention time and Gaussian intensity variation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{AbundanceMatrix, GroundTruthAnnotation};

use super::{centred_start, DataPoint};

/// Inclusive range of window-start offsets relative to the centred window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftRange {
    pub min: i32,
    pub max: i32,
}

impl Default for ShiftRange {
    fn default() -> Self {
        Self { min: -9, max: 10 }
    }
}

impl ShiftRange {
    pub fn iter(&self) -> impl Iterator<Item = i32> {
        self.min..=self.max
    }

    pub fn len(&self) -> usize {
        (self.max - self.min + 1).max(0) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Multiplies the rows strictly inside `(startRT, endRT)` by
/// `exp(-((x - mu) / sigma)^2 / 2) * r + 1`, `r` uniform in `(0, r_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensityVariation {
    pub r_max: f64,
    /// sigma as a fraction of `endRT - startRT`.
    pub sigma_fraction: f64,
}

impl Default for IntensityVariation {
    fn default() -> Self {
        Self {
            r_max: 0.1,
            sigma_fraction: 0.25,
        }
    }
}

impl IntensityVariation {
    pub fn multiplier(&self, x: f64, ann: &GroundTruthAnnotation, r: f64) -> f64 {
        if !(ann.start_rt < x && x < ann.end_rt) {
            return 1.0;
        }
        let sigma = self.sigma_fraction * (ann.end_rt - ann.start_rt);
        let z = (x - ann.mu()) / sigma;
        (-0.5 * z * z).exp() * r + 1.0
    }

    pub fn draw_r<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let r = rng.random::<f64>() * self.r_max;
            if r > 0.0 {
                return r;
            }
        }
    }

    /// Scales every row of `dp` by its multiplier for a fixed `r`.
    pub fn apply_with(&self, dp: &DataPoint, ann: &GroundTruthAnnotation, r: f64) -> DataPoint {
        debug_assert!(!dp.normalized, "intensity variation on a normalized point");
        let mut out = dp.clone();
        let c = out.channels;
        for (row, &x) in out.values.chunks_exact_mut(c).zip(&dp.rts) {
            let g = self.multiplier(x, ann, r);
            if g != 1.0 {
                row.iter_mut().for_each(|v| *v *= g);
            }
        }
        out
    }

    pub fn apply<R: Rng + ?Sized>(
        &self,
        dp: &DataPoint,
        ann: &GroundTruthAnnotation,
        rng: &mut R,
    ) -> DataPoint {
        let r = self.draw_r(rng);
        self.apply_with(dp, ann, r)
    }
}

/// Intensity variation with the default `r_max = 0.1` and `sigma = (end - start) / 4`.
pub fn augment_intensity<R: Rng + ?Sized>(
    dp: &DataPoint,
    ann: &GroundTruthAnnotation,
    rng: &mut R,
) -> DataPoint {
    IntensityVariation::default().apply(dp, ann, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub shifts: ShiftRange,
    pub variants_per_shift: usize,
    pub intensity: IntensityVariation,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            shifts: ShiftRange::default(),
            variants_per_shift: 4,
            intensity: IntensityVariation::default(),
        }
    }
}

impl AugmentConfig {
    /// Translation only.
    pub fn shifts_only() -> Self {
        Self {
            variants_per_shift: 0,
            ..Self::default()
        }
    }

    pub fn points_per_original(&self) -> usize {
        self.shifts.len() * (1 + self.variants_per_shift)
    }
}

/// Size of the augmented dataset built from `originals` points.
pub fn augmented_count(originals: usize, cfg: &AugmentConfig) -> usize {
    originals * cfg.points_per_original()
}

pub(crate) fn shifted_start(
    a: &AbundanceMatrix,
    ann: &GroundTruthAnnotation,
    delta: usize,
    shift: i32,
) -> Result<usize> {
    let centred = centred_start(a, ann, delta)? as i64;
    let start = centred + shift as i64;
    if start < 0 || start as usize + delta > a.rows() {
        return Err(Error::Extraction(format!(
            "label {} shifted by {shift} starts at row {start}, outside {} rows",
            ann.label,
            a.rows()
        )));
    }
    Ok(start as usize)
}

/// One point per shift, each window start moved from the centred start.
pub fn augment_translation(
    a: &AbundanceMatrix,
    ann: &GroundTruthAnnotation,
    delta: usize,
    shifts: ShiftRange,
) -> Result<Vec<DataPoint>> {
    let starts = shifts
        .iter()
        .map(|n| shifted_start(a, ann, delta, n).map(|s| (n, s)))
        .collect::<Result<Vec<_>>>()?;
    starts
        .into_iter()
        .map(|(n, s)| DataPoint::from_window(a, s, delta, ann.label, n))
        .collect()
}

/// Streams the augmented points of one annotation: for each shift, the
/// translated point followed by its intensity variants.
pub fn for_each_augmented<R, F>(
    a: &AbundanceMatrix,
    ann: &GroundTruthAnnotation,
    delta: usize,
    cfg: &AugmentConfig,
    rng: &mut R,
    mut f: F,
) -> Result<()>
where
    R: Rng + ?Sized,
    F: FnMut(DataPoint),
{
    for dp in augment_translation(a, ann, delta, cfg.shifts)? {
        for v in 1..=cfg.variants_per_shift {
            let mut varied = cfg.intensity.apply(&dp, ann, rng);
            varied.provenance.variant = v as u32;
            f(varied);
        }
        f(dp);
    }
    Ok(())
}

pub fn augment_full<R: Rng + ?Sized>(
    a: &AbundanceMatrix,
    ann: &GroundTruthAnnotation,
    delta: usize,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<Vec<DataPoint>> {
    let mut out = Vec::with_capacity(cfg.points_per_original());
    for_each_augmented(a, ann, delta, cfg, rng, |p| out.push(p))?;
    Ok(out)
}
