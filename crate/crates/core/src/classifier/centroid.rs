use serde::{Deserialize, Serialize};

use super::{softmax, ClassifierModel, ModelKind, ModelMeta, ProbVector};
use crate::dataset::TrainingSet;
use crate::error::{Error, Result};

/// Nearest-centroid baseline: `softmax(-||x - centroid_i||)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidModel {
    meta: ModelMeta,
    centroids: Vec<Vec<f64>>,
}

impl CentroidModel {
    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.meta.kind != ModelKind::Centroid
            || self.centroids.len() != self.meta.classes()
            || self.centroids.iter().any(|c| c.len() != self.meta.input_len())
        {
            return Err(Error::Format("centroid model shape does not match its metadata".into()));
        }
        Ok(())
    }
}

/// Per-class mean of the normalized points; every class `0..=targets` needs a point.
pub fn train_centroid<S: TrainingSet + ?Sized>(data: &S, targets: u16) -> Result<CentroidModel> {
    if data.is_empty() {
        return Err(Error::Training("training set is empty".into()));
    }
    let meta = ModelMeta {
        targets,
        delta: data.delta(),
        channels: data.channels(),
        kind: ModelKind::Centroid,
    };
    let n = meta.input_len();
    let mut sums = vec![vec![0.0; n]; meta.classes()];
    let mut counts = vec![0usize; meta.classes()];
    for i in 0..data.len() {
        let p = data.point(i);
        let k = p.label.index();
        if k >= meta.classes() {
            return Err(Error::Contract(format!("label {} above {targets} targets", p.label)));
        }
        if !p.normalized || p.values.len() != n {
            return Err(Error::Contract(format!("point {i} is not a normalized window of the set's shape")));
        }
        for (s, v) in sums[k].iter_mut().zip(&p.values) {
            *s += v;
        }
        counts[k] += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Training(format!("class {empty} has no training points")));
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        s.iter_mut().for_each(|v| *v /= c as f64);
    }
    Ok(CentroidModel {
        meta,
        centroids: sums,
    })
}

impl ClassifierModel for CentroidModel {
    fn meta(&self) -> &ModelMeta {
        &self.meta
    }

    fn predict(&self, values: &[f64]) -> Result<ProbVector> {
        self.meta.check_input(values.len())?;
        let neg: Vec<f64> = self
            .centroids
            .iter()
            .map(|c| {
                -c.iter()
                    .zip(values)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        Ok(softmax(&neg))
    }
}
