use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::ingest::{Manifest, Split};
use crate::seed;

/// One cross-validation fold, as sample ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub validation_participants: Vec<String>,
    pub train: Vec<String>,
    pub validation: Vec<String>,
}

/// Partitions the training participants of `manifest` into `folds` groups of
/// near-equal size; every fold validates on one group and trains on the rest.
pub fn split_by_participant(manifest: &Manifest, folds: usize) -> Result<Vec<Fold>> {
    if folds < 2 {
        return Err(Error::Split(format!("need at least 2 folds, got {folds}")));
    }
    let mut by_participant: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for s in manifest.samples_in(Split::Train) {
        by_participant
            .entry(&s.participant)
            .or_default()
            .push(&s.sample_id);
    }
    if by_participant.len() < folds {
        return Err(Error::Split(format!(
            "{} participants cannot fill {folds} folds",
            by_participant.len()
        )));
    }

    let mut participants: Vec<&str> = by_participant.keys().copied().collect();
    participants.shuffle(&mut seed::rng(manifest.params.seed, "cv-split", 0));

    let mut groups: Vec<Vec<&str>> = vec![Vec::new(); folds];
    for (i, p) in participants.into_iter().enumerate() {
        groups[i % folds].push(p);
    }
    for g in &mut groups {
        g.sort_unstable();
    }

    Ok((0..folds)
        .map(|f| {
            let mut train = Vec::new();
            let mut validation = Vec::new();
            for (g, members) in groups.iter().enumerate() {
                let target = if g == f { &mut validation } else { &mut train };
                for p in members {
                    target.extend(by_participant[p].iter().map(|s| s.to_string()));
                }
            }
            Fold {
                validation_participants: groups[f].iter().map(|p| p.to_string()).collect(),
                train,
                validation,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Params, SampleEntry};
    use std::collections::HashSet;

    fn manifest(participants: usize, per: usize) -> Manifest {
        let mut samples = Vec::new();
        for p in 0..participants {
            for s in 0..per {
                samples.push(SampleEntry {
                    sample_id: format!("P{p:02}-S{s}"),
                    matrix: "x.csv".into(),
                    annotations: None,
                    participant: format!("P{p:02}"),
                    column_epoch: 1,
                    split: Split::Train,
                });
            }
        }
        Manifest {
            params: Params::default(),
            voc_table: vec![],
            samples,
            base_dir: Default::default(),
        }
    }

    #[test]
    fn leave_one_participant_out() {
        let folds = split_by_participant(&manifest(5, 2), 5).unwrap();
        assert_eq!(folds.len(), 5);
        for f in &folds {
            assert_eq!(f.validation_participants.len(), 1);
            assert_eq!(f.validation.len(), 2);
            assert_eq!(f.train.len(), 8);
        }
    }

    #[test]
    fn balanced_and_disjoint() {
        let m = manifest(17, 3);
        let folds = split_by_participant(&m, 5).unwrap();
        let sizes: Vec<usize> = folds.iter().map(|f| f.validation_participants.len()).collect();
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        assert!(hi - lo <= 1, "{sizes:?}");
        assert_eq!(sizes.iter().sum::<usize>(), 17);
        let participant = |id: &str| id.split('-').next().unwrap().to_string();
        for f in &folds {
            let tr: HashSet<String> = f.train.iter().map(|s| participant(s)).collect();
            let va: HashSet<String> = f.validation.iter().map(|s| participant(s)).collect();
            assert!(tr.is_disjoint(&va));
            assert_eq!(tr.len() + va.len(), 17);
        }
    }

    #[test]
    fn too_few_participants() {
        assert!(split_by_participant(&manifest(3, 1), 5).is_err());
        assert!(split_by_participant(&manifest(3, 1), 1).is_err());
    }
}
