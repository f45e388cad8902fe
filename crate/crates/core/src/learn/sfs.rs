use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::knn::{check_loo, loo_correct_z};
use super::{fit_normalizer, LabeledDataset, LearnError};
use crate::features::FEATURE_COUNT;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Feature indices in order of admission.
    pub selected: Vec<usize>,
    /// Leave-one-out accuracy after each admission.
    pub accuracy_trace: Vec<f64>,
    pub final_accuracy: f64,
}

/// Sequential forward selection driven by leave-one-out kNN accuracy.
///
/// Starting from the empty set, each round scores every unselected feature
/// added to the current set and admits the best one (lowest index on ties).
/// The first round always admits; later rounds stop unless the best candidate
/// strictly improves accuracy. Candidates in a round are scored in parallel
/// but admission is sequential, so the result is deterministic.
pub fn sfs_select<T: Real>(dataset: &LabeledDataset<T>, k: usize) -> Result<SelectionResult, LearnError> {
    check_loo(dataset.len(), &[0], k)?;
    if dataset.distinct_classes() < 2 {
        return Err(LearnError::SingleClass);
    }
    let norm = fit_normalizer(dataset);
    let z: Vec<_> = dataset.vectors().iter().map(|v| norm.normalize(v)).collect();
    let labels = dataset.labels();
    let n_classes = dataset.class_names().len();
    let total = dataset.len() as f64;

    let mut selected: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    let mut current: Option<usize> = None;

    while selected.len() < FEATURE_COUNT {
        let candidates: Vec<usize> = (0..FEATURE_COUNT).filter(|f| !selected.contains(f)).collect();
        let scores: Vec<(usize, usize)> = candidates
            .par_iter()
            .map(|&f| {
                let mut mask = selected.clone();
                mask.push(f);
                (f, loo_correct_z(&z, labels, n_classes, &mask, k))
            })
            .collect();
        // candidates are in ascending index order, so strict > keeps the lowest on ties
        let (best_f, best_correct) = scores
            .iter()
            .copied()
            .fold(None, |acc: Option<(usize, usize)>, (f, c)| match acc {
                Some((_, bc)) if bc >= c => acc,
                _ => Some((f, c)),
            })
            .expect("at least one candidate remains");
        if let Some(cur) = current {
            if best_correct <= cur {
                break;
            }
        }
        selected.push(best_f);
        trace.push(best_correct as f64 / total);
        current = Some(best_correct);
    }

    let final_accuracy = *trace.last().expect("first round always admits");
    Ok(SelectionResult { selected, accuracy_trace: trace, final_accuracy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureVector;

    #[test]
    fn constant_features_admit_first_and_stop() {
        let v = FeatureVector::new([1.0f64; FEATURE_COUNT]);
        let mut names = vec!["kick"; 6];
        names.extend(["snare"; 4]);
        let ds = LabeledDataset::from_named(vec![v; 10], &names).unwrap();
        let r = sfs_select(&ds, 1).unwrap();
        assert_eq!(r.selected, vec![0]);
        assert_eq!(r.accuracy_trace, vec![0.6]);
        assert_eq!(r.final_accuracy, 0.6);
    }

    #[test]
    fn duplicated_separating_feature_picks_lower_index() {
        let mut vs = Vec::new();
        let mut names = Vec::new();
        for i in 0..10 {
            let class = i % 2;
            let mut v = [0.0f64; FEATURE_COUNT];
            v[2] = class as f64 * 10.0 + (i as f64) * 0.01;
            v[5] = v[2];
            vs.push(FeatureVector::new(v));
            names.push(if class == 0 { "a" } else { "b" });
        }
        let ds = LabeledDataset::from_named(vs, &names).unwrap();
        let r = sfs_select(&ds, 1).unwrap();
        assert_eq!(r.selected[0], 2);
        assert_eq!(r.accuracy_trace, vec![1.0]);
    }

    #[test]
    fn single_class_rejected() {
        let v = FeatureVector::new([0.0f64; FEATURE_COUNT]);
        let ds = LabeledDataset::from_named(vec![v; 3], &["a", "a", "a"]).unwrap();
        assert_eq!(sfs_select(&ds, 1).unwrap_err(), LearnError::SingleClass);
    }
}
