//! User-specific learning: z-score normalisation, k-nearest-neighbour
//! classification, leave-one-out accuracy and sequential forward selection.

mod knn;
mod sfs;

pub use knn::{knn_classify, loo_accuracy, loo_correct, KnnModel, KnnOutcome, Neighbour};
pub use sfs::{sfs_select, SelectionResult};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureVector, FEATURE_COUNT};
use crate::scalar::Real;

#[derive(Debug, Error, PartialEq)]
pub enum LearnError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("{vectors} vectors but {labels} labels")]
    LengthMismatch { vectors: usize, labels: usize },
    #[error("label index {0} has no class name")]
    UnknownLabel(usize),
    #[error("duplicate class name {0:?}")]
    DuplicateClass(String),
    #[error("need at least {needed} training items, have {have}")]
    TooFewItems { needed: usize, have: usize },
    #[error("need at least two distinct classes")]
    SingleClass,
    #[error("feature mask is empty")]
    EmptyMask,
    #[error("feature index {0} out of range")]
    MaskIndex(usize),
    #[error("feature index {0} appears twice in the mask")]
    DuplicateMaskIndex(usize),
    #[error("k = {k} outside 1..={n}")]
    KOutOfRange { k: usize, n: usize },
}

/// Training vectors with class labels (indices into `class_names`).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset<T> {
    vectors: Vec<FeatureVector<T>>,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl<T: Real> LabeledDataset<T> {
    pub fn new(vectors: Vec<FeatureVector<T>>, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self, LearnError> {
        if vectors.is_empty() {
            return Err(LearnError::EmptyDataset);
        }
        if vectors.len() != labels.len() {
            return Err(LearnError::LengthMismatch { vectors: vectors.len(), labels: labels.len() });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(LearnError::UnknownLabel(bad));
        }
        for (i, name) in class_names.iter().enumerate() {
            if class_names[..i].contains(name) {
                return Err(LearnError::DuplicateClass(name.clone()));
            }
        }
        Ok(Self { vectors, labels, class_names })
    }

    /// Build from string labels; class order is order of first appearance.
    pub fn from_named<S: AsRef<str>>(vectors: Vec<FeatureVector<T>>, names: &[S]) -> Result<Self, LearnError> {
        let mut class_names: Vec<String> = Vec::new();
        let labels = names
            .iter()
            .map(|n| {
                let n = n.as_ref();
                match class_names.iter().position(|c| c == n) {
                    Some(i) => i,
                    None => {
                        class_names.push(n.to_string());
                        class_names.len() - 1
                    }
                }
            })
            .collect();
        Self::new(vectors, labels, class_names)
    }

    pub fn vectors(&self) -> &[FeatureVector<T>] {
        &self.vectors
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn label_name(&self, i: usize) -> &str {
        &self.class_names[self.labels[i]]
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Number of classes that actually occur among the labels.
    pub fn distinct_classes(&self) -> usize {
        let mut seen = vec![false; self.class_names.len()];
        self.labels.iter().for_each(|&l| seen[l] = true);
        seen.iter().filter(|&&s| s).count()
    }
}

/// Per-feature mean and population standard deviation of the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer<T> {
    pub mean: [T; FEATURE_COUNT],
    /// Zero for features that are constant over the training set.
    pub std: [T; FEATURE_COUNT],
}

impl<T: Real> Normalizer<T> {
    /// z-scores; coordinates with zero spread map to 0.
    pub fn normalize(&self, v: &FeatureVector<T>) -> [T; FEATURE_COUNT] {
        std::array::from_fn(|i| {
            if self.std[i] > T::zero() {
                (v.values[i] - self.mean[i]) / self.std[i]
            } else {
                T::zero()
            }
        })
    }

    pub fn is_finite(&self) -> bool {
        self.mean.iter().chain(&self.std).all(|v| v.is_finite())
    }
}

/// Fit a normaliser with Welford's running update.
pub fn fit_normalizer<T: Real>(dataset: &LabeledDataset<T>) -> Normalizer<T> {
    let mut mean = [T::zero(); FEATURE_COUNT];
    let mut m2 = [T::zero(); FEATURE_COUNT];
    for (n, v) in dataset.vectors().iter().enumerate() {
        let count = T::of_usize(n + 1);
        for i in 0..FEATURE_COUNT {
            let delta = v.values[i] - mean[i];
            mean[i] += delta / count;
            m2[i] += delta * (v.values[i] - mean[i]);
        }
    }
    let n = T::of_usize(dataset.len());
    let std = m2.map(|s| (s / n).max(T::zero()).sqrt());
    Normalizer { mean, std }
}

/// Free-function form of [`Normalizer::normalize`].
pub fn normalize<T: Real>(vector: &FeatureVector<T>, norm: &Normalizer<T>) -> [T; FEATURE_COUNT] {
    norm.normalize(vector)
}

pub(crate) fn validate_mask(mask: &[usize]) -> Result<(), LearnError> {
    if mask.is_empty() {
        return Err(LearnError::EmptyMask);
    }
    for (i, &f) in mask.iter().enumerate() {
        if f >= FEATURE_COUNT {
            return Err(LearnError::MaskIndex(f));
        }
        if mask[..i].contains(&f) {
            return Err(LearnError::DuplicateMaskIndex(f));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(x: f64) -> FeatureVector<f64> {
        let mut v = [0.0; FEATURE_COUNT];
        v[0] = x;
        v[1] = 3.0;
        FeatureVector::new(v)
    }

    #[test]
    fn single_vector_has_zero_std() {
        let ds = LabeledDataset::from_named(vec![fv(4.0)], &["a"]).unwrap();
        let n = fit_normalizer(&ds);
        assert!(n.std.iter().all(|&s| s == 0.0));
        assert_eq!(n.mean[0], 4.0);
    }

    #[test]
    fn two_point_mean_and_std() {
        let ds = LabeledDataset::from_named(vec![fv(0.0), fv(2.0)], &["a", "b"]).unwrap();
        let n = fit_normalizer(&ds);
        assert_eq!(n.mean[0], 1.0);
        assert_eq!(n.std[0], 1.0);
        assert_eq!(n.std[1], 0.0);
    }

    #[test]
    fn normalize_rules() {
        let ds = LabeledDataset::from_named(vec![fv(0.0), fv(2.0), fv(7.0)], &["a", "b", "a"]).unwrap();
        let n = fit_normalizer(&ds);
        let mean_vec = FeatureVector::new(n.mean);
        assert!(normalize(&mean_vec, &n).iter().all(|&z| z == 0.0));
        let z = n.normalize(&fv(123.0));
        assert_eq!(z[1], 0.0);
        assert!((z[0] * n.std[0] + n.mean[0] - 123.0).abs() < 1e-9);
    }

    #[test]
    fn dataset_validation() {
        assert_eq!(LabeledDataset::<f64>::new(vec![], vec![], vec![]).unwrap_err(), LearnError::EmptyDataset);
        assert!(matches!(LabeledDataset::new(vec![fv(0.0)], vec![0, 1], vec!["a".into()]), Err(LearnError::LengthMismatch { .. })));
        assert_eq!(LabeledDataset::new(vec![fv(0.0)], vec![2], vec!["a".into()]).unwrap_err(), LearnError::UnknownLabel(2));
        assert!(matches!(
            LabeledDataset::new(vec![fv(0.0)], vec![0], vec!["a".into(), "a".into()]),
            Err(LearnError::DuplicateClass(_))
        ));
        let ds = LabeledDataset::from_named(vec![fv(0.0), fv(1.0), fv(2.0)], &["kick", "snare", "kick"]).unwrap();
        assert_eq!(ds.class_names(), &["kick".to_string(), "snare".to_string()]);
        assert_eq!(ds.labels(), &[0, 1, 0]);
        assert_eq!(ds.distinct_classes(), 2);
    }

    #[test]
    fn mask_validation() {
        assert_eq!(validate_mask(&[]), Err(LearnError::EmptyMask));
        assert_eq!(validate_mask(&[20]), Err(LearnError::MaskIndex(20)));
        assert_eq!(validate_mask(&[3, 4, 3]), Err(LearnError::DuplicateMaskIndex(3)));
        assert!(validate_mask(&[0, 19]).is_ok());
    }
}
