use super::{fit_normalizer, validate_mask, LabeledDataset, LearnError, Normalizer};
use crate::features::{FeatureVector, FEATURE_COUNT};
use crate::scalar::{cmp_real, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbour<T> {
    /// Index into the training set.
    pub index: usize,
    pub distance: T,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnOutcome<T> {
    /// Winning class index.
    pub label: usize,
    /// The k nearest training items, closest first.
    pub neighbours: Vec<Neighbour<T>>,
}

/// Training set pre-normalised for repeated queries over one mask.
#[derive(Debug, Clone)]
pub struct KnnModel<T> {
    normalizer: Normalizer<T>,
    z: Vec<[T; FEATURE_COUNT]>,
    labels: Vec<usize>,
    n_classes: usize,
    mask: Vec<usize>,
    k: usize,
}

impl<T: Real> KnnModel<T> {
    pub fn new(dataset: &LabeledDataset<T>, normalizer: &Normalizer<T>, mask: &[usize], k: usize) -> Result<Self, LearnError> {
        validate_mask(mask)?;
        if k == 0 || k > dataset.len() {
            return Err(LearnError::KOutOfRange { k, n: dataset.len() });
        }
        Ok(Self {
            normalizer: normalizer.clone(),
            z: dataset.vectors().iter().map(|v| normalizer.normalize(v)).collect(),
            labels: dataset.labels().to_vec(),
            n_classes: dataset.class_names().len(),
            mask: mask.to_vec(),
            k,
        })
    }

    pub fn classify(&self, query: &FeatureVector<T>) -> KnnOutcome<T> {
        vote(&self.z, &self.labels, self.n_classes, &self.mask, self.k, &self.normalizer.normalize(query), None)
    }
}

/// Euclidean distance over the masked coordinates.
fn masked_distance<T: Real>(a: &[T; FEATURE_COUNT], b: &[T; FEATURE_COUNT], mask: &[usize]) -> T {
    mask.iter().map(|&i| (a[i] - b[i]) * (a[i] - b[i])).sum::<T>().sqrt()
}

/// Majority vote among the k nearest (distance ties -> lower index); vote ties
/// go to the smallest summed distance, then the lowest class index.
fn vote<T: Real>(
    z: &[[T; FEATURE_COUNT]],
    labels: &[usize],
    n_classes: usize,
    mask: &[usize],
    k: usize,
    query: &[T; FEATURE_COUNT],
    exclude: Option<usize>,
) -> KnnOutcome<T> {
    let mut cand: Vec<Neighbour<T>> = z
        .iter()
        .enumerate()
        .filter(|&(i, _)| Some(i) != exclude)
        .map(|(i, v)| Neighbour { index: i, distance: masked_distance(v, query, mask), label: labels[i] })
        .collect();
    cand.sort_by(|a, b| cmp_real(&a.distance, &b.distance).then(a.index.cmp(&b.index)));
    cand.truncate(k);

    let mut votes = vec![0usize; n_classes];
    let mut dist_sum = vec![T::zero(); n_classes];
    for nb in &cand {
        votes[nb.label] += 1;
        dist_sum[nb.label] += nb.distance;
    }
    let mut best = cand[0].label;
    for c in 0..n_classes {
        if votes[c] == 0 || c == best {
            continue;
        }
        let better = votes[c] > votes[best]
            || (votes[c] == votes[best] && (dist_sum[c] < dist_sum[best] || (dist_sum[c] == dist_sum[best] && c < best)));
        if better {
            best = c;
        }
    }
    KnnOutcome { label: best, neighbours: cand }
}

/// Classify `query` against `dataset` using the masked, normalised coordinates.
pub fn knn_classify<T: Real>(
    dataset: &LabeledDataset<T>,
    norm: &Normalizer<T>,
    mask: &[usize],
    k: usize,
    query: &FeatureVector<T>,
) -> Result<KnnOutcome<T>, LearnError> {
    Ok(KnnModel::new(dataset, norm, mask, k)?.classify(query))
}

pub(crate) fn loo_correct_z<T: Real>(
    z: &[[T; FEATURE_COUNT]],
    labels: &[usize],
    n_classes: usize,
    mask: &[usize],
    k: usize,
) -> usize {
    (0..z.len())
        .filter(|&i| vote(z, labels, n_classes, mask, k, &z[i], Some(i)).label == labels[i])
        .count()
}

pub(crate) fn check_loo(dataset_len: usize, mask: &[usize], k: usize) -> Result<(), LearnError> {
    if dataset_len < 2 {
        return Err(LearnError::TooFewItems { needed: 2, have: dataset_len });
    }
    validate_mask(mask)?;
    if k == 0 || k > dataset_len - 1 {
        return Err(LearnError::KOutOfRange { k, n: dataset_len - 1 });
    }
    Ok(())
}

/// Number of training items classified correctly with themselves held out.
/// The normaliser is fitted once on the full set.
pub fn loo_correct<T: Real>(dataset: &LabeledDataset<T>, mask: &[usize], k: usize) -> Result<usize, LearnError> {
    check_loo(dataset.len(), mask, k)?;
    let norm = fit_normalizer(dataset);
    let z: Vec<_> = dataset.vectors().iter().map(|v| norm.normalize(v)).collect();
    Ok(loo_correct_z(&z, dataset.labels(), dataset.class_names().len(), mask, k))
}

/// Leave-one-out accuracy in `[0, 1]`.
pub fn loo_accuracy<T: Real>(dataset: &LabeledDataset<T>, mask: &[usize], k: usize) -> Result<f64, LearnError> {
    Ok(loo_correct(dataset, mask, k)? as f64 / dataset.len() as f64)
}
