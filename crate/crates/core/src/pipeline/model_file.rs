//! Versioned JSON model document.
//!
//! Numbers are written with shortest round-trip formatting, so reloading a
//! document reproduces every stored value bit for bit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{PipelineError, UserModel};
use crate::features::{FeatureConfig, FeatureVector, FEATURE_COUNT, FEATURE_NAMES};
use crate::learn::{LabeledDataset, Normalizer};
use crate::onset::OnsetParams;
use crate::scalar::Real;

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("unsupported model version {found} (this build reads version {MODEL_VERSION})")]
    Version { found: String },
    #[error("model document does not match the schema: {0}")]
    Schema(String),
    #[error("model document contains non-finite values in {0}")]
    NonFinite(&'static str),
    #[error("model document is inconsistent: {0}")]
    Invalid(#[from] PipelineError),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument<T> {
    version: u32,
    class_names: Vec<String>,
    feature_names: Vec<String>,
    feature_config: FeatureConfig,
    onset_params: OnsetParams,
    k: usize,
    mask: Vec<usize>,
    normalizer: Normalizer<T>,
    training: TrainingBlock<T>,
    training_accuracy: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainingBlock<T> {
    vectors: Vec<[T; FEATURE_COUNT]>,
    labels: Vec<String>,
}

/// Serialise a model to its canonical JSON document.
pub fn save_model<T: Real>(model: &UserModel<T>) -> String {
    let ds = model.dataset();
    let doc = ModelDocument {
        version: MODEL_VERSION,
        class_names: ds.class_names().to_vec(),
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        feature_config: *model.feature_config(),
        onset_params: *model.onset_params(),
        k: model.k(),
        mask: model.mask().to_vec(),
        normalizer: model.normalizer().clone(),
        training: TrainingBlock {
            vectors: ds.vectors().iter().map(|v| v.values).collect(),
            labels: (0..ds.len()).map(|i| ds.label_name(i).to_string()).collect(),
        },
        training_accuracy: model.training_accuracy(),
    };
    serde_json::to_string_pretty(&doc).expect("model document is always serialisable")
}

/// Parse and validate a model document. Nothing is returned unless the whole
/// document is well-formed.
pub fn load_model<T: Real>(document: &str) -> Result<UserModel<T>, ModelFileError> {
    let value: serde_json::Value = serde_json::from_str(document).map_err(|e| ModelFileError::Schema(e.to_string()))?;
    match value.get("version") {
        Some(v) if v.as_u64() == Some(u64::from(MODEL_VERSION)) => {}
        Some(v) => return Err(ModelFileError::Version { found: v.to_string() }),
        None => return Err(ModelFileError::Schema("missing \"version\"".into())),
    }
    let doc: ModelDocument<T> = serde_json::from_value(value).map_err(|e| ModelFileError::Schema(e.to_string()))?;

    if doc.feature_names.len() != FEATURE_COUNT || doc.feature_names.iter().zip(FEATURE_NAMES).any(|(a, b)| a != b) {
        return Err(ModelFileError::Schema("feature_names differ from the canonical order".into()));
    }
    if doc.training.vectors.len() != doc.training.labels.len() {
        return Err(ModelFileError::Schema("training vectors and labels differ in length".into()));
    }
    if !doc.training.vectors.iter().flatten().all(|v| v.is_finite()) {
        return Err(ModelFileError::NonFinite("training.vectors"));
    }
    if !doc.normalizer.is_finite() {
        return Err(ModelFileError::NonFinite("normalizer"));
    }
    if !doc.training_accuracy.is_finite() {
        return Err(ModelFileError::NonFinite("training_accuracy"));
    }
    let labels = doc
        .training
        .labels
        .iter()
        .map(|l| {
            doc.class_names
                .iter()
                .position(|c| c == l)
                .ok_or_else(|| ModelFileError::Schema(format!("training label {l:?} not in class_names")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let vectors = doc.training.vectors.into_iter().map(FeatureVector::new).collect();
    let dataset = LabeledDataset::new(vectors, labels, doc.class_names).map_err(PipelineError::from)?;
    Ok(UserModel::from_parts(
        dataset,
        doc.normalizer,
        doc.mask,
        doc.k,
        doc.feature_config,
        doc.onset_params,
        doc.training_accuracy,
    )?)
}
