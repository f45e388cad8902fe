//! Enrolment and transcription workflow.
//!
//! A user vocalises each drum class a declared number of times, in order.
//! [`train_user_model`] labels the detected onsets positionally, extracts
//! features, selects a feature subset and packages a [`UserModel`];
//! [`transcribe`] then turns performances into labelled [`DrumEvent`]s.

mod live;
mod model_file;

pub use live::LiveTranscriber;
pub use model_file::{load_model, save_model, ModelFileError, MODEL_VERSION};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::audio::{AudioClip, CANONICAL_SAMPLE_RATE};
use crate::features::{FeatureConfig, FeatureError, FeatureExtractor, FeatureVector};
use crate::learn::{fit_normalizer, sfs_select, KnnModel, LabeledDataset, LearnError, Normalizer};
use crate::onset::{OnsetDetector, OnsetError, OnsetEvent, OnsetParams};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("expected {expected} onsets, found {found}")]
    OnsetCountMismatch { found: usize, expected: usize },
    #[error("invalid class spec: {0}")]
    ClassSpec(String),
    #[error("training needs at least two classes")]
    SingleClass,
    #[error("audio must be at {expected} Hz, got {found} Hz")]
    SampleRate { expected: u32, found: u32 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Onset(#[from] OnsetError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Learn(#[from] LearnError),
}

/// Ordered `(class name, exemplar count)` plan for an enrolment clip.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSpec {
    classes: Vec<(String, usize)>,
}

impl ClassSpec {
    pub fn new(classes: Vec<(String, usize)>) -> Result<Self, PipelineError> {
        if classes.is_empty() {
            return Err(PipelineError::ClassSpec("no classes".into()));
        }
        for (i, (name, count)) in classes.iter().enumerate() {
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err(PipelineError::ClassSpec(format!("bad class name {name:?}")));
            }
            if *count == 0 {
                return Err(PipelineError::ClassSpec(format!("class {name} needs at least one exemplar")));
            }
            if classes[..i].iter().any(|(n, _)| n == name) {
                return Err(PipelineError::ClassSpec(format!("class {name} listed twice")));
            }
        }
        Ok(Self { classes })
    }

    pub fn classes(&self) -> &[(String, usize)] {
        &self.classes
    }

    pub fn class_names(&self) -> Vec<String> {
        self.classes.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn total(&self) -> usize {
        self.classes.iter().map(|(_, c)| c).sum()
    }

    /// Positional labels: the first `count_1` events are class 0, and so on.
    pub fn positional_labels(&self) -> Vec<usize> {
        self.classes.iter().enumerate().flat_map(|(i, (_, c))| std::iter::repeat(i).take(*c)).collect()
    }
}

impl FromStr for ClassSpec {
    type Err = PipelineError;

    /// `name:count[,name:count...]`
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let classes = s
            .split(',')
            .map(|part| {
                let (name, count) = part
                    .trim()
                    .split_once(':')
                    .ok_or_else(|| PipelineError::ClassSpec(format!("expected name:count, got {part:?}")))?;
                let count = count
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| PipelineError::ClassSpec(format!("bad count {count:?} for class {name}")))?;
                Ok((name.trim().to_string(), count))
            })
            .collect::<Result<Vec<_>, PipelineError>>()?;
        Self::new(classes)
    }
}

impl fmt::Display for ClassSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.classes.iter().map(|(n, c)| format!("{n}:{c}")).collect();
        f.write_str(&parts.join(","))
    }
}

/// A labelled, time-stamped hit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrumEvent {
    pub time: f64,
    pub label: String,
    pub velocity: u8,
}

/// Monophonic event stream produced from one clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcription {
    pub events: Vec<DrumEvent>,
    /// Source clip duration in seconds.
    pub duration: f64,
    /// Fingerprint of the model that produced the events.
    pub model_id: String,
}

impl Transcription {
    /// Event count per class, in `class_names` order.
    pub fn counts(&self, class_names: &[String]) -> Vec<(String, usize)> {
        class_names
            .iter()
            .map(|c| (c.clone(), self.events.iter().filter(|e| &e.label == c).count()))
            .collect()
    }
}

/// Everything needed to transcribe one user's vocalisations.
#[derive(Debug, Clone)]
pub struct UserModel<T: Real> {
    dataset: LabeledDataset<T>,
    normalizer: Normalizer<T>,
    mask: Vec<usize>,
    k: usize,
    feature_config: FeatureConfig,
    onset_params: OnsetParams,
    training_accuracy: f64,
    classifier: KnnModel<T>,
    id: String,
}

impl<T: Real> UserModel<T> {
    /// Assemble and validate a model.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        dataset: LabeledDataset<T>,
        normalizer: Normalizer<T>,
        mask: Vec<usize>,
        k: usize,
        feature_config: FeatureConfig,
        onset_params: OnsetParams,
        training_accuracy: f64,
    ) -> Result<Self, PipelineError> {
        feature_config.validate()?;
        onset_params.validate()?;
        if !(0.0..=1.0).contains(&training_accuracy) {
            return Err(PipelineError::InvalidModel(format!("training accuracy {training_accuracy} outside [0, 1]")));
        }
        if !normalizer.is_finite() || !dataset.vectors().iter().all(FeatureVector::is_finite) {
            return Err(PipelineError::InvalidModel("non-finite model values".into()));
        }
        let classifier = KnnModel::new(&dataset, &normalizer, &mask, k)?;
        let mut model = Self {
            dataset,
            normalizer,
            mask,
            k,
            feature_config,
            onset_params,
            training_accuracy,
            classifier,
            id: String::new(),
        };
        let digest = Sha256::digest(save_model(&model).as_bytes());
        model.id = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
        Ok(model)
    }

    pub fn class_names(&self) -> &[String] {
        self.dataset.class_names()
    }

    pub fn dataset(&self) -> &LabeledDataset<T> {
        &self.dataset
    }

    pub fn normalizer(&self) -> &Normalizer<T> {
        &self.normalizer
    }

    pub fn mask(&self) -> &[usize] {
        &self.mask
    }

    pub fn selected_feature_names(&self) -> Vec<&'static str> {
        self.mask.iter().map(|&i| crate::features::FEATURE_NAMES[i]).collect()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn feature_config(&self) -> &FeatureConfig {
        &self.feature_config
    }

    pub fn onset_params(&self) -> &OnsetParams {
        &self.onset_params
    }

    pub fn training_accuracy(&self) -> f64 {
        self.training_accuracy
    }

    /// Short content hash of the model document.
    pub fn id(&self) -> &str {
        &self.id
    }

    /// Class name for one feature vector.
    pub fn classify(&self, v: &FeatureVector<T>) -> &str {
        &self.class_names()[self.classifier.classify(v).label]
    }

    pub(crate) fn extractor(&self) -> Result<FeatureExtractor<T>, PipelineError> {
        Ok(FeatureExtractor::new(self.feature_config, CANONICAL_SAMPLE_RATE)?)
    }

    pub(crate) fn detector(&self) -> Result<OnsetDetector<T>, PipelineError> {
        Ok(OnsetDetector::new(self.onset_params, self.feature_config.window_size, self.feature_config.hop)?)
    }
}

fn require_canonical<T: Real>(clip: &AudioClip<T>) -> Result<(), PipelineError> {
    if clip.sample_rate() != CANONICAL_SAMPLE_RATE {
        return Err(PipelineError::SampleRate { expected: CANONICAL_SAMPLE_RATE, found: clip.sample_rate() });
    }
    Ok(())
}

/// Map a peak amplitude in `[0, 1]` linearly onto MIDI velocity `1..=127`, rounding half up.
pub fn velocity_from_peak(peak: f64) -> u8 {
    let p = if peak.is_finite() { peak.clamp(0.0, 1.0) } else { 0.0 };
    (1.0 + 126.0 * p + 0.5).floor().clamp(1.0, 127.0) as u8
}

/// Classify the event at `onset` given a sample buffer (zero beyond its end).
pub(crate) fn classify_onset<T: Real>(
    model: &UserModel<T>,
    extractor: &FeatureExtractor<T>,
    samples: &[T],
    onset: &OnsetEvent,
) -> DrumEvent {
    let features = extractor.extract_at_frame(samples, onset.frame);
    let (start, end) = extractor.segment_bounds(onset.frame);
    let peak = samples
        .get(start.min(samples.len())..end.min(samples.len()))
        .unwrap_or(&[])
        .iter()
        .fold(0.0f64, |m, s| m.max(s.as_f64().abs()));
    DrumEvent { time: onset.time, label: model.classify(&features).to_string(), velocity: velocity_from_peak(peak) }
}

/// Train a model from an enrolment clip whose exemplars follow `spec` in order.
pub fn train_user_model<T: Real>(
    clip: &AudioClip<T>,
    spec: &ClassSpec,
    config: &FeatureConfig,
    onset_params: &OnsetParams,
    k: usize,
) -> Result<UserModel<T>, PipelineError> {
    require_canonical(clip)?;
    if spec.classes().len() < 2 {
        return Err(PipelineError::SingleClass);
    }
    config.validate()?;
    let detector = OnsetDetector::new(*onset_params, config.window_size, config.hop)?;
    let onsets = detector.detect(clip)?;
    if onsets.len() != spec.total() {
        return Err(PipelineError::OnsetCountMismatch { found: onsets.len(), expected: spec.total() });
    }
    let extractor = FeatureExtractor::new(*config, clip.sample_rate())?;
    let vectors: Vec<FeatureVector<T>> = onsets
        .iter()
        .map(|o| {
            let mut v = extractor.extract_at_frame(clip.samples(), o.frame);
            v.onset_time = o.time;
            v
        })
        .collect();
    let dataset = LabeledDataset::new(vectors, spec.positional_labels(), spec.class_names())?;
    let normalizer = fit_normalizer(&dataset);
    let selection = sfs_select(&dataset, k)?;
    UserModel::from_parts(dataset, normalizer, selection.selected, k, *config, *onset_params, selection.final_accuracy)
}

/// Detect and classify every event in `clip`.
pub fn transcribe<T: Real>(clip: &AudioClip<T>, model: &UserModel<T>) -> Result<Transcription, PipelineError> {
    require_canonical(clip)?;
    let mut out = Transcription { events: Vec::new(), duration: clip.duration(), model_id: model.id().to_string() };
    if clip.is_empty() {
        return Ok(out);
    }
    let onsets = model.detector()?.detect(clip)?;
    let extractor = model.extractor()?;
    out.events = onsets.iter().map(|o| classify_onset(model, &extractor, clip.samples(), o)).collect();
    Ok(out)
}
