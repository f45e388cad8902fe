//! User-trainable vocal percussion transcription.
//!
//! A performer records a few examples of each drum sound they intend to make
//! (kick, snare, hi-hat, ...). The toolkit segments that recording at its
//! onsets, describes every event with 13 MFCCs plus seven spectral and
//! temporal descriptors, picks a feature subset by forward selection with a
//! leave-one-out kNN score, and then transcribes new performances into
//! labelled, velocity-tagged events that can be written as MIDI.
//!
//! Signal-processing and learning types are generic over [`Real`] (`f32` or
//! `f64`); the aliases below fix the scalar for common use.

pub mod audio;
pub mod eval;
pub mod features;
pub mod learn;
pub mod midi;
pub mod onset;
pub mod pipeline;
mod scalar;

pub use scalar::Real;

pub use audio::{AudioClip, AudioError, CANONICAL_SAMPLE_RATE};
pub use eval::{evaluate, EvalReport, LabeledOnset};
pub use features::{FeatureConfig, FeatureVector, FEATURE_COUNT, FEATURE_NAMES};
pub use learn::{LabeledDataset, Normalizer};
pub use midi::{read_smf, write_smf, MidiMapping};
pub use onset::{detect_onsets, OnsetEvent, OnsetMethod, OnsetParams};
pub use pipeline::{
    load_model, save_model, train_user_model, transcribe, ClassSpec, DrumEvent, LiveTranscriber, PipelineError,
    Transcription, UserModel,
};

pub type Clip = AudioClip<f64>;
pub type Features = FeatureVector<f64>;
pub type Dataset = LabeledDataset<f64>;
pub type Model = UserModel<f64>;
pub type Live = LiveTranscriber<f64>;

pub type ClipF32 = AudioClip<f32>;
pub type FeaturesF32 = FeatureVector<f32>;
pub type DatasetF32 = LabeledDataset<f32>;
pub type ModelF32 = UserModel<f32>;
