//! Audio ingestion and framing.
//!
//! Everything downstream works on an [`AudioClip`]: a mono buffer of samples in
//! `[-1, 1]` at a known rate. Clips are immutable once built.

mod frames;
pub mod synth;
pub mod voice;
mod wav;

pub use frames::{frame_count, frames, Frame, FrameAnalyzer};
pub use synth::{random_onset_track, synth_signal, Band, Signal, SynthClip, TrackKind};
pub use wav::{decode_wav, load_audio, resample_linear, write_wav, write_wav_to};

use thiserror::Error;

use crate::scalar::Real;

/// Canonical analysis rate. Window and hop defaults are stated at this rate.
pub const CANONICAL_SAMPLE_RATE: u32 = 44_100;
pub const DEFAULT_WINDOW_SIZE: usize = 1024;
pub const DEFAULT_HOP: usize = 512;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("cannot read audio: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed WAV data: {0}")]
    Wav(String),
    #[error("unsupported audio format: {0}")]
    Unsupported(String),
    #[error("audio contains no samples")]
    Empty,
    #[error("sample rate must be positive")]
    BadSampleRate,
    #[error("sample {index} is not finite")]
    NonFinite { index: usize },
    #[error("invalid framing: {0}")]
    Framing(String),
    #[error("invalid test signal: {0}")]
    Synth(String),
}

/// Mono sample buffer with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip<T> {
    samples: Vec<T>,
    sample_rate: u32,
}

impl<T: Real> AudioClip<T> {
    pub fn new(samples: Vec<T>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::BadSampleRate);
        }
        if let Some(index) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::NonFinite { index });
        }
        Ok(Self { samples, sample_rate })
    }

    /// All-zero clip of `len` samples.
    pub fn silence(len: usize, sample_rate: u32) -> Result<Self, AudioError> {
        Self::new(vec![T::zero(); len], sample_rate)
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    /// Copy scaled by `gain`, clamped back into `[-1, 1]`.
    pub fn scaled(&self, gain: T) -> Self {
        let one = T::one();
        Self {
            samples: self
                .samples
                .iter()
                .map(|&s| (s * gain).max(-one).min(one))
                .collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Same audio converted to another scalar type.
    pub fn cast<U: Real>(&self) -> AudioClip<U> {
        AudioClip {
            samples: self.samples.iter().map(|s| U::of(s.as_f64())).collect(),
            sample_rate: self.sample_rate,
        }
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }
}
