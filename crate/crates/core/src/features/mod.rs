//! Per-event timbral descriptor: 13 MFCCs, five spectral shape statistics and
//! two zero-crossing statistics, always in [`FEATURE_NAMES`] order.

mod descriptors;
mod mel;

pub use descriptors::{spectral_descriptors, zero_crossing_stats, SpectralDescriptors, ZeroCrossings};
pub use mel::{dct2_orthonormal, hz_to_mel, mel_filterbank, mel_to_hz, mfcc, MelFilterbank, LOG_FLOOR};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{AudioClip, AudioError, FrameAnalyzer, DEFAULT_HOP, DEFAULT_WINDOW_SIZE};
use crate::onset::OnsetEvent;
use crate::scalar::Real;

pub const N_MFCC: usize = 13;
pub const FEATURE_COUNT: usize = 20;

/// Canonical feature order. Part of the model file contract.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "mfcc_0", "mfcc_1", "mfcc_2", "mfcc_3", "mfcc_4", "mfcc_5", "mfcc_6", "mfcc_7", "mfcc_8", "mfcc_9",
    "mfcc_10", "mfcc_11", "mfcc_12", "centroid_hz", "spread_hz", "slope", "decrease", "rolloff_hz",
    "zcr_per_s", "zc_count",
];

pub const IDX_CENTROID: usize = 13;
pub const IDX_SPREAD: usize = 14;
pub const IDX_SLOPE: usize = 15;
pub const IDX_DECREASE: usize = 16;
pub const IDX_ROLLOFF: usize = 17;
pub const IDX_ZCR: usize = 18;
pub const IDX_ZC_COUNT: usize = 19;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("invalid feature configuration: {0}")]
    Config(String),
    #[error("spectrum has {found} bins, expected {expected}")]
    Shape { expected: usize, found: usize },
    #[error("onset at {time:.4} s is beyond the clip end ({duration:.4} s)")]
    OnsetOutOfRange { time: f64, duration: f64 },
    #[error(transparent)]
    Audio(#[from] AudioError),
}

/// Descriptor of one percussive event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector<T> {
    pub values: [T; FEATURE_COUNT],
    pub onset_time: f64,
}

impl<T: Real> FeatureVector<T> {
    pub fn new(values: [T; FEATURE_COUNT]) -> Self {
        Self { values, onset_time: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub window_size: usize,
    pub hop: usize,
    pub frames_per_event: usize,
    pub n_mels: usize,
    pub n_mfcc: usize,
    pub rolloff_fraction: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            window_size: DEFAULT_WINDOW_SIZE,
            hop: DEFAULT_HOP,
            frames_per_event: 4,
            n_mels: 40,
            n_mfcc: N_MFCC,
            rolloff_fraction: 0.95,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.frames_per_event == 0 {
            return Err(FeatureError::Config("frames_per_event must be >= 1".into()));
        }
        if self.n_mfcc != N_MFCC {
            return Err(FeatureError::Config(format!("n_mfcc is fixed at {N_MFCC} by the vector layout")));
        }
        if self.n_mfcc > self.n_mels {
            return Err(FeatureError::Config(format!("n_mfcc {} > n_mels {}", self.n_mfcc, self.n_mels)));
        }
        if !(self.rolloff_fraction > 0.0 && self.rolloff_fraction <= 1.0) {
            return Err(FeatureError::Config(format!("rolloff fraction {} outside (0, 1]", self.rolloff_fraction)));
        }
        Ok(())
    }

    /// Samples covered by one event's frames: `(frames_per_event - 1) * hop + window_size`.
    pub fn segment_len(&self) -> usize {
        (self.frames_per_event - 1) * self.hop + self.window_size
    }
}

/// Prebuilt analysis state (FFT plan, filterbank, bin frequencies) for one
/// configuration and sample rate.
#[derive(Debug, Clone)]
pub struct FeatureExtractor<T: Real> {
    config: FeatureConfig,
    sample_rate: u32,
    analyzer: FrameAnalyzer<T>,
    filterbank: MelFilterbank<T>,
    bin_freqs: Vec<T>,
}

impl<T: Real> FeatureExtractor<T> {
    pub fn new(config: FeatureConfig, sample_rate: u32) -> Result<Self, FeatureError> {
        config.validate()?;
        let analyzer = FrameAnalyzer::new(config.window_size, config.hop)?;
        let filterbank = mel_filterbank(sample_rate, analyzer.n_bins(), config.n_mels)?;
        let bin_freqs = analyzer.bin_frequencies(sample_rate);
        Ok(Self { config, sample_rate, analyzer, filterbank, bin_freqs })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn analyzer(&self) -> &FrameAnalyzer<T> {
        &self.analyzer
    }

    pub fn filterbank(&self) -> &MelFilterbank<T> {
        &self.filterbank
    }

    pub fn bin_freqs(&self) -> &[T] {
        &self.bin_freqs
    }

    /// Sample range `[start, end)` analysed for an event starting at `frame`.
    pub fn segment_bounds(&self, frame: usize) -> (usize, usize) {
        let start = frame * self.config.hop;
        (start, start + self.config.segment_len())
    }

    /// Features for the event whose first frame is `frame`. Samples beyond
    /// the end of `samples` read as zero.
    pub fn extract_at_frame(&self, samples: &[T], frame: usize) -> FeatureVector<T> {
        let fpe = self.config.frames_per_event;
        let mut acc = [T::zero(); FEATURE_COUNT];
        for i in frame..frame + fpe {
            let fr = self.analyzer.analyze(samples, i);
            let cepstrum = mfcc(&fr.power_spectrum, &self.filterbank, N_MFCC).expect("filterbank built for this analyzer");
            for (a, c) in acc.iter_mut().zip(cepstrum) {
                *a += c;
            }
            let d = spectral_descriptors(&fr.magnitude_spectrum, &self.bin_freqs, self.config.rolloff_fraction);
            acc[IDX_CENTROID] += d.centroid_hz;
            acc[IDX_SPREAD] += d.spread_hz;
            acc[IDX_SLOPE] += d.slope;
            acc[IDX_DECREASE] += d.decrease;
            acc[IDX_ROLLOFF] += d.rolloff_hz;
        }
        let n = T::of_usize(fpe);
        for a in acc[..IDX_ZCR].iter_mut() {
            *a = *a / n;
        }

        let (start, end) = self.segment_bounds(frame);
        let segment: Vec<T> = (start..end).map(|s| samples.get(s).copied().unwrap_or_else(T::zero)).collect();
        let zc = zero_crossing_stats(&segment, self.sample_rate);
        acc[IDX_ZCR] = zc.zcr_per_s;
        acc[IDX_ZC_COUNT] = T::of_usize(zc.zc_count);

        FeatureVector { values: acc, onset_time: (frame * self.config.hop) as f64 / f64::from(self.sample_rate) }
    }

    /// Features for an onset: frames start at the frame containing the onset sample.
    pub fn extract(&self, clip: &AudioClip<T>, onset_time: f64) -> Result<FeatureVector<T>, FeatureError> {
        let duration = clip.duration();
        if !(onset_time >= 0.0 && onset_time <= duration) {
            return Err(FeatureError::OnsetOutOfRange { time: onset_time, duration });
        }
        let sample = (onset_time * f64::from(clip.sample_rate())).round() as usize;
        let mut v = self.extract_at_frame(clip.samples(), sample / self.config.hop);
        v.onset_time = onset_time;
        Ok(v)
    }
}

/// One-shot feature extraction for a detected onset.
pub fn event_features<T: Real>(clip: &AudioClip<T>, onset: &OnsetEvent, config: &FeatureConfig) -> Result<FeatureVector<T>, FeatureError> {
    FeatureExtractor::new(*config, clip.sample_rate())?.extract(clip, onset.time)
}
