//! Onset detection: a per-frame detection function followed by adaptive peak picking.
//!
//! The peak picker is mostly causal. Deciding frame `i` needs frames up to
//! `i + LOOKAHEAD_FRAMES`, which is what lets [`StreamingOnsets`] reproduce
//! the offline result exactly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{AudioClip, AudioError, Frame, FrameAnalyzer, DEFAULT_HOP, DEFAULT_WINDOW_SIZE};
use crate::scalar::{cmp_real, Real};

/// Half-width of the strict local-maximum neighbourhood.
pub const LOCAL_MAX_RADIUS: usize = 3;
/// Frames before `i` that enter the median threshold.
pub const MEDIAN_PAST: usize = 8;
/// Frames after `i` that enter the median threshold.
pub const MEDIAN_FUTURE: usize = 1;
/// Frames past `i` that must exist before `i` can be decided.
pub const LOOKAHEAD_FRAMES: usize = if LOCAL_MAX_RADIUS > MEDIAN_FUTURE { LOCAL_MAX_RADIUS } else { MEDIAN_FUTURE };

#[derive(Debug, Error)]
pub enum OnsetError {
    #[error("onset detection needs at least one frame")]
    NoFrames,
    #[error("invalid onset parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Audio(#[from] AudioError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OnsetMethod {
    /// High-frequency content.
    #[default]
    Hfc,
    SpectralFlux,
}

impl std::str::FromStr for OnsetMethod {
    type Err = OnsetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "hfc" => Ok(Self::Hfc),
            "spectral_flux" | "flux" => Ok(Self::SpectralFlux),
            other => Err(OnsetError::InvalidParams(format!("unknown onset method {other:?}"))),
        }
    }
}

/// Peak-picking tunables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnsetParams {
    pub method: OnsetMethod,
    /// Multiplier on the local median.
    pub threshold: f64,
    /// Minimum inter-onset interval in seconds.
    pub min_ioi: f64,
    /// Frames at or below this level (dBFS) are never onsets. `None` disables the gate.
    pub silence_gate_db: Option<f64>,
}

impl Default for OnsetParams {
    fn default() -> Self {
        Self { method: OnsetMethod::Hfc, threshold: 1.5, min_ioi: 0.050, silence_gate_db: Some(-60.0) }
    }
}

impl OnsetParams {
    pub fn validate(&self) -> Result<(), OnsetError> {
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return Err(OnsetError::InvalidParams(format!("threshold must be > 0, got {}", self.threshold)));
        }
        if !(self.min_ioi.is_finite() && self.min_ioi >= 0.0) {
            return Err(OnsetError::InvalidParams(format!("min_ioi must be >= 0, got {}", self.min_ioi)));
        }
        if matches!(self.silence_gate_db, Some(g) if g.is_nan()) {
            return Err(OnsetError::InvalidParams("silence gate is NaN".into()));
        }
        Ok(())
    }
}

/// Detection function: one non-negative value per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct OnsetCurve<T> {
    pub values: Vec<T>,
    pub hop: usize,
    pub sample_rate: u32,
}

impl<T: Real> OnsetCurve<T> {
    pub fn frame_time(&self, frame: usize) -> f64 {
        (frame * self.hop) as f64 / f64::from(self.sample_rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnsetEvent {
    /// Seconds from clip start (`frame * hop / sample_rate`).
    pub time: f64,
    /// Detection-function value at the peak.
    pub strength: f64,
    pub frame: usize,
}

/// `sum_b (b + 1) * |X[b]|`
pub fn hfc<T: Real>(magnitude: &[T]) -> T {
    magnitude.iter().enumerate().map(|(b, &m)| T::of_usize(b + 1) * m).sum()
}

/// `sum_b max(0, |X_i[b]| - |X_{i-1}[b]|)`; `previous = None` means a zero spectrum.
pub fn spectral_flux<T: Real>(previous: Option<&[T]>, current: &[T]) -> T {
    match previous {
        None => current.iter().copied().sum(),
        Some(prev) => current.iter().zip(prev).map(|(&c, &p)| (c - p).max(T::zero())).sum(),
    }
}

pub fn odf_hfc<T: Real>(frames: &[Frame<T>], hop: usize, sample_rate: u32) -> Result<OnsetCurve<T>, OnsetError> {
    if frames.is_empty() {
        return Err(OnsetError::NoFrames);
    }
    let values = frames.iter().map(|f| hfc(&f.magnitude_spectrum)).collect();
    Ok(OnsetCurve { values, hop, sample_rate })
}

pub fn odf_spectral_flux<T: Real>(frames: &[Frame<T>], hop: usize, sample_rate: u32) -> Result<OnsetCurve<T>, OnsetError> {
    if frames.is_empty() {
        return Err(OnsetError::NoFrames);
    }
    let mut prev: Option<&[T]> = None;
    let values = frames
        .iter()
        .map(|f| {
            let v = spectral_flux(prev, &f.magnitude_spectrum);
            prev = Some(&f.magnitude_spectrum);
            v
        })
        .collect();
    Ok(OnsetCurve { values, hop, sample_rate })
}

fn median<T: Real>(window: &mut [T]) -> T {
    window.sort_by(cmp_real);
    let n = window.len();
    if n % 2 == 1 {
        window[n / 2]
    } else {
        (window[n / 2 - 1] + window[n / 2]) / T::of(2.0)
    }
}

/// Conditions (local max, median threshold, silence gate) for frame `i`,
/// evaluated on whatever prefix of the curve is available.
fn frame_is_peak<T: Real>(values: &[T], levels_db: &[f64], i: usize, params: &OnsetParams) -> bool {
    let v = values[i];
    let lo = i.saturating_sub(LOCAL_MAX_RADIUS);
    let hi = (i + LOCAL_MAX_RADIUS).min(values.len() - 1);
    if (lo..=hi).any(|j| j != i && values[j] >= v) {
        return false;
    }
    let mut window: Vec<T> = values[i.saturating_sub(MEDIAN_PAST)..=(i + MEDIAN_FUTURE).min(values.len() - 1)].to_vec();
    if !(v > T::of(params.threshold) * median(&mut window)) {
        return false;
    }
    match params.silence_gate_db {
        Some(gate) => levels_db.get(i).is_some_and(|&l| l > gate),
        None => true,
    }
}

/// Adaptive peak picking. `levels_db` holds one level per frame for the silence gate.
pub fn pick_onsets<T: Real>(curve: &OnsetCurve<T>, params: &OnsetParams, levels_db: &[f64]) -> Vec<OnsetEvent> {
    let mut picker = PeakPicker::new(*params, curve.hop, curve.sample_rate);
    picker.poll(&curve.values, levels_db, true)
}

/// Incremental state of the peak picker: which frames are decided and when
/// the last onset was accepted.
#[derive(Debug, Clone)]
struct PeakPicker {
    params: OnsetParams,
    hop: usize,
    sample_rate: u32,
    next_frame: usize,
    last_time: Option<f64>,
}

impl PeakPicker {
    fn new(params: OnsetParams, hop: usize, sample_rate: u32) -> Self {
        Self { params, hop, sample_rate, next_frame: 0, last_time: None }
    }

    /// Decide every frame whose lookahead is available (all of them if `finished`).
    fn poll<T: Real>(&mut self, values: &[T], levels_db: &[f64], finished: bool) -> Vec<OnsetEvent> {
        let mut out = Vec::new();
        while self.next_frame < values.len() && (finished || self.next_frame + LOOKAHEAD_FRAMES < values.len()) {
            let i = self.next_frame;
            self.next_frame += 1;
            if !frame_is_peak(values, levels_db, i, &self.params) {
                continue;
            }
            let time = (i * self.hop) as f64 / f64::from(self.sample_rate);
            if let Some(prev) = self.last_time {
                if time - prev < self.params.min_ioi - 1e-12 {
                    continue;
                }
            }
            self.last_time = Some(time);
            out.push(OnsetEvent { time, strength: values[i].as_f64(), frame: i });
        }
        out
    }
}

/// Frames -> detection function -> peak picking, at a given framing.
#[derive(Debug, Clone)]
pub struct OnsetDetector<T: Real> {
    params: OnsetParams,
    analyzer: FrameAnalyzer<T>,
}

impl<T: Real> OnsetDetector<T> {
    pub fn new(params: OnsetParams, window_size: usize, hop: usize) -> Result<Self, OnsetError> {
        params.validate()?;
        Ok(Self { params, analyzer: FrameAnalyzer::new(window_size, hop)? })
    }

    pub fn params(&self) -> &OnsetParams {
        &self.params
    }

    pub fn analyzer(&self) -> &FrameAnalyzer<T> {
        &self.analyzer
    }

    pub fn curve(&self, frames: &[Frame<T>], sample_rate: u32) -> Result<OnsetCurve<T>, OnsetError> {
        match self.params.method {
            OnsetMethod::Hfc => odf_hfc(frames, self.analyzer.hop(), sample_rate),
            OnsetMethod::SpectralFlux => odf_spectral_flux(frames, self.analyzer.hop(), sample_rate),
        }
    }

    pub fn detect(&self, clip: &AudioClip<T>) -> Result<Vec<OnsetEvent>, OnsetError> {
        if clip.is_empty() {
            return Err(OnsetError::NoFrames);
        }
        let frames = self.analyzer.frames(clip)?;
        let curve = self.curve(&frames, clip.sample_rate())?;
        let levels: Vec<f64> = frames.iter().map(|f| f.level_db).collect();
        Ok(pick_onsets(&curve, &self.params, &levels))
    }

    /// Start an incremental detector with the same parameters and framing.
    pub fn streaming(&self, sample_rate: u32) -> StreamingOnsets<T> {
        StreamingOnsets {
            picker: PeakPicker::new(self.params, self.analyzer.hop(), sample_rate),
            method: self.params.method,
            values: Vec::new(),
            levels_db: Vec::new(),
            previous: None,
        }
    }
}

/// Detect onsets at the canonical 1024/512 framing.
pub fn detect_onsets<T: Real>(clip: &AudioClip<T>, params: &OnsetParams) -> Result<Vec<OnsetEvent>, OnsetError> {
    OnsetDetector::new(*params, DEFAULT_WINDOW_SIZE, DEFAULT_HOP)?.detect(clip)
}

/// Frame-at-a-time onset detector. Fed the same frames as the offline path,
/// it emits the same events, each as soon as its lookahead has arrived.
#[derive(Debug, Clone)]
pub struct StreamingOnsets<T> {
    picker: PeakPicker,
    method: OnsetMethod,
    values: Vec<T>,
    levels_db: Vec<f64>,
    previous: Option<Vec<T>>,
}

impl<T: Real> StreamingOnsets<T> {
    /// Append the next frame; frames must arrive in index order.
    pub fn push_frame(&mut self, frame: &Frame<T>) {
        debug_assert_eq!(frame.index, self.values.len());
        let v = match self.method {
            OnsetMethod::Hfc => hfc(&frame.magnitude_spectrum),
            OnsetMethod::SpectralFlux => spectral_flux(self.previous.as_deref(), &frame.magnitude_spectrum),
        };
        if self.method == OnsetMethod::SpectralFlux {
            self.previous = Some(frame.magnitude_spectrum.clone());
        }
        self.values.push(v);
        self.levels_db.push(frame.level_db);
    }

    /// Events that can be decided now. With `finished`, flush everything.
    pub fn poll(&mut self, finished: bool) -> Vec<OnsetEvent> {
        self.picker.poll(&self.values, &self.levels_db, finished)
    }

    pub fn frames_seen(&self) -> usize {
        self.values.len()
    }
}
