use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{AudioClip, AudioError};
use crate::scalar::Real;

/// One analysis frame of a clip.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame<T> {
    pub index: usize,
    pub start_sample: usize,
    /// Hann-windowed samples, `window_size` long.
    pub windowed: Vec<T>,
    /// `|X[b]|` for `b` in `0..=window_size/2`.
    pub magnitude_spectrum: Vec<T>,
    /// `|X[b]|^2 / window_size`, so the one-sided sum with interior bins
    /// doubled equals the windowed energy.
    pub power_spectrum: Vec<T>,
    /// RMS level of the raw (unwindowed, zero-padded) frame in dBFS.
    pub level_db: f64,
}

/// Number of frames `ceil(len / hop)` produced for a clip of `len` samples.
pub fn frame_count(len: usize, hop: usize) -> usize {
    len.div_ceil(hop)
}

/// Reusable Hann window + FFT plan for one `(window_size, hop)` pair.
#[derive(Clone)]
pub struct FrameAnalyzer<T: Real> {
    window_size: usize,
    hop: usize,
    window: Vec<T>,
    fft: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for FrameAnalyzer<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FrameAnalyzer")
            .field("window_size", &self.window_size)
            .field("hop", &self.hop)
            .finish()
    }
}

impl<T: Real> FrameAnalyzer<T> {
    pub fn new(window_size: usize, hop: usize) -> Result<Self, AudioError> {
        if window_size < 2 || !window_size.is_power_of_two() {
            return Err(AudioError::Framing(format!("window size {window_size} is not a power of two")));
        }
        if hop == 0 || hop > window_size {
            return Err(AudioError::Framing(format!("hop {hop} must be in 1..={window_size}")));
        }
        // periodic Hann
        let n = window_size as f64;
        let window = (0..window_size)
            .map(|i| T::of(0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n).cos()))
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(window_size);
        Ok(Self { window_size, hop, window, fft })
    }

    pub fn window_size(&self) -> usize {
        self.window_size
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn n_bins(&self) -> usize {
        self.window_size / 2 + 1
    }

    /// Centre frequency of each one-sided bin.
    pub fn bin_frequencies(&self, sample_rate: u32) -> Vec<T> {
        let df = f64::from(sample_rate) / self.window_size as f64;
        (0..self.n_bins()).map(|b| T::of(b as f64 * df)).collect()
    }

    /// Analyse frame `index` of `samples`; reads past the end are zeros.
    pub fn analyze(&self, samples: &[T], index: usize) -> Frame<T> {
        let start = index * self.hop;
        let raw = |i: usize| samples.get(start + i).copied().unwrap_or_else(T::zero);

        let mut energy = 0.0f64;
        let mut windowed = Vec::with_capacity(self.window_size);
        for (i, &w) in self.window.iter().enumerate() {
            let x = raw(i);
            energy += x.as_f64() * x.as_f64();
            windowed.push(x * w);
        }
        let rms = (energy / self.window_size as f64).sqrt();
        let level_db = 20.0 * rms.log10();

        let mut buf: Vec<Complex<T>> = windowed.iter().map(|&re| Complex::new(re, T::zero())).collect();
        self.fft.process(&mut buf);

        let n = T::of_usize(self.window_size);
        let bins = self.n_bins();
        let magnitude_spectrum: Vec<T> = buf[..bins].iter().map(|c| c.norm()).collect();
        let power_spectrum = buf[..bins].iter().map(|c| c.norm_sqr() / n).collect();

        Frame { index, start_sample: start, windowed, magnitude_spectrum, power_spectrum, level_db }
    }

    /// Every frame of the clip, `ceil(len / hop)` of them, tail zero-padded.
    pub fn frames(&self, clip: &AudioClip<T>) -> Result<Vec<Frame<T>>, AudioError> {
        if clip.is_empty() {
            return Err(AudioError::Empty);
        }
        Ok((0..frame_count(clip.len(), self.hop))
            .map(|i| self.analyze(clip.samples(), i))
            .collect())
    }
}

/// Decompose a clip into Hann-windowed, Fourier-transformed frames.
pub fn frames<T: Real>(clip: &AudioClip<T>, window_size: usize, hop: usize) -> Result<Vec<Frame<T>>, AudioError> {
    FrameAnalyzer::new(window_size, hop)?.frames(clip)
}
