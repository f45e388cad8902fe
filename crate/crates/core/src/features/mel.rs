use super::FeatureError;
use crate::scalar::Real;

/// Floor applied to mel-band energies before the logarithm.
pub const LOG_FLOOR: f64 = 1e-10;

/// HTK mel scale: `2595 * log10(1 + f / 700)`.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters over a one-sided spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank<T> {
    /// `weights[m][b]`, one row per filter.
    weights: Vec<Vec<T>>,
    /// Lower edge, centre and upper edge of each filter in Hz.
    edges_hz: Vec<[f64; 3]>,
}

impl<T: Real> MelFilterbank<T> {
    pub fn n_mels(&self) -> usize {
        self.weights.len()
    }

    pub fn n_bins(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn weights(&self) -> &[Vec<T>] {
        &self.weights
    }

    pub fn centers_hz(&self) -> Vec<f64> {
        self.edges_hz.iter().map(|e| e[1]).collect()
    }

    pub fn edges_hz(&self) -> &[[f64; 3]] {
        &self.edges_hz
    }

    /// Log mel-band energies `ln(max(eps, sum_b w[m][b] * power[b]))`.
    pub fn log_energies(&self, power: &[T]) -> Vec<T> {
        let floor = T::of(LOG_FLOOR);
        self.weights
            .iter()
            .map(|row| {
                let e: T = row.iter().zip(power).map(|(&w, &p)| w * p).sum();
                e.max(floor).ln()
            })
            .collect()
    }
}

/// `n_mels` triangles with centres equally spaced on the mel scale between
/// 0 Hz and Nyquist; each filter's edges sit on its neighbours' centres.
pub fn mel_filterbank<T: Real>(sample_rate: u32, n_fft_bins: usize, n_mels: usize) -> Result<MelFilterbank<T>, FeatureError> {
    if n_mels < 2 {
        return Err(FeatureError::Config(format!("need at least 2 mel bands, got {n_mels}")));
    }
    if n_fft_bins < 2 {
        return Err(FeatureError::Config(format!("need at least 2 spectrum bins, got {n_fft_bins}")));
    }
    let nyquist = f64::from(sample_rate) / 2.0;
    let bin_hz = nyquist / (n_fft_bins - 1) as f64;
    let top = hz_to_mel(nyquist);
    let points: Vec<f64> = (0..n_mels + 2).map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64)).collect();

    let mut weights = Vec::with_capacity(n_mels);
    let mut edges_hz = Vec::with_capacity(n_mels);
    for m in 0..n_mels {
        let (lo, c, hi) = (points[m], points[m + 1], points[m + 2]);
        let row: Vec<T> = (0..n_fft_bins)
            .map(|b| {
                let f = b as f64 * bin_hz;
                let w = if f > lo && f <= c {
                    (f - lo) / (c - lo)
                } else if f > c && f < hi {
                    (hi - f) / (hi - c)
                } else {
                    0.0
                };
                T::of(w)
            })
            .collect();
        if row.iter().all(|w| w.is_zero()) {
            return Err(FeatureError::Config(format!(
                "mel band {m} ({lo:.1}-{hi:.1} Hz) covers no spectrum bin; too many bands for {n_fft_bins} bins"
            )));
        }
        weights.push(row);
        edges_hz.push([lo, c, hi]);
    }
    Ok(MelFilterbank { weights, edges_hz })
}

/// Orthonormal DCT-II of `input`, first `n_out` coefficients.
pub fn dct2_orthonormal<T: Real>(input: &[T], n_out: usize) -> Vec<T> {
    let n = input.len();
    let nf = n as f64;
    (0..n_out.min(n))
        .map(|k| {
            let scale = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
            let s: T = input
                .iter()
                .enumerate()
                .map(|(m, &e)| e * T::of((std::f64::consts::PI * k as f64 * (2 * m + 1) as f64 / (2.0 * nf)).cos()))
                .sum();
            s * T::of(scale)
        })
        .collect()
}

/// MFCCs of one power spectrum; coefficient 0 is kept.
pub fn mfcc<T: Real>(power_spectrum: &[T], filterbank: &MelFilterbank<T>, n_mfcc: usize) -> Result<Vec<T>, FeatureError> {
    if power_spectrum.len() != filterbank.n_bins() {
        return Err(FeatureError::Shape { expected: filterbank.n_bins(), found: power_spectrum.len() });
    }
    if n_mfcc > filterbank.n_mels() {
        return Err(FeatureError::Config(format!("{n_mfcc} coefficients from {} bands", filterbank.n_mels())));
    }
    Ok(dct2_orthonormal(&filterbank.log_energies(power_spectrum), n_mfcc))
}
