use crate::scalar::Real;

/// Spectral shape statistics of one magnitude spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpectralDescriptors<T> {
    pub centroid_hz: T,
    pub spread_hz: T,
    pub slope: T,
    pub decrease: T,
    pub rolloff_hz: T,
}

/// Centroid, spread, slope, decrease and rolloff of `magnitude` sampled at
/// `bin_freqs`. An all-zero spectrum yields all zeros.
///
/// `rolloff_fraction` is the share of total energy (`|X|^2`) that must lie
/// at or below the rolloff frequency.
pub fn spectral_descriptors<T: Real>(magnitude: &[T], bin_freqs: &[T], rolloff_fraction: f64) -> SpectralDescriptors<T> {
    debug_assert_eq!(magnitude.len(), bin_freqs.len());
    let zero = T::zero();
    let total: T = magnitude.iter().copied().sum();
    if magnitude.is_empty() || total <= zero {
        return SpectralDescriptors::default();
    }

    let centroid: T = magnitude.iter().zip(bin_freqs).map(|(&m, &f)| f * m).sum::<T>() / total;
    let variance: T = magnitude
        .iter()
        .zip(bin_freqs)
        .map(|(&m, &f)| (f - centroid) * (f - centroid) * m)
        .sum::<T>()
        / total;
    let spread = variance.max(zero).sqrt();

    // least-squares slope of |X| against f
    let n = T::of_usize(magnitude.len());
    let mean_f: T = bin_freqs.iter().copied().sum::<T>() / n;
    let mean_m = total / n;
    let (mut cov, mut var_f) = (zero, zero);
    for (&m, &f) in magnitude.iter().zip(bin_freqs) {
        cov += (f - mean_f) * (m - mean_m);
        var_f += (f - mean_f) * (f - mean_f);
    }
    let slope = if var_f > zero { cov / var_f } else { zero };

    let tail: T = magnitude.iter().skip(1).copied().sum();
    let decrease = if tail > zero {
        let m0 = magnitude[0];
        magnitude
            .iter()
            .enumerate()
            .skip(1)
            .map(|(b, &m)| (m - m0) / T::of_usize(b))
            .sum::<T>()
            / tail
    } else {
        zero
    };

    let energy: T = magnitude.iter().map(|&m| m * m).sum();
    let target = T::of(rolloff_fraction) * energy;
    let mut acc = zero;
    let mut rolloff = *bin_freqs.last().unwrap();
    for (&m, &f) in magnitude.iter().zip(bin_freqs) {
        acc += m * m;
        if acc >= target {
            rolloff = f;
            break;
        }
    }

    SpectralDescriptors { centroid_hz: centroid, spread_hz: spread, slope, decrease, rolloff_hz: rolloff }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroCrossings<T> {
    pub zc_count: usize,
    pub zcr_per_s: T,
}

/// Sign changes between consecutive samples; zero counts as positive.
pub fn zero_crossing_stats<T: Real>(segment: &[T], sample_rate: u32) -> ZeroCrossings<T> {
    if segment.is_empty() {
        return ZeroCrossings { zc_count: 0, zcr_per_s: T::zero() };
    }
    let negative = |x: T| x < T::zero();
    let zc_count = segment.windows(2).filter(|w| negative(w[0]) != negative(w[1])).count();
    let zcr_per_s = T::of_usize(zc_count) * T::of(f64::from(sample_rate)) / T::of_usize(segment.len());
    ZeroCrossings { zc_count, zcr_per_s }
}
