//! Feature extraction against brute-force reference implementations.

use beatscribe::audio::voice::{Hit, Voice};
use beatscribe::audio::{Band, Signal};
use beatscribe::features::{
    dct2_orthonormal, mel_filterbank, mfcc, spectral_descriptors, zero_crossing_stats, FeatureConfig, FeatureExtractor,
    IDX_CENTROID, IDX_ROLLOFF, IDX_SLOPE, IDX_SPREAD, IDX_ZCR, IDX_ZC_COUNT, N_MFCC,
};
use beatscribe::Clip;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod support;

use support::*;

#[test]
fn mfcc_matches_oracle_on_random_spectra() {
    let fb = mel_filterbank::<f64>(44_100, N_BINS, 40).unwrap();
    let oracle_fb = oracle_filterbank(40);
    for (row, orow) in fb.weights().iter().zip(&oracle_fb) {
        for (a, b) in row.iter().zip(orow) {
            assert!((a - b).abs() < 1e-12);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..100 {
        let power = random_spectrum(&mut rng);
        let got = mfcc(&power, &fb, N_MFCC).unwrap();
        let want = oracle_mfcc(&power, &oracle_fb);
        for (k, (g, w)) in got.iter().zip(&want).enumerate() {
            assert!(close(*g, *w, 1e-6), "case {case} mfcc_{k}: {g} vs {w}");
        }
    }
}

#[test]
fn descriptors_match_oracle_on_random_spectra() {
    let freqs = bin_freqs();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..100 {
        let mag = random_spectrum(&mut rng);
        let d = spectral_descriptors(&mag, &freqs, 0.95);
        let o = oracle_descriptors(&mag, &freqs, 0.95);
        for (name, g, w) in [
            ("centroid", d.centroid_hz, o.centroid),
            ("spread", d.spread_hz, o.spread),
            ("slope", d.slope, o.slope),
            ("decrease", d.decrease, o.decrease),
            ("rolloff", d.rolloff_hz, o.rolloff),
        ] {
            assert!(close(g, w, 1e-6), "case {case} {name}: {g} vs {w}");
        }
    }
}

#[test]
fn f32_tracks_f64() {
    let fb64 = mel_filterbank::<f64>(44_100, N_BINS, 40).unwrap();
    let fb32 = mel_filterbank::<f32>(44_100, N_BINS, 40).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let power = random_spectrum(&mut rng);
        let p32: Vec<f32> = power.iter().map(|&v| v as f32).collect();
        let a = mfcc(&power, &fb64, N_MFCC).unwrap();
        let b = mfcc(&p32, &fb32, N_MFCC).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - f64::from(*y)).abs() <= 1e-3 * x.abs().max(1.0), "{x} vs {y}");
        }
    }
}

#[test]
fn dct_is_orthonormal() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x: Vec<f64> = (0..40).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let c = dct2_orthonormal(&x, 40);
    let e_x: f64 = x.iter().map(|v| v * v).sum();
    let e_c: f64 = c.iter().map(|v| v * v).sum();
    assert!(close(e_c, e_x, 1e-12));
}

#[test]
fn analytic_cases() {
    // delta spectrum
    let freqs = [0.0, 500.0, 1000.0, 1500.0, 2000.0];
    let d = spectral_descriptors(&[0.0, 0.0, 1.0, 0.0, 0.0], &freqs, 0.95);
    assert_eq!((d.centroid_hz, d.spread_hz, d.rolloff_hz), (1000.0, 0.0, 1000.0));
    // two equal bins
    let d = spectral_descriptors(&[0.0, 1.0, 0.0, 1.0, 0.0], &freqs, 0.95);
    assert_eq!((d.centroid_hz, d.spread_hz), (1000.0, 500.0));
    // flat spectrum
    let f = bin_freqs();
    let d = spectral_descriptors(&vec![0.3; N_BINS], &f, 0.95);
    assert!(d.slope.abs() < 1e-15 && d.decrease == 0.0, "{} {}", d.slope, d.decrease);
    assert!((d.rolloff_hz - 0.95 * SR / 2.0).abs() <= SR / 1024.0);
    // all-zero spectrum: descriptors 0, mfcc constant log floor
    let d = spectral_descriptors(&vec![0.0; N_BINS], &f, 0.95);
    assert_eq!((d.centroid_hz, d.spread_hz, d.slope, d.decrease, d.rolloff_hz), (0.0, 0.0, 0.0, 0.0, 0.0));
    let fb = mel_filterbank::<f64>(44_100, N_BINS, 40).unwrap();
    let c = mfcc(&vec![0.0; N_BINS], &fb, N_MFCC).unwrap();
    assert!((c[0] - 1e-10f64.ln() * 40f64.sqrt()).abs() < 1e-9);
    assert!(c[1..].iter().all(|v| v.abs() < 1e-9));
    // constant log energies
    let c = dct2_orthonormal(&[2.5; 40], N_MFCC);
    assert!((c[0] - 2.5 * 40f64.sqrt()).abs() < 1e-9 && c[1..].iter().all(|v| v.abs() < 1e-9));
}

#[test]
fn zero_crossings_by_brute_force() {
    assert_eq!(zero_crossing_stats(&[0.5f64; 100], 44_100).zc_count, 0);
    let alt: Vec<f64> = (0..51).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    assert_eq!(zero_crossing_stats(&alt, 44_100).zc_count, 50);
    let square: Vec<f64> = (0..44_100).map(|i| if (i as f64 * 100.0 / SR).fract() < 0.5 { 1.0 } else { -1.0 }).collect();
    let z = zero_crossing_stats(&square, 44_100);
    assert!((199..=201).contains(&z.zc_count), "{}", z.zc_count);
    assert!((z.zcr_per_s - 200.0).abs() <= 1.0);
}

#[test]
fn translation_invariance_on_noise_burst() {
    let burst = Signal::noise_burst(0.2, 0.6, 31, Band::Full);
    let clip_at = |offset: f64| -> Clip {
        Signal::Mix { min_duration: 1.0, parts: vec![(offset, burst.clone())] }.render().unwrap().clip
    };
    let ex = FeatureExtractor::<f64>::new(FeatureConfig::default(), 44_100).unwrap();
    // offsets on the hop grid so both events start at a frame boundary
    let a = ex.extract_at_frame(clip_at(512.0 * 20.0 / SR).samples(), 20);
    let b = ex.extract_at_frame(clip_at(512.0 * 47.0 / SR).samples(), 47);
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0), "{x} vs {y}");
    }
}

#[test]
fn onset_in_last_hop_is_finite() {
    let clip: Clip = Signal::noise_burst(0.5, 0.5, 2, Band::Full).render().unwrap().clip;
    let ex = FeatureExtractor::<f64>::new(FeatureConfig::default(), 44_100).unwrap();
    let v = ex.extract(&clip, clip.duration() - 0.001).unwrap();
    assert!(v.is_finite());
    assert!(ex.extract(&clip, clip.duration() + 0.1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn amplitude_scaling(gain in 0.05f64..4.0, seed in 0u64..1000) {
        let hits = [Hit { time: 0.1, label: "snare".into(), amplitude: 0.2 }];
        let clip: Clip = Voice::standard().perform(&hits, 0.5, 0.0, seed).unwrap().clip;
        let scaled = Clip::new(clip.samples().iter().map(|s| s * gain).collect(), 44_100).unwrap();
        let ex = FeatureExtractor::<f64>::new(FeatureConfig::default(), 44_100).unwrap();
        let frame = (0.1 * SR / 512.0) as usize;
        let a = ex.extract_at_frame(clip.samples(), frame);
        let b = ex.extract_at_frame(scaled.samples(), frame);
        for i in [IDX_CENTROID, IDX_SPREAD, IDX_ROLLOFF, IDX_ZCR, IDX_ZC_COUNT].into_iter().chain(1..N_MFCC) {
            prop_assert!((a.values[i] - b.values[i]).abs() <= 1e-6 * a.values[i].abs().max(1.0), "feature {}: {} vs {}", i, a.values[i], b.values[i]);
        }
        prop_assert!((b.values[IDX_SLOPE] - gain * a.values[IDX_SLOPE]).abs() <= 1e-6 * b.values[IDX_SLOPE].abs().max(1e-12));
        // c0 shifts by 2 ln(gain) * sqrt(40) (power scales by gain^2)
        let shift = 2.0 * gain.ln() * 40f64.sqrt();
        prop_assert!((b.values[0] - a.values[0] - shift).abs() < 1e-6 * shift.abs().max(1.0));
    }
}
