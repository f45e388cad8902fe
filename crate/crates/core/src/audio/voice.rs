//! Synthetic performers for tests and demos.
//!
//! A [`Voice`] maps class names to percussive timbres. Every hit is a slightly
//! varied rendering of its class timbre (pitch, length and noise seed differ
//! per hit) so that exemplars are similar but never identical.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::synth::{synth_signal, Band, Signal};
use super::{AudioClip, AudioError, CANONICAL_SAMPLE_RATE};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Timbre {
    /// Decaying tone with a 5 ms broadband attack of relative level `click`.
    Tone { freq: f64, duration: f64, click: f64 },
    Noise { duration: f64, band: Band },
}

impl Timbre {
    /// A percussive rendering; `variant` seeds the per-hit variation.
    pub fn hit(&self, variant: u64, amplitude: f64) -> Signal {
        let mut rng = ChaCha8Rng::seed_from_u64(variant);
        let stretch = rng.gen_range(0.9..1.1);
        match *self {
            Timbre::Tone { freq, duration, click } => {
                let tone = Signal::sine(freq * rng.gen_range(0.97..1.03), duration * stretch, amplitude).percussive();
                if click <= 0.0 {
                    return tone;
                }
                let attack = Signal::noise_burst(0.005, amplitude * click, rng.gen(), Band::Full).percussive();
                Signal::Mix { min_duration: 0.0, parts: vec![(0.0, tone), (0.0, attack)] }
            }
            Timbre::Noise { duration, band } => {
                Signal::noise_burst(duration * stretch, amplitude, rng.gen(), band).percussive()
            }
        }
    }
}

/// One scheduled hit.
#[derive(Debug, Clone, PartialEq)]
pub struct Hit {
    pub time: f64,
    pub label: String,
    pub amplitude: f64,
}

/// A rendered performance with its ground truth, sorted by time. Times are
/// rounded to the sample grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Performance<T> {
    pub clip: AudioClip<T>,
    pub events: Vec<(f64, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Voice {
    timbres: Vec<(String, Timbre)>,
}

impl Voice {
    pub fn new(timbres: Vec<(String, Timbre)>) -> Self {
        Self { timbres }
    }

    /// Kick: 80 Hz tone with a plosive click. Snare: white noise. Hi-hat: noise above 6 kHz.
    pub fn standard() -> Self {
        Self::new(vec![
            ("kick".into(), Timbre::Tone { freq: 80.0, duration: 0.12, click: 0.3 }),
            ("snare".into(), Timbre::Noise { duration: 0.12, band: Band::Full }),
            ("hihat".into(), Timbre::Noise { duration: 0.06, band: Band::HighPass(6000.0) }),
        ])
    }

    /// Same class names with the timbres rotated by `shift` places, so that
    /// class `i` sounds like class `i + shift` of `self`.
    pub fn rotated(&self, shift: usize) -> Self {
        let n = self.timbres.len();
        Self::new(
            (0..n).map(|i| (self.timbres[i].0.clone(), self.timbres[(i + shift) % n].1)).collect(),
        )
    }

    pub fn class_names(&self) -> Vec<String> {
        self.timbres.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn timbre(&self, label: &str) -> Option<&Timbre> {
        self.timbres.iter().find(|(n, _)| n == label).map(|(_, t)| t)
    }

    /// Render hits over a stationary noise floor of RMS `floor`. `seed`
    /// drives per-hit variation and the floor.
    pub fn perform<T: Real>(
        &self,
        hits: &[Hit],
        min_duration: f64,
        floor: f64,
        seed: u64,
    ) -> Result<Performance<T>, AudioError> {
        let sr = f64::from(CANONICAL_SAMPLE_RATE);
        let mut sorted: Vec<&Hit> = hits.iter().collect();
        sorted.sort_by(|a, b| a.time.total_cmp(&b.time));
        let mut parts = Vec::with_capacity(hits.len() + 1);
        let mut events = Vec::with_capacity(hits.len());
        for (i, h) in sorted.iter().enumerate() {
            let timbre = self
                .timbre(&h.label)
                .ok_or_else(|| AudioError::Synth(format!("voice has no class {:?}", h.label)))?;
            let variant = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64);
            parts.push((h.time, timbre.hit(variant, h.amplitude)));
            events.push(((h.time * sr).round() / sr, h.label.clone()));
        }
        let end = sorted.last().map_or(0.0, |h| h.time + 0.5).max(min_duration);
        if floor > 0.0 {
            parts.push((0.0, Signal::Floor { duration: end, amplitude: floor, seed: seed ^ 0x5EED }));
        }
        let rendered = synth_signal(&Signal::Mix { min_duration: end, parts }, CANONICAL_SAMPLE_RATE)?;
        Ok(Performance { clip: rendered.clip, events })
    }
}

/// Enrolment schedule: `count` hits of each class in order, `spacing` apart,
/// starting at `spacing / 2`.
pub fn enrolment_hits(classes: &[(String, usize)], spacing: f64, amplitude: f64) -> Vec<Hit> {
    classes
        .iter()
        .flat_map(|(name, count)| std::iter::repeat(name).take(*count))
        .enumerate()
        .map(|(i, name)| Hit { time: spacing * (i as f64 + 0.5), label: name.clone(), amplitude })
        .collect()
}

/// `n` hits on a grid of `spacing` seconds, classes and amplitudes (0.3 to 0.9)
/// drawn from `seed`.
pub fn random_pattern(classes: &[String], n: usize, spacing: f64, seed: u64) -> Vec<Hit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| Hit {
            time: spacing * (i as f64 + 0.5),
            label: classes[rng.gen_range(0..classes.len())].clone(),
            amplitude: rng.gen_range(0.3..0.9),
        })
        .collect()
}
