//! Deterministic test-signal generator.
//!
//! Signals compose into a tree ([`Signal::Mix`], [`Signal::Concat`]) and every
//! rendered clip carries the true onset times of the events it contains, which
//! the test suites use as ground truth.
//!
//! A compact text form is accepted by [`Signal::from_str`](std::str::FromStr):
//!
//! ```text
//! 0.5@perc(sine(80,0.1,0.8)); 1.0@noise(0.08,0.6,7,hp:6000); floor(2,0.005,1); len=2.0
//! ```
//!
//! Each `;`-separated part is placed at `offset@` (default 0) and mixed;
//! `len=` pads the result to a minimum duration. Atoms:
//! `silence(d)`, `sine(freq,d,amp)`, `noise(d,amp,seed[,band])`,
//! `clicks(t1,t2,..)`, `floor(d,amp,seed)` and `perc(atom)`. Bands are
//! `full`, `lp:F`, `hp:F` or `bp:LO:HI`.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AudioClip, AudioError, CANONICAL_SAMPLE_RATE};
use crate::scalar::Real;

/// Frequency band applied to a noise burst.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Band {
    Full,
    LowPass(f64),
    HighPass(f64),
    BandPass(f64, f64),
}

/// A test-signal description.
#[derive(Debug, Clone, PartialEq)]
pub enum Signal {
    Silence { duration: f64 },
    /// Constant-amplitude sine starting at phase zero; one onset at 0.
    Sine { freq: f64, duration: f64, amplitude: f64 },
    /// Seeded white noise, optionally band-limited, normalised to `amplitude`
    /// peak; one onset at 0.
    NoiseBurst { duration: f64, amplitude: f64, seed: u64, band: Band },
    /// Unit impulses at the given times, followed by a 250 ms tail.
    ClickTrack { times: Vec<f64> },
    /// Stationary white-noise bed (RMS `amplitude`). Contributes no onsets.
    Floor { duration: f64, amplitude: f64, seed: u64 },
    /// Inner signal shaped by an instant-attack exponential decay that falls
    /// to 1% at the end, with a 5 ms raised-cosine fade-out.
    Percussive(Box<Signal>),
    /// Signals played back to back.
    Concat(Vec<Signal>),
    /// Signals summed at their offsets (seconds), padded to `min_duration`.
    Mix { min_duration: f64, parts: Vec<(f64, Signal)> },
}

/// A rendered test signal and its ground-truth onset times (seconds, sorted).
#[derive(Debug, Clone, PartialEq)]
pub struct SynthClip<T> {
    pub clip: AudioClip<T>,
    pub onsets: Vec<f64>,
}

/// Render a signal at `sample_rate`. Output is bit-identical for identical input.
pub fn synth_signal<T: Real>(signal: &Signal, sample_rate: u32) -> Result<SynthClip<T>, AudioError> {
    if sample_rate == 0 {
        return Err(AudioError::BadSampleRate);
    }
    let (buf, mut onsets) = render(signal, f64::from(sample_rate))?;
    onsets.sort_by(f64::total_cmp);
    onsets.dedup();
    let samples = buf.into_iter().map(|v| T::of(v.clamp(-1.0, 1.0))).collect();
    Ok(SynthClip { clip: AudioClip::new(samples, sample_rate)?, onsets })
}

impl Signal {
    pub fn silence(duration: f64) -> Self {
        Signal::Silence { duration }
    }

    pub fn sine(freq: f64, duration: f64, amplitude: f64) -> Self {
        Signal::Sine { freq, duration, amplitude }
    }

    pub fn noise_burst(duration: f64, amplitude: f64, seed: u64, band: Band) -> Self {
        Signal::NoiseBurst { duration, amplitude, seed, band }
    }

    pub fn click_track(times: Vec<f64>) -> Self {
        Signal::ClickTrack { times }
    }

    pub fn percussive(self) -> Self {
        Signal::Percussive(Box::new(self))
    }

    /// Render at the canonical rate.
    pub fn render<T: Real>(&self) -> Result<SynthClip<T>, AudioError> {
        synth_signal(self, CANONICAL_SAMPLE_RATE)
    }
}

/// Event mix of [`random_onset_track`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackKind {
    /// Unit impulses only.
    Clicks,
    /// White percussive bursts of one peak amplitude and varying length.
    Bursts,
    /// Clicks and bursts of random level and colour interleaved.
    Mixed,
}

/// A seeded track over a white noise floor `snr_db` below the quietest event.
/// An event's level is its RMS over its own length (over one 1024-sample
/// window for a click). Events are at least `min_spacing` seconds apart and
/// the track lasts `duration` seconds.
pub fn random_onset_track(
    seed: u64,
    kind: TrackKind,
    duration: f64,
    min_spacing: f64,
    snr_db: f64,
) -> Result<Signal, AudioError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts = Vec::new();
    let mut t = rng.gen_range(0.05..0.3);
    let mut quietest = (1.0f64 / 1024.0).sqrt();
    while t < duration - 0.3 {
        let click = match kind {
            TrackKind::Clicks => true,
            TrackKind::Bursts => false,
            TrackKind::Mixed => rng.gen_bool(0.4),
        };
        if click {
            parts.push((t, Signal::click_track(vec![0.0])));
        } else {
            let (amplitude, band) = if kind == TrackKind::Mixed {
                let band = match rng.gen_range(0..4) {
                    0 => Band::Full,
                    1 => Band::LowPass(rng.gen_range(1500.0..4000.0)),
                    2 => Band::HighPass(rng.gen_range(3000.0..8000.0)),
                    _ => Band::BandPass(1000.0, 5000.0),
                };
                (rng.gen_range(0.2..0.9), band)
            } else {
                (0.5, Band::Full)
            };
            let len = rng.gen_range(0.02..min_spacing.max(0.03));
            let burst = Signal::noise_burst(len, amplitude, rng.gen(), band).percussive();
            let (x, _) = render(&burst, f64::from(CANONICAL_SAMPLE_RATE))?;
            quietest = quietest.min((x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt());
            parts.push((t, burst));
        }
        t += min_spacing + rng.gen_range(0.0..0.4);
    }
    let floor = quietest * 10f64.powf(-snr_db / 20.0);
    parts.push((0.0, Signal::Floor { duration, amplitude: floor, seed: seed ^ 0xF100 }));
    Ok(Signal::Mix { min_duration: duration, parts })
}

fn samples_for(duration: f64, sr: f64) -> Result<usize, AudioError> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(AudioError::Synth(format!("duration must be positive, got {duration}")));
    }
    Ok(((duration * sr).round() as usize).max(1))
}

fn check_freq(freq: f64, sr: f64) -> Result<(), AudioError> {
    if !(freq.is_finite() && freq > 0.0 && freq < sr / 2.0) {
        return Err(AudioError::Synth(format!("frequency {freq} Hz outside (0, {})", sr / 2.0)));
    }
    Ok(())
}

fn render(signal: &Signal, sr: f64) -> Result<(Vec<f64>, Vec<f64>), AudioError> {
    match signal {
        Signal::Silence { duration } => Ok((vec![0.0; samples_for(*duration, sr)?], vec![])),
        Signal::Sine { freq, duration, amplitude } => {
            check_freq(*freq, sr)?;
            let n = samples_for(*duration, sr)?;
            let w = 2.0 * std::f64::consts::PI * freq / sr;
            Ok(((0..n).map(|i| amplitude * (w * i as f64).sin()).collect(), vec![0.0]))
        }
        Signal::NoiseBurst { duration, amplitude, seed, band } => {
            let n = samples_for(*duration, sr)?;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            apply_band(&mut x, *band, sr)?;
            let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if peak > 0.0 {
                let g = amplitude / peak;
                x.iter_mut().for_each(|v| *v *= g);
            }
            Ok((x, vec![0.0]))
        }
        Signal::ClickTrack { times } => {
            if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
                return Err(AudioError::Synth("click times must be non-negative".into()));
            }
            let last = times.iter().fold(0.0f64, |m, &t| m.max(t));
            let n = (last * sr).round() as usize + 1 + (0.25 * sr).round() as usize;
            let mut x = vec![0.0; n];
            for &t in times {
                x[(t * sr).round() as usize] = 1.0;
            }
            Ok((x, times.clone()))
        }
        Signal::Floor { duration, amplitude, seed } => {
            let n = samples_for(*duration, sr)?;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            // uniform on [-1, 1] has RMS 1/sqrt(3)
            let g = amplitude * 3f64.sqrt();
            Ok(((0..n).map(|_| g * rng.gen_range(-1.0..=1.0)).collect(), vec![]))
        }
        Signal::Percussive(inner) => {
            let (mut x, onsets) = render(inner, sr)?;
            let n = x.len() as f64;
            let rate = 100f64.ln() / n;
            let fade = (0.005 * sr).min(n / 2.0).max(1.0);
            for (i, v) in x.iter_mut().enumerate() {
                let i = i as f64;
                let mut g = (-rate * i).exp();
                let from_end = n - 1.0 - i;
                if from_end < fade {
                    g *= 0.5 - 0.5 * (std::f64::consts::PI * from_end / fade).cos();
                }
                *v *= g;
            }
            Ok((x, onsets))
        }
        Signal::Concat(parts) => {
            let mut out = Vec::new();
            let mut onsets = Vec::new();
            for p in parts {
                let (x, o) = render(p, sr)?;
                let offset = out.len() as f64 / sr;
                onsets.extend(o.into_iter().map(|t| t + offset));
                out.extend(x);
            }
            if out.is_empty() {
                return Err(AudioError::Synth("empty concatenation".into()));
            }
            Ok((out, onsets))
        }
        Signal::Mix { min_duration, parts } => {
            if !min_duration.is_finite() || *min_duration < 0.0 {
                return Err(AudioError::Synth("mix duration must be non-negative".into()));
            }
            let mut out = vec![0.0; (min_duration * sr).round() as usize];
            let mut onsets = Vec::new();
            for (offset, p) in parts {
                if !offset.is_finite() || *offset < 0.0 {
                    return Err(AudioError::Synth(format!("negative offset {offset}")));
                }
                let (x, o) = render(p, sr)?;
                let start = (offset * sr).round() as usize;
                if out.len() < start + x.len() {
                    out.resize(start + x.len(), 0.0);
                }
                for (dst, v) in out[start..].iter_mut().zip(x) {
                    *dst += v;
                }
                let t0 = start as f64 / sr;
                onsets.extend(o.into_iter().map(|t| t + t0));
            }
            if out.is_empty() {
                return Err(AudioError::Synth("empty mix".into()));
            }
            Ok((out, onsets))
        }
    }
}

/// Second-order RBJ biquad section.
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn new(high_pass: bool, cutoff: f64, sr: f64) -> Self {
        let w0 = 2.0 * std::f64::consts::PI * cutoff / sr;
        let (s, c) = w0.sin_cos();
        let alpha = s / (2.0 * std::f64::consts::FRAC_1_SQRT_2);
        let a0 = 1.0 + alpha;
        let b = if high_pass {
            [(1.0 + c) / 2.0, -(1.0 + c), (1.0 + c) / 2.0]
        } else {
            [(1.0 - c) / 2.0, 1.0 - c, (1.0 - c) / 2.0]
        };
        Self { b: b.map(|v| v / a0), a: [-2.0 * c / a0, (1.0 - alpha) / a0] }
    }

    fn run(&self, x: &mut [f64]) {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        for v in x.iter_mut() {
            let x0 = *v;
            let y0 = self.b[0] * x0 + self.b[1] * x1 + self.b[2] * x2 - self.a[0] * y1 - self.a[1] * y2;
            x2 = x1;
            x1 = x0;
            y2 = y1;
            y1 = y0;
            *v = y0;
        }
    }
}

fn apply_band(x: &mut [f64], band: Band, sr: f64) -> Result<(), AudioError> {
    // two cascaded sections per edge: 24 dB/octave
    let mut edge = |hp: bool, f: f64| -> Result<(), AudioError> {
        check_freq(f, sr)?;
        let q = Biquad::new(hp, f, sr);
        q.run(x);
        q.run(x);
        Ok(())
    };
    match band {
        Band::Full => Ok(()),
        Band::LowPass(f) => edge(false, f),
        Band::HighPass(f) => edge(true, f),
        Band::BandPass(lo, hi) => {
            if lo >= hi {
                return Err(AudioError::Synth(format!("band-pass edges {lo} >= {hi}")));
            }
            edge(true, lo)?;
            edge(false, hi)
        }
    }
}

impl FromStr for Signal {
    type Err = AudioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = Vec::new();
        let mut min_duration = 0.0;
        for raw in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            if let Some(len) = raw.strip_prefix("len=") {
                min_duration = parse_num(len.trim())?;
                continue;
            }
            let (offset, atom) = match raw.split_once('@') {
                Some((o, a)) => (parse_num(o.trim())?, a.trim()),
                None => (0.0, raw),
            };
            let mut p = AtomParser { src: atom, pos: 0 };
            let sig = p.atom()?;
            p.skip_ws();
            if p.pos != atom.len() {
                return Err(p.error("trailing characters"));
            }
            parts.push((offset, sig));
        }
        match parts.len() {
            0 => Err(AudioError::Synth("empty signal description".into())),
            1 if parts[0].0 == 0.0 && min_duration == 0.0 => Ok(parts.pop().unwrap().1),
            _ => Ok(Signal::Mix { min_duration, parts }),
        }
    }
}

fn parse_num(s: &str) -> Result<f64, AudioError> {
    s.parse::<f64>().map_err(|_| AudioError::Synth(format!("not a number: {s:?}")))
}

struct AtomParser<'a> {
    src: &'a str,
    pos: usize,
}

impl AtomParser<'_> {
    fn error(&self, what: &str) -> AudioError {
        AudioError::Synth(format!("{what} at column {} of {:?}", self.pos + 1, self.src))
    }

    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> Result<(), AudioError> {
        self.skip_ws();
        if self.src[self.pos..].starts_with(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            Err(self.error(&format!("expected '{c}'")))
        }
    }

    fn token(&mut self) -> &str {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let end = rest.find(|c: char| matches!(c, '(' | ')' | ',') || c.is_whitespace()).unwrap_or(rest.len());
        self.pos += end;
        &rest[..end]
    }

    fn args(&mut self) -> Result<Vec<String>, AudioError> {
        self.eat('(')?;
        let mut out = vec![self.token().to_string()];
        loop {
            self.skip_ws();
            if self.src[self.pos..].starts_with(')') {
                self.pos += 1;
                return Ok(out);
            }
            self.eat(',')?;
            out.push(self.token().to_string());
        }
    }

    fn atom(&mut self) -> Result<Signal, AudioError> {
        let name = self.token().to_ascii_lowercase();
        if name == "perc" {
            self.eat('(')?;
            let inner = self.atom()?;
            self.eat(')')?;
            return Ok(inner.percussive());
        }
        let args = self.args()?;
        let nums = |n: usize| -> Result<Vec<f64>, AudioError> {
            if args.len() < n {
                return Err(AudioError::Synth(format!("{name} needs {n} arguments")));
            }
            args[..n].iter().map(|a| parse_num(a)).collect()
        };
        let seed = |i: usize| -> Result<u64, AudioError> {
            args[i].parse().map_err(|_| AudioError::Synth(format!("bad seed {:?}", args[i])))
        };
        let sig = match name.as_str() {
            "silence" if args.len() == 1 => Signal::silence(nums(1)?[0]),
            "sine" if args.len() == 3 => {
                let v = nums(3)?;
                Signal::sine(v[0], v[1], v[2])
            }
            "noise" if matches!(args.len(), 3 | 4) => {
                let v = nums(2)?;
                let band = args.get(3).map(|b| parse_band(b)).transpose()?.unwrap_or(Band::Full);
                Signal::noise_burst(v[0], v[1], seed(2)?, band)
            }
            "floor" if args.len() == 3 => {
                let v = nums(2)?;
                Signal::Floor { duration: v[0], amplitude: v[1], seed: seed(2)? }
            }
            "clicks" => Signal::click_track(args.iter().map(|a| parse_num(a)).collect::<Result<_, _>>()?),
            _ => return Err(AudioError::Synth(format!("unknown signal {name}/{}", args.len()))),
        };
        Ok(sig)
    }
}

fn parse_band(s: &str) -> Result<Band, AudioError> {
    let mut it = s.split(':');
    let kind = it.next().unwrap_or_default();
    let vals: Vec<f64> = it.map(parse_num).collect::<Result<_, _>>()?;
    match (kind, vals.as_slice()) {
        ("full", []) => Ok(Band::Full),
        ("lp", [f]) => Ok(Band::LowPass(*f)),
        ("hp", [f]) => Ok(Band::HighPass(*f)),
        ("bp", [lo, hi]) => Ok(Band::BandPass(*lo, *hi)),
        _ => Err(AudioError::Synth(format!("bad band {s:?}"))),
    }
}
