use std::io::{Read, Seek, Write};
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{AudioClip, AudioError};
use crate::scalar::Real;

/// Read a WAV file, downmix to mono and resample to `target_sr`.
///
/// Accepts 16/24-bit integer PCM and 32-bit float, mono or stereo.
pub fn load_audio<T: Real>(path: impl AsRef<Path>, target_sr: u32) -> Result<AudioClip<T>, AudioError> {
    let file = std::fs::File::open(path.as_ref())?;
    decode_wav(std::io::BufReader::new(file), target_sr)
}

/// Same as [`load_audio`] for an in-memory or streamed WAV container.
pub fn decode_wav<T: Real, R: Read>(reader: R, target_sr: u32) -> Result<AudioClip<T>, AudioError> {
    if target_sr == 0 {
        return Err(AudioError::BadSampleRate);
    }
    let mut reader = WavReader::new(reader).map_err(wav_err)?;
    let spec = reader.spec();
    let channels = usize::from(spec.channels);
    if !(1..=2).contains(&channels) {
        return Err(AudioError::Unsupported(format!("{channels} channels")));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32_768.0))
            .collect::<Result<_, _>>()
            .map_err(wav_err)?,
        (SampleFormat::Int, 24) => reader
            .samples::<i32>()
            .map(|s| s.map(|v| f64::from(v) / 8_388_608.0))
            .collect::<Result<_, _>>()
            .map_err(wav_err)?,
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(wav_err)?,
        (format, bits) => {
            return Err(AudioError::Unsupported(format!("{bits}-bit {format:?} samples")));
        }
    };
    if interleaved.is_empty() {
        return Err(AudioError::Empty);
    }
    let mono: Vec<f64> = interleaved
        .chunks(channels)
        .map(|frame| frame.iter().sum::<f64>() / frame.len() as f64)
        .collect();
    let mono = if spec.sample_rate == target_sr {
        mono
    } else {
        resample_linear(&mono, spec.sample_rate, target_sr)
    };
    let samples = mono.into_iter().map(|v| T::of(v.clamp(-1.0, 1.0))).collect();
    AudioClip::new(samples, target_sr)
}

fn wav_err(e: hound::Error) -> AudioError {
    match e {
        hound::Error::IoError(io) => AudioError::Io(io),
        hound::Error::Unsupported => AudioError::Unsupported("WAV encoding".into()),
        other => AudioError::Wav(other.to_string()),
    }
}

/// Linear-interpolation resampler. Output length is `round(len * to / from)`.
///
/// Not band-limited; constants are preserved exactly.
pub fn resample_linear(input: &[f64], from: u32, to: u32) -> Vec<f64> {
    if input.is_empty() || from == to {
        return input.to_vec();
    }
    let ratio = f64::from(from) / f64::from(to);
    let out_len = ((input.len() as f64) * f64::from(to) / f64::from(from)).round().max(1.0) as usize;
    let last = input.len() - 1;
    (0..out_len)
        .map(|j| {
            let pos = j as f64 * ratio;
            let i = (pos.floor() as usize).min(last);
            let next = (i + 1).min(last);
            let frac = pos - i as f64;
            let (a, b) = (input[i], input[next]);
            a + (b - a) * frac
        })
        .collect()
}

/// Write a clip as mono 32-bit float WAV.
pub fn write_wav<T: Real>(path: impl AsRef<Path>, clip: &AudioClip<T>) -> Result<(), AudioError> {
    let file = std::fs::File::create(path.as_ref())?;
    write_wav_to(std::io::BufWriter::new(file), clip)
}

pub fn write_wav_to<T: Real, W: Write + Seek>(writer: W, clip: &AudioClip<T>) -> Result<(), AudioError> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate(),
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut w = WavWriter::new(writer, spec).map_err(wav_err)?;
    for s in clip.samples() {
        w.write_sample(s.as_f64() as f32).map_err(wav_err)?;
    }
    w.finalize().map_err(wav_err)
}
