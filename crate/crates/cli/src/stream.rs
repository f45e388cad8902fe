//! Binary framing for live audio.
//!
//! Each WebSocket binary message carries one chunk: a 9-byte big-endian
//! header (`u32` sequence, `u32` payload length in bytes, `u8` final flag)
//! followed by signed 16-bit little-endian mono PCM at 44.1 kHz.

use thiserror::Error;

pub const HEADER_LEN: usize = 9;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChunkError {
    #[error("chunk shorter than its {HEADER_LEN}-byte header")]
    ShortHeader,
    #[error("header declares {declared} payload bytes, message carries {actual}")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("payload length {0} is not a whole number of 16-bit samples")]
    OddPayload(usize),
    #[error("invalid final flag {0}")]
    BadFlag(u8),
    #[error("expected chunk {expected}, got {found}")]
    Sequence { expected: u32, found: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamChunk {
    pub sequence: u32,
    pub samples: Vec<i16>,
    pub last: bool,
}

impl StreamChunk {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 2 * self.samples.len());
        out.extend_from_slice(&self.sequence.to_be_bytes());
        out.extend_from_slice(&((2 * self.samples.len()) as u32).to_be_bytes());
        out.push(u8::from(self.last));
        for s in &self.samples {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ChunkError> {
        if bytes.len() < HEADER_LEN {
            return Err(ChunkError::ShortHeader);
        }
        let sequence = u32::from_be_bytes(bytes[0..4].try_into().expect("4 bytes"));
        let declared = u32::from_be_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let last = match bytes[8] {
            0 => false,
            1 => true,
            f => return Err(ChunkError::BadFlag(f)),
        };
        let payload = &bytes[HEADER_LEN..];
        if payload.len() != declared {
            return Err(ChunkError::LengthMismatch { declared, actual: payload.len() });
        }
        if declared % 2 != 0 {
            return Err(ChunkError::OddPayload(declared));
        }
        let samples = payload.chunks_exact(2).map(|b| i16::from_le_bytes([b[0], b[1]])).collect();
        Ok(Self { sequence, samples, last })
    }
}

/// Full-scale conversion used for every PCM path in the service.
pub fn pcm_to_float(samples: &[i16]) -> Vec<f64> {
    samples.iter().map(|&s| f64::from(s) / 32768.0).collect()
}

pub fn float_to_pcm(samples: &[f64]) -> Vec<i16> {
    samples.iter().map(|&s| (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16).collect()
}

/// Split PCM into contiguous chunks of at most `size` samples; the last is flagged final.
pub fn chunk_pcm(samples: &[i16], size: usize) -> Vec<StreamChunk> {
    let size = size.max(1);
    let n = samples.len().div_ceil(size).max(1);
    (0..n)
        .map(|i| StreamChunk {
            sequence: i as u32,
            samples: samples[(i * size).min(samples.len())..((i + 1) * size).min(samples.len())].to_vec(),
            last: i + 1 == n,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let c = StreamChunk { sequence: 0x0102_0304, samples: vec![1, -2], last: true };
        let b = c.encode();
        assert_eq!(b, [1, 2, 3, 4, 0, 0, 0, 4, 1, 1, 0, 0xFE, 0xFF]);
        assert_eq!(StreamChunk::decode(&b).unwrap(), c);
    }

    #[test]
    fn rejects_malformed() {
        assert_eq!(StreamChunk::decode(&[0; 8]), Err(ChunkError::ShortHeader));
        assert_eq!(StreamChunk::decode(&[0, 0, 0, 0, 0, 0, 0, 4, 0, 1, 2]), Err(ChunkError::LengthMismatch { declared: 4, actual: 2 }));
        assert_eq!(StreamChunk::decode(&[0, 0, 0, 0, 0, 0, 0, 1, 0, 1]), Err(ChunkError::OddPayload(1)));
        assert_eq!(StreamChunk::decode(&[0, 0, 0, 0, 0, 0, 0, 0, 7]), Err(ChunkError::BadFlag(7)));
    }

    #[test]
    fn chunking_covers_everything() {
        let pcm: Vec<i16> = (0..10).collect();
        let chunks = chunk_pcm(&pcm, 4);
        assert_eq!(chunks.len(), 3);
        assert!(chunks[2].last && !chunks[1].last);
        assert_eq!(chunks.iter().flat_map(|c| c.samples.clone()).collect::<Vec<_>>(), pcm);
        assert_eq!(chunk_pcm(&[], 4).len(), 1);
    }

    #[test]
    fn pcm_conversion() {
        assert_eq!(pcm_to_float(&[-32768, 0, 16384]), vec![-1.0, 0.0, 0.5]);
        assert_eq!(float_to_pcm(&[-1.0, 0.5, 1.0]), vec![-32768, 16384, 32767]);
    }
}
