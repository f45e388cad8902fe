//! Standard MIDI File rendering and parsing.
//!
//! Writing produces a format-0 file: one track holding a tempo meta event and
//! a note-on/note-off pair per drum event on the percussion channel. Reading
//! accepts format 0 or 1 with running status and an arbitrary tempo map.

use std::str::FromStr;

use thiserror::Error;

use crate::pipeline::{DrumEvent, Transcription};

/// Largest value a 4-byte variable-length quantity can hold.
pub const VLQ_MAX: u32 = 0x0FFF_FFFF;
pub const DEFAULT_TEMPO_BPM: f64 = 120.0;
pub const DEFAULT_PPQ: u16 = 480;
const DEFAULT_US_PER_QUARTER: u32 = 500_000;

#[derive(Debug, Error, PartialEq)]
pub enum MidiError {
    #[error("no MIDI note mapped for class {0:?}")]
    UnmappedLabel(String),
    #[error("event time {0} s is negative or not finite")]
    BadTime(f64),
    #[error("tick {0} exceeds the variable-length quantity range")]
    TickOverflow(u64),
    #[error("invalid tempo {0} bpm")]
    BadTempo(f64),
    #[error("invalid ticks-per-quarter {0}")]
    BadPpq(u16),
    #[error("invalid mapping: {0}")]
    BadMapping(String),
    #[error("not a standard MIDI file: {0}")]
    BadHeader(String),
    #[error("malformed chunk: {0}")]
    BadChunk(String),
    #[error("truncated data at byte {0}")]
    Truncated(usize),
    #[error("malformed event at byte {offset}: {reason}")]
    BadEvent { offset: usize, reason: String },
}

/// Drum class to note mapping on a single channel.
#[derive(Debug, Clone, PartialEq)]
pub struct MidiMapping {
    notes: Vec<(String, u8)>,
    /// Wire channel number (0-based); 9 is General MIDI channel 10.
    pub channel: u8,
    /// Note length in seconds.
    pub note_duration: f64,
}

impl Default for MidiMapping {
    fn default() -> Self {
        Self {
            notes: vec![("kick".into(), 36), ("snare".into(), 38), ("hihat".into(), 42)],
            channel: 9,
            note_duration: 0.1,
        }
    }
}

impl MidiMapping {
    pub fn new(notes: Vec<(String, u8)>, channel: u8, note_duration: f64) -> Result<Self, MidiError> {
        if channel > 15 {
            return Err(MidiError::BadMapping(format!("channel {channel} > 15")));
        }
        if !(note_duration.is_finite() && note_duration > 0.0) {
            return Err(MidiError::BadMapping(format!("note duration {note_duration}")));
        }
        for (i, (name, note)) in notes.iter().enumerate() {
            if *note > 127 {
                return Err(MidiError::BadMapping(format!("note {note} for {name} > 127")));
            }
            if notes[..i].iter().any(|(n, m)| n == name || m == note) {
                return Err(MidiError::BadMapping(format!("{name}/{note} mapped twice")));
            }
        }
        Ok(Self { notes, channel, note_duration })
    }

    pub fn note_for(&self, label: &str) -> Option<u8> {
        self.notes.iter().find(|(n, _)| n == label).map(|&(_, v)| v)
    }

    /// Inverse lookup; unknown notes are labelled `note_<n>`.
    pub fn label_for(&self, note: u8) -> String {
        self.notes
            .iter()
            .find(|&&(_, v)| v == note)
            .map_or_else(|| format!("note_{note}"), |(n, _)| n.clone())
    }

    pub fn notes(&self) -> &[(String, u8)] {
        &self.notes
    }

    /// Default mapping extended/overridden by `other`'s entries.
    pub fn with_overrides(&self, other: &[(String, u8)]) -> Result<Self, MidiError> {
        let mut notes: Vec<(String, u8)> = self
            .notes
            .iter()
            .filter(|(n, v)| !other.iter().any(|(on, ov)| on == n || ov == v))
            .cloned()
            .collect();
        notes.extend(other.iter().cloned());
        Self::new(notes, self.channel, self.note_duration)
    }
}

impl FromStr for MidiMapping {
    type Err = MidiError;

    /// `class=note[,class=note...]`, layered over the General MIDI defaults.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let pairs = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| {
                let (name, note) = p
                    .split_once('=')
                    .ok_or_else(|| MidiError::BadMapping(format!("expected class=note, got {p:?}")))?;
                let note = note.trim().parse::<u8>().map_err(|_| MidiError::BadMapping(format!("bad note {note:?}")))?;
                Ok((name.trim().to_string(), note))
            })
            .collect::<Result<Vec<_>, MidiError>>()?;
        MidiMapping::default().with_overrides(&pairs)
    }
}

/// Append `value` as a variable-length quantity.
pub fn write_vlq(out: &mut Vec<u8>, value: u32) {
    debug_assert!(value <= VLQ_MAX);
    let mut groups = [0u8; 4];
    let mut n = 0;
    let mut v = value;
    loop {
        groups[n] = (v & 0x7F) as u8;
        n += 1;
        v >>= 7;
        if v == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        out.push(if i > 0 { groups[i] | 0x80 } else { groups[i] });
    }
}

/// Decode a variable-length quantity at `pos`, returning the value and bytes consumed.
pub fn read_vlq(bytes: &[u8], pos: usize) -> Result<(u32, usize), MidiError> {
    let mut value = 0u32;
    for i in 0..4 {
        let b = *bytes.get(pos + i).ok_or(MidiError::Truncated(pos + i))?;
        value = (value << 7) | u32::from(b & 0x7F);
        if b & 0x80 == 0 {
            return Ok((value, i + 1));
        }
    }
    Err(MidiError::BadEvent { offset: pos, reason: "variable-length quantity longer than 4 bytes".into() })
}

/// Quantise with the tempo actually stored in the file so that reading back is
/// within half a tick.
fn seconds_to_tick(t: f64, us_per_quarter: u32, ppq: u16) -> Result<u32, MidiError> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(MidiError::BadTime(t));
    }
    let tick = (t * 1e6 * f64::from(ppq) / f64::from(us_per_quarter)).round();
    if tick > f64::from(VLQ_MAX) {
        return Err(MidiError::TickOverflow(tick as u64));
    }
    Ok(tick as u32)
}

/// Render a transcription as a format-0 SMF.
pub fn write_smf(t: &Transcription, mapping: &MidiMapping, tempo_bpm: f64, ppq: u16) -> Result<Vec<u8>, MidiError> {
    if !(tempo_bpm.is_finite() && tempo_bpm > 0.0) {
        return Err(MidiError::BadTempo(tempo_bpm));
    }
    if ppq == 0 || ppq > 0x7FFF {
        return Err(MidiError::BadPpq(ppq));
    }
    let us_per_quarter = (60_000_000.0 / tempo_bpm).round();
    if !(1.0..=f64::from(0x00FF_FFFF)).contains(&us_per_quarter) {
        return Err(MidiError::BadTempo(tempo_bpm));
    }
    let us_per_quarter = us_per_quarter as u32;

    // (tick, is_on, sequence, note, velocity); offs sort before ons at the same tick
    let mut events: Vec<(u32, bool, usize, u8, u8)> = Vec::with_capacity(t.events.len() * 2);
    for (seq, e) in t.events.iter().enumerate() {
        let note = mapping.note_for(&e.label).ok_or_else(|| MidiError::UnmappedLabel(e.label.clone()))?;
        let on = seconds_to_tick(e.time, us_per_quarter, ppq)?;
        // cut the note short if the same note sounds again before it ends
        let mut end = e.time + mapping.note_duration;
        if let Some(next) = t.events[seq + 1..].iter().find(|n| n.label == e.label) {
            end = end.min(next.time);
        }
        let off = seconds_to_tick(end, us_per_quarter, ppq)?.max(on);
        events.push((on, true, seq, note, e.velocity.clamp(1, 127)));
        events.push((off, false, seq, note, 0x40));
    }
    events.sort_by_key(|&(tick, is_on, seq, _, _)| (tick, is_on, seq));

    let mut track = Vec::new();
    write_vlq(&mut track, 0);
    track.extend_from_slice(&[0xFF, 0x51, 0x03]);
    track.extend_from_slice(&us_per_quarter.to_be_bytes()[1..]);
    let mut now = 0u32;
    for (tick, is_on, _, note, vel) in events {
        write_vlq(&mut track, tick - now);
        now = tick;
        let status = if is_on { 0x90 } else { 0x80 } | mapping.channel;
        track.extend_from_slice(&[status, note, vel]);
    }
    write_vlq(&mut track, 0);
    track.extend_from_slice(&[0xFF, 0x2F, 0x00]);

    let mut out = Vec::with_capacity(22 + track.len());
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&ppq.to_be_bytes());
    out.extend_from_slice(b"MTrk");
    out.extend_from_slice(&(track.len() as u32).to_be_bytes());
    out.extend_from_slice(&track);
    Ok(out)
}

/// A note-on parsed back from a file.
#[derive(Debug, Clone, PartialEq)]
pub struct MidiNote {
    pub time: f64,
    pub tick: u64,
    pub channel: u8,
    pub note: u8,
    pub velocity: u8,
    pub label: String,
}

impl From<&MidiNote> for DrumEvent {
    fn from(n: &MidiNote) -> Self {
        DrumEvent { time: n.time, label: n.label.clone(), velocity: n.velocity }
    }
}

fn be_u16(b: &[u8], at: usize) -> Result<u16, MidiError> {
    b.get(at..at + 2).map(|s| u16::from_be_bytes([s[0], s[1]])).ok_or(MidiError::Truncated(at))
}

fn be_u32(b: &[u8], at: usize) -> Result<u32, MidiError> {
    b.get(at..at + 4).map(|s| u32::from_be_bytes([s[0], s[1], s[2], s[3]])).ok_or(MidiError::Truncated(at))
}

struct RawNote {
    tick: u64,
    channel: u8,
    note: u8,
    velocity: u8,
    order: (usize, usize),
}

/// Parse the note-on events (velocity > 0) of a format 0 or 1 SMF, converting
/// ticks to seconds through the file's tempo map.
pub fn read_smf(bytes: &[u8], mapping: &MidiMapping) -> Result<Vec<MidiNote>, MidiError> {
    if bytes.get(..4) != Some(b"MThd".as_slice()) {
        return Err(MidiError::BadHeader("missing MThd".into()));
    }
    let header_len = be_u32(bytes, 4)? as usize;
    if header_len < 6 {
        return Err(MidiError::BadHeader(format!("header length {header_len}")));
    }
    let format = be_u16(bytes, 8)?;
    let ntrks = be_u16(bytes, 10)?;
    let division = be_u16(bytes, 12)?;
    if format > 1 {
        return Err(MidiError::BadHeader(format!("format {format} not supported")));
    }
    if division & 0x8000 != 0 || division == 0 {
        return Err(MidiError::BadHeader("SMPTE or zero division not supported".into()));
    }
    let mut pos = 8 + header_len;
    if pos > bytes.len() {
        return Err(MidiError::Truncated(bytes.len()));
    }

    let mut notes = Vec::new();
    let mut tempos: Vec<(u64, u32, usize)> = Vec::new();
    let mut tracks = 0usize;
    while pos < bytes.len() {
        let id = bytes.get(pos..pos + 4).ok_or(MidiError::Truncated(pos))?;
        let len = be_u32(bytes, pos + 4)? as usize;
        let body_start = pos + 8;
        let body = bytes
            .get(body_start..body_start + len)
            .ok_or_else(|| MidiError::BadChunk(format!("chunk at byte {pos} claims {len} bytes past the end")))?;
        if id == b"MTrk" {
            parse_track(body, body_start, tracks, &mut notes, &mut tempos)?;
            tracks += 1;
        }
        pos = body_start + len;
    }
    if tracks < usize::from(ntrks) {
        return Err(MidiError::BadChunk(format!("header declares {ntrks} tracks, found {tracks}")));
    }

    tempos.sort_by_key(|&(tick, _, order)| (tick, order));
    let seconds = |tick: u64| -> f64 {
        let mut t = 0.0;
        let mut last_tick = 0u64;
        let mut us = f64::from(DEFAULT_US_PER_QUARTER);
        for &(tt, tempo, _) in tempos.iter().take_while(|&&(tt, _, _)| tt <= tick) {
            t += (tt - last_tick) as f64 * us / 1e6 / f64::from(division);
            last_tick = tt;
            us = f64::from(tempo);
        }
        t + (tick - last_tick) as f64 * us / 1e6 / f64::from(division)
    };

    notes.sort_by_key(|n| (n.tick, n.order));
    Ok(notes
        .into_iter()
        .map(|n| MidiNote {
            time: seconds(n.tick),
            tick: n.tick,
            channel: n.channel,
            note: n.note,
            velocity: n.velocity,
            label: mapping.label_for(n.note),
        })
        .collect())
}

fn parse_track(
    body: &[u8],
    base: usize,
    track: usize,
    notes: &mut Vec<RawNote>,
    tempos: &mut Vec<(u64, u32, usize)>,
) -> Result<(), MidiError> {
    let mut pos = 0usize;
    let mut tick = 0u64;
    let mut running: Option<u8> = None;
    let byte = |p: usize| body.get(p).copied().ok_or(MidiError::Truncated(base + p));
    let mut seq = 0usize;
    while pos < body.len() {
        let (delta, n) = read_vlq(body, pos).map_err(|e| offset_err(e, base))?;
        pos += n;
        tick += u64::from(delta);
        let mut status = byte(pos)?;
        match status {
            0xFF => {
                let kind = byte(pos + 1)?;
                let (len, n) = read_vlq(body, pos + 2).map_err(|e| offset_err(e, base))?;
                let data_start = pos + 2 + n;
                let data = body.get(data_start..data_start + len as usize).ok_or(MidiError::Truncated(base + data_start))?;
                pos = data_start + len as usize;
                if kind == 0x51 {
                    if data.len() != 3 {
                        return Err(MidiError::BadEvent { offset: base + data_start, reason: "tempo event length".into() });
                    }
                    let us = u32::from_be_bytes([0, data[0], data[1], data[2]]);
                    if us == 0 {
                        return Err(MidiError::BadEvent { offset: base + data_start, reason: "zero tempo".into() });
                    }
                    tempos.push((tick, us, tempos.len()));
                } else if kind == 0x2F {
                    return Ok(());
                }
                running = None;
            }
            0xF0 | 0xF7 => {
                let (len, n) = read_vlq(body, pos + 1).map_err(|e| offset_err(e, base))?;
                pos += 1 + n + len as usize;
                if pos > body.len() {
                    return Err(MidiError::Truncated(base + body.len()));
                }
                running = None;
            }
            0xF1..=0xFE => {
                return Err(MidiError::BadEvent { offset: base + pos, reason: format!("system message {status:#04x} in file") });
            }
            _ => {
                if status & 0x80 != 0 {
                    pos += 1;
                    running = Some(status);
                } else {
                    status = running.ok_or_else(|| MidiError::BadEvent {
                        offset: base + pos,
                        reason: "data byte without running status".into(),
                    })?;
                }
                let data_len = match status & 0xF0 {
                    0xC0 | 0xD0 => 1,
                    _ => 2,
                };
                let d1 = byte(pos)?;
                let d2 = if data_len == 2 { byte(pos + 1)? } else { 0 };
                pos += data_len;
                if status & 0xF0 == 0x90 && d2 > 0 {
                    notes.push(RawNote { tick, channel: status & 0x0F, note: d1, velocity: d2, order: (track, seq) });
                    seq += 1;
                }
            }
        }
    }
    Err(MidiError::BadChunk(format!("track at byte {base} has no end-of-track event")))
}

fn offset_err(e: MidiError, base: usize) -> MidiError {
    match e {
        MidiError::Truncated(p) => MidiError::Truncated(base + p),
        MidiError::BadEvent { offset, reason } => MidiError::BadEvent { offset: base + offset, reason },
        other => other,
    }
}
