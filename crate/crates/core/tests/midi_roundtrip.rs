mod support;

use beatscribe::midi::{read_smf, read_vlq, write_smf, write_vlq, MidiMapping, VLQ_MAX};
use beatscribe::pipeline::Transcription;
use midly::{MidiMessage, Smf, TrackEventKind};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::random_transcription;

fn mapping() -> MidiMapping {
    MidiMapping::default().with_overrides(&[("clap".into(), 39), ("tom".into(), 45)]).unwrap()
}

/// Round trip one transcription; returns the largest timing error in ticks.
fn round_trip(tr: &Transcription, tempo: f64, ppq: u16) -> f64 {
    let map = mapping();
    let bytes = write_smf(tr, &map, tempo, ppq).unwrap();
    let back = read_smf(&bytes, &map).unwrap();
    assert_eq!(back.len(), tr.events.len());
    let tick = (60_000_000.0 / tempo).round() / 1e6 / f64::from(ppq);
    // simultaneous hits keep their input order, so a stable sort by time pairs them up
    let mut worst = 0.0f64;
    for (a, b) in tr.events.iter().zip(&back) {
        assert_eq!(a.label, b.label);
        assert_eq!(a.velocity, b.velocity);
        worst = worst.max((a.time - b.time).abs() / tick);
    }
    let smf = Smf::parse(&bytes).expect("midly parses the file");
    assert_eq!(smf.tracks.len(), 1);
    let ons = smf.tracks[0]
        .iter()
        .filter(|e| matches!(e.kind, TrackEventKind::Midi { message: MidiMessage::NoteOn { vel, .. }, .. } if vel > 0))
        .count();
    assert_eq!(ons, tr.events.len());
    worst
}

#[test]
fn hundred_random_transcriptions_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..100 {
        let tr = random_transcription(&mut rng);
        let tempo = rng.gen_range(40.0..240.0);
        let ppq = [24u16, 96, 480, 960][i % 4];
        let worst = round_trip(&tr, tempo, ppq);
        assert!(worst <= 0.5 + 1e-6, "case {i}: {worst} ticks");
    }
}

#[test]
fn empty_transcription_is_tempo_and_end_only() {
    let tr = Transcription { events: vec![], duration: 0.0, model_id: String::new() };
    let bytes = write_smf(&tr, &MidiMapping::default(), 120.0, 480).unwrap();
    let smf = Smf::parse(&bytes).unwrap();
    assert_eq!(smf.tracks[0].len(), 2);
    assert!(read_smf(&bytes, &MidiMapping::default()).unwrap().is_empty());
}

#[test]
fn vlq_boundaries() {
    for (v, enc) in [
        (0u32, vec![0x00]),
        (0x7F, vec![0x7F]),
        (0x80, vec![0x81, 0x00]),
        (0x3FFF, vec![0xFF, 0x7F]),
        (0x4000, vec![0x81, 0x80, 0x00]),
        (0x1F_FFFF, vec![0xFF, 0xFF, 0x7F]),
        (0x20_0000, vec![0x81, 0x80, 0x80, 0x00]),
        (VLQ_MAX, vec![0xFF, 0xFF, 0xFF, 0x7F]),
    ] {
        let mut out = Vec::new();
        write_vlq(&mut out, v);
        assert_eq!(out, enc, "{v:#x}");
    }
}

proptest! {
    #[test]
    fn vlq_round_trips(v in 0u32..=VLQ_MAX, prefix in proptest::collection::vec(any::<u8>(), 0..4)) {
        let mut out = prefix.clone();
        write_vlq(&mut out, v);
        let (back, used) = read_vlq(&out, prefix.len()).unwrap();
        prop_assert_eq!(back, v);
        prop_assert_eq!(prefix.len() + used, out.len());
    }
}
