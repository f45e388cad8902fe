use std::collections::VecDeque;
use std::sync::Arc;

use super::{classify_onset, DrumEvent, PipelineError, UserModel};
use crate::audio::{frame_count, FrameAnalyzer};
use crate::features::FeatureExtractor;
use crate::onset::{OnsetEvent, StreamingOnsets};
use crate::scalar::Real;

/// Incremental transcription of a sample stream at the canonical rate.
///
/// Feeding a clip in any chunking produces exactly the events [`super::transcribe`]
/// returns for the whole clip. An event is emitted once both its peak-picking
/// lookahead and its feature segment are available, i.e. at most
/// `segment_len + hop` samples after its onset frame starts.
pub struct LiveTranscriber<T: Real> {
    model: Arc<UserModel<T>>,
    analyzer: FrameAnalyzer<T>,
    extractor: FeatureExtractor<T>,
    onsets: StreamingOnsets<T>,
    samples: Vec<T>,
    next_frame: usize,
    pending: VecDeque<OnsetEvent>,
    finished: bool,
}

impl<T: Real> LiveTranscriber<T> {
    pub fn new(model: Arc<UserModel<T>>) -> Result<Self, PipelineError> {
        let detector = model.detector()?;
        let extractor = model.extractor()?;
        Ok(Self {
            analyzer: detector.analyzer().clone(),
            onsets: detector.streaming(crate::audio::CANONICAL_SAMPLE_RATE),
            extractor,
            model,
            samples: Vec::new(),
            next_frame: 0,
            pending: VecDeque::new(),
            finished: false,
        })
    }

    /// Samples received so far.
    pub fn samples_received(&self) -> usize {
        self.samples.len()
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Append samples and return any events that became decidable.
    pub fn push(&mut self, chunk: &[T]) -> Vec<DrumEvent> {
        if self.finished {
            return Vec::new();
        }
        self.samples.extend_from_slice(chunk);
        let window = self.analyzer.window_size();
        let hop = self.analyzer.hop();
        while self.next_frame * hop + window <= self.samples.len() {
            self.analyze_next();
        }
        self.pending.extend(self.onsets.poll(false));
        self.drain(false)
    }

    /// End of stream: flush with zero padding, as the offline path does.
    pub fn finish(&mut self) -> Vec<DrumEvent> {
        if self.finished {
            return Vec::new();
        }
        self.finished = true;
        let total = frame_count(self.samples.len(), self.analyzer.hop());
        while self.next_frame < total {
            self.analyze_next();
        }
        self.pending.extend(self.onsets.poll(true));
        self.drain(true)
    }

    fn analyze_next(&mut self) {
        let frame = self.analyzer.analyze(&self.samples, self.next_frame);
        self.onsets.push_frame(&frame);
        self.next_frame += 1;
    }

    fn drain(&mut self, all: bool) -> Vec<DrumEvent> {
        let mut out = Vec::new();
        while let Some(onset) = self.pending.front() {
            let (_, end) = self.extractor.segment_bounds(onset.frame);
            if !all && end > self.samples.len() {
                break;
            }
            let onset = self.pending.pop_front().expect("front exists");
            out.push(classify_onset(&self.model, &self.extractor, &self.samples, &onset));
        }
        out
    }
}
