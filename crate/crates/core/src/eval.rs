//! Scoring transcriptions against reference annotations.
//!
//! Matching is label-blind: a prediction at the right time with the wrong
//! class is a single "modify" edit, not an add plus a remove.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::DrumEvent;

pub const DEFAULT_TOLERANCE: f64 = 0.050;

/// Classes that lead every report, in this order; others follow alphabetically.
pub const LEADING_CLASSES: [&str; 3] = ["kick", "snare", "hihat"];

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("annotation file contains no events")]
    Empty,
    #[error("unknown report format {0:?} (expected text or csv)")]
    Format(String),
}

/// A timed label, either predicted or annotated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledOnset {
    pub time: f64,
    pub label: String,
}

impl LabeledOnset {
    pub fn new(time: f64, label: impl Into<String>) -> Self {
        Self { time, label: label.into() }
    }
}

impl From<&DrumEvent> for LabeledOnset {
    fn from(e: &DrumEvent) -> Self {
        Self { time: e.time, label: e.label.clone() }
    }
}

/// Parse `time<TAB or ,>label` lines. `#` comments and blank lines are skipped.
pub fn parse_annotations(text: &str) -> Result<Vec<LabeledOnset>, EvalError> {
    let mut events = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| EvalError::Parse { line: i + 1, message };
        let mut fields = line.split(['\t', ',']).map(str::trim);
        let time_field = fields.next().unwrap_or_default();
        let time: f64 = time_field.parse().map_err(|_| err(format!("cannot parse time {time_field:?}")))?;
        if !(time.is_finite() && time >= 0.0) {
            return Err(err(format!("time {time} must be finite and non-negative")));
        }
        let label = fields.next().filter(|l| !l.is_empty()).ok_or_else(|| err("missing label".into()))?;
        events.push(LabeledOnset::new(time, label.to_lowercase()));
    }
    if events.is_empty() {
        return Err(EvalError::Empty);
    }
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(events)
}

/// Inverse of [`parse_annotations`]: one `time,label` line per event.
pub fn format_annotations(events: &[LabeledOnset]) -> String {
    let mut out = String::new();
    for e in events {
        let _ = writeln!(out, "{:.6},{}", e.time, e.label);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Matching {
    /// `(prediction index, reference index)` in order of admission.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_pred: Vec<usize>,
    pub unmatched_ref: Vec<usize>,
    pub tolerance: f64,
}

fn to_nanos(seconds: f64) -> i64 {
    (seconds * 1e9).round() as i64
}

/// Greedy one-to-one matching over all pairs with |Δt| ≤ tolerance, closest
/// first. |Δt| is compared in whole nanoseconds so that differences that are
/// equal in decimal stay equal; ties go to the earlier reference, then the
/// earlier prediction. Indices refer to the input slices, which should be
/// sorted by time.
pub fn match_events(pred: &[LabeledOnset], reference: &[LabeledOnset], tolerance: f64) -> Matching {
    let tol = to_nanos(tolerance.max(0.0));
    let ref_ns: Vec<i64> = reference.iter().map(|e| to_nanos(e.time)).collect();
    let mut order: Vec<usize> = (0..reference.len()).collect();
    order.sort_by_key(|&r| (ref_ns[r], r));
    let sorted: Vec<i64> = order.iter().map(|&r| ref_ns[r]).collect();

    let mut candidates: Vec<(i64, usize, usize)> = Vec::new();
    for (p, e) in pred.iter().enumerate() {
        let t = to_nanos(e.time);
        let lo = sorted.partition_point(|&r| r < t.saturating_sub(tol));
        for (&r, &rt) in order[lo..].iter().zip(&sorted[lo..]) {
            if rt > t.saturating_add(tol) {
                break;
            }
            candidates.push(((t - rt).abs(), r, p));
        }
    }
    candidates.sort_unstable();

    let mut pred_used = vec![false; pred.len()];
    let mut ref_used = vec![false; reference.len()];
    let mut pairs = Vec::new();
    for (_, r, p) in candidates {
        if !pred_used[p] && !ref_used[r] {
            pred_used[p] = true;
            ref_used[r] = true;
            pairs.push((p, r));
        }
    }
    Matching {
        pairs,
        unmatched_pred: (0..pred.len()).filter(|&p| !pred_used[p]).collect(),
        unmatched_ref: (0..reference.len()).filter(|&r| !ref_used[r]).collect(),
        tolerance,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub class: String,
    pub true_positives: usize,
    pub predicted: usize,
    pub reference: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

impl ClassScore {
    pub fn from_counts(class: impl Into<String>, tp: usize, predicted: usize, reference: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, reference);
        let f_measure = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Self { class: class.into(), true_positives: tp, predicted, reference, precision, recall, f_measure }
    }
}

/// Report class order: the leading drum classes, then the rest alphabetically.
pub fn class_order<'a>(classes: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let mut rest: Vec<&str> = classes.into_iter().collect();
    rest.sort_unstable();
    rest.dedup();
    let mut out: Vec<String> = LEADING_CLASSES.iter().filter(|c| rest.contains(c)).map(|c| c.to_string()).collect();
    out.extend(rest.into_iter().filter(|c| !LEADING_CLASSES.contains(c)).map(String::from));
    out
}

/// Per-class precision, recall and F-measure for every class present on either side.
pub fn f_measures(m: &Matching, pred: &[LabeledOnset], reference: &[LabeledOnset]) -> Vec<ClassScore> {
    let classes = class_order(pred.iter().chain(reference).map(|e| e.label.as_str()));
    classes
        .into_iter()
        .map(|c| {
            let tp = m.pairs.iter().filter(|&&(p, r)| pred[p].label == c && reference[r].label == c).count();
            let np = pred.iter().filter(|e| e.label == c).count();
            let nr = reference.iter().filter(|e| e.label == c).count();
            ClassScore::from_counts(c, tp, np, nr)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditOps {
    pub modify: usize,
    pub add: usize,
    pub remove: usize,
}

impl EditOps {
    pub fn total(&self) -> usize {
        self.modify + self.add + self.remove
    }
}

pub fn edit_operations(m: &Matching, pred: &[LabeledOnset], reference: &[LabeledOnset]) -> EditOps {
    EditOps {
        modify: m.pairs.iter().filter(|&&(p, r)| pred[p].label != reference[r].label).count(),
        add: m.unmatched_ref.len(),
        remove: m.unmatched_pred.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<ClassScore>,
    pub edit_ops: EditOps,
    pub n_pred: usize,
    pub n_ref: usize,
    pub n_matched: usize,
    pub tolerance: f64,
}

impl EvalReport {
    pub fn class(&self, name: &str) -> Option<&ClassScore> {
        self.classes.iter().find(|c| c.class == name)
    }

    /// Smallest per-class F-measure, 1.0 for an empty report.
    pub fn min_f(&self) -> f64 {
        self.classes.iter().map(|c| c.f_measure).fold(1.0, f64::min)
    }
}

pub fn evaluate(pred: &[LabeledOnset], reference: &[LabeledOnset], tolerance: f64) -> EvalReport {
    let m = match_events(pred, reference, tolerance);
    EvalReport {
        classes: f_measures(&m, pred, reference),
        edit_ops: edit_operations(&m, pred, reference),
        n_pred: pred.len(),
        n_ref: reference.len(),
        n_matched: m.pairs.len(),
        tolerance,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "text" => Ok(Self::Text),
            "csv" => Ok(Self::Csv),
            _ => Err(EvalError::Format(s.to_string())),
        }
    }
}

fn columns(report: &EvalReport) -> (Vec<String>, Vec<String>) {
    let mut head = vec!["modify".to_string(), "add".into(), "remove".into()];
    let ops = report.edit_ops;
    let mut row = vec![ops.modify.to_string(), ops.add.to_string(), ops.remove.to_string()];
    for c in &report.classes {
        for (suffix, v) in [("P", c.precision), ("R", c.recall), ("F", c.f_measure)] {
            head.push(format!("{}_{suffix}", c.class));
            row.push(format!("{v:.3}"));
        }
    }
    (head, row)
}

/// One header row and one value row. An empty report (no events on either
/// side) renders the header only.
pub fn render_report(report: &EvalReport, format: ReportFormat) -> String {
    let (head, row) = columns(report);
    let empty = report.n_pred == 0 && report.n_ref == 0;
    match format {
        ReportFormat::Csv => {
            let mut out = head.join(",");
            out.push('\n');
            if !empty {
                out.push_str(&row.join(","));
                out.push('\n');
            }
            out
        }
        ReportFormat::Text => {
            let widths: Vec<usize> = head.iter().zip(&row).map(|(h, v)| h.len().max(v.len())).collect();
            let line = |cells: &[String]| {
                let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
                padded.join("  ").trim_end().to_string() + "\n"
            };
            let mut out = line(&head);
            if !empty {
                out.push_str(&line(&row));
            }
            out
        }
    }
}
