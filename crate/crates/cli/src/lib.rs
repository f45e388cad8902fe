//! Command-line front end and live service for beatscribe.

pub mod service;
pub mod stream;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use beatscribe::audio::voice::{enrolment_hits, random_pattern, Voice};
use beatscribe::audio::{load_audio, write_wav, Signal};
use beatscribe::eval::{evaluate, format_annotations, parse_annotations, render_report, ReportFormat};
use beatscribe::features::FeatureExtractor;
use beatscribe::midi::{read_smf, write_smf, MidiMapping, DEFAULT_PPQ};
use beatscribe::onset::{OnsetDetector, OnsetMethod};
use beatscribe::pipeline::{load_model, save_model, train_user_model, transcribe, ClassSpec, PipelineError};
use beatscribe::{Clip, FeatureConfig, LabeledOnset, Model, OnsetParams, CANONICAL_SAMPLE_RATE, FEATURE_NAMES};
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "beatscribe", version, about = "Train on your own beatbox sounds, then transcribe performances to MIDI")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model from an enrolment recording.
    Train(TrainArgs),
    /// Transcribe a performance to a MIDI file.
    Transcribe(TranscribeArgs),
    /// Score a transcription against reference annotations.
    Eval(EvalArgs),
    /// Dump per-event feature vectors as CSV.
    Features(FeaturesArgs),
    /// Render a synthetic test recording.
    Synth(SynthArgs),
    /// Run the HTTP/WebSocket service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct OnsetArgs {
    /// Onset detection function.
    #[arg(long, default_value = "hfc")]
    pub onset_method: OnsetMethod,
    /// Median threshold multiplier.
    #[arg(long, default_value_t = 1.5)]
    pub onset_threshold: f64,
    /// Minimum time between onsets, in seconds.
    #[arg(long, default_value_t = 0.05)]
    pub min_ioi: f64,
    /// Frames quieter than this (dBFS) never start an event.
    #[arg(long, default_value_t = -60.0, allow_negative_numbers = true)]
    pub silence_gate_db: f64,
    /// Disable the silence gate.
    #[arg(long)]
    pub no_silence_gate: bool,
}

impl OnsetArgs {
    fn params(&self) -> Result<OnsetParams> {
        let p = OnsetParams {
            method: self.onset_method,
            threshold: self.onset_threshold,
            min_ioi: self.min_ioi,
            silence_gate_db: (!self.no_silence_gate).then_some(self.silence_gate_db),
        };
        p.validate().map_err(usage)?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Args)]
pub struct FeatureArgs {
    /// Frames averaged per event.
    #[arg(long, default_value_t = 4)]
    pub frames_per_event: usize,
    /// Mel bands feeding the MFCCs.
    #[arg(long, default_value_t = 40)]
    pub n_mels: usize,
}

impl FeatureArgs {
    fn config(&self) -> Result<FeatureConfig> {
        let c = FeatureConfig { frames_per_event: self.frames_per_event, n_mels: self.n_mels, ..FeatureConfig::default() };
        c.validate().map_err(usage)?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Class plan in recording order, e.g. `kick:5,snare:5,hihat:5`.
    #[arg(long)]
    pub classes: String,
    /// Where to write the model document.
    #[arg(long)]
    pub model: PathBuf,
    /// Neighbours consulted per decision.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[command(flatten)]
    pub onset: OnsetArgs,
    #[command(flatten)]
    pub features: FeatureArgs,
}

#[derive(Debug, Args)]
pub struct TranscribeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Output Standard MIDI File.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 120.0)]
    pub tempo: f64,
    #[arg(long, default_value_t = DEFAULT_PPQ)]
    pub ppq: u16,
    /// Note overrides, e.g. `kick=35,clap=39`.
    #[arg(long)]
    pub map: Option<String>,
    /// Also write the events as `time,label` lines.
    #[arg(long)]
    pub events: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Prediction: a MIDI file (.mid/.midi) or `time,label` annotations.
    #[arg(long)]
    pub pred: PathBuf,
    /// Reference annotations.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Match tolerance in seconds.
    #[arg(long, default_value_t = 0.05)]
    pub tolerance: f64,
    /// `text` or `csv`.
    #[arg(long, default_value = "text")]
    pub format: String,
    /// Note-to-class overrides used when reading MIDI predictions.
    #[arg(long)]
    pub map: Option<String>,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Take onset and feature settings from a trained model.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub onset: OnsetArgs,
    #[command(flatten)]
    pub features: FeatureArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Signal description, e.g. `0.5@perc(sine(80,0.1,0.8)); len=2`.
    #[arg(long, conflicts_with_all = ["enrol", "pattern"])]
    pub signal: Option<String>,
    /// Enrolment take for a class plan, e.g. `kick:5,snare:5,hihat:5`.
    #[arg(long, conflicts_with = "pattern")]
    pub enrol: Option<String>,
    /// Random performance of this many hits.
    #[arg(long)]
    pub pattern: Option<usize>,
    /// Rotate the standard voice's timbres between classes (a different "user").
    #[arg(long, default_value_t = 0)]
    pub rotate: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seconds between hits.
    #[arg(long, default_value_t = 0.25)]
    pub spacing: f64,
    /// Background noise RMS.
    #[arg(long, default_value_t = 0.001)]
    pub floor: f64,
    /// Write the ground truth as `time,label` lines.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "BEATSCRIBE_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Persist trained models here and restore them at startup.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
}

/// Failure that maps to exit code 1 with a usage hint.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(String);

fn usage(e: impl std::fmt::Display) -> anyhow::Error {
    UsageError(e.to_string()).into()
}

/// 2 for an enrolment onset-count mismatch, 1 for everything else.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<PipelineError>() {
        Some(PipelineError::OnsetCountMismatch { .. }) => 2,
        _ => 1,
    }
}

fn load_clip(path: &Path) -> Result<Clip> {
    load_audio(path, CANONICAL_SAMPLE_RATE).with_context(|| format!("reading {}", path.display()))
}

fn read_model(path: &Path) -> Result<Model> {
    let doc = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    load_model(&doc).with_context(|| format!("loading {}", path.display()))
}

fn mapping(map: Option<&str>) -> Result<MidiMapping> {
    map.map_or_else(|| Ok(MidiMapping::default()), |m| m.parse().map_err(usage))
}

/// Run one command; human-readable output goes to `out`.
pub fn run(cli: Cli, out: &mut String) -> Result<()> {
    match cli.command {
        Command::Train(a) => cmd_train(a, out),
        Command::Transcribe(a) => cmd_transcribe(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Features(a) => cmd_features(a, out),
        Command::Synth(a) => cmd_synth(a, out),
        Command::Serve(a) => cmd_serve(a),
    }
}

fn cmd_train(a: TrainArgs, out: &mut String) -> Result<()> {
    let spec: ClassSpec = a.classes.parse().map_err(usage)?;
    let (params, config) = (a.onset.params()?, a.features.config()?);
    let clip = load_clip(&a.input)?;
    let model = match train_user_model(&clip, &spec, &config, &params, a.k) {
        Ok(m) => m,
        Err(e @ PipelineError::OnsetCountMismatch { .. }) => return Err(e.into()),
        Err(e) => return Err(anyhow::Error::new(e).context("training failed")),
    };
    fs::write(&a.model, save_model(&model)).with_context(|| format!("writing {}", a.model.display()))?;
    writeln!(out, "onsets: {} found, {} expected", spec.total(), spec.total())?;
    writeln!(out, "selected features: {}", model.selected_feature_names().join(", "))?;
    writeln!(out, "training accuracy (leave-one-out): {:.3}", model.training_accuracy())?;
    writeln!(out, "model {} written to {}", model.id(), a.model.display())?;
    Ok(())
}

fn cmd_transcribe(a: TranscribeArgs, out: &mut String) -> Result<()> {
    let model = read_model(&a.model)?;
    let map = mapping(a.map.as_deref())?;
    let clip = load_clip(&a.input)?;
    let t = transcribe(&clip, &model).context("transcription failed")?;
    let smf = write_smf(&t, &map, a.tempo, a.ppq)?;
    fs::write(&a.out, smf).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(path) = &a.events {
        let events: Vec<LabeledOnset> = t.events.iter().map(Into::into).collect();
        fs::write(path, format_annotations(&events)).with_context(|| format!("writing {}", path.display()))?;
    }
    writeln!(out, "{} events", t.events.len())?;
    for (class, n) in t.counts(model.class_names()) {
        writeln!(out, "  {class}: {n}")?;
    }
    Ok(())
}

fn read_events(path: &Path, map: &MidiMapping) -> Result<Vec<LabeledOnset>> {
    let is_midi = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("mid") || e.eq_ignore_ascii_case("midi"));
    if is_midi {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let notes = read_smf(&bytes, map).with_context(|| format!("parsing {}", path.display()))?;
        Ok(notes.into_iter().map(|n| LabeledOnset::new(n.time, n.label)).collect())
    } else {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        parse_annotations(&text).with_context(|| format!("{}", path.display()))
    }
}

fn cmd_eval(a: EvalArgs, out: &mut String) -> Result<()> {
    let format: ReportFormat = a.format.parse().map_err(usage)?;
    if !(a.tolerance.is_finite() && a.tolerance >= 0.0) {
        return Err(usage(format!("tolerance must be non-negative, got {}", a.tolerance)));
    }
    let map = mapping(a.map.as_deref())?;
    let reference = read_events(&a.reference, &map)?;
    let pred = read_events(&a.pred, &map)?;
    out.push_str(&render_report(&evaluate(&pred, &reference, a.tolerance), format));
    Ok(())
}

fn cmd_features(a: FeaturesArgs, out: &mut String) -> Result<()> {
    let (params, config) = match &a.model {
        Some(path) => {
            let m = read_model(path)?;
            (*m.onset_params(), *m.feature_config())
        }
        None => (a.onset.params()?, a.features.config()?),
    };
    let clip = load_clip(&a.input)?;
    let onsets = OnsetDetector::<f64>::new(params, config.window_size, config.hop)?.detect(&clip)?;
    let extractor = FeatureExtractor::<f64>::new(config, clip.sample_rate())?;
    let mut csv = String::from("time");
    for name in FEATURE_NAMES {
        csv.push(',');
        csv.push_str(name);
    }
    csv.push('\n');
    for o in &onsets {
        let v = extractor.extract_at_frame(clip.samples(), o.frame);
        write!(csv, "{:.6}", o.time)?;
        for x in v.values {
            write!(csv, ",{x}")?;
        }
        csv.push('\n');
    }
    match &a.out {
        Some(path) => fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?,
        None => out.push_str(&csv),
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs, out: &mut String) -> Result<()> {
    let voice = Voice::standard().rotated(a.rotate);
    let (clip, truth): (Clip, Vec<LabeledOnset>) = if let Some(desc) = &a.signal {
        let sig: Signal = desc.parse().map_err(usage)?;
        let s = sig.render()?;
        let truth = s.onsets.iter().map(|&t| LabeledOnset::new(t, "onset")).collect();
        (s.clip, truth)
    } else {
        let hits = match (&a.enrol, a.pattern) {
            (Some(plan), _) => {
                let spec: ClassSpec = plan.parse().map_err(usage)?;
                enrolment_hits(spec.classes(), a.spacing, 0.7)
            }
            (None, Some(n)) => random_pattern(&voice.class_names(), n, a.spacing, a.seed),
            (None, None) => bail!(UsageError("one of --signal, --enrol or --pattern is required".into())),
        };
        for h in &hits {
            if voice.timbre(&h.label).is_none() {
                bail!(UsageError(format!("no synthetic timbre for class {:?} (have {})", h.label, voice.class_names().join(", "))));
            }
        }
        let p = voice.perform(&hits, 0.0, a.floor, a.seed)?;
        (p.clip, p.events.into_iter().map(|(t, l)| LabeledOnset::new(t, l)).collect())
    };
    write_wav(&a.out, &clip).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(path) = &a.annotations {
        fs::write(path, format_annotations(&truth)).with_context(|| format!("writing {}", path.display()))?;
    }
    writeln!(out, "{:.3} s, {} events written to {}", clip.duration(), truth.len(), a.out.display())?;
    Ok(())
}

fn cmd_serve(a: ServeArgs) -> Result<()> {
    let state = service::AppState::new(a.data_dir).context("preparing data directory")?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind((a.host.as_str(), a.port))
            .await
            .with_context(|| format!("binding {}:{}", a.host, a.port))?;
        tracing::info!("listening on {}", listener.local_addr()?);
        axum::serve(listener, service::router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
