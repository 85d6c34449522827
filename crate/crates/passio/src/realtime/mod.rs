//! Streaming inference: ingest framed EEG, keep a rolling window per
//! channel behind a causal filter chain, and emit one emotion event per
//! cadence tick.
//!
//! Windows are built only from contiguous samples: a sequence gap clears
//! the fill counter and the filter state, so no event ever spans a gap.
//! Replay and the socket server drive the same engine, which keeps event
//! payloads a pure function of (recording, model, cadence) regardless of
//! wall-clock speed.

pub mod replay;
pub mod server;
pub mod wire;

use std::collections::VecDeque;
use std::sync::Arc;
use std::time::Instant;

use ndarray::Array2;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::dsp::{EegSegment, FilterMode, StreamingFilter};
use crate::emotion::{map_emotion, EmotionLabel, VadLevel};
use crate::ensemble::{level_from_probs, FeatureBinding, VadModelSet};
use crate::error::{Error, Result};
use crate::features::{window_features, FeatureSchema};
use crate::montage::ChannelId;

pub use replay::{replay_recording, run_replay, ReplayConfig, ReplaySpeed, ReplaySummary};
pub use server::{serve_connection, serve_once, ServeConfig, SessionSummary};
pub use wire::{stream_recording, StreamFrame, StreamHeader, StreamReader};

/// Schema marker written into every emitted event line.
pub const EVENT_SCHEMA: &str = "passio-event-v1";

// ---------------------------------------------------------------------------
// rolling buffer
// ---------------------------------------------------------------------------

/// Per-channel ring holding exactly the most recent analysis window.
/// Capacity is fixed at construction; a window is available only while the
/// fill counter proves every slot came from contiguous input.
#[derive(Clone, Debug)]
pub struct RollingBuffer {
    rings: Vec<VecDeque<f64>>,
    capacity: usize,
    filled: usize,
}

impl RollingBuffer {
    pub fn new(n_channels: usize, capacity: usize) -> Result<RollingBuffer> {
        if n_channels == 0 || capacity == 0 {
            return Err(Error::domain("rolling buffer needs >= 1 channel and >= 1 sample"));
        }
        let rings = vec![VecDeque::with_capacity(capacity); n_channels];
        Ok(RollingBuffer { rings, capacity, filled: 0 })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn filled(&self) -> usize {
        self.filled
    }

    pub fn is_full(&self) -> bool {
        self.filled == self.capacity
    }

    /// Append one multichannel instant, evicting the oldest when full.
    fn push(&mut self, sample: &[f64]) {
        debug_assert_eq!(sample.len(), self.rings.len());
        for (ring, &v) in self.rings.iter_mut().zip(sample) {
            if ring.len() == self.capacity {
                ring.pop_front();
            }
            ring.push_back(v);
        }
        self.filled = (self.filled + 1).min(self.capacity);
    }

    /// Forget the fill level after a gap; stale contents are evicted as new
    /// contiguous samples arrive.
    fn invalidate(&mut self) {
        self.filled = 0;
    }

    fn snapshot(&self, channels: &[ChannelId], fs: f64) -> Result<EegSegment> {
        debug_assert!(self.is_full());
        let mut data = Array2::zeros((self.rings.len(), self.capacity));
        for (c, ring) in self.rings.iter().enumerate() {
            for (i, &v) in ring.iter().enumerate() {
                data[[c, i]] = v;
            }
        }
        EegSegment::new(channels.to_vec(), fs, data)
    }
}

// ---------------------------------------------------------------------------
// window assembly
// ---------------------------------------------------------------------------

/// Turns a frame stream into preprocessed analysis windows: causal
/// band-pass, common average reference, rolling window, cadence
/// bookkeeping.
#[derive(Clone, Debug)]
pub struct WindowAssembler {
    channels: Vec<ChannelId>,
    fs: f64,
    buffer: RollingBuffer,
    filter: StreamingFilter,
    cadence: usize,
    until_next: usize,
    primed: bool,
    next_seq: Option<u64>,
    gaps: u64,
    scratch: Vec<f64>,
}

impl WindowAssembler {
    pub fn new(
        channels: Vec<ChannelId>,
        fs: f64,
        window_length_s: f64,
        cadence_s: f64,
        lo_hz: f64,
        hi_hz: f64,
    ) -> Result<WindowAssembler> {
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::domain(format!("sample rate {fs} Hz must be positive")));
        }
        if !(window_length_s.is_finite() && window_length_s > 0.0) {
            return Err(Error::domain(format!("window of {window_length_s} s is not usable")));
        }
        let length = (window_length_s * fs).round() as usize;
        if length < 2 {
            return Err(Error::domain(format!(
                "window of {window_length_s} s at {fs} Hz holds under two samples"
            )));
        }
        let cadence = if cadence_s.is_finite() { (cadence_s * fs).round() as usize } else { 0 };
        if cadence == 0 {
            return Err(Error::domain(format!(
                "cadence of {cadence_s} s is below one sample at {fs} Hz"
            )));
        }
        let filter = StreamingFilter::bandpass(channels.len(), lo_hz, hi_hz, fs)?;
        let buffer = RollingBuffer::new(channels.len(), length)?;
        Ok(WindowAssembler {
            channels,
            fs,
            buffer,
            filter,
            cadence,
            until_next: 0,
            primed: false,
            next_seq: None,
            gaps: 0,
            scratch: Vec::new(),
        })
    }

    pub fn channels(&self) -> &[ChannelId] {
        &self.channels
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn window_samples(&self) -> usize {
        self.buffer.capacity()
    }

    /// Sequence gaps seen so far.
    pub fn gaps(&self) -> u64 {
        self.gaps
    }

    /// Feed one frame; returns a preprocessed window snapshot when a
    /// cadence boundary lands on this frame. The first window fires as soon
    /// as the ring fills (or refills after a gap), later ones every cadence.
    pub fn ingest(&mut self, frame: &StreamFrame) -> Result<Option<EegSegment>> {
        if frame.samples.len() != self.channels.len() {
            return Err(Error::session(format!(
                "frame {} carries {} samples for a {}-channel session",
                frame.seq,
                frame.samples.len(),
                self.channels.len()
            )));
        }
        if let Some(expected) = self.next_seq {
            if frame.seq < expected {
                return Err(Error::session(format!(
                    "sequence moved backwards: frame {} after frame {}",
                    frame.seq,
                    expected - 1
                )));
            }
            if frame.seq > expected {
                // Frames were dropped upstream. Discard filter state and
                // fill level so no window ever spans the gap.
                self.gaps += 1;
                log::warn!(
                    "sequence gap: expected frame {expected}, got {}; refilling window",
                    frame.seq
                );
                self.buffer.invalidate();
                self.filter.reset();
                self.primed = false;
            }
        }
        self.next_seq = Some(frame.seq + 1);

        self.scratch.clear();
        self.scratch.extend(frame.samples.iter().map(|&v| f64::from(v)));
        self.filter.process_frame(&mut self.scratch);
        let mean = self.scratch.iter().sum::<f64>() / self.scratch.len() as f64;
        for v in &mut self.scratch {
            *v -= mean;
        }
        let sample = std::mem::take(&mut self.scratch);
        self.buffer.push(&sample);
        self.scratch = sample;

        if !self.buffer.is_full() {
            return Ok(None);
        }
        if !self.primed {
            self.primed = true;
            self.until_next = self.cadence;
            return self.buffer.snapshot(&self.channels, self.fs).map(Some);
        }
        self.until_next -= 1;
        if self.until_next == 0 {
            self.until_next = self.cadence;
            return self.buffer.snapshot(&self.channels, self.fs).map(Some);
        }
        Ok(None)
    }
}

// ---------------------------------------------------------------------------
// events
// ---------------------------------------------------------------------------

/// One inference result: the discrete affect triple, its per-dimension
/// probabilities, and the mapped emotion, stamped with the stream clock at
/// the window's end.
#[derive(Clone, Debug)]
pub struct EmotionEvent {
    /// Stream time (seconds) at the end of the window.
    pub window_end_t: f64,
    pub vad_level: VadLevel,
    /// Per-level probabilities in valence/arousal/dominance order; each
    /// triple sums to one.
    pub vad_probs: [[f64; 3]; 3],
    pub emotion: EmotionLabel,
    /// Wall-clock compute time for this event; never part of payload
    /// comparisons.
    pub latency_ms: f64,
    /// Hex SHA-256 over the feature vector bytes, for replay audits.
    pub features_digest: String,
}

/// Flat serialization of an event line, versioned by `schema`.
#[derive(Serialize, Deserialize)]
struct EventRecord {
    schema: String,
    window_end_t: f64,
    valence: i8,
    arousal: i8,
    dominance: i8,
    valence_probs: [f64; 3],
    arousal_probs: [f64; 3],
    dominance_probs: [f64; 3],
    emotion: String,
    latency_ms: f64,
    features_digest: String,
}

impl EmotionEvent {
    /// One line of the versioned event stream.
    pub fn to_json_line(&self) -> String {
        let [valence, arousal, dominance] = self.vad_level.as_array();
        let record = EventRecord {
            schema: EVENT_SCHEMA.to_string(),
            window_end_t: self.window_end_t,
            valence,
            arousal,
            dominance,
            valence_probs: self.vad_probs[0],
            arousal_probs: self.vad_probs[1],
            dominance_probs: self.vad_probs[2],
            emotion: self.emotion.name().to_string(),
            latency_ms: self.latency_ms,
            features_digest: self.features_digest.clone(),
        };
        serde_json::to_string(&record).expect("events serialize")
    }

    pub fn from_json_line(line: &str) -> Result<EmotionEvent> {
        let record: EventRecord = serde_json::from_str(line)
            .map_err(|e| Error::parse(e.column() as u64, format!("bad event line: {e}")))?;
        if record.schema != EVENT_SCHEMA {
            return Err(Error::schema(
                "schema",
                format!("unknown event schema `{}`", record.schema),
            ));
        }
        let vad_level = VadLevel::new(record.valence, record.arousal, record.dominance)?;
        let emotion = map_emotion(&vad_level);
        if emotion.name() != record.emotion {
            return Err(Error::schema(
                "emotion",
                format!("label `{}` does not match the level triple", record.emotion),
            ));
        }
        Ok(EmotionEvent {
            window_end_t: record.window_end_t,
            vad_level,
            vad_probs: [record.valence_probs, record.arousal_probs, record.dominance_probs],
            emotion,
            latency_ms: record.latency_ms,
            features_digest: record.features_digest,
        })
    }

    /// Equality over everything a replay must reproduce; latency is wall
    /// clock and excluded.
    pub fn same_payload(&self, other: &EmotionEvent) -> bool {
        self.window_end_t == other.window_end_t
            && self.vad_level == other.vad_level
            && self.vad_probs == other.vad_probs
            && self.emotion == other.emotion
            && self.features_digest == other.features_digest
    }
}

// ---------------------------------------------------------------------------
// inference
// ---------------------------------------------------------------------------

/// Binds a model set to a stream's channel layout once, then turns window
/// snapshots into events. Feature names resolve here, at startup, so a
/// feature/model mismatch can never surface mid-stream.
pub struct Inferencer {
    models: VadModelSet,
    schema: Arc<FeatureSchema>,
    bindings: [FeatureBinding; 3],
    fft: Arc<dyn Fft<f64>>,
}

impl Inferencer {
    pub fn new(
        models: VadModelSet,
        channels: &[ChannelId],
        window_samples: usize,
    ) -> Result<Inferencer> {
        let schema = FeatureSchema::for_channels(channels);
        let bindings = [
            models.valence.bind(&schema)?,
            models.arousal.bind(&schema)?,
            models.dominance.bind(&schema)?,
        ];
        let fft = FftPlanner::new().plan_fft_forward(window_samples);
        Ok(Inferencer { models, schema, bindings, fft })
    }

    pub fn infer(&self, window: &EegSegment, window_end_t: f64) -> Result<EmotionEvent> {
        let start = Instant::now();
        let values = window_features(window, &self.schema, self.fft.as_ref())?;
        let mut digest = Sha256::new();
        for v in &values {
            digest.update(v.to_le_bytes());
        }
        let ensembles = [&self.models.valence, &self.models.arousal, &self.models.dominance];
        let mut probs = [[0.0; 3]; 3];
        let mut levels = [0i8; 3];
        let mut row = Vec::new();
        for (k, (model, binding)) in ensembles.iter().zip(&self.bindings).enumerate() {
            binding.gather(&values, &mut row);
            let p = model.predict_proba(&row)?;
            levels[k] = level_from_probs(&p);
            probs[k] = p;
        }
        let vad_level = VadLevel::new(levels[0], levels[1], levels[2])?;
        Ok(EmotionEvent {
            window_end_t,
            vad_level,
            vad_probs: probs,
            emotion: map_emotion(&vad_level),
            latency_ms: start.elapsed().as_secs_f64() * 1e3,
            features_digest: format!("{:x}", digest.finalize()),
        })
    }
}

// ---------------------------------------------------------------------------
// engine
// ---------------------------------------------------------------------------

/// One live session: assembler plus inferencer wired to a model set.
pub struct Engine {
    assembler: WindowAssembler,
    inferencer: Inferencer,
    events: u64,
}

impl Engine {
    /// Window geometry and filter corners come from the model, so live
    /// preprocessing reproduces training; the stream contributes only its
    /// rate and channel layout. Cadence defaults to the window length
    /// (non-overlapping windows).
    pub fn new(
        models: VadModelSet,
        channels: &[ChannelId],
        fs: f64,
        cadence_s: Option<f64>,
    ) -> Result<Engine> {
        if models.meta.filter_mode != FilterMode::Causal {
            log::warn!(
                "model was trained on zero-phase filtering but live filtering is causal; \
                 expect train/serve skew"
            );
        }
        let cadence = cadence_s.unwrap_or(models.meta.window_length_s);
        let assembler = WindowAssembler::new(
            channels.to_vec(),
            fs,
            models.meta.window_length_s,
            cadence,
            models.meta.bandpass_lo_hz,
            models.meta.bandpass_hi_hz,
        )?;
        let inferencer = Inferencer::new(models, channels, assembler.window_samples())?;
        Ok(Engine { assembler, inferencer, events: 0 })
    }

    /// Feed one frame; inference runs inline whenever the assembler yields
    /// a window.
    pub fn push_frame(&mut self, frame: &StreamFrame) -> Result<Option<EmotionEvent>> {
        match self.assembler.ingest(frame)? {
            Some(window) => {
                let event = self.inferencer.infer(&window, frame.t_s())?;
                self.events += 1;
                Ok(Some(event))
            }
            None => Ok(None),
        }
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn gaps(&self) -> u64 {
        self.assembler.gaps()
    }

    /// Split into the two concurrency roles: ingest owns the ring, the
    /// inference role owns the models.
    pub fn into_parts(self) -> (WindowAssembler, Inferencer) {
        (self.assembler, self.inferencer)
    }
}

// ---------------------------------------------------------------------------


#[cfg(test)]
mod tests {
    use super::test_support::{trained, zero_frames};
    use super::*;
    use crate::io::synth::synthesize_trial;
    use crate::montage::parse_channels;

    fn assembler(window_s: f64, cadence_s: f64) -> WindowAssembler {
        let channels = parse_channels(&["Fp1", "F7", "FC5", "FC6", "T7", "T8", "P7", "O2"]);
        WindowAssembler::new(channels.unwrap(), 128.0, window_s, cadence_s, 0.4, 45.0).unwrap()
    }

    fn sine_frame(i: usize, seq: u64, n_channels: usize) -> StreamFrame {
        let t = i as f64 / 128.0;
        let v = (std::f64::consts::TAU * 10.0 * t).sin() as f32;
        StreamFrame {
            seq,
            t_us: ((i + 1) as f64 / 128.0 * 1e6).round() as u64,
            samples: vec![v; n_channels],
        }
    }

    #[test]
    fn first_window_fires_on_fill_then_every_cadence() {
        let mut asm = assembler(5.0, 5.0);
        let mut emitted = Vec::new();
        for i in 0..1280 {
            if let Some(w) = asm.ingest(&sine_frame(i, i as u64, 8)).unwrap() {
                emitted.push((i, w.n_samples()));
            }
        }
        // 640 frames fill the first 5 s window; the second closes at 1280.
        assert_eq!(emitted.iter().map(|&(i, _)| i).collect::<Vec<_>>(), vec![639, 1279]);
        assert!(emitted.iter().all(|&(_, n)| n == 640));
    }

    #[test]
    fn overlapping_cadence_emits_every_hop_after_priming() {
        let mut asm = assembler(5.0, 1.0);
        let mut at = Vec::new();
        for i in 0..1280 {
            if asm.ingest(&sine_frame(i, i as u64, 8)).unwrap().is_some() {
                at.push(i);
            }
        }
        assert_eq!(at, vec![639, 767, 895, 1023, 1151, 1279]);
    }

    #[test]
    fn gap_suppresses_windows_until_contiguous_refill() {
        let mut asm = assembler(5.0, 5.0);
        let mut windows = Vec::new();
        // 2 s of frames, a 64-frame (0.5 s) drop, then enough to refill.
        for i in 0..256 {
            if asm.ingest(&sine_frame(i, i as u64, 8)).unwrap().is_some() {
                windows.push(i);
            }
        }
        for i in 320..1280 {
            if asm.ingest(&sine_frame(i, i as u64, 8)).unwrap().is_some() {
                windows.push(i);
            }
        }
        // The first window closes 640 contiguous frames after the gap, not
        // at the nominal 640th frame of the session.
        assert_eq!(windows, vec![320 + 639]);
        assert_eq!(asm.gaps(), 1);
    }

    #[test]
    fn sequence_regression_is_a_session_error() {
        let mut asm = assembler(5.0, 5.0);
        asm.ingest(&sine_frame(0, 5, 8)).unwrap();
        let err = asm.ingest(&sine_frame(1, 5, 8)).unwrap_err();
        assert!(matches!(err, Error::Session(_)), "got: {err}");
    }

    #[test]
    fn channel_count_mismatch_is_a_session_error() {
        let mut asm = assembler(5.0, 5.0);
        let err = asm.ingest(&sine_frame(0, 0, 7)).unwrap_err();
        assert!(matches!(err, Error::Session(_)), "got: {err}");
        assert!(err.to_string().contains('7') && err.to_string().contains('8'));
    }

    #[test]
    fn all_zero_window_yields_a_finite_deterministic_event() {
        let (models, _) = trained();
        let run = || {
            let mut engine =
                Engine::new(models.clone(), &models.meta.channels, 128.0, None).unwrap();
            let mut events = Vec::new();
            for frame in zero_frames(640, models.meta.channels.len()) {
                if let Some(ev) = engine.push_frame(&frame).unwrap() {
                    events.push(ev);
                }
            }
            events
        };
        let (a, b) = (run(), run());
        assert_eq!(a.len(), 1);
        let ev = &a[0];
        assert!((ev.window_end_t - 5.0).abs() < 1e-9);
        for triple in &ev.vad_probs {
            assert!((triple.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(triple.iter().all(|p| p.is_finite() && *p >= 0.0));
        }
        assert_eq!(ev.features_digest.len(), 64);
        assert!(ev.same_payload(&b[0]), "zero-window events must be deterministic");
    }

    #[test]
    fn missing_model_channel_fails_at_startup() {
        let (models, _) = trained();
        // The standard montage lacks T7/T8, which the model's features need.
        let live = parse_channels(&["Fp1", "Fp2", "C3", "C4", "P7", "P8", "O1", "O2"]).unwrap();
        let err = Engine::new(models.clone(), &live, 128.0, None).map(|_| ()).unwrap_err();
        assert!(err.to_string().contains("T7"), "error was: {err}");
    }

    #[test]
    fn love_exemplar_stream_maps_to_love() {
        let (models, spec) = trained();
        // High arousal, positive valence, low dominance: Love in the
        // passion map.
        let level = VadLevel::new(1, 1, -1).unwrap();
        let rec = synthesize_trial(spec, 9, 1, level, 4242).unwrap();
        let mut events = Vec::new();
        let config = ReplayConfig { speed: ReplaySpeed::Max, cadence_s: None };
        replay_recording(&rec, models.clone(), &config, |ev| {
            events.push(ev.clone());
            Ok(())
        })
        .unwrap();
        assert_eq!(events.len(), 2, "12 s at a 5 s cadence");
        for ev in &events {
            assert_eq!(ev.vad_level, level);
            assert_eq!(ev.emotion, EmotionLabel::Love);
        }
    }

    #[test]
    fn event_lines_round_trip_and_reject_tampered_labels() {
        let (models, spec) = trained();
        let level = VadLevel::new(-1, 1, -1).unwrap();
        let rec = synthesize_trial(spec, 9, 2, level, 77).unwrap();
        let mut first = None;
        let config = ReplayConfig { speed: ReplaySpeed::Max, cadence_s: None };
        replay_recording(&rec, models.clone(), &config, |ev| {
            first.get_or_insert_with(|| ev.clone());
            Ok(())
        })
        .unwrap();
        let event = first.expect("at least one event");

        let line = event.to_json_line();
        assert!(line.contains(EVENT_SCHEMA));
        let back = EmotionEvent::from_json_line(&line).unwrap();
        assert!(back.same_payload(&event));
        assert_eq!(back.latency_ms, event.latency_ms);

        let wrong = if event.emotion == EmotionLabel::Love { "Hate" } else { "Love" };
        let tampered =
            line.replace(&format!("\"{}\"", event.emotion.name()), &format!("\"{wrong}\""));
        assert_ne!(tampered, line);
        let err = EmotionEvent::from_json_line(&tampered).unwrap_err();
        assert!(matches!(err, Error::Schema { .. }), "got: {err}");
    }
}
