//! Deterministic replay of a recording through the live engine, paced to
//! the recording clock or as fast as compute allows. Payloads are identical
//! at both speeds; only the latency field reflects wall time.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::thread;
use std::time::{Duration, Instant};

use crate::ensemble::VadModelSet;
use crate::error::{Error, Result};
use crate::io::{read_recording, Recording};

use super::{EmotionEvent, Engine, StreamFrame};

/// Wall-clock pacing for replay.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReplaySpeed {
    Realtime,
    Max,
}

impl FromStr for ReplaySpeed {
    type Err = Error;

    fn from_str(s: &str) -> Result<ReplaySpeed> {
        match s.to_ascii_lowercase().as_str() {
            "1x" => Ok(ReplaySpeed::Realtime),
            "max" => Ok(ReplaySpeed::Max),
            other => Err(Error::config(format!("speed must be `1x` or `max`, got `{other}`"))),
        }
    }
}

impl fmt::Display for ReplaySpeed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReplaySpeed::Realtime => "1x",
            ReplaySpeed::Max => "max",
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ReplayConfig {
    pub speed: ReplaySpeed,
    /// Seconds between events; `None` means the model's window length.
    pub cadence_s: Option<f64>,
}

impl Default for ReplayConfig {
    fn default() -> ReplayConfig {
        ReplayConfig { speed: ReplaySpeed::Realtime, cadence_s: None }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ReplaySummary {
    pub frames: u64,
    pub events: u64,
    pub gaps: u64,
    pub wall_s: f64,
}

/// Replay an in-memory recording, invoking `on_event` for every event in
/// stream order. Runs single-threaded and lossless: unlike the live socket
/// path, nothing is ever dropped, so the event sequence depends only on
/// (recording, model, cadence).
pub fn replay_recording(
    recording: &Recording,
    models: VadModelSet,
    config: &ReplayConfig,
    mut on_event: impl FnMut(&EmotionEvent) -> Result<()>,
) -> Result<ReplaySummary> {
    let fs = recording.segment.fs();
    let mut engine =
        Engine::new(models, recording.segment.channels(), fs, config.cadence_s)?;
    let samples = recording.segment.samples();
    let n = recording.segment.n_samples();
    let mut frame =
        StreamFrame { seq: 0, t_us: 0, samples: vec![0.0; recording.segment.n_channels()] };
    let start = Instant::now();
    let mut events = 0u64;
    for i in 0..n {
        frame.seq = i as u64;
        frame.t_us = ((i + 1) as f64 / fs * 1e6).round() as u64;
        for (c, v) in frame.samples.iter_mut().enumerate() {
            // Through f32, exactly what the wire carries, so replayed and
            // live-streamed payloads match bit for bit.
            *v = samples[[c, i]] as f32;
        }
        if config.speed == ReplaySpeed::Realtime {
            let target = Duration::from_secs_f64((i + 1) as f64 / fs);
            let elapsed = start.elapsed();
            if target > elapsed {
                thread::sleep(target - elapsed);
            }
        }
        if let Some(event) = engine.push_frame(&frame)? {
            events += 1;
            on_event(&event)?;
        }
    }
    Ok(ReplaySummary {
        frames: n as u64,
        events,
        gaps: engine.gaps(),
        wall_s: start.elapsed().as_secs_f64(),
    })
}

/// Replay a recording file; decode failures carry the byte offset.
pub fn run_replay(
    path: &Path,
    models: VadModelSet,
    config: &ReplayConfig,
    on_event: impl FnMut(&EmotionEvent) -> Result<()>,
) -> Result<ReplaySummary> {
    let recording = read_recording(path)?;
    replay_recording(&recording, models, config, on_event)
}

#[cfg(test)]
mod tests {
    use super::super::test_support::trained;
    use super::*;
    use crate::emotion::VadLevel;
    use crate::io::synth::{synthesize_trial, SyntheticSpec};
    use crate::io::write_recording;

    fn exemplar(seconds: f64, seed: u64) -> Recording {
        let (_, spec) = trained();
        let spec = SyntheticSpec { trial_length_s: seconds, ..spec.clone() };
        let level = VadLevel::new(1, 0, 0).unwrap();
        synthesize_trial(&spec, 3, 1, level, seed).unwrap()
    }

    #[test]
    fn max_speed_replay_hits_every_cadence_boundary() {
        let (models, _) = trained();
        let rec = exemplar(60.0, 11);
        let mut ends = Vec::new();
        let config = ReplayConfig { speed: ReplaySpeed::Max, cadence_s: None };
        let summary = replay_recording(&rec, models.clone(), &config, |ev| {
            ends.push(ev.window_end_t);
            Ok(())
        })
        .unwrap();
        assert_eq!(summary.frames, 7680);
        assert_eq!(summary.events, 12);
        assert_eq!(summary.gaps, 0);
        for (k, t) in ends.iter().enumerate() {
            assert!((t - 5.0 * (k + 1) as f64).abs() < 1e-6, "event {k} at {t}");
        }
    }

    #[test]
    fn payloads_are_identical_across_speeds() {
        let (models, _) = trained();
        let rec = exemplar(6.0, 12);
        let run = |speed| {
            let mut events = Vec::new();
            let config = ReplayConfig { speed, cadence_s: None };
            let summary = replay_recording(&rec, models.clone(), &config, |ev| {
                events.push(ev.clone());
                Ok(())
            })
            .unwrap();
            (events, summary)
        };
        let (fast, fast_summary) = run(ReplaySpeed::Max);
        let (paced, paced_summary) = run(ReplaySpeed::Realtime);
        assert_eq!(fast.len(), 1);
        assert_eq!(paced.len(), 1);
        assert!(fast[0].same_payload(&paced[0]), "payload must not depend on pacing");
        // Pacing holds the paced run near the recording clock; the fast run
        // finishes long before it.
        assert!(paced_summary.wall_s >= 5.9, "paced run took {}", paced_summary.wall_s);
        assert!(fast_summary.wall_s < paced_summary.wall_s);
    }

    #[test]
    fn truncated_recording_file_reports_the_byte_offset() {
        let (models, _) = trained();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trial.eegr");
        write_recording(&path, &exemplar(6.0, 13)).unwrap();
        let full = std::fs::read(&path).unwrap();
        std::fs::write(&path, &full[..full.len() - 10]).unwrap();

        let err = run_replay(&path, models.clone(), &ReplayConfig::default(), |_| Ok(()))
            .unwrap_err();
        match err {
            Error::Parse { offset, .. } => assert!(offset > 0 && offset as usize <= full.len()),
            other => panic!("expected a parse error, got {other}"),
        }
    }
}
