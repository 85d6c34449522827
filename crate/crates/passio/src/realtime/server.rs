//! Socket service for live sessions: an ingest role reads frames and fills
//! the ring, an inference role turns window snapshots into event lines.
//!
//! The two roles hand off through a bounded channel of depth one. When
//! inference is still busy as a new window closes, that window is dropped
//! and counted, never queued, so memory stays bounded by the ring plus one
//! in-flight window.

use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::mpsc::{sync_channel, TrySendError};
use std::thread;

use crate::dsp::EegSegment;
use crate::ensemble::VadModelSet;
use crate::error::{Error, Result};

use super::{Engine, StreamReader};

#[derive(Clone, Copy, Debug, Default)]
pub struct ServeConfig {
    /// Seconds between events; `None` means the model's window length.
    pub cadence_s: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SessionSummary {
    pub frames: u64,
    pub events: u64,
    /// Windows discarded because inference was still busy.
    pub dropped: u64,
    pub gaps: u64,
}

fn emit_failed(e: std::io::Error) -> Error {
    Error::session(format!("event emit failed: {e}"))
}

/// Drive one complete session: handshake, frames until the peer hangs up,
/// events as JSON lines on `events_out`. The calling thread ingests; a
/// scoped thread runs inference and owns the sink.
pub fn serve_connection<R: Read, W: Write + Send>(
    models: VadModelSet,
    input: R,
    events_out: W,
    config: &ServeConfig,
) -> Result<SessionSummary> {
    let mut reader = StreamReader::new(input);
    let header = reader.read_header()?.clone();
    let engine = Engine::new(models, &header.channels, f64::from(header.fs), config.cadence_s)?;
    let (mut assembler, inferencer) = engine.into_parts();

    let mut frames = 0u64;
    let mut dropped = 0u64;
    let mut events = 0u64;

    thread::scope(|scope| -> Result<()> {
        let (tx, rx) = sync_channel::<(EegSegment, f64)>(1);
        let inference = scope.spawn(move || -> Result<u64> {
            let mut out = events_out;
            let mut emitted = 0u64;
            while let Ok((window, end_t)) = rx.recv() {
                let event = inferencer.infer(&window, end_t)?;
                out.write_all(event.to_json_line().as_bytes()).map_err(emit_failed)?;
                out.write_all(b"\n").map_err(emit_failed)?;
                out.flush().map_err(emit_failed)?;
                emitted += 1;
            }
            Ok(emitted)
        });

        let mut ingest = || -> Result<()> {
            while let Some(frame) = reader.next_frame()? {
                frames += 1;
                if let Some(window) = assembler.ingest(&frame)? {
                    match tx.try_send((window, frame.t_s())) {
                        Ok(()) => {}
                        Err(TrySendError::Full(_)) => dropped += 1,
                        // Inference stopped; its error surfaces on join.
                        Err(TrySendError::Disconnected(_)) => break,
                    }
                }
            }
            Ok(())
        };
        let ingested = ingest();
        drop(tx);
        let inferred = inference
            .join()
            .unwrap_or_else(|_| Err(Error::session("inference thread panicked")));
        ingested?;
        events = inferred?;
        Ok(())
    })?;

    Ok(SessionSummary { frames, events, dropped, gaps: assembler.gaps() })
}

/// Accept one connection and run it to completion.
pub fn serve_once<W: Write + Send>(
    listener: &TcpListener,
    models: VadModelSet,
    events_out: W,
    config: &ServeConfig,
) -> Result<SessionSummary> {
    let (socket, peer) =
        listener.accept().map_err(|e| Error::session(format!("accept failed: {e}")))?;
    log::info!("live session from {peer}");
    serve_connection(models, socket, events_out, config)
}
