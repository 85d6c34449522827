//! Framed wire format for live EEG ingest, plus a reader that names the
//! byte offset of any decode failure.
//!
//! A connection carries, all little-endian: magic `EEG1` once, one header
//! (sample rate u32 in Hz, channel count u16, u16-length-prefixed UTF-8
//! channel names), then frames until the peer hangs up. One frame is one
//! multichannel sample instant: sequence u64, capture clock u64 in
//! microseconds, then one f32 amplitude in microvolts per channel.

use std::io::{ErrorKind, Read, Write};

use byteorder::{ByteOrder as _, WriteBytesExt as _, LE};

use crate::error::{Error, Result};
use crate::io::Recording;
use crate::montage::{parse_channels, ChannelId};

pub const WIRE_MAGIC: &[u8; 4] = b"EEG1";

/// Per-connection identity; rate and channel layout never change
/// mid-session.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StreamHeader {
    pub fs: u32,
    pub channels: Vec<ChannelId>,
}

impl StreamHeader {
    /// Header advertising a recording's layout. The wire carries integer
    /// rates only.
    pub fn for_recording(rec: &Recording) -> Result<StreamHeader> {
        let fs = rec.segment.fs();
        if fs <= 0.0 || fs.fract() != 0.0 || fs > f64::from(u32::MAX) {
            return Err(Error::domain(format!(
                "wire rate must be a positive integer Hz, got {fs}"
            )));
        }
        Ok(StreamHeader { fs: fs as u32, channels: rec.segment.channels().to_vec() })
    }
}

/// One multichannel sample instant as it crosses the wire. The timestamp
/// marks the end of the sample's interval on the sender's monotonic clock.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamFrame {
    pub seq: u64,
    pub t_us: u64,
    pub samples: Vec<f32>,
}

impl StreamFrame {
    pub fn t_s(&self) -> f64 {
        self.t_us as f64 / 1e6
    }
}

// ---------------------------------------------------------------------------
// writing
// ---------------------------------------------------------------------------

fn write_failed(e: std::io::Error) -> Error {
    Error::session(format!("stream write failed: {e}"))
}

pub fn write_header<W: Write>(w: &mut W, header: &StreamHeader) -> Result<()> {
    if header.fs == 0 {
        return Err(Error::schema("fs", "sample rate must be positive"));
    }
    if header.channels.is_empty() {
        return Err(Error::schema("channels", "stream must carry at least one channel"));
    }
    let mut buf = Vec::with_capacity(16 + 8 * header.channels.len());
    buf.extend_from_slice(WIRE_MAGIC);
    buf.write_u32::<LE>(header.fs).expect("vec write");
    buf.write_u16::<LE>(header.channels.len() as u16).expect("vec write");
    for ch in &header.channels {
        let name = ch.name().as_bytes();
        buf.write_u16::<LE>(name.len() as u16).expect("vec write");
        buf.extend_from_slice(name);
    }
    w.write_all(&buf).map_err(write_failed)
}

pub fn write_frame<W: Write>(w: &mut W, frame: &StreamFrame) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + 4 * frame.samples.len());
    buf.write_u64::<LE>(frame.seq).expect("vec write");
    buf.write_u64::<LE>(frame.t_us).expect("vec write");
    for &s in &frame.samples {
        buf.write_f32::<LE>(s).expect("vec write");
    }
    w.write_all(&buf).map_err(write_failed)
}

/// Write a recording as one complete session: header, then one frame per
/// sample instant. Amplitudes pass through f32, exactly what any socket
/// peer would see, so replayed and streamed payloads agree bit for bit.
/// Returns the frame count.
pub fn stream_recording<W: Write>(w: &mut W, rec: &Recording) -> Result<u64> {
    let header = StreamHeader::for_recording(rec)?;
    write_header(w, &header)?;
    let fs = rec.segment.fs();
    let samples = rec.segment.samples();
    let n = rec.segment.n_samples();
    let mut frame =
        StreamFrame { seq: 0, t_us: 0, samples: vec![0.0; rec.segment.n_channels()] };
    for i in 0..n {
        frame.seq = i as u64;
        frame.t_us = ((i + 1) as f64 / fs * 1e6).round() as u64;
        for (c, v) in frame.samples.iter_mut().enumerate() {
            *v = samples[[c, i]] as f32;
        }
        write_frame(w, &frame)?;
    }
    Ok(n as u64)
}

// ---------------------------------------------------------------------------
// reading
// ---------------------------------------------------------------------------

/// Decoder over any byte stream. Tracks consumed bytes so truncation and
/// framing errors report the offset of the field that failed.
pub struct StreamReader<R> {
    inner: R,
    offset: u64,
    header: Option<StreamHeader>,
}

impl<R: Read> StreamReader<R> {
    pub fn new(inner: R) -> StreamReader<R> {
        StreamReader { inner, offset: 0, header: None }
    }

    /// Bytes consumed so far.
    pub fn offset(&self) -> u64 {
        self.offset
    }

    fn read_field(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        let at = self.offset;
        match self.inner.read_exact(buf) {
            Ok(()) => {
                self.offset += buf.len() as u64;
                Ok(())
            }
            Err(e) if e.kind() == ErrorKind::UnexpectedEof => {
                Err(Error::parse(at, format!("truncated {what}")))
            }
            Err(e) => Err(Error::session(format!("stream read failed: {e}"))),
        }
    }

    /// Like [`read_field`] but a clean end of stream before the first byte
    /// yields `false` instead of an error.
    fn read_field_or_eof(&mut self, buf: &mut [u8], what: &str) -> Result<bool> {
        let at = self.offset;
        let mut got = 0;
        while got < buf.len() {
            match self.inner.read(&mut buf[got..]) {
                Ok(0) if got == 0 => return Ok(false),
                Ok(0) => return Err(Error::parse(at, format!("truncated {what}"))),
                Ok(n) => got += n,
                Err(e) if e.kind() == ErrorKind::Interrupted => continue,
                Err(e) => return Err(Error::session(format!("stream read failed: {e}"))),
            }
        }
        self.offset += buf.len() as u64;
        Ok(true)
    }

    /// Read and cache the session header; must precede [`next_frame`].
    pub fn read_header(&mut self) -> Result<&StreamHeader> {
        if self.header.is_none() {
            let mut magic = [0u8; 4];
            self.read_field(&mut magic, "magic")?;
            if &magic != WIRE_MAGIC {
                return Err(Error::parse(0, format!("bad magic {magic:02x?}, expected EEG1")));
            }
            let mut word = [0u8; 4];
            self.read_field(&mut word, "sample rate")?;
            let fs = LE::read_u32(&word);
            if fs == 0 {
                return Err(Error::schema("fs", "sample rate must be positive"));
            }
            let mut half = [0u8; 2];
            self.read_field(&mut half, "channel count")?;
            let n = LE::read_u16(&half) as usize;
            if n == 0 {
                return Err(Error::schema("channels", "stream must carry at least one channel"));
            }
            let mut names = Vec::with_capacity(n);
            for _ in 0..n {
                self.read_field(&mut half, "channel name length")?;
                let mut raw = vec![0u8; LE::read_u16(&half) as usize];
                let at = self.offset;
                self.read_field(&mut raw, "channel name")?;
                let name = String::from_utf8(raw)
                    .map_err(|_| Error::parse(at, "channel name is not UTF-8"))?;
                names.push(name);
            }
            let channels = parse_channels(&names)?;
            self.header = Some(StreamHeader { fs, channels });
        }
        Ok(self.header.as_ref().expect("header cached"))
    }

    /// Next frame, or `None` at a clean end of stream on a frame boundary.
    pub fn next_frame(&mut self) -> Result<Option<StreamFrame>> {
        let n = match &self.header {
            Some(h) => h.channels.len(),
            None => return Err(Error::contract("read the stream header before frames")),
        };
        let mut qword = [0u8; 8];
        if !self.read_field_or_eof(&mut qword, "frame sequence")? {
            return Ok(None);
        }
        let seq = LE::read_u64(&qword);
        self.read_field(&mut qword, "frame timestamp")?;
        let t_us = LE::read_u64(&qword);
        let mut raw = vec![0u8; 4 * n];
        self.read_field(&mut raw, "frame samples")?;
        let mut samples = vec![0.0f32; n];
        LE::read_f32_into(&raw, &mut samples);
        Ok(Some(StreamFrame { seq, t_us, samples }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::synth::{synthesize_trial, SyntheticSpec};
    use crate::VadLevel;
    use std::io::Cursor;

    fn two_channel_header() -> StreamHeader {
        StreamHeader { fs: 128, channels: parse_channels(&["T7", "T8"]).unwrap() }
    }

    fn frame(seq: u64, samples: &[f32]) -> StreamFrame {
        StreamFrame { seq, t_us: (seq + 1) * 7813, samples: samples.to_vec() }
    }

    #[test]
    fn header_and_frames_round_trip() {
        let header = two_channel_header();
        let frames =
            [frame(0, &[1.5, -2.0]), frame(1, &[0.0, 3.25]), frame(2, &[-0.5, 0.125])];
        let mut buf = Vec::new();
        write_header(&mut buf, &header).unwrap();
        for f in &frames {
            write_frame(&mut buf, f).unwrap();
        }

        let mut reader = StreamReader::new(Cursor::new(buf));
        assert_eq!(*reader.read_header().unwrap(), header);
        for f in &frames {
            assert_eq!(reader.next_frame().unwrap().as_ref(), Some(f));
        }
        assert!(reader.next_frame().unwrap().is_none(), "clean EOF on a frame boundary");
    }

    #[test]
    fn bad_magic_is_a_parse_error_at_offset_zero() {
        let mut reader = StreamReader::new(Cursor::new(b"EEGX\x80\x00\x00\x00".to_vec()));
        match reader.read_header().unwrap_err() {
            Error::Parse { offset, message } => {
                assert_eq!(offset, 0);
                assert!(message.contains("magic"), "message was: {message}");
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn truncated_frame_names_the_failed_field_offset() {
        let header = two_channel_header();
        let mut buf = Vec::new();
        write_header(&mut buf, &header).unwrap();
        let header_len = buf.len() as u64;
        write_frame(&mut buf, &frame(0, &[1.0, 2.0])).unwrap();
        write_frame(&mut buf, &frame(1, &[3.0, 4.0])).unwrap();
        buf.truncate(buf.len() - 5); // cut into the second frame's samples

        let mut reader = StreamReader::new(Cursor::new(buf));
        reader.read_header().unwrap();
        assert!(reader.next_frame().unwrap().is_some());
        match reader.next_frame().unwrap_err() {
            Error::Parse { offset, message } => {
                // The sample block of frame 1 starts after one full frame
                // (24 bytes) plus seq and timestamp (16 bytes).
                assert_eq!(offset, header_len + 24 + 16);
                assert!(message.contains("samples"), "message was: {message}");
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn truncated_header_is_a_parse_error() {
        let header = two_channel_header();
        let mut buf = Vec::new();
        write_header(&mut buf, &header).unwrap();
        buf.truncate(buf.len() - 1);
        let mut reader = StreamReader::new(Cursor::new(buf));
        match reader.read_header().unwrap_err() {
            Error::Parse { message, .. } => {
                assert!(message.contains("channel name"), "message was: {message}")
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn unknown_channel_name_is_rejected() {
        let mut buf = Vec::new();
        buf.extend_from_slice(WIRE_MAGIC);
        buf.write_u32::<LE>(128).unwrap();
        buf.write_u16::<LE>(1).unwrap();
        buf.write_u16::<LE>(3).unwrap();
        buf.extend_from_slice(b"Zz9");
        let err = StreamReader::new(Cursor::new(buf)).read_header().unwrap_err();
        assert!(err.to_string().contains("Zz9"), "error was: {err}");
    }

    #[test]
    fn frames_before_header_break_the_contract() {
        let mut reader = StreamReader::new(Cursor::new(Vec::new()));
        assert!(matches!(reader.next_frame(), Err(Error::Contract(_))));
    }

    #[test]
    fn streamed_recording_carries_every_sample_through_f32() {
        let spec = SyntheticSpec { trial_length_s: 2.0, ..SyntheticSpec::demo() };
        let level = VadLevel::new(1, 1, -1).unwrap();
        let rec = synthesize_trial(&spec, 1, 1, level, 99).unwrap();
        let mut buf = Vec::new();
        let frames = stream_recording(&mut buf, &rec).unwrap();
        assert_eq!(frames, 256);

        let mut reader = StreamReader::new(Cursor::new(buf));
        let header = reader.read_header().unwrap().clone();
        assert_eq!(header.fs, 128);
        assert_eq!(header.channels, rec.segment.channels());
        let mut count = 0u64;
        while let Some(f) = reader.next_frame().unwrap() {
            assert_eq!(f.seq, count);
            for (c, &v) in f.samples.iter().enumerate() {
                assert_eq!(v, rec.segment.samples()[[c, count as usize]] as f32);
            }
            count += 1;
        }
        assert_eq!(count, frames);
        // 128 Hz divides a second evenly, so window boundaries land on
        // exact microsecond stamps.
        assert!((frame_t(&rec, 255) - 2.0).abs() < 1e-9);

        fn frame_t(rec: &Recording, i: usize) -> f64 {
            ((i + 1) as f64 / rec.segment.fs() * 1e6).round() / 1e6
        }
    }

    #[test]
    fn fractional_rates_cannot_cross_the_wire() {
        let spec = SyntheticSpec { fs: 100.5, trial_length_s: 2.0, ..SyntheticSpec::demo() };
        let level = VadLevel::new(0, 0, 0).unwrap();
        let rec = synthesize_trial(&spec, 1, 1, level, 1).unwrap();
        let err = StreamHeader::for_recording(&rec).unwrap_err();
        assert!(err.to_string().contains("integer"), "error was: {err}");
    }
}
