//! Time-domain preprocessing: rate conversion, band-pass filtering, common
//! average referencing and window slicing.
//!
//! Offline preprocessing filters zero-phase (forward-backward) so training
//! features carry no group delay; the live path uses the same designs causally
//! with persistent per-channel state (see [`StreamingFilter`]), and the
//! training pipeline can be switched to causal filtering so that training and
//! serving see identical data (that is the default there).

mod butterworth;

pub use butterworth::{Biquad, Sos, SosState};

use ndarray::{s, Array2};

use crate::error::{Error, Result};
use crate::montage::ChannelId;

/// Band-pass edges used throughout the pipeline (Hz).
pub const BAND_LO_HZ: f64 = 0.4;
pub const BAND_HI_HZ: f64 = 45.0;

/// Prototype order of the analysis band-pass.
pub const BANDPASS_ORDER: usize = 4;

/// Prototype order of the decimation anti-alias low-pass.
pub const ANTIALIAS_ORDER: usize = 8;

/// Anti-alias cutoff as a fraction of the target rate: comfortably below the
/// new Nyquist so residual aliasing stays under the noise floor.
pub const ANTIALIAS_CUTOFF_FRACTION: f64 = 0.4;

// ---------------------------------------------------------------------------
// segments
// ---------------------------------------------------------------------------

/// A contiguous multi-channel EEG segment. Samples are microvolts, stored one
/// row per channel.
#[derive(Clone, Debug)]
pub struct EegSegment {
    channels: Vec<ChannelId>,
    fs: f64,
    samples: Array2<f64>,
}

impl EegSegment {
    /// Build a segment, validating shape, rate and sample finiteness.
    pub fn new(channels: Vec<ChannelId>, fs: f64, samples: Array2<f64>) -> Result<EegSegment> {
        if channels.is_empty() {
            return Err(Error::domain("segment needs at least one channel"));
        }
        if samples.nrows() != channels.len() {
            return Err(Error::contract(format!(
                "sample matrix has {} rows for {} channels",
                samples.nrows(),
                channels.len()
            )));
        }
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::domain(format!("sampling rate {fs} Hz must be positive")));
        }
        for (i, ch) in channels.iter().enumerate() {
            if channels[..i].contains(ch) {
                return Err(Error::domain(format!("duplicate channel `{ch}` in segment")));
            }
        }
        if let Some(((r, c), v)) =
            samples.indexed_iter().find(|(_, v)| !v.is_finite()).map(|(i, v)| (i, *v))
        {
            return Err(Error::schema(
                "samples",
                format!("non-finite value {v} at channel {}, sample {c}", channels[r].name().to_owned() + &format!(" (row {r})")),
            ));
        }
        Ok(EegSegment { channels, fs, samples })
    }

    pub fn channels(&self) -> &[ChannelId] {
        &self.channels
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn samples(&self) -> &Array2<f64> {
        &self.samples
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.ncols()
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.fs
    }

    /// Row view of one channel's samples.
    pub fn channel_row(&self, ch: ChannelId) -> Option<ndarray::ArrayView1<'_, f64>> {
        self.channels.iter().position(|&c| c == ch).map(|i| self.samples.row(i))
    }

    /// Replace the sample matrix, keeping channels/rate (internal helper for
    /// the sample-preserving transforms below).
    fn with_samples(&self, samples: Array2<f64>) -> EegSegment {
        EegSegment { channels: self.channels.clone(), fs: self.fs, samples }
    }
}

// ---------------------------------------------------------------------------
// operations
// ---------------------------------------------------------------------------

/// How a filter is applied over a recorded segment.
#[derive(Clone, Copy, PartialEq, Eq, Debug, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterMode {
    /// Single forward pass from zero state; matches the live engine.
    Causal,
    /// Forward-backward pass; no phase distortion, offline only.
    ZeroPhase,
}

/// Integer-factor downsampling with an 8th-order Butterworth anti-alias
/// low-pass at `0.4 * target_fs`, applied zero-phase before decimation.
///
/// Errors when the input rate is not an integer multiple of `target_fs`.
pub fn downsample(seg: &EegSegment, target_fs: f64) -> Result<EegSegment> {
    if !(target_fs.is_finite() && target_fs > 0.0) {
        return Err(Error::domain(format!("target rate {target_fs} Hz must be positive")));
    }
    let ratio = seg.fs / target_fs;
    let k = ratio.round();
    if (ratio - k).abs() > 1e-9 || k < 1.0 {
        return Err(Error::domain(format!(
            "unsupported rate conversion: {} Hz is not an integer multiple of {} Hz",
            seg.fs, target_fs
        )));
    }
    let k = k as usize;
    if k == 1 {
        return Ok(seg.clone());
    }
    let sos = Sos::lowpass(ANTIALIAS_ORDER, ANTIALIAS_CUTOFF_FRACTION * target_fs, seg.fs)?;
    let n_out = (seg.n_samples() + k - 1) / k;
    let mut out = Array2::zeros((seg.n_channels(), n_out));
    for (r, row) in seg.samples.rows().into_iter().enumerate() {
        let filtered = sos.filtfilt(row.as_slice().expect("segment rows are contiguous"));
        for (j, v) in filtered.iter().step_by(k).enumerate() {
            out[(r, j)] = *v;
        }
    }
    Ok(EegSegment { channels: seg.channels.clone(), fs: target_fs, samples: out })
}

/// Band-pass every channel. `mode` selects zero-phase (offline default) or a
/// causal pass identical to the live engine's filtering.
pub fn bandpass(seg: &EegSegment, lo_hz: f64, hi_hz: f64, mode: FilterMode) -> Result<EegSegment> {
    let sos = Sos::bandpass(BANDPASS_ORDER, lo_hz, hi_hz, seg.fs)?;
    let mut out = Array2::zeros(seg.samples.raw_dim());
    for (r, row) in seg.samples.rows().into_iter().enumerate() {
        let x = row.as_slice().expect("segment rows are contiguous");
        let y = match mode {
            FilterMode::Causal => sos.filter(x),
            FilterMode::ZeroPhase => sos.filtfilt(x),
        };
        out.row_mut(r).assign(&ndarray::ArrayView1::from(&y));
    }
    Ok(seg.with_samples(out))
}

/// Re-reference every sample to the instantaneous mean across channels.
/// Needs at least two channels; idempotent up to float rounding.
pub fn common_average_reference(seg: &EegSegment) -> Result<EegSegment> {
    if seg.n_channels() < 2 {
        return Err(Error::domain("common average reference needs >= 2 channels"));
    }
    let mut out = seg.samples.clone();
    let n = seg.n_channels() as f64;
    for j in 0..out.ncols() {
        let mean: f64 = out.column(j).sum() / n;
        out.column_mut(j).mapv_inplace(|v| v - mean);
    }
    Ok(seg.with_samples(out))
}

/// Analysis-window geometry in seconds.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WindowSpec {
    pub length_s: f64,
    pub step_s: f64,
}

impl WindowSpec {
    pub fn new(length_s: f64, step_s: f64) -> Result<WindowSpec> {
        if !(length_s.is_finite() && length_s > 0.0) || !(step_s.is_finite() && step_s > 0.0) {
            return Err(Error::domain(format!(
                "window length {length_s} s and step {step_s} s must be positive"
            )));
        }
        if step_s > length_s {
            return Err(Error::domain(format!(
                "window step {step_s} s exceeds window length {length_s} s"
            )));
        }
        Ok(WindowSpec { length_s, step_s })
    }

    pub fn length_samples(&self, fs: f64) -> usize {
        (self.length_s * fs).round() as usize
    }

    pub fn step_samples(&self, fs: f64) -> usize {
        ((self.step_s * fs).round() as usize).max(1)
    }
}

/// A window cut from a longer segment, tagged with its start time relative to
/// the segment origin.
#[derive(Clone, Debug)]
pub struct Window {
    pub start_s: f64,
    pub segment: EegSegment,
}

/// Slice a segment into possibly overlapping analysis windows.
///
/// Yields `floor((n_samples - length) / step) + 1` windows of exactly
/// `length_s * fs` samples starting at multiples of `step_s`; samples are
/// bit-identical copies of the parent slice. Errors when the segment is
/// shorter than one window.
pub fn sliding_windows(seg: &EegSegment, spec: &WindowSpec) -> Result<Vec<Window>> {
    let len = spec.length_samples(seg.fs);
    let step = spec.step_samples(seg.fs);
    if len == 0 {
        return Err(Error::domain("window length rounds to zero samples"));
    }
    if seg.n_samples() < len {
        return Err(Error::domain(format!(
            "segment of {} samples is shorter than one {len}-sample window",
            seg.n_samples()
        )));
    }
    let count = (seg.n_samples() - len) / step + 1;
    let mut out = Vec::with_capacity(count);
    for w in 0..count {
        let start = w * step;
        let samples = seg.samples.slice(s![.., start..start + len]).to_owned();
        out.push(Window {
            start_s: start as f64 / seg.fs,
            segment: seg.with_samples(samples),
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// streaming filter
// ---------------------------------------------------------------------------

/// Causal band-pass with persistent per-channel state for the live path.
/// State survives across frames so windows carry no per-window transient;
/// [`StreamingFilter::reset`] discards state after a sequence gap.
#[derive(Clone, Debug)]
pub struct StreamingFilter {
    sos: Sos,
    state: Vec<SosState>,
}

impl StreamingFilter {
    pub fn bandpass(n_channels: usize, lo_hz: f64, hi_hz: f64, fs: f64) -> Result<StreamingFilter> {
        if n_channels == 0 {
            return Err(Error::domain("streaming filter needs >= 1 channel"));
        }
        let sos = Sos::bandpass(BANDPASS_ORDER, lo_hz, hi_hz, fs)?;
        let state = (0..n_channels).map(|_| SosState::new(&sos)).collect();
        Ok(StreamingFilter { sos, state })
    }

    pub fn n_channels(&self) -> usize {
        self.state.len()
    }

    /// Filter one frame (one sample per channel) in place.
    pub fn process_frame(&mut self, frame: &mut [f64]) {
        debug_assert_eq!(frame.len(), self.state.len());
        for (v, st) in frame.iter_mut().zip(self.state.iter_mut()) {
            *v = self.sos.step(st, *v);
        }
    }

    pub fn reset(&mut self) {
        for st in &mut self.state {
            st.reset();
        }
    }
}
