//! Spectral features: per-channel power spectral density, band powers and
//! band-ratio indexes, flattened into named feature vectors.
//!
//! The PSD is a single-taper periodogram over the full analysis window with a
//! periodic Hann taper and taper-power correction, so the integrated density
//! matches time-domain signal variance (Parseval). Band powers integrate the
//! density over the classical rhythm bands; bins are assigned by bin-center
//! frequency. Four ratio indexes summarize well-known band interactions:
//!
//! ```text
//!   relaxation = theta / delta      excitement = beta / alpha
//!   fatigue    = alpha / theta      engagement = beta / (theta + alpha)
//! ```
//!
//! Feature names are `<band-or-index>_<channel>` (e.g. `gamma_T7`,
//! `engagement_FC5`), ordered band-major: all delta channels, all theta
//! channels, ..., then the four indexes. 8 channels yield 72 features,
//! 32 channels yield 288.

mod table;

pub use table::{FeatureTable, TableRow};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::dsp::{EegSegment, Window};
use crate::error::{Error, Result};
use crate::montage::{ChannelId, FrequencyBand, BANDS};

/// Denominator floor for the ratio indexes; a silent channel produces zeros,
/// never NaN or infinity.
pub const RATIO_EPS: f64 = 1e-12;

// ---------------------------------------------------------------------------
// power spectral density
// ---------------------------------------------------------------------------

/// One-sided power spectral density of one channel over one window.
/// `power[k]` is µV²/Hz at `freqs[k]`; `freqs` spans [0, fs/2].
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub channel: ChannelId,
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
}

impl Spectrum {
    /// Uniform bin width in Hz.
    pub fn bin_width(&self) -> f64 {
        debug_assert!(self.freqs.len() > 1);
        self.freqs[1] - self.freqs[0]
    }

    /// Integrated power over `[lo, hi]` (both edges included), in µV².
    pub fn integrated_power(&self, lo: f64, hi: f64) -> f64 {
        let df = self.bin_width();
        self.freqs
            .iter()
            .zip(&self.power)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(_, p)| p * df)
            .sum()
    }
}

/// Periodogram PSD of every channel in `window`. Channels are demeaned and
/// Hann-tapered; the taper's power loss is corrected so Parseval holds:
/// integrated density equals time-domain variance (within estimator noise).
///
/// Errors when the window is shorter than 1 s (too few bins for the delta
/// band to be meaningful).
pub fn psd(window: &EegSegment) -> Result<Vec<Spectrum>> {
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(window.n_samples());
    psd_with_plan(window, fft.as_ref())
}

/// PSD with a caller-provided FFT plan (hot path for bulk feature
/// extraction; `psd` wraps this).
pub fn psd_with_plan(window: &EegSegment, fft: &dyn Fft<f64>) -> Result<Vec<Spectrum>> {
    let n = window.n_samples();
    let fs = window.fs();
    if (n as f64) < fs {
        return Err(Error::domain(format!(
            "window of {n} samples at {fs} Hz is shorter than 1 s"
        )));
    }
    debug_assert_eq!(fft.len(), n);

    // Periodic Hann taper and its power correction.
    let taper: Vec<f64> = (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()))
        .collect();
    let taper_power: f64 = taper.iter().map(|w| w * w).sum();
    let scale = 1.0 / (fs * taper_power);

    let n_bins = n / 2 + 1;
    let freqs: Vec<f64> = (0..n_bins).map(|k| k as f64 * fs / n as f64).collect();
    let nyquist_bin = if n % 2 == 0 { Some(n / 2) } else { None };

    let mut out = Vec::with_capacity(window.n_channels());
    let mut buf: Vec<Complex64> = vec![Complex64::default(); n];
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    for (row, &channel) in window.samples().rows().into_iter().zip(window.channels()) {
        let mean = row.sum() / n as f64;
        for (b, (x, w)) in buf.iter_mut().zip(row.iter().zip(&taper)) {
            *b = Complex64::new((x - mean) * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        let power: Vec<f64> = (0..n_bins)
            .map(|k| {
                let one_sided = if k == 0 || Some(k) == nyquist_bin { 1.0 } else { 2.0 };
                one_sided * scale * buf[k].norm_sqr()
            })
            .collect();
        out.push(Spectrum { channel, freqs: freqs.clone(), power });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// band powers and ratio indexes
// ---------------------------------------------------------------------------

/// Integrated band power (µV²) per rhythm band for one channel.
#[derive(Clone, Copy, Debug)]
pub struct BandPowers {
    pub channel: ChannelId,
    values: [f64; 5],
}

impl BandPowers {
    pub fn from_values(channel: ChannelId, values: [f64; 5]) -> BandPowers {
        BandPowers { channel, values }
    }

    pub fn by_band(&self, band: FrequencyBand) -> f64 {
        self.values[band.index()]
    }

    /// Sum over the five bands == integrated power over [0.5, 45] Hz.
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Integrate a spectrum over the five rhythm bands. Bin membership is by bin
/// center (`lo <= f < hi`, gamma closing at 45 Hz), so the five values
/// partition the spectrum's [0.5, 45] Hz content exactly.
///
/// Errors when the spectrum does not reach 45 Hz.
pub fn band_powers(spectrum: &Spectrum) -> Result<BandPowers> {
    let top = *spectrum.freqs.last().ok_or_else(|| Error::domain("empty spectrum"))?;
    let (_, gamma_hi) = FrequencyBand::Gamma.range_hz();
    if top < gamma_hi {
        return Err(Error::domain(format!(
            "spectrum reaches only {top} Hz; band analysis needs {gamma_hi} Hz"
        )));
    }
    let df = spectrum.bin_width();
    let mut values = [0.0; 5];
    for (f, p) in spectrum.freqs.iter().zip(&spectrum.power) {
        for band in BANDS {
            if band.contains(*f) {
                values[band.index()] += p * df;
                break;
            }
        }
    }
    Ok(BandPowers { channel: spectrum.channel, values })
}

/// The four band-ratio indexes for one channel. Dimensionless; denominators
/// are floored at [`RATIO_EPS`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatioIndexes {
    pub relaxation: f64,
    pub excitement: f64,
    pub fatigue: f64,
    pub engagement: f64,
}

/// Names and order of the ratio-index features.
pub const RATIO_INDEX_NAMES: [&str; 4] = ["relaxation", "excitement", "fatigue", "engagement"];

pub fn ratio_indexes(bp: &BandPowers) -> RatioIndexes {
    let b = |band: FrequencyBand| bp.by_band(band);
    use FrequencyBand::*;
    RatioIndexes {
        relaxation: b(Theta) / b(Delta).max(RATIO_EPS),
        excitement: b(Beta) / b(Alpha).max(RATIO_EPS),
        fatigue: b(Alpha) / b(Theta).max(RATIO_EPS),
        engagement: b(Beta) / (b(Theta) + b(Alpha)).max(RATIO_EPS),
    }
}

impl RatioIndexes {
    pub fn as_array(&self) -> [f64; 4] {
        [self.relaxation, self.excitement, self.fatigue, self.engagement]
    }
}

// ---------------------------------------------------------------------------
// feature vectors
// ---------------------------------------------------------------------------

/// Immutable name layout for a channel configuration: five band features then
/// four index features, each band-major over the channels in configured
/// order. Shared via `Arc` by every vector extracted under it.
#[derive(Debug)]
pub struct FeatureSchema {
    channels: Vec<ChannelId>,
    names: Vec<String>,
    positions: HashMap<String, usize>,
}

impl FeatureSchema {
    pub fn for_channels(channels: &[ChannelId]) -> Arc<FeatureSchema> {
        let mut names = Vec::with_capacity(9 * channels.len());
        for band in BANDS {
            for ch in channels {
                names.push(format!("{}_{}", band.name(), ch));
            }
        }
        for index in RATIO_INDEX_NAMES {
            for ch in channels {
                names.push(format!("{index}_{ch}"));
            }
        }
        let positions = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        Arc::new(FeatureSchema { channels: channels.to_vec(), names, positions })
    }

    pub fn channels(&self) -> &[ChannelId] {
        &self.channels
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.positions.get(name).copied()
    }
}

impl fmt::Display for FeatureSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} features over {} channels", self.names.len(), self.channels.len())
    }
}

/// One window's features under a schema, tagged with the window start time
/// relative to its trial.
#[derive(Clone, Debug)]
pub struct FeatureVector {
    pub schema: Arc<FeatureSchema>,
    pub values: Vec<f64>,
    pub window_start_s: f64,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.schema.position(name).map(|i| self.values[i])
    }
}

/// Compute one window's feature values in schema order. The window's channel
/// order must match the schema.
pub fn window_features(
    window: &EegSegment,
    schema: &FeatureSchema,
    fft: &dyn Fft<f64>,
) -> Result<Vec<f64>> {
    if window.channels() != schema.channels() {
        return Err(Error::contract(format!(
            "window channels {:?} do not match schema channels {:?}",
            window.channels(),
            schema.channels()
        )));
    }
    let spectra = psd_with_plan(window, fft)?;
    let bands: Vec<BandPowers> = spectra.iter().map(band_powers).collect::<Result<_>>()?;
    let n_ch = schema.channels.len();
    let mut values = vec![0.0; schema.len()];
    for (c, bp) in bands.iter().enumerate() {
        for band in BANDS {
            values[band.index() * n_ch + c] = bp.by_band(band);
        }
        let idx = ratio_indexes(bp).as_array();
        for (i, v) in idx.into_iter().enumerate() {
            values[(5 + i) * n_ch + c] = v;
        }
    }
    Ok(values)
}

/// Extract feature vectors for a batch of windows (e.g. one trial). All
/// windows must share channels, rate and length; extraction runs in parallel
/// with deterministic output order.
pub fn assemble_features(windows: &[Window]) -> Result<Vec<FeatureVector>> {
    use rayon::prelude::*;

    let first = windows
        .first()
        .ok_or_else(|| Error::domain("no windows to extract features from"))?;
    let schema = FeatureSchema::for_channels(first.segment.channels());
    let n = first.segment.n_samples();
    for w in windows {
        if w.segment.channels() != schema.channels()
            || w.segment.n_samples() != n
            || w.segment.fs() != first.segment.fs()
        {
            return Err(Error::contract("windows differ in channels, length or rate"));
        }
    }
    let fft = FftPlanner::new().plan_fft_forward(n);
    let values: Vec<Result<Vec<f64>>> = windows
        .par_iter()
        .map(|w| window_features(&w.segment, &schema, fft.as_ref()))
        .collect();
    windows
        .iter()
        .zip(values)
        .map(|(w, v)| {
            Ok(FeatureVector { schema: Arc::clone(&schema), values: v?, window_start_s: w.start_s })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::WindowSpec;
    use crate::montage::{parse_channels, selected_channels};
    use ndarray::Array2;
    use rand::Rng as _;

    fn one_channel_window(x: Vec<f64>, fs: f64) -> EegSegment {
        let ch = parse_channels(&["T7"]).unwrap();
        let n = x.len();
        EegSegment::new(ch, fs, Array2::from_shape_vec((1, n), x).unwrap()).unwrap()
    }

    fn sine(f: f64, fs: f64, secs: f64, amp: f64) -> Vec<f64> {
        let n = (secs * fs).round() as usize;
        (0..n).map(|i| amp * (2.0 * std::f64::consts::PI * f * i as f64 / fs).sin()).collect()
    }

    #[test]
    fn psd_bins_are_uniform_and_span_to_nyquist() {
        let fs = 128.0;
        let win = one_channel_window(sine(10.0, fs, 5.0, 1.0), fs);
        let spec = &psd(&win).unwrap()[0];
        assert_eq!(spec.freqs.len(), 321);
        assert!((spec.bin_width() - 0.2).abs() < 1e-12);
        assert_eq!(spec.freqs[0], 0.0);
        assert!((spec.freqs.last().unwrap() - 64.0).abs() < 1e-12);
        for w in spec.freqs.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn psd_concentrates_a_pure_tone_and_preserves_its_power() {
        let fs = 128.0;
        let win = one_channel_window(sine(10.0, fs, 5.0, 1.0), fs);
        let spec = &psd(&win).unwrap()[0];
        let peak = spec
            .freqs
            .iter()
            .zip(&spec.power)
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        assert!((peak.0 - 10.0).abs() < 1e-9, "peak at {}", peak.0);
        let near = spec.integrated_power(9.5, 10.5);
        let total = spec.integrated_power(0.0, fs / 2.0);
        assert!(near / total >= 0.99, "tone containment {}", near / total);
        // Unit sine carries 0.5 µV² of power.
        assert!((total - 0.5).abs() / 0.5 < 0.02, "total {total}");
    }

    #[test]
    fn psd_parseval_on_noise() {
        // Per draw the taper-weighted power estimate scatters around the
        // sample variance (near ±15%); the mean ratio over 100 seeded draws
        // pins Parseval within 2%.
        let fs = 128.0;
        let n = (5.0 * fs) as usize;
        let mut ratios = Vec::new();
        for seed in 0..100 {
            let mut rng = crate::rng::rng_from_seed(seed);
            let x: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let mean = x.iter().sum::<f64>() / n as f64;
            let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let spec = &psd(&one_channel_window(x, fs)).unwrap()[0];
            let ratio = spec.integrated_power(0.0, fs / 2.0) / var;
            assert!((ratio - 1.0).abs() < 0.15, "seed {seed}: single-draw ratio {ratio}");
            ratios.push(ratio);
        }
        let mean_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!((mean_ratio - 1.0).abs() < 0.02, "mean ratio {mean_ratio}");
    }

    #[test]
    fn psd_of_silence_is_zero_without_nans() {
        let fs = 128.0;
        let win = one_channel_window(vec![0.0; (5.0 * fs) as usize], fs);
        let spec = &psd(&win).unwrap()[0];
        assert!(spec.power.iter().all(|p| *p == 0.0));
        let bp = band_powers(spec).unwrap();
        assert_eq!(bp.total(), 0.0);
        let idx = ratio_indexes(&bp);
        for v in idx.as_array() {
            assert!(v.is_finite());
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn psd_rejects_subsecond_windows() {
        let fs = 128.0;
        let win = one_channel_window(vec![0.0; 100], fs);
        assert!(psd(&win).is_err());
    }

    #[test]
    fn band_powers_partition_the_analysis_range() {
        let fs = 128.0;
        let mut rng = crate::rng::rng_from_seed(9);
        let x: Vec<f64> = (0..640).map(|_| rng.gen::<f64>() - 0.5).collect();
        let spec = &psd(&one_channel_window(x, fs)).unwrap()[0];
        let bp = band_powers(spec).unwrap();
        let total = spec.integrated_power(0.5, 45.0);
        assert!(
            (bp.total() - total).abs() <= 1e-9 * total.max(1e-30),
            "bands {} vs range {total}",
            bp.total()
        );
    }

    #[test]
    fn band_powers_separate_composite_tones() {
        let fs = 128.0;
        let x: Vec<f64> = sine(6.0, fs, 5.0, 1.0)
            .iter()
            .zip(sine(20.0, fs, 5.0, 1.0))
            .map(|(a, b)| a + b)
            .collect();
        let spec = &psd(&one_channel_window(x, fs)).unwrap()[0];
        let bp = band_powers(spec).unwrap();
        let total = bp.total();
        assert!(bp.by_band(FrequencyBand::Theta) / total >= 0.45);
        assert!(bp.by_band(FrequencyBand::Beta) / total >= 0.45);
        assert!(
            (bp.by_band(FrequencyBand::Theta) + bp.by_band(FrequencyBand::Beta)) / total >= 0.95
        );
    }

    #[test]
    fn band_powers_need_spectral_coverage() {
        let fs = 64.0; // Nyquist 32 Hz < 45 Hz
        let win = one_channel_window(vec![0.0; 320], fs);
        let spec = &psd(&win).unwrap()[0];
        assert!(band_powers(spec).is_err());
    }

    #[test]
    fn band_powers_scale_quadratically_with_amplitude() {
        // Broadband input so every band carries real power.
        let fs = 128.0;
        let mut rng = crate::rng::rng_from_seed(17);
        let base: Vec<f64> = sine(10.0, fs, 5.0, 1.0)
            .into_iter()
            .map(|v| v + 0.3 * (rng.gen::<f64>() - 0.5))
            .collect();
        let scaled: Vec<f64> = base.iter().map(|v| 3.0 * v).collect();
        let b1 = band_powers(&psd(&one_channel_window(base, fs)).unwrap()[0]).unwrap();
        let b9 = band_powers(&psd(&one_channel_window(scaled, fs)).unwrap()[0]).unwrap();
        // Off-band bins are float noise for an on-bin tone, so compare at a
        // tolerance anchored to total power.
        let tol = 1e-9 * b9.total();
        for band in BANDS {
            let (a, b) = (b1.by_band(band), b9.by_band(band));
            assert!((b - 9.0 * a).abs() <= tol, "{band}: {b} vs 9 x {a}");
        }
        // Ratios are scale-invariant.
        let r1 = ratio_indexes(&b1);
        let r9 = ratio_indexes(&b9);
        for (a, b) in r1.as_array().iter().zip(r9.as_array()) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-12));
        }
    }

    #[test]
    fn ratio_indexes_hand_arithmetic() {
        let ch = ChannelId::parse("T7").unwrap();
        // delta 2, theta 4, alpha 3, beta 9, gamma 1
        let bp = BandPowers::from_values(ch, [2.0, 4.0, 3.0, 9.0, 1.0]);
        let idx = ratio_indexes(&bp);
        assert!((idx.relaxation - 2.0).abs() < 1e-12);
        assert!((idx.excitement - 3.0).abs() < 1e-12);
        assert!((idx.fatigue - 0.75).abs() < 1e-12);
        assert!((idx.engagement - 9.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn schema_for_runtime_montage_matches_published_names() {
        let schema = FeatureSchema::for_channels(&selected_channels());
        assert_eq!(schema.len(), 72);
        let committed: Vec<&str> = include_str!("../../docs/feature_names_8ch.txt")
            .lines()
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect();
        assert_eq!(schema.names(), &committed[..], "docs/feature_names_8ch.txt is stale");
        // Spot checks: band-major order, configured channel order.
        assert_eq!(schema.names()[0], "delta_Fp1");
        assert_eq!(schema.names()[8], "theta_Fp1");
        assert_eq!(schema.position("gamma_T7"), Some(4 * 8 + 4));
        assert_eq!(schema.position("engagement_O2"), Some(71));
        assert_eq!(schema.position("nope_T7"), None);
    }

    #[test]
    fn schema_scales_with_channel_count() {
        assert_eq!(FeatureSchema::for_channels(&ChannelId::all()).len(), 288);
    }

    #[test]
    fn assemble_features_orders_windows_and_values_deterministically() {
        let fs = 128.0;
        let chans = parse_channels(&["T7", "T8"]).unwrap();
        let n = (20.0 * fs) as usize;
        let rows: Vec<f64> = sine(10.0, fs, 20.0, 1.0)
            .into_iter()
            .chain(sine(20.0, fs, 20.0, 0.5))
            .collect();
        let seg =
            EegSegment::new(chans, fs, Array2::from_shape_vec((2, n), rows).unwrap()).unwrap();
        let wins = crate::dsp::sliding_windows(&seg, &WindowSpec::new(5.0, 2.5).unwrap()).unwrap();
        let feats = assemble_features(&wins).unwrap();
        assert_eq!(feats.len(), 7);
        assert_eq!(feats[0].schema.len(), 18);
        assert!((feats[3].window_start_s - 7.5).abs() < 1e-12);
        // Alpha power concentrates on T7, beta on T8.
        let f = &feats[0];
        assert!(f.get("alpha_T7").unwrap() > 10.0 * f.get("alpha_T8").unwrap());
        assert!(f.get("beta_T8").unwrap() > 10.0 * f.get("beta_T7").unwrap());
        // Two runs agree bit for bit.
        let again = assemble_features(&wins).unwrap();
        for (a, b) in feats.iter().zip(&again) {
            assert_eq!(a.values, b.values);
        }
    }
}
