//! Synthetic labeled EEG: the verification oracle for the whole pipeline.
//!
//! Each trial draws one of the 27 level triples, then every configured
//! signature adds a sinusoid at its band's center frequency (delta 2 Hz,
//! theta 6 Hz, alpha 10 Hz, beta 20 Hz, gamma 38 Hz) to its channels, with
//! amplitude `amplitude * (2 + level)` so power rises strictly with the
//! planted component's level. Every channel carries pink noise on top.
//! Trials are deterministic per (spec, seed, subject, trial).

use std::f64::consts::TAU;
use std::path::Path;

use ndarray::Array2;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use statrs::distribution::Normal;

use super::Recording;
use crate::dsp::EegSegment;
use crate::emotion::{VadLevel, VadRating};
use crate::error::{Error, Result};
use crate::montage::{ChannelId, EmotionComponent, FrequencyBand};
use crate::rng::{derive_seed, rng_from_seed, Rng};

/// Rating value representing each level: the center of its published range.
pub fn level_rating(level: i8) -> f64 {
    match level {
        -1 => 2.0,
        0 => 5.0,
        1 => 8.0,
        _ => unreachable!("levels are -1, 0, +1"),
    }
}

/// One planted coupling: a component's level drives one band's sine
/// amplitude on a set of channels.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSignature {
    pub component: EmotionComponent,
    pub band: FrequencyBand,
    pub channels: Vec<ChannelId>,
    /// Base sine amplitude in microvolts; the per-trial amplitude is
    /// `amplitude * (2 + level)`.
    pub amplitude: f64,
}

/// Generator parameters. The serialized form is TOML with [`demo`] defaults,
/// so a spec file only states what it overrides.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_subjects: u32,
    pub n_trials: u32,
    pub trial_length_s: f64,
    pub fs: f64,
    pub channels: Vec<ChannelId>,
    pub signatures: Vec<BandSignature>,
    /// Pink-noise standard deviation per channel, microvolts.
    pub noise_sigma: f64,
}

impl Default for SyntheticSpec {
    fn default() -> SyntheticSpec {
        SyntheticSpec::demo()
    }
}

impl SyntheticSpec {
    /// Default desk-scale corpus: arousal planted into gamma on T7/T8,
    /// valence into alpha on Fp1, dominance into beta on O2, over the
    /// 8-channel reduced montage.
    pub fn demo() -> SyntheticSpec {
        let channels = crate::montage::selected_channels();
        SyntheticSpec {
            n_subjects: 2,
            n_trials: 12,
            trial_length_s: 12.0,
            fs: 128.0,
            signatures: vec![
                BandSignature {
                    component: EmotionComponent::Arousal,
                    band: FrequencyBand::Gamma,
                    channels: vec![channels[4], channels[5]],
                    amplitude: 4.0,
                },
                BandSignature {
                    component: EmotionComponent::Valence,
                    band: FrequencyBand::Alpha,
                    channels: vec![channels[0]],
                    amplitude: 4.0,
                },
                BandSignature {
                    component: EmotionComponent::Dominance,
                    band: FrequencyBand::Beta,
                    channels: vec![channels[7]],
                    amplitude: 4.0,
                },
            ],
            channels,
            noise_sigma: 1.0,
        }
    }

    /// Parse a TOML spec; absent fields keep their [`demo`] values.
    pub fn from_toml_str(text: &str) -> Result<SyntheticSpec> {
        let spec: SyntheticSpec =
            toml::from_str(text).map_err(|e| Error::schema("spec", e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<SyntheticSpec> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SyntheticSpec::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subjects == 0 || self.n_trials == 0 {
            return Err(Error::config("synthetic spec needs subjects and trials"));
        }
        if !(self.fs > 0.0) || !(self.trial_length_s > 0.0) {
            return Err(Error::config("sample rate and trial length must be positive"));
        }
        if self.channels.is_empty() {
            return Err(Error::config("synthetic spec needs at least one channel"));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::config("noise sigma cannot be negative"));
        }
        for sig in &self.signatures {
            if sig.amplitude <= 0.0 {
                return Err(Error::config("signature amplitudes must be positive"));
            }
            for ch in &sig.channels {
                if !self.channels.contains(ch) {
                    return Err(Error::config(format!(
                        "signature channel {ch} not in the configured channel set"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn samples_per_trial(&self) -> usize {
        (self.trial_length_s * self.fs).round() as usize
    }
}

/// Pink-noise generator (Paul Kellett's economy filter over white Gaussian
/// input), normalized to approximately unit variance.
struct PinkNoise {
    white: Normal,
    b: [f64; 3],
}

impl PinkNoise {
    fn new() -> PinkNoise {
        PinkNoise { white: Normal::new(0.0, 1.0).expect("valid normal"), b: [0.0; 3] }
    }

    fn next(&mut self, rng: &mut Rng) -> f64 {
        let w = rng.sample(self.white);
        self.b[0] = 0.99765 * self.b[0] + w * 0.0990460;
        self.b[1] = 0.96300 * self.b[1] + w * 0.2965164;
        self.b[2] = 0.57000 * self.b[2] + w * 1.0526913;
        // 1/3.52: empirical standard deviation of the raw filter output.
        (self.b[0] + self.b[1] + self.b[2] + w * 0.1848) / 3.52
    }
}

fn trial_with_level(
    spec: &SyntheticSpec,
    subject: u32,
    trial: u32,
    level: VadLevel,
    rng: &mut Rng,
) -> Result<Recording> {
    let n = spec.samples_per_trial();
    let [lv, la, ld] = level.as_array();
    let rating = VadRating::new(level_rating(lv), level_rating(la), level_rating(ld))
        .expect("level ratings are in range");

    let mut samples = Array2::zeros((spec.channels.len(), n));
    // Noise first, one independent stream per channel row.
    if spec.noise_sigma > 0.0 {
        for mut row in samples.rows_mut() {
            let mut pink = PinkNoise::new();
            for v in row.iter_mut() {
                *v = spec.noise_sigma * pink.next(rng);
            }
        }
    }
    for sig in &spec.signatures {
        let amp = sig.amplitude * (2.0 + f64::from(level.as_array()[sig.component.index()]));
        let f = sig.band.center_hz();
        for ch in &sig.channels {
            let c = spec.channels.iter().position(|x| x == ch).expect("validated");
            for s in 0..n {
                samples[(c, s)] += amp * (TAU * f * s as f64 / spec.fs).sin();
            }
        }
    }
    let segment = EegSegment::new(spec.channels.clone(), spec.fs, samples)?;
    Ok(Recording::new(subject, trial, Some(rating), segment))
}

/// One trial with a caller-chosen level triple, for exemplar streams and
/// replay fixtures. Shares the per-trial seeding scheme of
/// [`generate_synthetic`] but draws no level of its own.
pub fn synthesize_trial(
    spec: &SyntheticSpec,
    subject: u32,
    trial: u32,
    level: VadLevel,
    seed: u64,
) -> Result<Recording> {
    spec.validate()?;
    let mut rng = rng_from_seed(derive_seed(seed, &[u64::from(subject), u64::from(trial)]));
    trial_with_level(spec, subject, trial, level, &mut rng)
}

/// Generate the labeled corpus. Trial levels are drawn uniformly over the
/// 27 triples from the trial's own derived stream, so any (subject, trial)
/// is reproducible in isolation.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Vec<Recording>> {
    spec.validate()?;
    let levels = VadLevel::all();
    let mut recordings = Vec::with_capacity((spec.n_subjects * spec.n_trials) as usize);
    for subject in 1..=spec.n_subjects {
        for trial in 1..=spec.n_trials {
            let mut rng =
                rng_from_seed(derive_seed(seed, &[u64::from(subject), u64::from(trial)]));
            let level = levels[rng.gen_range(0..levels.len())];
            recordings.push(trial_with_level(spec, subject, trial, level, &mut rng)?);
        }
    }
    Ok(recordings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{band_powers, psd};
    use crate::montage::parse_channels;
    use std::collections::HashMap;

    fn gamma_spec(n_subjects: u32, n_trials: u32) -> SyntheticSpec {
        let channels = parse_channels(&["Fp1", "T7", "T8", "O2"]).unwrap();
        SyntheticSpec {
            n_subjects,
            n_trials,
            trial_length_s: 5.0,
            fs: 128.0,
            signatures: vec![BandSignature {
                component: EmotionComponent::Arousal,
                band: FrequencyBand::Gamma,
                channels: vec![channels[1], channels[2]],
                amplitude: 2.0,
            }],
            channels,
            noise_sigma: 0.5,
        }
    }

    #[test]
    fn planted_band_power_increases_strictly_with_level() {
        let spec = gamma_spec(4, 30);
        let recs = generate_synthetic(&spec, 11).unwrap();
        // Mean gamma power at T7 per arousal level, plus the spread of the
        // noise-only gamma power to scale the margin.
        let mut by_level: HashMap<i8, Vec<f64>> = HashMap::new();
        let mut noise_powers = Vec::new();
        for rec in &recs {
            let level = crate::emotion::discretize_vad(&rec.label.unwrap());
            let spectra = psd(&rec.segment).unwrap();
            // Channel order matches the spec: [0] Fp1 (noise only), [1] T7.
            let t7 = band_powers(&spectra[1]).unwrap().by_band(FrequencyBand::Gamma);
            by_level.entry(level.as_array()[1]).or_default().push(t7);
            let fp1 = band_powers(&spectra[0]).unwrap().by_band(FrequencyBand::Gamma);
            noise_powers.push(fp1);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let noise_mean = mean(&noise_powers);
        let noise_sigma = (noise_powers
            .iter()
            .map(|v| (v - noise_mean) * (v - noise_mean))
            .sum::<f64>()
            / noise_powers.len() as f64)
            .sqrt();
        let lo = mean(&by_level[&-1]);
        let mid = mean(&by_level[&0]);
        let hi = mean(&by_level[&1]);
        assert!(lo + 3.0 * noise_sigma < mid, "lo {lo} mid {mid} sigma {noise_sigma}");
        assert!(mid + 3.0 * noise_sigma < hi, "mid {mid} hi {hi} sigma {noise_sigma}");
    }

    #[test]
    fn zero_noise_trials_with_equal_levels_are_identical() {
        let mut spec = gamma_spec(1, 40);
        spec.noise_sigma = 0.0;
        let recs = generate_synthetic(&spec, 3).unwrap();
        // Group by full level triple; all member trials must be sample-exact
        // duplicates since only the level drives the signal.
        let mut groups: HashMap<[i8; 3], &Recording> = HashMap::new();
        let mut compared = 0;
        for rec in &recs {
            let key = crate::emotion::discretize_vad(&rec.label.unwrap()).as_array();
            match groups.get(&key) {
                Some(first) => {
                    compared += 1;
                    assert_eq!(first.segment.samples(), rec.segment.samples());
                }
                None => {
                    groups.insert(key, rec);
                }
            }
        }
        assert!(compared > 0, "expected at least one repeated level in 40 trials");
    }

    #[test]
    fn same_seed_reproduces_and_seeds_differ() {
        let spec = gamma_spec(2, 3);
        let a = generate_synthetic(&spec, 7).unwrap();
        let b = generate_synthetic(&spec, 7).unwrap();
        let c = generate_synthetic(&spec, 8).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.segment.samples(), y.segment.samples());
            assert_eq!(x.label, y.label);
        }
        assert!(a.iter().zip(&c).any(|(x, y)| x.segment.samples() != y.segment.samples()));
    }

    #[test]
    fn label_distribution_is_stable_across_seeds() {
        let spec = gamma_spec(20, 27);
        let count_levels = |seed: u64| {
            let mut counts: HashMap<[i8; 3], usize> = HashMap::new();
            for rec in generate_synthetic(&spec, seed).unwrap() {
                *counts
                    .entry(crate::emotion::discretize_vad(&rec.label.unwrap()).as_array())
                    .or_default() += 1;
            }
            counts
        };
        let a = count_levels(100);
        let b = count_levels(200);
        // 540 trials over 27 levels: expectation 20 per level, sd ~4.4; the
        // two draws must agree within a generous binomial envelope.
        let n = 540.0f64;
        let p = 1.0 / 27.0;
        let bound = 6.0 * (n * p * (1.0 - p)).sqrt() * 2.0f64.sqrt();
        for level in VadLevel::all() {
            let ca = *a.get(&level.as_array()).unwrap_or(&0) as f64;
            let cb = *b.get(&level.as_array()).unwrap_or(&0) as f64;
            assert!((ca - cb).abs() <= bound, "{level}: {ca} vs {cb}");
            assert!(ca > 0.0, "level {level} never drawn in 540 trials");
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = gamma_spec(1, 1);
        spec.signatures[0].channels = parse_channels(&["Cz"]).unwrap();
        assert!(matches!(generate_synthetic(&spec, 1), Err(Error::Config(_))));
        let mut spec = gamma_spec(1, 1);
        spec.signatures[0].amplitude = 0.0;
        assert!(matches!(generate_synthetic(&spec, 1), Err(Error::Config(_))));
        let mut spec = gamma_spec(0, 1);
        spec.n_subjects = 0;
        assert!(matches!(generate_synthetic(&spec, 1), Err(Error::Config(_))));
    }

    #[test]
    fn demo_spec_is_valid_and_deterministic() {
        let spec = SyntheticSpec::demo();
        spec.validate().unwrap();
        let recs = generate_synthetic(&spec, 42).unwrap();
        assert_eq!(recs.len(), 24);
        assert!(recs.iter().all(|r| r.label.is_some()));
        assert_eq!(recs[0].segment.n_samples(), spec.samples_per_trial());
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let spec = SyntheticSpec::demo();
        let text = spec.to_toml_string();
        let back = SyntheticSpec::from_toml_str(&text).unwrap();
        assert_eq!(back.n_subjects, spec.n_subjects);
        assert_eq!(back.channels, spec.channels);
        assert_eq!(back.signatures.len(), spec.signatures.len());
        assert_eq!(back.signatures[1].amplitude, spec.signatures[1].amplitude);

        // Partial specs fall back to demo defaults for missing fields.
        let partial = SyntheticSpec::from_toml_str("n_subjects = 5\nnoise_sigma = 0.5\n").unwrap();
        assert_eq!(partial.n_subjects, 5);
        assert_eq!(partial.noise_sigma, 0.5);
        assert_eq!(partial.n_trials, spec.n_trials);

        // Unknown keys are schema errors, not silent typo sinks.
        let err = SyntheticSpec::from_toml_str("n_subjcts = 5\n").unwrap_err();
        assert!(matches!(err, Error::Schema { .. }), "got: {err}");
        // Out-of-range values fail validation even when well-formed.
        assert!(SyntheticSpec::from_toml_str("n_subjects = 0\n").is_err());
    }
}
