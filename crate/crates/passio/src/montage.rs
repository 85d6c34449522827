//! Electrode montage, cortical lobe grouping and frequency bands.
//!
//! Channel names follow the international 10-20 extension used by 32-channel
//! research caps. The canonical name list below is the single source of truth:
//! parsing is case-sensitive, and the list order ("canonical order") is the
//! documented tie-break order wherever channels are ranked.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// channels
// ---------------------------------------------------------------------------

/// Canonical 32-channel montage, grouped by lobe: frontal, temporal, parietal,
/// occipital, central, central-parietal.
pub const CHANNEL_NAMES: [&str; 32] = [
    // frontal
    "Fp1", "Fp2", "F3", "F4", "F7", "F8", "Fz", "AF3", "AF4",
    // temporal
    "T7", "T8",
    // parietal
    "P3", "P4", "P7", "P8", "Pz", "PO3", "PO4",
    // occipital
    "O1", "O2", "Oz",
    // central
    "FC5", "FC1", "C3", "C4", "FC2", "FC6", "Cz",
    // central-parietal
    "CP5", "CP1", "CP2", "CP6",
];

/// One EEG electrode. Internally an index into [`CHANNEL_NAMES`], so ordering
/// (`Ord`) is canonical order and comparisons are cheap.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChannelId(u8);

impl ChannelId {
    /// Parse a channel name. Case-sensitive; rejects anything outside the
    /// canonical 32-name montage.
    pub fn parse(name: &str) -> Result<ChannelId> {
        CHANNEL_NAMES
            .iter()
            .position(|&n| n == name)
            .map(|i| ChannelId(i as u8))
            .ok_or_else(|| Error::domain(format!("unknown EEG channel name `{name}`")))
    }

    pub fn name(self) -> &'static str {
        CHANNEL_NAMES[self.0 as usize]
    }

    /// Position in canonical order (0..32).
    pub fn canonical_index(self) -> usize {
        self.0 as usize
    }

    pub fn lobe(self) -> Lobe {
        match self.0 {
            0..=8 => Lobe::Frontal,
            9..=10 => Lobe::Temporal,
            11..=17 => Lobe::Parietal,
            18..=20 => Lobe::Occipital,
            21..=27 => Lobe::Central,
            _ => Lobe::CentralParietal,
        }
    }

    /// All 32 channels in canonical order.
    pub fn all() -> Vec<ChannelId> {
        (0..32).map(ChannelId).collect()
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Debug for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for ChannelId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ChannelId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        ChannelId::parse(&name).map_err(serde::de::Error::custom)
    }
}

/// Parse a list of names into channels, rejecting duplicates.
pub fn parse_channels(names: &[impl AsRef<str>]) -> Result<Vec<ChannelId>> {
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        let ch = ChannelId::parse(name.as_ref())?;
        if out.contains(&ch) {
            return Err(Error::domain(format!("duplicate channel `{ch}`")));
        }
        out.push(ch);
    }
    Ok(out)
}

/// The 8-channel montage the channel-selection study settled on
/// (highest combined importance across valence/arousal/dominance).
pub fn selected_channels() -> Vec<ChannelId> {
    parse_channels(&["Fp1", "F7", "FC5", "FC6", "T7", "T8", "P7", "O2"]).unwrap()
}

/// The stock 8-channel montage consumer headsets ship with; used as the
/// baseline configuration in the window-length sweep.
pub fn standard_channels() -> Vec<ChannelId> {
    parse_channels(&["Fp1", "Fp2", "C3", "C4", "P7", "P8", "O1", "O2"]).unwrap()
}

// ---------------------------------------------------------------------------
// lobes
// ---------------------------------------------------------------------------

/// Cortical lobe grouping of the montage. Channel selection runs PCA per
/// (lobe, band) block rather than over all 32 channels at once.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum Lobe {
    Frontal,
    Temporal,
    Parietal,
    Occipital,
    Central,
    CentralParietal,
}

pub const LOBES: [Lobe; 6] = [
    Lobe::Frontal,
    Lobe::Temporal,
    Lobe::Parietal,
    Lobe::Occipital,
    Lobe::Central,
    Lobe::CentralParietal,
];

impl Lobe {
    pub fn name(self) -> &'static str {
        match self {
            Lobe::Frontal => "Frontal",
            Lobe::Temporal => "Temporal",
            Lobe::Parietal => "Parietal",
            Lobe::Occipital => "Occipital",
            Lobe::Central => "Central",
            Lobe::CentralParietal => "Central-Parietal",
        }
    }

    pub fn index(self) -> usize {
        LOBES.iter().position(|&l| l == self).unwrap()
    }

    /// Channels of this lobe in canonical order.
    pub fn channels(self) -> Vec<ChannelId> {
        ChannelId::all().into_iter().filter(|c| c.lobe() == self).collect()
    }
}

impl fmt::Display for Lobe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

// ---------------------------------------------------------------------------
// frequency bands
// ---------------------------------------------------------------------------

/// Classical EEG rhythm bands. Edges are half-open `[lo, hi)` so the bands
/// tile the spectrum without overlap; gamma closes at 45 Hz (the band-pass
/// ceiling), so the five bands exactly partition [0.5, 45] Hz.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrequencyBand {
    Delta,
    Theta,
    Alpha,
    Beta,
    Gamma,
}

pub const BANDS: [FrequencyBand; 5] = [
    FrequencyBand::Delta,
    FrequencyBand::Theta,
    FrequencyBand::Alpha,
    FrequencyBand::Beta,
    FrequencyBand::Gamma,
];

impl FrequencyBand {
    /// `(lo, hi)` in Hz.
    pub fn range_hz(self) -> (f64, f64) {
        match self {
            FrequencyBand::Delta => (0.5, 4.0),
            FrequencyBand::Theta => (4.0, 8.0),
            FrequencyBand::Alpha => (8.0, 12.0),
            FrequencyBand::Beta => (12.0, 30.0),
            FrequencyBand::Gamma => (30.0, 45.0),
        }
    }

    /// Band membership for a frequency-bin center: `lo <= f < hi`, except
    /// gamma which also includes its 45 Hz upper edge.
    pub fn contains(self, f_hz: f64) -> bool {
        let (lo, hi) = self.range_hz();
        if self == FrequencyBand::Gamma {
            f_hz >= lo && f_hz <= hi
        } else {
            f_hz >= lo && f_hz < hi
        }
    }

    /// Representative mid-band frequency used by the synthetic generator.
    pub fn center_hz(self) -> f64 {
        match self {
            FrequencyBand::Delta => 2.0,
            FrequencyBand::Theta => 6.0,
            FrequencyBand::Alpha => 10.0,
            FrequencyBand::Beta => 20.0,
            FrequencyBand::Gamma => 38.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FrequencyBand::Delta => "delta",
            FrequencyBand::Theta => "theta",
            FrequencyBand::Alpha => "alpha",
            FrequencyBand::Beta => "beta",
            FrequencyBand::Gamma => "gamma",
        }
    }

    pub fn index(self) -> usize {
        BANDS.iter().position(|&b| b == self).unwrap()
    }
}

impl fmt::Display for FrequencyBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

// ---------------------------------------------------------------------------
// emotion-space components
// ---------------------------------------------------------------------------

/// The three affective dimensions. Internal arrays are always indexed in this
/// order (valence, arousal, dominance); exported tables label their columns
/// explicitly, so no consumer has to guess.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmotionComponent {
    Valence,
    Arousal,
    Dominance,
}

pub const COMPONENTS: [EmotionComponent; 3] = [
    EmotionComponent::Valence,
    EmotionComponent::Arousal,
    EmotionComponent::Dominance,
];

impl EmotionComponent {
    pub fn name(self) -> &'static str {
        match self {
            EmotionComponent::Valence => "valence",
            EmotionComponent::Arousal => "arousal",
            EmotionComponent::Dominance => "dominance",
        }
    }

    pub fn index(self) -> usize {
        COMPONENTS.iter().position(|&c| c == self).unwrap()
    }
}

impl fmt::Display for EmotionComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
