//! The VAD emotion space and its mapping onto discrete emotions.
//!
//! Self-assessment ratings live on a continuous 1-9 scale per dimension
//! (valence, arousal, dominance). Each dimension is discretized into three
//! levels (low = −1, medium = 0, high = +1), and the resulting 3³ = 27 level
//! triples map onto named emotions, six of which are Descartes' primary
//! passions: admiration, love, hate, desire, joy and sadness.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};

/// Rating-scale bounds.
pub const RATING_MIN: f64 = 1.0;
pub const RATING_MAX: f64 = 9.0;

/// Discretization thresholds. The published level ranges are 1-3.6 (low),
/// 3.7-6.3 (medium) and 6.4-9 (high) with one-decimal granularity; the cut
/// points sit at the midpoints of the gaps so that arbitrary-precision
/// ratings are covered: low iff v < 3.65, medium iff 3.65 <= v < 6.35,
/// high iff v >= 6.35.
pub const LEVEL_CUT_LOW: f64 = 3.65;
pub const LEVEL_CUT_HIGH: f64 = 6.35;

// ---------------------------------------------------------------------------
// ratings and levels
// ---------------------------------------------------------------------------

/// A continuous self-assessment rating triple, each component in [1, 9].
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct VadRating {
    pub valence: f64,
    pub arousal: f64,
    pub dominance: f64,
}

impl VadRating {
    pub fn new(valence: f64, arousal: f64, dominance: f64) -> Result<VadRating> {
        for (name, v) in [("valence", valence), ("arousal", arousal), ("dominance", dominance)] {
            if !v.is_finite() || !(RATING_MIN..=RATING_MAX).contains(&v) {
                return Err(Error::domain(format!(
                    "{name} rating {v} outside [{RATING_MIN}, {RATING_MAX}]"
                )));
            }
        }
        Ok(VadRating { valence, arousal, dominance })
    }

    /// Components in (valence, arousal, dominance) order.
    pub fn as_array(&self) -> [f64; 3] {
        [self.valence, self.arousal, self.dominance]
    }
}

/// A discretized level triple; every component is −1 (low), 0 (medium) or
/// +1 (high).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct VadLevel {
    pub valence: i8,
    pub arousal: i8,
    pub dominance: i8,
}

impl VadLevel {
    pub fn new(valence: i8, arousal: i8, dominance: i8) -> Result<VadLevel> {
        for (name, v) in [("valence", valence), ("arousal", arousal), ("dominance", dominance)] {
            if !(-1..=1).contains(&v) {
                return Err(Error::domain(format!("{name} level {v} outside {{-1, 0, +1}}")));
            }
        }
        Ok(VadLevel { valence, arousal, dominance })
    }

    /// Components in (valence, arousal, dominance) order.
    pub fn as_array(&self) -> [i8; 3] {
        [self.valence, self.arousal, self.dominance]
    }

    /// All 27 level triples, ordered by (arousal, valence, dominance) each
    /// ascending −1, 0, +1. This is the row order of the exported map file.
    pub fn all() -> Vec<VadLevel> {
        let mut out = Vec::with_capacity(27);
        for a in [-1i8, 0, 1] {
            for v in [-1i8, 0, 1] {
                for d in [-1i8, 0, 1] {
                    out.push(VadLevel { valence: v, arousal: a, dominance: d });
                }
            }
        }
        out
    }
}

impl fmt::Display for VadLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(v{:+} a{:+} d{:+})", self.valence, self.arousal, self.dominance)
    }
}

/// Discretize one rating value into a level.
pub fn discretize_component(v: f64) -> Result<i8> {
    if !v.is_finite() || !(RATING_MIN..=RATING_MAX).contains(&v) {
        return Err(Error::domain(format!("rating {v} outside [{RATING_MIN}, {RATING_MAX}]")));
    }
    Ok(if v < LEVEL_CUT_LOW {
        -1
    } else if v < LEVEL_CUT_HIGH {
        0
    } else {
        1
    })
}

/// Discretize a rating triple. Total for valid ratings: `VadRating`
/// construction already enforces the [1, 9] range.
pub fn discretize_vad(rating: &VadRating) -> VadLevel {
    VadLevel {
        valence: discretize_component(rating.valence).unwrap(),
        arousal: discretize_component(rating.arousal).unwrap(),
        dominance: discretize_component(rating.dominance).unwrap(),
    }
}

// ---------------------------------------------------------------------------
// emotion labels
// ---------------------------------------------------------------------------

/// Discrete emotion labels reachable from the 27 level triples. The six
/// Cartesian primary passions are the detector's headline output; the
/// remaining named states and the catch-all `Other` complete the map.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum EmotionLabel {
    Admiration,
    Love,
    Hate,
    Desire,
    Joy,
    Sadness,
    Neutral,
    Satisfaction,
    Pessimism,
    Generosity,
    Distressed,
    Anxious,
    Calm,
    Relaxed,
    Overconfident,
    Relief,
    Rejected,
    Other,
}

impl EmotionLabel {
    pub fn name(self) -> &'static str {
        match self {
            EmotionLabel::Admiration => "Admiration",
            EmotionLabel::Love => "Love",
            EmotionLabel::Hate => "Hate",
            EmotionLabel::Desire => "Desire",
            EmotionLabel::Joy => "Joy",
            EmotionLabel::Sadness => "Sadness",
            EmotionLabel::Neutral => "Neutral",
            EmotionLabel::Satisfaction => "Satisfaction",
            EmotionLabel::Pessimism => "Pessimism",
            EmotionLabel::Generosity => "Generosity",
            EmotionLabel::Distressed => "Distressed",
            EmotionLabel::Anxious => "Anxious",
            EmotionLabel::Calm => "Calm",
            EmotionLabel::Relaxed => "Relaxed",
            EmotionLabel::Overconfident => "Overconfident",
            EmotionLabel::Relief => "Relief",
            EmotionLabel::Rejected => "Rejected",
            EmotionLabel::Other => "Other",
        }
    }

    /// True for Descartes' six primary passions.
    pub fn is_passion(self) -> bool {
        matches!(
            self,
            EmotionLabel::Admiration
                | EmotionLabel::Love
                | EmotionLabel::Hate
                | EmotionLabel::Desire
                | EmotionLabel::Joy
                | EmotionLabel::Sadness
        )
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Map a level triple onto its emotion. Total over the 27 triples; the
/// coordinate cube has one duplicate published row ((arousal, valence,
/// dominance) = (0, +1, +1), `Other` both times), collapsed here.
pub fn map_emotion(level: &VadLevel) -> EmotionLabel {
    use EmotionLabel::*;
    // Keyed (arousal, valence, dominance) to mirror the published cube layout.
    match (level.arousal, level.valence, level.dominance) {
        (0, 0, 0) => Neutral,
        (0, 0, 1) => Other,
        (0, 0, -1) => Other,
        (0, 1, 0) => Desire,
        (0, 1, 1) => Other,
        (0, 1, -1) => Satisfaction,
        (0, -1, 0) => Other,
        (0, -1, 1) => Pessimism,
        (0, -1, -1) => Other,
        (1, 0, 0) => Admiration,
        (1, 0, 1) => Other,
        (1, 0, -1) => Other,
        (1, 1, 0) => Joy,
        (1, 1, 1) => Generosity,
        (1, 1, -1) => Love,
        (1, -1, 0) => Distressed,
        (1, -1, 1) => Anxious,
        (1, -1, -1) => Hate,
        (-1, 0, 0) => Other,
        (-1, 0, 1) => Calm,
        (-1, 0, -1) => Other,
        (-1, 1, 0) => Relaxed,
        (-1, 1, 1) => Overconfident,
        (-1, 1, -1) => Relief,
        (-1, -1, 0) => Sadness,
        (-1, -1, 1) => Rejected,
        (-1, -1, -1) => Other,
        _ => unreachable!("VadLevel components are validated to {{-1, 0, +1}}"),
    }
}

// ---------------------------------------------------------------------------
// map export
// ---------------------------------------------------------------------------

/// Version of the exported emotion-map table format.
pub const EMOTION_MAP_VERSION: u32 = 1;

/// Write the full 27-row emotion map as tab-separated text so downstream
/// consumers can audit it. Columns: arousal, valence, dominance, emotion,
/// is_passion. Row order matches [`VadLevel::all`].
pub fn write_emotion_map(mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "# emotion-map v{EMOTION_MAP_VERSION}")?;
    writeln!(w, "arousal\tvalence\tdominance\temotion\tis_passion")?;
    for level in VadLevel::all() {
        let label = map_emotion(&level);
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            level.arousal,
            level.valence,
            level.dominance,
            label.name(),
            label.is_passion()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rating_bounds_are_enforced() {
        assert!(VadRating::new(1.0, 9.0, 5.0).is_ok());
        assert!(VadRating::new(0.99, 5.0, 5.0).is_err());
        assert!(VadRating::new(5.0, 9.01, 5.0).is_err());
        assert!(VadRating::new(5.0, 5.0, f64::NAN).is_err());
        assert!(discretize_component(0.5).is_err());
    }

    #[test]
    fn discretize_matches_published_level_ranges() {
        // Published ranges at one-decimal granularity: 1-3.6 low, 3.7-6.3
        // medium, 6.4-9 high.
        assert_eq!(discretize_component(2.0).unwrap(), -1);
        assert_eq!(discretize_component(3.6).unwrap(), -1);
        assert_eq!(discretize_component(3.7).unwrap(), 0);
        assert_eq!(discretize_component(5.0).unwrap(), 0);
        assert_eq!(discretize_component(6.3).unwrap(), 0);
        assert_eq!(discretize_component(6.4).unwrap(), 1);
        assert_eq!(discretize_component(9.0).unwrap(), 1);
        assert_eq!(discretize_component(1.0).unwrap(), -1);

        let r = VadRating::new(2.0, 5.0, 9.0).unwrap();
        assert_eq!(discretize_vad(&r), VadLevel { valence: -1, arousal: 0, dominance: 1 });
    }

    #[test]
    fn discretize_covers_a_fine_rating_grid() {
        // 1000-point sweep of [1, 9]: every value maps to exactly one level
        // and boundaries agree with the published ranges' decimal endpoints.
        for i in 0..1000 {
            let v = 1.0 + 8.0 * (i as f64) / 999.0;
            let lvl = discretize_component(v).unwrap();
            let expected = if v < LEVEL_CUT_LOW {
                -1
            } else if v < LEVEL_CUT_HIGH {
                0
            } else {
                1
            };
            assert_eq!(lvl, expected, "v = {v}");
        }
    }

    proptest! {
        #[test]
        fn discretize_is_monotone(a in 1.0f64..=9.0, b in 1.0f64..=9.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(discretize_component(lo).unwrap() <= discretize_component(hi).unwrap());
        }
    }

    #[test]
    fn map_covers_all_27_triples_with_six_passions() {
        let all = VadLevel::all();
        assert_eq!(all.len(), 27);
        let passions: Vec<EmotionLabel> =
            all.iter().map(map_emotion).filter(|e| e.is_passion()).collect();
        assert_eq!(passions.len(), 6);
        for p in [
            EmotionLabel::Admiration,
            EmotionLabel::Love,
            EmotionLabel::Hate,
            EmotionLabel::Desire,
            EmotionLabel::Joy,
            EmotionLabel::Sadness,
        ] {
            assert!(passions.contains(&p), "{p} missing");
        }
    }

    #[test]
    fn passion_coordinates_match_the_published_cube() {
        // (arousal, valence, dominance) coordinates of the six passions.
        let cases = [
            (EmotionLabel::Admiration, (1, 0, 0)),
            (EmotionLabel::Love, (1, 1, -1)),
            (EmotionLabel::Hate, (1, -1, -1)),
            (EmotionLabel::Desire, (0, 1, 0)),
            (EmotionLabel::Joy, (1, 1, 0)),
            (EmotionLabel::Sadness, (-1, -1, 0)),
        ];
        for (label, (a, v, d)) in cases {
            let level = VadLevel::new(v, a, d).unwrap();
            assert_eq!(map_emotion(&level), label);
        }
        // Composite example: high arousal, high valence, low dominance → Love.
        let r = VadRating::new(7.0, 8.0, 2.0).unwrap();
        assert_eq!(map_emotion(&discretize_vad(&r)), EmotionLabel::Love);
        // Neutral center.
        let r = VadRating::new(5.0, 5.0, 5.0).unwrap();
        assert_eq!(map_emotion(&discretize_vad(&r)), EmotionLabel::Neutral);
    }

    #[test]
    fn exported_map_matches_the_committed_copy() {
        let mut buf = Vec::new();
        write_emotion_map(&mut buf).unwrap();
        let exported = String::from_utf8(buf).unwrap();
        assert_eq!(exported.lines().count(), 2 + 27);
        let committed = include_str!("../docs/emotion_map_v1.tsv");
        assert_eq!(exported, committed, "docs/emotion_map_v1.tsv is stale");
    }
}
