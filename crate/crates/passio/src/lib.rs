//! # passio
//!
//! Real-time emotion detection from EEG band power.
//!
//! The crate turns raw multi-channel EEG into one of Descartes' six primary
//! passions (admiration, love, hate, desire, joy, sadness) every few seconds:
//!
//! ```text
//!   raw EEG ──▶ downsample ──▶ band-pass 0.4–45 Hz ──▶ common average ref
//!                                                            │
//!       5 s windows ◀────────────────────────────────────────┘
//!            │
//!            ▼
//!   PSD ──▶ band powers (δ θ α β γ) + ratio indexes ──▶ feature vector
//!            │
//!            ▼
//!   three tree-ensemble classifiers (valence / arousal / dominance)
//!            │
//!            ▼
//!   level triple (−1, 0, +1)³ ──▶ emotion label
//! ```
//!
//! Besides the streaming detector, the crate ships the offline research
//! pipeline used to pick the operating point: a time-window sweep, a two-stage
//! EEG channel selection (per-lobe PCA correlation, then Gini importance from
//! random-forest regressors) and per-dimension model training with feature
//! pruning.
//!
//! The `examples/` directory is the front door: one runnable example per
//! capability. A thin `passio` binary exposes the same operations as
//! subcommands for scripted use.
//!
//! Everything stochastic takes an explicit seed and is reproducible across
//! runs and platforms; see [`rng`].

pub mod dsp;
pub mod emotion;
pub mod ensemble;
mod error;
pub mod features;
pub mod io;
pub mod montage;
pub mod pipeline;
pub mod realtime;
pub mod rng;
pub mod selection;

pub mod cli;

pub use emotion::{discretize_vad, map_emotion, EmotionLabel, VadLevel, VadRating};
pub use error::{Error, Result};
pub use montage::{ChannelId, EmotionComponent, FrequencyBand, Lobe};

/// Build identifier embedded in reports, model files and `--version` output.
pub const BUILD_ID: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));
