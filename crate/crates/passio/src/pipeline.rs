//! Offline experiment orchestration: preprocess, feature extraction,
//! channel selection, the window-length and feature-count sweeps, and final
//! model training, all driven by one validated config.
//!
//! Determinism contract: every stage derives its seeds from the config seed
//! and a fixed stage tag, summation orders are fixed, and report writers emit
//! no timestamps, so two runs with the same config hash and data produce
//! byte-identical artifacts.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dsp::{
    bandpass, common_average_reference, downsample, sliding_windows, EegSegment, FilterMode,
    WindowSpec,
};
use crate::emotion::{discretize_vad, VadLevel, VadRating};
use crate::ensemble::{
    confusion_matrix, save_model_set, EnsembleMode, EnsembleSpec, MetricsReport, ModelMeta,
    Target, TreeEnsemble, VadModelSet,
};
use crate::error::{Error, Result};
use crate::features::FeatureSchema;
use crate::montage::{
    parse_channels, selected_channels, ChannelId, EmotionComponent, FrequencyBand, BANDS,
    COMPONENTS,
};
use crate::rng::{derive_seed, rng_from_seed};
use crate::selection::{
    band_matrix, build_correlation_table, gini_channel_ranking, select_top_channels,
    ChannelRanking, CorrelationTable, SubjectMatrix, SubjectWindows,
};

/// Config schema version accepted by this build.
pub const CONFIG_VERSION: u32 = 1;

// Stage tags for seed derivation; fixed so artifacts stay reproducible
// across code reorganizations.
const STAGE_TRAIN: u64 = 1;
const STAGE_SELECT: u64 = 2;
const STAGE_WINDOW_SWEEP: u64 = 3;
const STAGE_FEATURE_SWEEP: u64 = 4;
const STAGE_SPLIT: u64 = 5;
const FINAL_FIT: u64 = u64::MAX;

// ---------------------------------------------------------------------------
// config
// ---------------------------------------------------------------------------

/// How windows are assigned to cross-validation folds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    /// Whole trials per fold; overlapping windows never cross folds.
    Block,
    /// Individual windows shuffled into folds. Overlapping windows can land
    /// in different folds, which leaks between train and test; kept for
    /// comparison against results reported under this split.
    WindowRandom,
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitMode::Block => "block",
            SplitMode::WindowRandom => "window-random",
        })
    }
}

/// One analysis band, named and bounded in Hz. Present in the config for
/// provenance; this build supports exactly the five standard bands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandConfig {
    pub name: String,
    pub lo_hz: f64,
    pub hi_hz: f64,
}

fn default_bands() -> Vec<BandConfig> {
    BANDS
        .iter()
        .map(|b| {
            let (lo_hz, hi_hz) = b.range_hz();
            BandConfig { name: b.name().to_string(), lo_hz, hi_hz }
        })
        .collect()
}

/// Everything an experiment run depends on. Defaults reproduce the final
/// reference configuration: 5 s windows stepped 0.125 s for training and 5 s
/// for evaluation, 0.4–45 Hz causal filtering at 128 Hz, the standard
/// 8-channel set, block splits, 100-tree ensembles, top 34 features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub version: u32,
    pub seed: u64,
    /// Analysis window length in seconds.
    pub window_length_s: f64,
    /// Window step for training windows (overlapping).
    pub train_step_s: f64,
    /// Window step for evaluation windows (non-overlapping by default,
    /// matching the live cadence).
    pub eval_step_s: f64,
    /// Working sample rate; inputs at integer multiples are downsampled.
    pub target_fs: f64,
    pub bandpass_lo_hz: f64,
    pub bandpass_hi_hz: f64,
    /// Causal matches the live engine; zero-phase is offline only.
    pub filter: FilterMode,
    /// When true, re-reference after cutting to the configured channel set
    /// (matches a live headset that records only those channels). When
    /// false, re-reference over the full recorded montage first.
    pub reference_after_subset: bool,
    /// Channels used for training and inference.
    pub channels: Vec<String>,
    pub bands: Vec<BandConfig>,
    pub split: SplitMode,
    pub folds: usize,
    /// Trees per fitted ensemble.
    pub trees: usize,
    /// Features kept per affect dimension in the final model.
    pub top_n_features: usize,
    /// Candidate sizes for the feature-count sweep.
    pub feature_counts: Vec<usize>,
    /// Candidate lengths for the window sweep, seconds.
    pub window_lengths_s: Vec<f64>,
    /// Channels entering channel selection (the full montage by default).
    pub selection_channels: Vec<String>,
    /// Repetitions per subject for the importance ranking.
    pub selection_iterations: usize,
    /// Band whose per-channel power feeds the importance ranking. Unset
    /// means: use the band the correlation table finds dominant.
    pub selection_band: Option<String>,
    /// Channel count kept by selection.
    pub n_selected: usize,
    /// Dataset directory (a manifest and its recordings). Optional; the
    /// command line can supply it instead.
    pub data_dir: Option<PathBuf>,
    /// Run output directory root. Optional; command line can supply it.
    pub out_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            version: CONFIG_VERSION,
            seed: 42,
            window_length_s: 5.0,
            train_step_s: 0.125,
            eval_step_s: 5.0,
            target_fs: 128.0,
            bandpass_lo_hz: 0.4,
            bandpass_hi_hz: 45.0,
            filter: FilterMode::Causal,
            reference_after_subset: false,
            channels: selected_channels().iter().map(|c| c.to_string()).collect(),
            bands: default_bands(),
            split: SplitMode::Block,
            folds: 5,
            trees: 100,
            top_n_features: 34,
            feature_counts: (25..=35).collect(),
            window_lengths_s: vec![2.0, 4.0, 5.0, 8.0, 10.0],
            selection_channels: ChannelId::all().iter().map(|c| c.to_string()).collect(),
            selection_iterations: 10,
            selection_band: None,
            n_selected: 8,
            data_dir: None,
            out_dir: None,
        }
    }
}

impl PipelineConfig {
    /// The reference configuration (all defaults).
    pub fn standard() -> Self {
        Self::default()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::schema("config", e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Canonical serialized form (field order fixed by the struct).
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical serialization; stamped into every
    /// artifact this config produces.
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::schema(
                "version",
                format!("config version {} unsupported; this build reads {CONFIG_VERSION}",
                    self.version),
            ));
        }
        let positive = [
            ("window_length_s", self.window_length_s),
            ("train_step_s", self.train_step_s),
            ("eval_step_s", self.eval_step_s),
            ("target_fs", self.target_fs),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::schema(field, format!("{v} must be positive")));
            }
        }
        if self.train_step_s > self.window_length_s {
            return Err(Error::schema(
                "train_step_s",
                "window step cannot exceed the window length",
            ));
        }
        if self.eval_step_s > self.window_length_s {
            return Err(Error::schema(
                "eval_step_s",
                "window step cannot exceed the window length",
            ));
        }
        if !(self.bandpass_lo_hz > 0.0 && self.bandpass_lo_hz < self.bandpass_hi_hz) {
            return Err(Error::schema("bandpass_lo_hz", "need 0 < lo < hi"));
        }
        if self.bandpass_hi_hz >= self.target_fs / 2.0 {
            return Err(Error::schema(
                "bandpass_hi_hz",
                format!("band edge must stay below Nyquist ({} Hz)", self.target_fs / 2.0),
            ));
        }
        if self.channels.len() < 2 {
            return Err(Error::schema("channels", "need at least two channels"));
        }
        parse_channels(&self.channels).map_err(|e| Error::schema("channels", e.to_string()))?;
        if self.selection_channels.len() < 2 {
            return Err(Error::schema("selection_channels", "need at least two channels"));
        }
        parse_channels(&self.selection_channels)
            .map_err(|e| Error::schema("selection_channels", e.to_string()))?;
        let expected = default_bands();
        if self.bands != expected {
            return Err(Error::schema(
                "bands",
                "this build supports exactly the five standard bands with their \
                 standard edges",
            ));
        }
        if self.folds < 2 {
            return Err(Error::schema("folds", "cross-validation needs at least two folds"));
        }
        if self.trees == 0 {
            return Err(Error::schema("trees", "need at least one tree"));
        }
        if self.top_n_features == 0 {
            return Err(Error::schema("top_n_features", "need at least one feature"));
        }
        if self.feature_counts.is_empty() || self.feature_counts.contains(&0) {
            return Err(Error::schema("feature_counts", "need positive candidate sizes"));
        }
        if self.window_lengths_s.is_empty()
            || self.window_lengths_s.iter().any(|l| !(l.is_finite() && *l > 0.0))
        {
            return Err(Error::schema("window_lengths_s", "need positive candidate lengths"));
        }
        if self.selection_iterations == 0 {
            return Err(Error::schema("selection_iterations", "need at least one repetition"));
        }
        if self.n_selected == 0 {
            return Err(Error::schema("n_selected", "must keep at least one channel"));
        }
        if let Some(name) = &self.selection_band {
            band_from_name(name).map_err(|e| Error::schema("selection_band", e.to_string()))?;
        }
        Ok(())
    }

    pub fn channel_ids(&self) -> Result<Vec<ChannelId>> {
        parse_channels(&self.channels)
    }

    pub fn selection_channel_ids(&self) -> Result<Vec<ChannelId>> {
        parse_channels(&self.selection_channels)
    }
}

fn band_from_name(name: &str) -> Result<FrequencyBand> {
    BANDS
        .into_iter()
        .find(|b| b.name().eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::domain(format!("unknown band `{name}`")))
}

// ---------------------------------------------------------------------------
// preprocessing and window extraction
// ---------------------------------------------------------------------------

fn subset_segment(seg: &EegSegment, keep: &[ChannelId]) -> Result<EegSegment> {
    let mut rows = Vec::with_capacity(keep.len());
    for ch in keep {
        let row = seg.channel_row(*ch).ok_or_else(|| {
            Error::schema("channels", format!("recording does not contain channel {ch}"))
        })?;
        rows.push(row.to_owned());
    }
    let mut samples = Array2::zeros((keep.len(), seg.n_samples()));
    for (r, row) in rows.into_iter().enumerate() {
        samples.row_mut(r).assign(&row);
    }
    EegSegment::new(keep.to_vec(), seg.fs(), samples)
}

/// Standard signal conditioning for one trial: downsample to the working
/// rate, band-pass, re-reference to the common average, and cut down to
/// `keep` (CAR scope per `reference_after_subset`).
pub fn preprocess_recording(
    rec: &crate::io::Recording,
    config: &PipelineConfig,
    keep: &[ChannelId],
) -> Result<crate::io::Recording> {
    let mut seg = rec.segment.clone();
    if (seg.fs() - config.target_fs).abs() > 1e-9 {
        seg = downsample(&seg, config.target_fs)?;
    }
    seg = bandpass(&seg, config.bandpass_lo_hz, config.bandpass_hi_hz, config.filter)?;
    if config.reference_after_subset {
        seg = subset_segment(&seg, keep)?;
        seg = common_average_reference(&seg)?;
    } else {
        seg = common_average_reference(&seg)?;
        seg = subset_segment(&seg, keep)?;
    }
    Ok(crate::io::Recording::new(rec.subject, rec.trial, rec.label, seg))
}

/// Labeled feature rows for a set of recordings: one row per analysis
/// window, with enough bookkeeping to split without leakage.
#[derive(Clone, Debug)]
pub struct WindowTable {
    schema: Arc<FeatureSchema>,
    features: Array2<f64>,
    ratings: Vec<VadRating>,
    levels: Vec<VadLevel>,
    subjects: Vec<u32>,
    trials: Vec<u32>,
    /// Window [start, end) in seconds relative to its trial.
    spans: Vec<(f64, f64)>,
}

impl WindowTable {
    pub fn schema(&self) -> &Arc<FeatureSchema> {
        &self.schema
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn ratings(&self) -> &[VadRating] {
        &self.ratings
    }

    pub fn levels(&self) -> &[VadLevel] {
        &self.levels
    }

    pub fn subjects(&self) -> &[u32] {
        &self.subjects
    }

    pub fn trials(&self) -> &[u32] {
        &self.trials
    }

    pub fn spans(&self) -> &[(f64, f64)] {
        &self.spans
    }

    pub fn n_windows(&self) -> usize {
        self.features.nrows()
    }

    /// Single-dimension class labels for one affect component.
    pub fn level_column(&self, component: EmotionComponent) -> Vec<i8> {
        self.levels.iter().map(|l| l.as_array()[component.index()]).collect()
    }

    /// Unique (subject, trial) keys in first-appearance order.
    pub fn trial_keys(&self) -> Vec<(u32, u32)> {
        let mut keys = Vec::new();
        for i in 0..self.n_windows() {
            let key = (self.subjects[i], self.trials[i]);
            if keys.last() != Some(&key) && !keys.contains(&key) {
                keys.push(key);
            }
        }
        keys
    }

    /// Write the table as `# passio-features v1` TSV: identity and label
    /// columns first, then one column per feature in schema order.
    pub fn write_tsv(&self, mut w: impl Write, config_hash: &str, seed: u64) -> io::Result<()> {
        writeln!(w, "# passio-features v1")?;
        write_provenance(&mut w, config_hash, seed)?;
        write!(
            w,
            "subject\ttrial\tstart_s\tend_s\tvalence\tarousal\tdominance\t\
             valence_level\tarousal_level\tdominance_level"
        )?;
        for name in self.schema.names() {
            write!(w, "\t{name}")?;
        }
        writeln!(w)?;
        for i in 0..self.n_windows() {
            let r = &self.ratings[i];
            let [lv, la, ld] = self.levels[i].as_array();
            let (start, end) = self.spans[i];
            write!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{lv}\t{la}\t{ld}",
                self.subjects[i], self.trials[i], start, end, r.valence, r.arousal, r.dominance
            )?;
            for v in self.features.row(i) {
                write!(w, "\t{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Rows regrouped per subject, in first-appearance subject order.
    pub fn by_subject(&self) -> Vec<SubjectWindows> {
        let mut order: Vec<u32> = Vec::new();
        let mut rows: HashMap<u32, Vec<usize>> = HashMap::new();
        for (i, &s) in self.subjects.iter().enumerate() {
            if !rows.contains_key(&s) {
                order.push(s);
            }
            rows.entry(s).or_default().push(i);
        }
        order
            .into_iter()
            .map(|subject| {
                let idx = &rows[&subject];
                let mut features = Array2::zeros((idx.len(), self.features.ncols()));
                for (r, &i) in idx.iter().enumerate() {
                    features.row_mut(r).assign(&self.features.row(i));
                }
                let ratings = idx.iter().map(|&i| self.ratings[i]).collect();
                SubjectWindows { subject, features, ratings }
            })
            .collect()
    }
}

/// Preprocess and featurize every recording: one feature row per window at
/// the given step. Every recording must be labeled.
pub fn extract_windows(
    recordings: &[crate::io::Recording],
    config: &PipelineConfig,
    keep: &[ChannelId],
    step_s: f64,
) -> Result<WindowTable> {
    use rayon::prelude::*;

    if recordings.is_empty() {
        return Err(Error::domain("no recordings to extract windows from"));
    }
    let spec = WindowSpec::new(config.window_length_s, step_s)?;
    let schema = FeatureSchema::for_channels(keep);

    struct TrialRows {
        subject: u32,
        trial: u32,
        rating: VadRating,
        rows: Vec<Vec<f64>>,
        spans: Vec<(f64, f64)>,
    }

    let per_trial: Vec<TrialRows> = recordings
        .par_iter()
        .map(|rec| -> Result<TrialRows> {
            let rating = rec.label.ok_or_else(|| {
                Error::schema(
                    "label",
                    format!("subject {} trial {} carries no rating", rec.subject, rec.trial),
                )
            })?;
            let pre = preprocess_recording(rec, config, keep)?;
            let windows = sliding_windows(&pre.segment, &spec)?;
            let vectors = crate::features::assemble_features(&windows)?;
            let spans = vectors
                .iter()
                .map(|v| (v.window_start_s, v.window_start_s + config.window_length_s))
                .collect();
            let rows = vectors.into_iter().map(|v| v.values).collect();
            Ok(TrialRows { subject: rec.subject, trial: rec.trial, rating, rows, spans })
        })
        .collect::<Result<_>>()?;

    let n_rows: usize = per_trial.iter().map(|t| t.rows.len()).sum();
    let mut features = Array2::zeros((n_rows, schema.len()));
    let mut ratings = Vec::with_capacity(n_rows);
    let mut levels = Vec::with_capacity(n_rows);
    let mut subjects = Vec::with_capacity(n_rows);
    let mut trials = Vec::with_capacity(n_rows);
    let mut spans = Vec::with_capacity(n_rows);
    let mut r = 0;
    for t in per_trial {
        let level = discretize_vad(&t.rating);
        for (row, span) in t.rows.into_iter().zip(t.spans) {
            features.row_mut(r).assign(&ndarray::ArrayView1::from(&row));
            ratings.push(t.rating);
            levels.push(level);
            subjects.push(t.subject);
            trials.push(t.trial);
            spans.push(span);
            r += 1;
        }
    }
    Ok(WindowTable { schema, features, ratings, levels, subjects, trials, spans })
}

/// Deterministically permute the labels across recordings (the chance-level
/// control: any model trained on the result should score near 1/3).
pub fn shuffle_trial_labels(recordings: &mut [crate::io::Recording], seed: u64) {
    let mut labels: Vec<Option<VadRating>> = recordings.iter().map(|r| r.label).collect();
    let mut rng = rng_from_seed(derive_seed(seed, &[STAGE_SPLIT, 0xC0]));
    labels.shuffle(&mut rng);
    for (rec, label) in recordings.iter_mut().zip(labels) {
        rec.label = label;
    }
}

// ---------------------------------------------------------------------------
// fold assignment
// ---------------------------------------------------------------------------

/// Assign whole trials to folds (shuffled round-robin, balanced to ±1).
pub fn assign_trial_folds(
    keys: &[(u32, u32)],
    folds: usize,
    seed: u64,
) -> Result<HashMap<(u32, u32), usize>> {
    if folds < 2 {
        return Err(Error::contract("need at least two folds"));
    }
    if keys.len() < folds {
        return Err(Error::domain(format!(
            "{} trials cannot fill {folds} folds",
            keys.len()
        )));
    }
    let mut shuffled = keys.to_vec();
    shuffled.shuffle(&mut rng_from_seed(derive_seed(seed, &[STAGE_SPLIT, 1])));
    Ok(shuffled.into_iter().enumerate().map(|(i, k)| (k, i % folds)).collect())
}

/// Per-window fold ids for a table under a trial→fold map.
pub fn folds_from_map(
    table: &WindowTable,
    map: &HashMap<(u32, u32), usize>,
) -> Result<Vec<usize>> {
    (0..table.n_windows())
        .map(|i| {
            let key = (table.subjects[i], table.trials[i]);
            map.get(&key).copied().ok_or_else(|| {
                Error::contract(format!(
                    "subject {} trial {} missing from the fold assignment",
                    key.0, key.1
                ))
            })
        })
        .collect()
}

/// Assign individual windows to folds (shuffled round-robin). This is the
/// leaky split kept for comparison; see [`SplitMode::WindowRandom`].
pub fn assign_window_folds(n_windows: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::contract("need at least two folds"));
    }
    if n_windows < folds {
        return Err(Error::domain(format!("{n_windows} windows cannot fill {folds} folds")));
    }
    let mut order: Vec<usize> = (0..n_windows).collect();
    order.shuffle(&mut rng_from_seed(derive_seed(seed, &[STAGE_SPLIT, 2])));
    let mut fold_of = vec![0usize; n_windows];
    for (i, w) in order.into_iter().enumerate() {
        fold_of[w] = i % folds;
    }
    Ok(fold_of)
}

/// Leakage guard for block splits: no two windows of the same trial whose
/// time intervals intersect may sit in different folds.
pub fn check_block_integrity(table: &WindowTable, fold_of: &[usize]) -> Result<()> {
    if fold_of.len() != table.n_windows() {
        return Err(Error::contract("fold assignment length differs from window count"));
    }
    let mut by_trial: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
    for i in 0..table.n_windows() {
        by_trial.entry((table.subjects[i], table.trials[i])).or_default().push(i);
    }
    for (key, idx) in by_trial {
        for (a, &i) in idx.iter().enumerate() {
            for &j in &idx[a + 1..] {
                if fold_of[i] == fold_of[j] {
                    continue;
                }
                let (s1, e1) = table.spans[i];
                let (s2, e2) = table.spans[j];
                if s1 < e2 && s2 < e1 {
                    return Err(Error::contract(format!(
                        "subject {} trial {}: windows [{s1}, {e1}) and [{s2}, {e2}) \
                         overlap across folds {} and {}",
                        key.0, key.1, fold_of[i], fold_of[j]
                    )));
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// report plumbing
// ---------------------------------------------------------------------------

fn write_provenance(mut w: impl Write, config_hash: &str, seed: u64) -> io::Result<()> {
    writeln!(w, "# build {}", crate::BUILD_ID)?;
    writeln!(w, "# seed {seed}")?;
    writeln!(w, "# config {config_hash}")
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Run directory layout: one writer per run.
#[derive(Clone, Debug)]
pub struct RunPaths {
    pub root: PathBuf,
    pub config_dir: PathBuf,
    pub tables_dir: PathBuf,
    pub models_dir: PathBuf,
    pub logs_dir: PathBuf,
}

/// Create the run directory skeleton. An existing non-empty root is refused
/// unless `force` is set.
pub fn prepare_run_dir(root: &Path, force: bool) -> Result<RunPaths> {
    if root.exists() {
        let occupied = std::fs::read_dir(root)
            .map_err(|e| Error::io(root, e))?
            .next()
            .is_some();
        if occupied && !force {
            return Err(Error::session(format!(
                "run directory {} is not empty; pass --force to reuse it",
                root.display()
            )));
        }
    }
    let paths = RunPaths {
        root: root.to_path_buf(),
        config_dir: root.join("config"),
        tables_dir: root.join("tables"),
        models_dir: root.join("models"),
        logs_dir: root.join("logs"),
    };
    for dir in [&paths.root, &paths.config_dir, &paths.tables_dir, &paths.models_dir,
        &paths.logs_dir]
    {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(paths)
}

// ---------------------------------------------------------------------------
// window-length sweep
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct WindowSweepRow {
    pub length_s: f64,
    /// Accuracy per affect dimension, (valence, arousal, dominance).
    pub accuracy: [f64; 3],
    pub average: f64,
}

#[derive(Clone, Debug)]
pub struct WindowSweepReport {
    pub rows: Vec<WindowSweepRow>,
    pub selected_length_s: f64,
    pub seed: u64,
    pub config_hash: String,
}

impl WindowSweepReport {
    pub fn write_tsv(&self, mut w: impl Write) -> io::Result<()> {
        write_provenance(&mut w, &self.config_hash, self.seed)?;
        writeln!(
            w,
            "length_s\tvalence_acc\tarousal_acc\tdominance_acc\taverage\tselected\tseed\tconfig"
        )?;
        for row in &self.rows {
            writeln!(
                w,
                "{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{}\t{}\t{}",
                row.length_s,
                row.accuracy[0],
                row.accuracy[1],
                row.accuracy[2],
                row.average,
                u8::from(row.length_s == self.selected_length_s),
                self.seed,
                self.config_hash
            )?;
        }
        Ok(())
    }
}

/// Train a standard forest at each candidate window length and report
/// per-dimension cross-validated accuracy. The selected length is the
/// smallest whose average accuracy is within half a point (0.005) of the
/// best, favoring low latency at equal quality.
pub fn run_time_window_sweep(
    config: &PipelineConfig,
    recordings: &[crate::io::Recording],
    lengths: &[f64],
) -> Result<WindowSweepReport> {
    if lengths.is_empty() {
        return Err(Error::contract("sweep needs at least one window length"));
    }
    let mut lengths: Vec<f64> = lengths.to_vec();
    lengths.sort_by(|a, b| a.partial_cmp(b).expect("finite lengths"));
    lengths.dedup();
    let longest = *lengths.last().expect("nonempty");
    for rec in recordings {
        let duration = rec.segment.n_samples() as f64 / rec.segment.fs();
        if duration < longest {
            return Err(Error::domain(format!(
                "subject {} trial {} lasts {duration} s, shorter than the longest \
                 window ({longest} s)",
                rec.subject, rec.trial
            )));
        }
    }
    let channels = config.channel_ids()?;
    let seed = derive_seed(config.seed, &[STAGE_WINDOW_SWEEP]);
    let config_hash = config.config_hash();

    let mut rows = Vec::with_capacity(lengths.len());
    for (li, &length) in lengths.iter().enumerate() {
        let mut sub = config.clone();
        sub.window_length_s = length;
        sub.train_step_s = config.train_step_s.min(length);
        sub.eval_step_s = length;

        let train = extract_windows(recordings, &sub, &channels, sub.train_step_s)?;
        let eval = extract_windows(recordings, &sub, &channels, sub.eval_step_s)?;
        let map = assign_trial_folds(&train.trial_keys(), config.folds, seed)?;
        let train_folds = folds_from_map(&train, &map)?;
        let eval_folds = folds_from_map(&eval, &map)?;
        check_block_integrity(&train, &train_folds)?;

        let mut accuracy = [0.0; 3];
        for component in COMPONENTS {
            let dim = component.index();
            let y_train_all = train.level_column(component);
            let y_eval_all = eval.level_column(component);
            let mut confusion = [[0u64; 3]; 3];
            for fold in 0..config.folds {
                let (x_tr, y_tr) =
                    select_rows(&train, &y_train_all, &train_folds, |f| f != fold);
                let (x_ev, y_ev) = select_rows(&eval, &y_eval_all, &eval_folds, |f| f == fold);
                if x_ev.nrows() == 0 {
                    continue;
                }
                let mut spec = EnsembleSpec::new(EnsembleMode::RfClassifier);
                spec.n_trees = config.trees;
                let model = TreeEnsemble::fit(
                    spec,
                    &x_tr,
                    Target::Levels(&y_tr),
                    train.schema().names(),
                    derive_seed(seed, &[li as u64, fold as u64, dim as u64]),
                )?;
                let mut buf = Vec::new();
                let mut preds = Vec::with_capacity(x_ev.nrows());
                for row in x_ev.rows() {
                    buf.clear();
                    buf.extend(row.iter());
                    preds.push(model.predict_level(&buf)?);
                }
                accumulate_confusion(&mut confusion, &y_ev, &preds);
            }
            accuracy[dim] = MetricsReport::from_confusion(&confusion).accuracy;
        }
        let average = accuracy.iter().sum::<f64>() / 3.0;
        rows.push(WindowSweepRow { length_s: length, accuracy, average });
    }

    let best = rows.iter().map(|r| r.average).fold(f64::NEG_INFINITY, f64::max);
    let selected_length_s = rows
        .iter()
        .find(|r| r.average >= best - 0.005)
        .expect("at least one row")
        .length_s;
    Ok(WindowSweepReport { rows, selected_length_s, seed, config_hash })
}

fn select_rows(
    table: &WindowTable,
    y: &[i8],
    fold_of: &[usize],
    pick: impl Fn(usize) -> bool,
) -> (Array2<f64>, Vec<i8>) {
    let idx: Vec<usize> = (0..table.n_windows()).filter(|&i| pick(fold_of[i])).collect();
    let mut x = Array2::zeros((idx.len(), table.features.ncols()));
    let mut labels = Vec::with_capacity(idx.len());
    for (r, &i) in idx.iter().enumerate() {
        x.row_mut(r).assign(&table.features.row(i));
        labels.push(y[i]);
    }
    (x, labels)
}

fn accumulate_confusion(m: &mut [[u64; 3]; 3], y_true: &[i8], y_pred: &[i8]) {
    let part = confusion_matrix(y_true, y_pred);
    for (row, add) in m.iter_mut().zip(part) {
        for (cell, v) in row.iter_mut().zip(add) {
            *cell += v;
        }
    }
}

// ---------------------------------------------------------------------------
// channel selection
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct SelectionReport {
    /// Per-(band, lobe) correlation summary; absent when the channel set
    /// does not cover every lobe with at least two channels.
    pub correlation: Option<CorrelationTable>,
    /// Why the correlation stage was skipped, when it was.
    pub correlation_skipped: Option<String>,
    /// Band whose per-channel power fed the ranking.
    pub band: FrequencyBand,
    pub ranking: ChannelRanking,
    /// Top channels by emotion importance, best first.
    pub selected: Vec<ChannelId>,
    pub seed: u64,
    pub config_hash: String,
}

impl SelectionReport {
    /// Persist the correlation table (when present), the ranking, and the
    /// selected set under `tables_dir`.
    pub fn write_artifacts(&self, tables_dir: &Path) -> Result<()> {
        if let Some(table) = &self.correlation {
            let mut buf = Vec::new();
            write_provenance(&mut buf, &self.config_hash, self.seed).expect("vec write");
            table.write_tsv(&mut buf).expect("vec write");
            write_file(&tables_dir.join("correlation.tsv"), &buf)?;
        }
        let mut buf = Vec::new();
        write_provenance(&mut buf, &self.config_hash, self.seed).expect("vec write");
        writeln!(buf, "# ranking band: {}", self.band.name()).expect("vec write");
        self.ranking.write_tsv(&mut buf).expect("vec write");
        write_file(&tables_dir.join("channel_ranking.tsv"), &buf)?;

        let mut buf = Vec::new();
        write_provenance(&mut buf, &self.config_hash, self.seed).expect("vec write");
        for ch in &self.selected {
            writeln!(buf, "{ch}").expect("vec write");
        }
        write_file(&tables_dir.join("selected_channels.txt"), &buf)
    }
}

/// The channel-selection stage end-to-end: per-lobe correlation screening,
/// then the per-channel importance ranking on the dominant band's power,
/// then the top-n cut.
pub fn run_channel_selection(
    config: &PipelineConfig,
    recordings: &[crate::io::Recording],
) -> Result<SelectionReport> {
    let channels = config.selection_channel_ids()?;
    let table = extract_windows(recordings, config, &channels, config.train_step_s)?;
    let subjects = table.by_subject();

    let (correlation, correlation_skipped) =
        match build_correlation_table(table.schema(), &subjects) {
            Ok(t) => (Some(t), None),
            Err(Error::Domain(msg)) => {
                log::warn!("correlation stage skipped: {msg}");
                (None, Some(msg))
            }
            Err(e) => return Err(e),
        };

    let band = match &config.selection_band {
        Some(name) => band_from_name(name)?,
        None => match &correlation {
            Some(t) => t.dominant_band(),
            // Without lobe coverage there is nothing to vote with; the
            // highest band is the conventional fallback for affect work.
            None => FrequencyBand::Gamma,
        },
    };

    let matrices: Vec<SubjectMatrix> = subjects
        .iter()
        .map(|s| -> Result<SubjectMatrix> {
            Ok(SubjectMatrix {
                subject: s.subject,
                x: band_matrix(table.schema(), &s.features, band, &channels)?,
                ratings: s.ratings.clone(),
            })
        })
        .collect::<Result<_>>()?;

    let seed = derive_seed(config.seed, &[STAGE_SELECT]);
    let ranking =
        gini_channel_ranking(&channels, &matrices, config.selection_iterations, seed)?;
    let selected = select_top_channels(&ranking, config.n_selected.min(channels.len()))?;
    Ok(SelectionReport {
        correlation,
        correlation_skipped,
        band,
        ranking,
        selected,
        seed,
        config_hash: config.config_hash(),
    })
}

// ---------------------------------------------------------------------------
// feature-count sweep
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct FeatureSweepReport {
    pub points: Vec<crate::ensemble::SweepPoint>,
    pub chosen_n: usize,
    pub seed: u64,
    pub config_hash: String,
}

impl FeatureSweepReport {
    pub fn write_tsv(&self, mut w: impl Write) -> io::Result<()> {
        write_provenance(&mut w, &self.config_hash, self.seed)?;
        writeln!(
            w,
            "n_features\tvalence_acc\tarousal_acc\tdominance_acc\taverage\tchosen\tseed\tconfig"
        )?;
        for p in &self.points {
            writeln!(
                w,
                "{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{}\t{}\t{}",
                p.n_features,
                p.accuracy[0],
                p.accuracy[1],
                p.accuracy[2],
                p.average,
                u8::from(p.n_features == self.chosen_n),
                self.seed,
                self.config_hash
            )?;
        }
        Ok(())
    }
}

/// Sweep the kept-feature count over `config.feature_counts` on a single
/// held-out block fold and report per-dimension accuracy for each size.
pub fn run_feature_count_sweep(
    config: &PipelineConfig,
    recordings: &[crate::io::Recording],
) -> Result<FeatureSweepReport> {
    let channels = config.channel_ids()?;
    let train = extract_windows(recordings, config, &channels, config.train_step_s)?;
    let eval = extract_windows(recordings, config, &channels, config.eval_step_s)?;
    let seed = derive_seed(config.seed, &[STAGE_FEATURE_SWEEP]);
    let map = assign_trial_folds(&train.trial_keys(), config.folds, seed)?;
    let train_folds = folds_from_map(&train, &map)?;
    let eval_folds = folds_from_map(&eval, &map)?;
    check_block_integrity(&train, &train_folds)?;

    let keep_train: Vec<usize> = (0..train.n_windows()).filter(|&i| train_folds[i] != 0).collect();
    let keep_eval: Vec<usize> = (0..eval.n_windows()).filter(|&i| eval_folds[i] == 0).collect();
    let gather = |table: &WindowTable, idx: &[usize]| {
        let mut x = Array2::zeros((idx.len(), table.features.ncols()));
        let mut y = Vec::with_capacity(idx.len());
        for (r, &i) in idx.iter().enumerate() {
            x.row_mut(r).assign(&table.features.row(i));
            y.push(table.levels[i]);
        }
        (x, y)
    };
    let (x_train, y_train) = gather(&train, &keep_train);
    let (x_eval, y_eval) = gather(&eval, &keep_eval);

    let mut spec = EnsembleSpec::new(EnsembleMode::ExtraTrees);
    spec.n_trees = config.trees;
    let (points, chosen_n) = crate::ensemble::feature_count_sweep(
        spec,
        &x_train,
        &y_train,
        &x_eval,
        &y_eval,
        train.schema().names(),
        &config.feature_counts,
        seed,
    )?;
    Ok(FeatureSweepReport { points, chosen_n, seed, config_hash: config.config_hash() })
}

// ---------------------------------------------------------------------------
// final training and evaluation
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct TrainReport {
    /// Cross-validated metrics per affect dimension, (V, A, D).
    pub cv: [MetricsReport; 3],
    /// Pooled CV confusion per dimension, rows = true level + 1.
    pub confusions: [[[u64; 3]; 3]; 3],
    /// Share of evaluation windows with all three levels correct.
    pub triple_accuracy: f64,
    /// Final model fitted on all data.
    pub model: VadModelSet,
    /// Features kept per dimension, most important first.
    pub selected_features: [Vec<String>; 3],
    pub seed: u64,
    pub config_hash: String,
}

impl TrainReport {
    pub fn average_accuracy(&self) -> f64 {
        self.cv.iter().map(|m| m.accuracy).sum::<f64>() / 3.0
    }

    pub fn write_metrics_tsv(&self, mut w: impl Write) -> io::Result<()> {
        write_provenance(&mut w, &self.config_hash, self.seed)?;
        writeln!(
            w,
            "component\taccuracy\tsensitivity\tspecificity\tbalanced_accuracy\tf1\t\
             f1_standard\tn_windows\tseed\tconfig"
        )?;
        for component in COMPONENTS {
            let m = &self.cv[component.index()];
            writeln!(
                w,
                "{component}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{}\t{}\t{}",
                m.accuracy,
                m.sensitivity,
                m.specificity,
                m.balanced_accuracy,
                m.f1,
                m.f1_standard,
                m.n_samples,
                self.seed,
                self.config_hash
            )?;
        }
        writeln!(
            w,
            "all-three\t{:.4}\t\t\t\t\t\t{}\t{}\t{}",
            self.triple_accuracy, self.cv[0].n_samples, self.seed, self.config_hash
        )
    }

    pub fn write_artifacts(&self, paths: &RunPaths) -> Result<()> {
        let mut buf = Vec::new();
        self.write_metrics_tsv(&mut buf).expect("vec write");
        write_file(&paths.tables_dir.join("train_metrics.tsv"), &buf)?;
        for component in COMPONENTS {
            let mut buf = Vec::new();
            write_confusion_tsv(
                &mut buf,
                &self.confusions[component.index()],
                &self.config_hash,
                self.seed,
            )
            .expect("vec write");
            let name = format!("confusion_{}.tsv", component.to_string().to_lowercase());
            write_file(&paths.tables_dir.join(name), &buf)?;
        }
        save_model_set(&paths.models_dir.join("model.pvad"), &self.model)
    }
}

fn write_confusion_tsv(
    mut w: impl Write,
    m: &[[u64; 3]; 3],
    config_hash: &str,
    seed: u64,
) -> io::Result<()> {
    write_provenance(&mut w, config_hash, seed)?;
    writeln!(w, "true\\pred\t-1\t0\t+1\tseed\tconfig")?;
    for (k, row) in m.iter().enumerate() {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{seed}\t{config_hash}",
            k as i64 - 1,
            row[0],
            row[1],
            row[2]
        )?;
    }
    Ok(())
}

/// Fit one dimension: full fit for the importance ranking, then a refit on
/// the top `keep_n` features. Returns the refit model and the kept columns.
fn fit_component(
    x: &Array2<f64>,
    y: &[i8],
    names: &[String],
    spec: EnsembleSpec,
    keep_n: usize,
    seed: u64,
) -> Result<(TreeEnsemble, Vec<usize>)> {
    let full = TreeEnsemble::fit(spec, x, Target::Levels(y), names, derive_seed(seed, &[0]))?;
    let order = full.importance_ranking();
    let keep: Vec<usize> = order.into_iter().take(keep_n.min(names.len())).collect();
    let mut x_sub = Array2::zeros((x.nrows(), keep.len()));
    for (c, &i) in keep.iter().enumerate() {
        x_sub.column_mut(c).assign(&x.column(i));
    }
    let sub_names: Vec<String> = keep.iter().map(|&i| names[i].clone()).collect();
    let model = TreeEnsemble::fit(
        spec,
        &x_sub,
        Target::Levels(y),
        &sub_names,
        derive_seed(seed, &[1]),
    )?;
    Ok((model, keep))
}

fn predict_rows(
    model: &TreeEnsemble,
    table: &WindowTable,
    cols: &[usize],
    rows: &[usize],
) -> Result<Vec<i8>> {
    let mut buf = vec![0.0; cols.len()];
    let mut out = Vec::with_capacity(rows.len());
    for &i in rows {
        for (b, &c) in buf.iter_mut().zip(cols) {
            *b = table.features[(i, c)];
        }
        out.push(model.predict_level(&buf)?);
    }
    Ok(out)
}

/// Cross-validate and fit the final per-dimension classifiers: extra-trees
/// on the top `top_n_features` features each, with per-fold feature
/// selection refit from scratch so the evaluation never sees the selection.
pub fn train_final(
    config: &PipelineConfig,
    recordings: &[crate::io::Recording],
) -> Result<TrainReport> {
    let channels = config.channel_ids()?;
    let seed = derive_seed(config.seed, &[STAGE_TRAIN]);
    let train = extract_windows(recordings, config, &channels, config.train_step_s)?;
    log::info!("training table: {} windows, {}", train.n_windows(), train.schema());

    // In block mode the evaluation pool is a separate non-overlapping
    // window set; in window-random mode the training pool itself is split.
    let (eval, train_folds, eval_folds) = match config.split {
        SplitMode::Block => {
            let eval = extract_windows(recordings, config, &channels, config.eval_step_s)?;
            let map = assign_trial_folds(&train.trial_keys(), config.folds, seed)?;
            let train_folds = folds_from_map(&train, &map)?;
            let eval_folds = folds_from_map(&eval, &map)?;
            check_block_integrity(&train, &train_folds)?;
            (eval, train_folds, eval_folds)
        }
        SplitMode::WindowRandom => {
            let folds = assign_window_folds(train.n_windows(), config.folds, seed)?;
            (train.clone(), folds.clone(), folds)
        }
    };

    let mut spec = EnsembleSpec::new(EnsembleMode::ExtraTrees);
    spec.n_trees = config.trees;
    let names = train.schema().names();

    let mut confusions = [[[0u64; 3]; 3]; 3];
    let mut cv_preds: Vec<[i8; 3]> = vec![[0; 3]; eval.n_windows()];
    for component in COMPONENTS {
        let dim = component.index();
        let y_train = train.level_column(component);
        let y_eval = eval.level_column(component);
        for fold in 0..config.folds {
            let tr_rows: Vec<usize> =
                (0..train.n_windows()).filter(|&i| train_folds[i] != fold).collect();
            let ev_rows: Vec<usize> =
                (0..eval.n_windows()).filter(|&i| eval_folds[i] == fold).collect();
            if ev_rows.is_empty() {
                continue;
            }
            let mut x = Array2::zeros((tr_rows.len(), train.features.ncols()));
            let mut y = Vec::with_capacity(tr_rows.len());
            for (r, &i) in tr_rows.iter().enumerate() {
                x.row_mut(r).assign(&train.features.row(i));
                y.push(y_train[i]);
            }
            let (model, cols) = fit_component(
                &x,
                &y,
                names,
                spec,
                config.top_n_features,
                derive_seed(seed, &[fold as u64, dim as u64]),
            )?;
            let preds = predict_rows(&model, &eval, &cols, &ev_rows)?;
            let truth: Vec<i8> = ev_rows.iter().map(|&i| y_eval[i]).collect();
            accumulate_confusion(&mut confusions[dim], &truth, &preds);
            for (&i, &p) in ev_rows.iter().zip(&preds) {
                cv_preds[i][dim] = p;
            }
        }
    }
    let cv = [
        MetricsReport::from_confusion(&confusions[0]),
        MetricsReport::from_confusion(&confusions[1]),
        MetricsReport::from_confusion(&confusions[2]),
    ];
    let triple_hits = (0..eval.n_windows())
        .filter(|&i| cv_preds[i] == eval.levels[i].as_array())
        .count();
    let triple_accuracy =
        if eval.n_windows() == 0 { 0.0 } else { triple_hits as f64 / eval.n_windows() as f64 };

    // Final model on all training windows.
    let mut models = Vec::with_capacity(3);
    let mut selected_features: [Vec<String>; 3] = Default::default();
    for component in COMPONENTS {
        let dim = component.index();
        let y = train.level_column(component);
        let (model, cols) = fit_component(
            &train.features,
            &y,
            names,
            spec,
            config.top_n_features,
            derive_seed(seed, &[FINAL_FIT, dim as u64]),
        )?;
        selected_features[dim] = cols.iter().map(|&i| names[i].clone()).collect();
        models.push(model);
    }
    let mut models = models.into_iter();
    let model = VadModelSet {
        meta: ModelMeta {
            window_length_s: config.window_length_s,
            bandpass_lo_hz: config.bandpass_lo_hz,
            bandpass_hi_hz: config.bandpass_hi_hz,
            filter_mode: config.filter,
            channels,
            config_hash: config.config_hash(),
            build: crate::BUILD_ID.to_string(),
            seed: config.seed,
        },
        valence: models.next().expect("three models"),
        arousal: models.next().expect("three models"),
        dominance: models.next().expect("three models"),
    };
    Ok(TrainReport {
        cv,
        confusions,
        triple_accuracy,
        model,
        selected_features,
        seed,
        config_hash: config.config_hash(),
    })
}

/// Metrics of a trained model on a labeled dataset. Window geometry,
/// channels and filtering follow the model's metadata, not the config, so
/// the evaluation always matches what the model was trained to see.
#[derive(Clone, Debug)]
pub struct EvalReport {
    pub per_component: [MetricsReport; 3],
    pub confusions: [[[u64; 3]; 3]; 3],
    pub triple_accuracy: f64,
    pub n_windows: u64,
    pub model_config_hash: String,
}

impl EvalReport {
    pub fn average_accuracy(&self) -> f64 {
        self.per_component.iter().map(|m| m.accuracy).sum::<f64>() / 3.0
    }

    pub fn write_tsv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "# build {}", crate::BUILD_ID)?;
        writeln!(w, "# model config {}", self.model_config_hash)?;
        writeln!(
            w,
            "component\taccuracy\tsensitivity\tspecificity\tbalanced_accuracy\tf1\t\
             f1_standard\tn_windows\tconfig"
        )?;
        for component in COMPONENTS {
            let m = &self.per_component[component.index()];
            writeln!(
                w,
                "{component}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{}\t{}",
                m.accuracy,
                m.sensitivity,
                m.specificity,
                m.balanced_accuracy,
                m.f1,
                m.f1_standard,
                m.n_samples,
                self.model_config_hash
            )?;
        }
        writeln!(
            w,
            "all-three\t{:.4}\t\t\t\t\t\t{}\t{}",
            self.triple_accuracy, self.n_windows, self.model_config_hash
        )
    }
}

pub fn evaluate_model(
    model: &VadModelSet,
    recordings: &[crate::io::Recording],
    config: &PipelineConfig,
) -> Result<EvalReport> {
    let mut eval_config = config.clone();
    eval_config.window_length_s = model.meta.window_length_s;
    eval_config.filter = model.meta.filter_mode;
    let step = config.eval_step_s.min(model.meta.window_length_s);
    let table = extract_windows(recordings, &eval_config, &model.meta.channels, step)?;
    let schema = table.schema();
    let bindings = [
        model.valence.bind(schema)?,
        model.arousal.bind(schema)?,
        model.dominance.bind(schema)?,
    ];

    let mut confusions = [[[0u64; 3]; 3]; 3];
    let mut triple_hits = 0usize;
    let mut buf = Vec::new();
    let mut row_buf = Vec::new();
    for i in 0..table.n_windows() {
        row_buf.clear();
        row_buf.extend(table.features.row(i).iter());
        let truth = table.levels[i].as_array();
        let mut all_match = true;
        for component in COMPONENTS {
            let dim = component.index();
            bindings[dim].gather(&row_buf, &mut buf);
            let pred = model.component(component).predict_level(&buf)?;
            confusions[dim][(truth[dim] + 1) as usize][(pred + 1) as usize] += 1;
            all_match &= pred == truth[dim];
        }
        triple_hits += usize::from(all_match);
    }
    let n_windows = table.n_windows() as u64;
    Ok(EvalReport {
        per_component: [
            MetricsReport::from_confusion(&confusions[0]),
            MetricsReport::from_confusion(&confusions[1]),
            MetricsReport::from_confusion(&confusions[2]),
        ],
        confusions,
        triple_accuracy: if n_windows == 0 {
            0.0
        } else {
            triple_hits as f64 / n_windows as f64
        },
        n_windows,
        model_config_hash: model.meta.config_hash.clone(),
    })
}
