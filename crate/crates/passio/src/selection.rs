//! Channel selection: which electrodes carry affect information.
//!
//! Two instruments, applied in sequence:
//!
//! 1. A linear screen: per subject, each (lobe, band) block of band powers is
//!    projected onto its first principal component and the projection is
//!    correlated against the continuous valence/arousal/dominance ratings.
//!    Averaging |r| over subjects yields a band-by-lobe table whose row sums
//!    locate the most affect-coupled rhythm.
//! 2. A nonlinear ranking: regression forests predict each rating from the
//!    winning band's per-channel power; mean normalized impurity-decrease
//!    importance, averaged over subjects, repeated initializations, and the
//!    three rating dimensions, gives each channel a single importance index.
//!
//! Everything is seeded and aggregation orders are fixed, so identical inputs
//! reproduce identical tables.

use std::io::{self, Write};

use nalgebra::DMatrix;
use ndarray::Array2;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::emotion::VadRating;
use crate::ensemble::{EnsembleMode, EnsembleSpec, Target, TreeEnsemble};
use crate::error::{Error, Result};
use crate::features::FeatureSchema;
use crate::montage::{ChannelId, EmotionComponent, FrequencyBand, Lobe, BANDS, COMPONENTS, LOBES};
use crate::rng::derive_seed;

/// Two-sided significance level for per-subject correlation tests.
pub const SIGNIFICANCE_ALPHA: f64 = 0.05;

/// A correlation is treated as consistent when at least this share of
/// subjects reaches significance.
pub const CONSISTENCY_SHARE: f64 = 0.95;

// ---------------------------------------------------------------------------
// principal component projection
// ---------------------------------------------------------------------------

/// First principal component of a samples-by-channels block.
#[derive(Clone, Debug)]
pub struct PcaProjection {
    /// Unit loading vector over the block's channels.
    pub w: Vec<f64>,
    /// Column-centered samples projected onto `w`, one value per sample.
    pub z: Vec<f64>,
    /// Share of total variance captured by `w`, in [0, 1].
    pub explained: f64,
}

/// Compute the first principal component of `x` (samples x channels).
///
/// Columns are centered internally; no scaling is applied. The sign of `w`
/// is fixed so its largest-magnitude coefficient is positive, making results
/// reproducible where the eigenvector sign would otherwise be arbitrary.
pub fn first_principal_component(x: &Array2<f64>) -> Result<PcaProjection> {
    let (n, d) = x.dim();
    if d < 2 {
        return Err(Error::domain(format!("projection needs at least 2 channels, got {d}")));
    }
    if n < d + 1 {
        return Err(Error::domain(format!(
            "projection needs at least {} samples for {d} channels, got {n}",
            d + 1
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite value in projection input"));
    }

    let means: Vec<f64> = (0..d).map(|j| x.column(j).sum() / n as f64).collect();
    // Covariance of the centered block, symmetrized against rounding.
    let mut cov = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let mut s = 0.0;
            for i in 0..n {
                s += (x[(i, a)] - means[a]) * (x[(i, b)] - means[b]);
            }
            let v = s / (n as f64 - 1.0);
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }

    let eig = cov.symmetric_eigen();
    let total: f64 = eig.eigenvalues.iter().map(|&l| l.max(0.0)).sum();
    if total <= 0.0 {
        return Err(Error::degenerate("projection input has zero variance"));
    }
    let lead = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite eigenvalues"))
        .map(|(i, _)| i)
        .expect("at least one eigenvalue");

    let mut w: Vec<f64> = eig.eigenvectors.column(lead).iter().copied().collect();
    let norm: f64 = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in &mut w {
        *v /= norm;
    }
    // Sign convention: largest-magnitude coefficient positive.
    let peak = (0..d)
        .max_by(|&a, &b| w[a].abs().partial_cmp(&w[b].abs()).expect("finite loadings"))
        .expect("nonempty loading vector");
    if w[peak] < 0.0 {
        for v in &mut w {
            *v = -*v;
        }
    }

    let z: Vec<f64> = (0..n)
        .map(|i| (0..d).map(|j| (x[(i, j)] - means[j]) * w[j]).sum())
        .collect();
    let explained = eig.eigenvalues[lead].max(0.0) / total;
    Ok(PcaProjection { w, z, explained })
}

// ---------------------------------------------------------------------------
// correlation
// ---------------------------------------------------------------------------

/// Pearson correlation coefficient of two equal-length sequences.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::contract("correlation inputs differ in length"));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::domain(format!("correlation needs at least 3 samples, got {n}")));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::degenerate("zero-variance sequence in correlation"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Two-sided p-value for a Pearson coefficient under the null of no
/// correlation: t = r sqrt((n-2)/(1-r^2)) against Student's t with n-2
/// degrees of freedom.
pub fn pearson_p_value(r: f64, n: usize) -> f64 {
    assert!(n >= 3, "p-value needs at least 3 samples");
    let r2 = (r * r).min(1.0);
    if r2 >= 1.0 {
        return 0.0;
    }
    let t = r.abs() * ((n as f64 - 2.0) / (1.0 - r2)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n as f64 - 2.0).expect("valid t distribution");
    (2.0 * (1.0 - dist.cdf(t))).clamp(0.0, 1.0)
}

/// One subject's projected sequence and rating sequence.
pub struct SubjectSeries<'a> {
    pub subject: u32,
    pub z: &'a [f64],
    pub y: &'a [f64],
}

/// Per-subject correlation outcome inside a [`PearsonSummary`]. `r` and `p`
/// are absent when the subject was excluded for zero variance.
#[derive(Clone, Copy, Debug)]
pub struct SubjectCorrelation {
    pub subject: u32,
    pub r: Option<f64>,
    pub p: Option<f64>,
}

/// Mean absolute correlation over subjects plus the per-subject detail
/// needed for significance counting.
#[derive(Clone, Debug)]
pub struct PearsonSummary {
    pub mean_abs_r: f64,
    pub per_subject: Vec<SubjectCorrelation>,
    pub n_excluded: usize,
    /// Subjects with p below [`SIGNIFICANCE_ALPHA`].
    pub n_significant: usize,
}

impl PearsonSummary {
    /// True when at least `ceil(CONSISTENCY_SHARE * subjects)` subjects are
    /// individually significant. Excluded subjects count against the quota.
    pub fn consistently_significant(&self) -> bool {
        let needed = (CONSISTENCY_SHARE * self.per_subject.len() as f64).ceil() as usize;
        self.n_significant >= needed
    }
}

/// Mean of |pearson(z_s, y_s)| over subjects. Zero-variance subjects are
/// excluded from the mean but stay listed in the summary; any other
/// per-subject failure aborts.
pub fn mean_abs_pearson(series: &[SubjectSeries<'_>]) -> Result<PearsonSummary> {
    if series.is_empty() {
        return Err(Error::contract("correlation summary needs at least one subject"));
    }
    let mut per_subject = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    let mut included = 0usize;
    let mut n_significant = 0usize;
    for s in series {
        match pearson(s.z, s.y) {
            Ok(r) => {
                let p = pearson_p_value(r, s.z.len());
                if p < SIGNIFICANCE_ALPHA {
                    n_significant += 1;
                }
                sum += r.abs();
                included += 1;
                per_subject.push(SubjectCorrelation { subject: s.subject, r: Some(r), p: Some(p) });
            }
            Err(Error::Degenerate(_)) => {
                per_subject.push(SubjectCorrelation { subject: s.subject, r: None, p: None });
            }
            Err(e) => return Err(e),
        }
    }
    if included == 0 {
        return Err(Error::degenerate("every subject had zero variance"));
    }
    Ok(PearsonSummary {
        mean_abs_r: sum / included as f64,
        n_excluded: per_subject.len() - included,
        per_subject,
        n_significant,
    })
}

// ---------------------------------------------------------------------------
// correlation table (band x lobe x component)
// ---------------------------------------------------------------------------

/// One aggregated cell of the correlation table.
#[derive(Clone, Copy, Debug, Default)]
pub struct CorrelationCell {
    /// Mean absolute Pearson coefficient over included subjects.
    pub mean_abs_r: f64,
    pub n_significant: usize,
    pub n_subjects: usize,
    pub n_excluded: usize,
}

impl CorrelationCell {
    pub fn significant_fraction(&self) -> f64 {
        self.n_significant as f64 / self.n_subjects as f64
    }

    pub fn consistently_significant(&self) -> bool {
        let needed = (CONSISTENCY_SHARE * self.n_subjects as f64).ceil() as usize;
        self.n_significant >= needed
    }
}

/// Windowed features and aligned ratings for one subject.
pub struct SubjectWindows {
    pub subject: u32,
    /// Rows are windows; columns follow the shared feature schema.
    pub features: Array2<f64>,
    /// One rating triple per window.
    pub ratings: Vec<VadRating>,
}

/// Mean absolute correlation between each (lobe, band) first principal
/// component and each rating dimension, aggregated over subjects.
#[derive(Clone, Debug)]
pub struct CorrelationTable {
    /// Indexed `[band][lobe][component]`.
    cells: Vec<CorrelationCell>,
    n_subjects: usize,
}

impl CorrelationTable {
    fn slot(band: FrequencyBand, lobe: Lobe, comp: EmotionComponent) -> usize {
        (band.index() * LOBES.len() + lobe.index()) * COMPONENTS.len() + comp.index()
    }

    pub fn cell(&self, band: FrequencyBand, lobe: Lobe, comp: EmotionComponent) -> &CorrelationCell {
        &self.cells[Self::slot(band, lobe, comp)]
    }

    pub fn r(&self, band: FrequencyBand, lobe: Lobe, comp: EmotionComponent) -> f64 {
        self.cell(band, lobe, comp).mean_abs_r
    }

    /// Sum of the three component coefficients for one (band, lobe) row.
    pub fn sum(&self, band: FrequencyBand, lobe: Lobe) -> f64 {
        COMPONENTS.iter().map(|&c| self.r(band, lobe, c)).sum()
    }

    pub fn n_subjects(&self) -> usize {
        self.n_subjects
    }

    /// Band whose component sum is highest for this lobe; ties resolve to
    /// the lower band.
    pub fn best_band_for_lobe(&self, lobe: Lobe) -> FrequencyBand {
        let mut best = BANDS[0];
        for &band in &BANDS[1..] {
            if self.sum(band, lobe) > self.sum(best, lobe) {
                best = band;
            }
        }
        best
    }

    /// (band, lobe) pair with the highest coefficient for one component;
    /// ties resolve to the lower band, then the lower lobe.
    pub fn best_pair_for_component(&self, comp: EmotionComponent) -> (FrequencyBand, Lobe) {
        let mut best = (BANDS[0], LOBES[0]);
        for &band in &BANDS {
            for &lobe in &LOBES {
                if self.r(band, lobe, comp) > self.r(best.0, best.1, comp) {
                    best = (band, lobe);
                }
            }
        }
        best
    }

    /// Band winning `best_band_for_lobe` in the most lobes; ties resolve to
    /// the lower band. This is the band the channel ranking runs on.
    pub fn dominant_band(&self) -> FrequencyBand {
        let mut wins = [0usize; BANDS.len()];
        for &lobe in &LOBES {
            wins[self.best_band_for_lobe(lobe).index()] += 1;
        }
        let mut best = 0usize;
        for (i, &w) in wins.iter().enumerate() {
            if w > wins[best] {
                best = i;
            }
        }
        BANDS[best]
    }

    /// Tab-separated export: one row per (band, lobe), coefficient columns
    /// labeled per component, the component sum, and per-component
    /// significant-subject counts.
    pub fn write_tsv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "# correlation table: mean |pearson r| over {} subjects", self.n_subjects)?;
        writeln!(
            w,
            "# *_sig = subjects with p < {SIGNIFICANCE_ALPHA}; consistent when >= \
             ceil({CONSISTENCY_SHARE} * subjects)"
        )?;
        write!(w, "band\tlobe")?;
        for comp in COMPONENTS {
            write!(w, "\t{comp}_r")?;
        }
        write!(w, "\tsum")?;
        for comp in COMPONENTS {
            write!(w, "\t{comp}_sig")?;
        }
        writeln!(w)?;
        for band in BANDS {
            for lobe in LOBES {
                write!(w, "{}\t{}", band.name(), lobe.name())?;
                for comp in COMPONENTS {
                    write!(w, "\t{:.6}", self.r(band, lobe, comp))?;
                }
                write!(w, "\t{:.6}", self.sum(band, lobe))?;
                for comp in COMPONENTS {
                    write!(w, "\t{}", self.cell(band, lobe, comp).n_significant)?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }
}

/// Columns of `schema` holding one band's power for the given channels, as a
/// windows-by-channels matrix.
pub fn band_matrix(
    schema: &FeatureSchema,
    features: &Array2<f64>,
    band: FrequencyBand,
    channels: &[ChannelId],
) -> Result<Array2<f64>> {
    if features.ncols() != schema.len() {
        return Err(Error::contract(format!(
            "feature matrix has {} columns, schema expects {}",
            features.ncols(),
            schema.len()
        )));
    }
    let mut cols = Vec::with_capacity(channels.len());
    for ch in channels {
        let name = format!("{}_{}", band.name(), ch);
        let idx = schema
            .position(&name)
            .ok_or_else(|| Error::contract(format!("schema lacks feature `{name}`")))?;
        cols.push(idx);
    }
    Ok(Array2::from_shape_fn((features.nrows(), cols.len()), |(r, c)| {
        features[(r, cols[c])]
    }))
}

/// Build the full band-by-lobe correlation table from per-subject windowed
/// features. Every lobe must have at least two channels in the schema, and
/// every subject one rating per window.
pub fn build_correlation_table(
    schema: &FeatureSchema,
    subjects: &[SubjectWindows],
) -> Result<CorrelationTable> {
    if subjects.is_empty() {
        return Err(Error::contract("correlation table needs at least one subject"));
    }
    for s in subjects {
        if s.ratings.len() != s.features.nrows() {
            return Err(Error::contract(format!(
                "subject {}: {} windows but {} ratings",
                s.subject,
                s.features.nrows(),
                s.ratings.len()
            )));
        }
    }
    let mut lobe_channels = Vec::with_capacity(LOBES.len());
    for lobe in LOBES {
        let present: Vec<ChannelId> = lobe
            .channels()
            .into_iter()
            .filter(|c| schema.channels().contains(c))
            .collect();
        if present.len() < 2 {
            return Err(Error::domain(format!(
                "lobe {lobe} has {} channel(s) in the schema; projection needs 2",
                present.len()
            )));
        }
        lobe_channels.push(present);
    }

    let mut cells =
        vec![CorrelationCell::default(); BANDS.len() * LOBES.len() * COMPONENTS.len()];
    for band in BANDS {
        for lobe in LOBES {
            // Per-subject projections for this block, then one summary per
            // component over the shared z sequences.
            let mut projections: Vec<Option<(u32, Vec<f64>)>> = Vec::with_capacity(subjects.len());
            for s in subjects {
                let block = band_matrix(schema, &s.features, band, &lobe_channels[lobe.index()])?;
                match first_principal_component(&block) {
                    Ok(p) => projections.push(Some((s.subject, p.z))),
                    // A flat block (all-zero band) excludes the subject from
                    // this cell rather than failing the table.
                    Err(Error::Degenerate(_)) => projections.push(None),
                    Err(e) => return Err(e),
                }
            }
            for comp in COMPONENTS {
                let mut series = Vec::with_capacity(subjects.len());
                let mut y_store = Vec::with_capacity(subjects.len());
                for s in subjects {
                    y_store.push(
                        s.ratings.iter().map(|r| r.as_array()[comp.index()]).collect::<Vec<_>>(),
                    );
                }
                let mut flat_excluded = 0usize;
                for (i, proj) in projections.iter().enumerate() {
                    match proj {
                        Some((subject, z)) => {
                            series.push(SubjectSeries { subject: *subject, z, y: &y_store[i] })
                        }
                        None => flat_excluded += 1,
                    }
                }
                if series.is_empty() {
                    return Err(Error::degenerate(format!(
                        "no subject has usable {} power in lobe {lobe}",
                        band.name()
                    )));
                }
                let summary = mean_abs_pearson(&series)?;
                cells[CorrelationTable::slot(band, lobe, comp)] = CorrelationCell {
                    mean_abs_r: summary.mean_abs_r,
                    n_significant: summary.n_significant,
                    n_subjects: subjects.len(),
                    n_excluded: summary.n_excluded + flat_excluded,
                };
            }
        }
    }
    Ok(CorrelationTable { cells, n_subjects: subjects.len() })
}

// ---------------------------------------------------------------------------
// forest-importance channel ranking
// ---------------------------------------------------------------------------

/// Single-band per-channel power and aligned ratings for one subject.
pub struct SubjectMatrix {
    pub subject: u32,
    /// Rows are windows; columns are channels in ranking order.
    pub x: Array2<f64>,
    pub ratings: Vec<VadRating>,
}

/// Importance of every channel for predicting each rating dimension, plus
/// the averaged index used for selection.
#[derive(Clone, Debug)]
pub struct ChannelRanking {
    channels: Vec<ChannelId>,
    /// Indexed `[channel][component]` in (valence, arousal, dominance) order.
    gi: Vec<[f64; 3]>,
    eii: Vec<f64>,
}

impl ChannelRanking {
    /// Assemble from per-channel importances; the index is the mean of the
    /// three component importances.
    pub fn from_parts(channels: Vec<ChannelId>, gi: Vec<[f64; 3]>) -> Result<Self> {
        if channels.len() != gi.len() {
            return Err(Error::contract("one importance row per channel required"));
        }
        if channels.is_empty() {
            return Err(Error::contract("ranking needs at least one channel"));
        }
        for (i, a) in channels.iter().enumerate() {
            if channels[i + 1..].contains(a) {
                return Err(Error::contract(format!("duplicate channel {a} in ranking")));
            }
        }
        if gi.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::contract("importances must be finite and non-negative"));
        }
        let eii = gi.iter().map(|row| row.iter().sum::<f64>() / 3.0).collect();
        Ok(ChannelRanking { channels, gi, eii })
    }

    pub fn channels(&self) -> &[ChannelId] {
        &self.channels
    }

    pub fn gi(&self, channel: usize, comp: EmotionComponent) -> f64 {
        self.gi[channel][comp.index()]
    }

    /// Mean importance across the three components, aligned with
    /// [`Self::channels`].
    pub fn eii(&self) -> &[f64] {
        &self.eii
    }

    /// Channel indices sorted by index descending; ties fall back to the
    /// montage's canonical order.
    fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.channels.len()).collect();
        idx.sort_by(|&a, &b| {
            self.eii[b]
                .partial_cmp(&self.eii[a])
                .expect("finite index values")
                .then(self.channels[a].cmp(&self.channels[b]))
        });
        idx
    }

    /// All channels with their index, best first.
    pub fn ordered(&self) -> Vec<(ChannelId, f64)> {
        self.order().into_iter().map(|i| (self.channels[i], self.eii[i])).collect()
    }

    /// Tab-separated export ordered best-first; importance columns are
    /// labeled per component.
    pub fn write_tsv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "# channel ranking by mean forest importance across components")?;
        writeln!(w, "channel\tarousal_gi\tvalence_gi\tdominance_gi\teii")?;
        for i in self.order() {
            writeln!(
                w,
                "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
                self.channels[i],
                self.gi(i, EmotionComponent::Arousal),
                self.gi(i, EmotionComponent::Valence),
                self.gi(i, EmotionComponent::Dominance),
                self.eii[i]
            )?;
        }
        Ok(())
    }
}

/// First `k` channels of the ranking, best first.
pub fn select_top_channels(ranking: &ChannelRanking, k: usize) -> Result<Vec<ChannelId>> {
    if k > ranking.channels().len() {
        return Err(Error::contract(format!(
            "asked for {k} channels, ranking holds {}",
            ranking.channels().len()
        )));
    }
    Ok(ranking.ordered().into_iter().take(k).map(|(c, _)| c).collect())
}

/// Rank channels by regression-forest importance.
///
/// For every rating dimension, subject, and repetition, a forest regressor
/// (100 trees, a third of the channels per split, leaves of 5) is fitted on
/// the subject's per-channel power; per-fit importances are averaged in a
/// fixed order. Repetition seeds derive from `(seed, subject position,
/// repetition)`, so the three component fits of one repetition share a seed
/// and the result is invariant to component order.
pub fn gini_channel_ranking(
    channels: &[ChannelId],
    subjects: &[SubjectMatrix],
    iterations: usize,
    seed: u64,
) -> Result<ChannelRanking> {
    if iterations == 0 {
        return Err(Error::contract("ranking needs at least one repetition"));
    }
    if channels.len() < 2 {
        return Err(Error::contract("ranking needs at least two channels"));
    }
    if subjects.is_empty() {
        return Err(Error::contract("ranking needs at least one subject"));
    }
    for s in subjects {
        if s.x.ncols() != channels.len() {
            return Err(Error::contract(format!(
                "subject {}: {} columns but {} channels",
                s.subject,
                s.x.ncols(),
                channels.len()
            )));
        }
        if s.ratings.len() != s.x.nrows() {
            return Err(Error::contract(format!(
                "subject {}: {} windows but {} ratings",
                s.subject,
                s.x.nrows(),
                s.ratings.len()
            )));
        }
        if s.x.nrows() < channels.len() {
            return Err(Error::domain(format!(
                "subject {}: {} windows is fewer than {} channels",
                s.subject,
                s.x.nrows(),
                channels.len()
            )));
        }
    }

    let names: Vec<String> = channels.iter().map(|c| c.name().to_string()).collect();
    let spec = EnsembleSpec::new(EnsembleMode::RfRegressor);
    let mut gi = vec![[0.0f64; 3]; channels.len()];
    for comp in COMPONENTS {
        for (s_idx, subject) in subjects.iter().enumerate() {
            let y: Vec<f64> =
                subject.ratings.iter().map(|r| r.as_array()[comp.index()]).collect();
            for iter in 0..iterations {
                let fit_seed = derive_seed(seed, &[s_idx as u64, iter as u64]);
                let model =
                    TreeEnsemble::fit(spec, &subject.x, Target::Continuous(&y), &names, fit_seed)?;
                for (row, imp) in gi.iter_mut().zip(model.importances()) {
                    row[comp.index()] += imp;
                }
            }
        }
    }
    let denom = (subjects.len() * iterations) as f64;
    for row in &mut gi {
        for v in row.iter_mut() {
            *v /= denom;
        }
    }
    ChannelRanking::from_parts(channels.to_vec(), gi)
}
