//! Tree ensembles for the three affect dimensions: bagged forests with
//! exact split search (classification and regression flavors) and
//! extra-randomized forests drawing one uniform threshold per candidate
//! feature.
//!
//! Every ensemble is deterministic for a given seed: tree seeds derive from
//! the ensemble seed by index, and parallel fits collect in tree order.

mod metrics;
mod store;
mod tree;

pub use metrics::{confusion_matrix, BinaryCounts, MetricsReport};
pub use store::{load_model_set, save_model_set, ModelMeta, VadModelSet};
pub use tree::{DecisionTree, Node, N_CLASSES};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emotion::VadLevel;
use crate::error::{Error, Result};
use crate::features::FeatureSchema;
use crate::montage::COMPONENTS;
use crate::rng::{derive_seed, rng_from_seed};
use tree::{fit_tree, FitTarget, TreeParams};

// ---------------------------------------------------------------------------
// Specification

/// Which ensemble algorithm to fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleMode {
    /// Bagging + exact search, variance criterion, continuous output.
    RfRegressor,
    /// Bagging + exact search, Gini criterion, three-level output.
    RfClassifier,
    /// No bagging, one random threshold per candidate, Gini criterion.
    ExtraTrees,
}

impl EnsembleMode {
    pub fn is_classifier(self) -> bool {
        !matches!(self, EnsembleMode::RfRegressor)
    }

    pub fn name(self) -> &'static str {
        match self {
            EnsembleMode::RfRegressor => "rf-regressor",
            EnsembleMode::RfClassifier => "rf-classifier",
            EnsembleMode::ExtraTrees => "extra-trees",
        }
    }
}

/// How many candidate features each split considers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitCandidates {
    /// `ceil(sqrt(d))`, the classification default.
    Sqrt,
    /// `ceil(d / 3)`, the regression default.
    Third,
    Fixed(usize),
}

impl SplitCandidates {
    pub fn resolve(self, d: usize) -> usize {
        let m = match self {
            SplitCandidates::Sqrt => (d as f64).sqrt().ceil() as usize,
            SplitCandidates::Third => (d as f64 / 3.0).ceil() as usize,
            SplitCandidates::Fixed(m) => m,
        };
        m.clamp(1, d.max(1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub mode: EnsembleMode,
    pub n_trees: usize,
    pub min_leaf: usize,
    pub split_candidates: SplitCandidates,
}

impl EnsembleSpec {
    /// Defaults per mode: 100 trees, min leaf 1 (classification) or 5
    /// (regression), sqrt or third candidate rule respectively.
    pub fn new(mode: EnsembleMode) -> Self {
        let (min_leaf, split_candidates) = if mode.is_classifier() {
            (1, SplitCandidates::Sqrt)
        } else {
            (5, SplitCandidates::Third)
        };
        EnsembleSpec { mode, n_trees: 100, min_leaf, split_candidates }
    }

    fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::config("ensemble needs at least one tree"));
        }
        if self.min_leaf == 0 {
            return Err(Error::config("minimum leaf size must be positive"));
        }
        Ok(())
    }
}

/// Training target: discrete single-dimension levels in `{-1, 0, +1}` for
/// classifiers, continuous values for regressors.
#[derive(Clone, Copy)]
pub enum Target<'a> {
    Levels(&'a [i8]),
    Continuous(&'a [f64]),
}

// ---------------------------------------------------------------------------
// Ensemble

#[derive(Clone, Debug)]
pub struct TreeEnsemble {
    spec: EnsembleSpec,
    feature_names: Vec<String>,
    trees: Vec<DecisionTree>,
    importances: Vec<f64>,
    seed: u64,
}

impl TreeEnsemble {
    /// Fit `spec.n_trees` trees on `x` (rows are samples, columns follow
    /// `feature_names`). Tree `i` uses the RNG stream derived from
    /// `(seed, i)`, so results do not depend on thread scheduling.
    pub fn fit(
        spec: EnsembleSpec,
        x: &Array2<f64>,
        target: Target<'_>,
        feature_names: &[String],
        seed: u64,
    ) -> Result<Self> {
        spec.validate()?;
        let (n, d) = x.dim();
        if d != feature_names.len() {
            return Err(Error::contract(format!(
                "feature matrix has {d} columns but {} names were given",
                feature_names.len()
            )));
        }
        if n == 0 || d == 0 {
            return Err(Error::training("empty training matrix"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::training("non-finite value in training features"));
        }

        // Classifier targets become class indices 0..3 (level + 1).
        let class_y: Vec<u8>;
        let fit_target = match target {
            Target::Levels(levels) => {
                if levels.len() != n {
                    return Err(Error::contract("label count differs from sample count"));
                }
                if !spec.mode.is_classifier() {
                    return Err(Error::contract("regressor fitted with discrete levels"));
                }
                if levels.iter().any(|l| !(-1..=1).contains(l)) {
                    return Err(Error::contract("level label outside {-1, 0, +1}"));
                }
                let mut seen = [false; N_CLASSES];
                class_y = levels
                    .iter()
                    .map(|&l| {
                        let k = (l + 1) as u8;
                        seen[k as usize] = true;
                        k
                    })
                    .collect();
                if seen.iter().filter(|&&s| s).count() < 2 {
                    return Err(Error::training(
                        "training labels contain a single class; nothing to separate",
                    ));
                }
                FitTarget::Classes(&class_y)
            }
            Target::Continuous(values) => {
                if values.len() != n {
                    return Err(Error::contract("target count differs from sample count"));
                }
                if spec.mode.is_classifier() {
                    return Err(Error::contract("classifier fitted with continuous target"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::training("non-finite value in training target"));
                }
                FitTarget::Values(values)
            }
        };

        let params = TreeParams {
            mtry: spec.split_candidates.resolve(d),
            min_leaf: spec.min_leaf,
            random_thresholds: matches!(spec.mode, EnsembleMode::ExtraTrees),
            bootstrap: !matches!(spec.mode, EnsembleMode::ExtraTrees),
        };

        let fits: Vec<(DecisionTree, Vec<f64>)> = (0..spec.n_trees)
            .into_par_iter()
            .map(|i| {
                let mut rng = rng_from_seed(derive_seed(seed, &[i as u64]));
                let mut raw = vec![0.0; d];
                let tree = fit_tree(x, fit_target, &params, &mut rng, &mut raw);
                (tree, raw)
            })
            .collect();

        // Importance: normalize each tree's impurity decreases to sum one,
        // then average over trees that split at least once.
        let mut importances = vec![0.0; d];
        let mut contributing = 0usize;
        for (_, raw) in &fits {
            let total: f64 = raw.iter().sum();
            if total > 0.0 {
                contributing += 1;
                for (acc, r) in importances.iter_mut().zip(raw) {
                    *acc += r / total;
                }
            }
        }
        if contributing == 0 {
            return Err(Error::degenerate(
                "no tree found a split; features carry no usable structure",
            ));
        }
        for v in &mut importances {
            *v /= contributing as f64;
        }

        Ok(TreeEnsemble {
            spec,
            feature_names: feature_names.to_vec(),
            trees: fits.into_iter().map(|(t, _)| t).collect(),
            importances,
            seed,
        })
    }

    pub fn spec(&self) -> &EnsembleSpec {
        &self.spec
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    /// Mean normalized impurity-decrease importance per feature; sums to 1.
    pub fn importances(&self) -> &[f64] {
        &self.importances
    }

    /// Feature indices ordered by importance, descending; ties break toward
    /// the lower index.
    pub fn importance_ranking(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.importances.len()).collect();
        order.sort_by(|&a, &b| {
            self.importances[b]
                .partial_cmp(&self.importances[a])
                .expect("finite importances")
                .then(a.cmp(&b))
        });
        order
    }

    /// Mean class probabilities over trees.
    pub fn predict_proba(&self, row: &[f64]) -> Result<[f64; N_CLASSES]> {
        self.check_row(row)?;
        if !self.spec.mode.is_classifier() {
            return Err(Error::contract("probability output requires a classifier"));
        }
        let mut acc = [0.0; N_CLASSES];
        for tree in &self.trees {
            let p = tree.predict_probs(row);
            for (a, v) in acc.iter_mut().zip(p) {
                *a += v;
            }
        }
        for a in &mut acc {
            *a /= self.trees.len() as f64;
        }
        Ok(acc)
    }

    /// Level with the highest mean probability; ties resolve to the lowest
    /// level.
    pub fn predict_level(&self, row: &[f64]) -> Result<i8> {
        Ok(level_from_probs(&self.predict_proba(row)?))
    }

    /// Mean regression output over trees.
    pub fn predict_value(&self, row: &[f64]) -> Result<f64> {
        self.check_row(row)?;
        if self.spec.mode.is_classifier() {
            return Err(Error::contract("value output requires a regressor"));
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict_value(row)).sum();
        Ok(sum / self.trees.len() as f64)
    }

    pub fn evaluate(&self, x: &Array2<f64>, y_true: &[i8]) -> Result<MetricsReport> {
        if x.nrows() != y_true.len() {
            return Err(Error::contract("label count differs from sample count"));
        }
        let mut y_pred = Vec::with_capacity(y_true.len());
        let mut row_buf = vec![0.0; self.n_features()];
        for row in x.rows() {
            row_buf.clear();
            row_buf.extend(row.iter().copied());
            y_pred.push(self.predict_level(&row_buf)?);
        }
        Ok(MetricsReport::from_labels(y_true, &y_pred))
    }

    /// Map this model's feature order onto another schema so feature vectors
    /// produced under `schema` can be fed to the model.
    pub fn bind(&self, schema: &FeatureSchema) -> Result<FeatureBinding> {
        let mut indices = Vec::with_capacity(self.feature_names.len());
        let mut missing = Vec::new();
        for name in &self.feature_names {
            match schema.position(name) {
                Some(i) => indices.push(i),
                None => missing.push(name.clone()),
            }
        }
        if !missing.is_empty() {
            return Err(Error::contract(format!(
                "feature schema lacks model inputs: {}",
                missing.join(", ")
            )));
        }
        Ok(FeatureBinding { indices })
    }

    fn check_row(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.n_features() {
            return Err(Error::contract(format!(
                "expected {} features, got {}",
                self.n_features(),
                row.len()
            )));
        }
        Ok(())
    }
}

/// Precomputed gather indices from a feature schema into model input order.
#[derive(Clone, Debug)]
pub struct FeatureBinding {
    indices: Vec<usize>,
}

impl FeatureBinding {
    pub fn gather(&self, values: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.indices.iter().map(|&i| values[i]));
    }
}

// ---------------------------------------------------------------------------
// Feature-count sweep

/// Accuracy of refits restricted to the top-`n_features` inputs, one entry
/// per tried size.
#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub n_features: usize,
    /// Accuracy per dimension, in valence/arousal/dominance order.
    pub accuracy: [f64; 3],
    pub average: f64,
}

/// Class index with the highest probability mapped back to a level; ties
/// resolve to the lowest level.
pub fn level_from_probs(probs: &[f64; N_CLASSES]) -> i8 {
    let mut best = 0usize;
    for k in 1..N_CLASSES {
        if probs[k] > probs[best] {
            best = k;
        }
    }
    best as i8 - 1
}

/// For each affect dimension: fit on all features, rank by importance,
/// refit on the top-`n` slice for each candidate `n`, and score on the
/// held-out split. Returns the per-size accuracies and the best size
/// (highest average accuracy; ties go to the smaller model).
#[allow(clippy::too_many_arguments)]
pub fn feature_count_sweep(
    spec: EnsembleSpec,
    x_train: &Array2<f64>,
    y_train: &[VadLevel],
    x_eval: &Array2<f64>,
    y_eval: &[VadLevel],
    feature_names: &[String],
    sizes: &[usize],
    seed: u64,
) -> Result<(Vec<SweepPoint>, usize)> {
    if sizes.is_empty() {
        return Err(Error::contract("sweep needs at least one candidate size"));
    }
    let d = feature_names.len();
    if sizes.iter().any(|&s| s == 0 || s > d) {
        return Err(Error::contract(format!("sweep sizes must lie in 1..={d}")));
    }

    let mut points: Vec<SweepPoint> = sizes
        .iter()
        .map(|&s| SweepPoint { n_features: s, accuracy: [0.0; 3], average: 0.0 })
        .collect();

    for (dim, _) in COMPONENTS.iter().enumerate() {
        let levels_train: Vec<i8> = y_train.iter().map(|t| t.as_array()[dim]).collect();
        let levels_eval: Vec<i8> = y_eval.iter().map(|t| t.as_array()[dim]).collect();
        let full = TreeEnsemble::fit(
            spec,
            x_train,
            Target::Levels(&levels_train),
            feature_names,
            derive_seed(seed, &[dim as u64]),
        )?;
        let ranking = full.importance_ranking();

        for point in points.iter_mut() {
            let keep = &ranking[..point.n_features];
            let sub_names: Vec<String> =
                keep.iter().map(|&i| feature_names[i].clone()).collect();
            let gather = |src: &Array2<f64>| {
                Array2::from_shape_fn((src.nrows(), keep.len()), |(r, c)| src[(r, keep[c])])
            };
            let sub_train = gather(x_train);
            let sub_eval = gather(x_eval);
            let model = TreeEnsemble::fit(
                spec,
                &sub_train,
                Target::Levels(&levels_train),
                &sub_names,
                derive_seed(seed, &[dim as u64, point.n_features as u64]),
            )?;
            let report = model.evaluate(&sub_eval, &levels_eval)?;
            point.accuracy[dim] = report.accuracy;
        }
    }

    for point in points.iter_mut() {
        point.average = point.accuracy.iter().sum::<f64>() / 3.0;
    }
    let mut best = 0usize;
    for (i, point) in points.iter().enumerate() {
        if point.average > points[best].average
            || (point.average == points[best].average
                && point.n_features < points[best].n_features)
        {
            best = i;
        }
    }
    let best_size = points[best].n_features;
    Ok((points, best_size))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("f{i}")).collect()
    }

    /// Three well-separated Gaussian-ish blobs along two planted features.
    fn blobs(n: usize, d: usize, seed: u64) -> (Array2<f64>, Vec<i8>) {
        let mut rng = rng_from_seed(seed);
        let mut x = Array2::zeros((n, d));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let cls = (i % 3) as i8 - 1;
            for j in 0..d {
                x[(i, j)] = rng.gen::<f64>();
            }
            x[(i, 0)] += 3.0 * cls as f64;
            x[(i, 1)] -= 2.0 * cls as f64;
            y.push(cls);
        }
        (x, y)
    }

    #[test]
    fn separable_data_is_learned_exactly() {
        let (x, y) = blobs(90, 5, 11);
        for mode in [EnsembleMode::RfClassifier, EnsembleMode::ExtraTrees] {
            let model =
                TreeEnsemble::fit(EnsembleSpec::new(mode), &x, Target::Levels(&y), &names(5), 3)
                    .unwrap();
            let report = model.evaluate(&x, &y).unwrap();
            // Extra-randomized trees fit the full sample, so training
            // accuracy is exactly 1; bagged forests come extremely close.
            match mode {
                EnsembleMode::ExtraTrees => assert_eq!(report.accuracy, 1.0),
                _ => assert!(report.accuracy > 0.97, "{}", report.accuracy),
            }
        }
    }

    #[test]
    fn single_class_labels_are_rejected() {
        let (x, _) = blobs(30, 4, 1);
        let y = vec![1i8; 30];
        let err = TreeEnsemble::fit(
            EnsembleSpec::new(EnsembleMode::RfClassifier),
            &x,
            Target::Levels(&y),
            &names(4),
            3,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Training(_)));
    }

    #[test]
    fn mode_and_target_kind_must_agree() {
        let (x, y) = blobs(30, 4, 2);
        let values = vec![1.0; 30];
        assert!(matches!(
            TreeEnsemble::fit(
                EnsembleSpec::new(EnsembleMode::RfRegressor),
                &x,
                Target::Levels(&y),
                &names(4),
                3,
            ),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            TreeEnsemble::fit(
                EnsembleSpec::new(EnsembleMode::ExtraTrees),
                &x,
                Target::Continuous(&values),
                &names(4),
                3,
            ),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn same_seed_reproduces_trees_and_importances() {
        let (x, y) = blobs(60, 6, 21);
        let fit = |seed| {
            TreeEnsemble::fit(
                EnsembleSpec::new(EnsembleMode::ExtraTrees),
                &x,
                Target::Levels(&y),
                &names(6),
                seed,
            )
            .unwrap()
        };
        let (a, b, c) = (fit(5), fit(5), fit(6));
        assert_eq!(a.trees(), b.trees());
        assert_eq!(a.importances(), b.importances());
        assert_ne!(a.trees(), c.trees());
    }

    #[test]
    fn probabilities_are_normalized_and_argmax_prefers_low_level_on_tie() {
        let (x, y) = blobs(60, 5, 31);
        let model = TreeEnsemble::fit(
            EnsembleSpec::new(EnsembleMode::RfClassifier),
            &x,
            Target::Levels(&y),
            &names(5),
            8,
        )
        .unwrap();
        let mut row = vec![0.5; 5];
        row[0] = -3.0;
        let p = model.predict_proba(&row).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        // Tie rule is exercised through the argmax directly: equal first two.
        let probs = [0.4, 0.4, 0.2];
        let mut best = 0usize;
        for k in 1..3 {
            if probs[k] > probs[best] {
                best = k;
            }
        }
        assert_eq!(best, 0);
    }

    #[test]
    fn planted_features_dominate_importances() {
        let (x, y) = blobs(150, 8, 41);
        let model = TreeEnsemble::fit(
            EnsembleSpec::new(EnsembleMode::RfClassifier),
            &x,
            Target::Levels(&y),
            &names(8),
            9,
        )
        .unwrap();
        let imp = model.importances();
        assert!((imp.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(imp[0] + imp[1] > 0.9, "planted share {}", imp[0] + imp[1]);
        let ranking = model.importance_ranking();
        assert!(ranking[0] == 0 || ranking[0] == 1);
    }

    #[test]
    fn unrelated_target_spreads_importance() {
        // Labels independent of all 10 features: no feature should soak up
        // more than a modest share of importance.
        let mut rng = rng_from_seed(55);
        let n = 1000;
        let x = Array2::from_shape_fn((n, 10), |_| rng.gen::<f64>());
        let y: Vec<i8> = (0..n).map(|_| rng.gen_range(-1..=1)).collect();
        let model = TreeEnsemble::fit(
            EnsembleSpec::new(EnsembleMode::RfClassifier),
            &x,
            Target::Levels(&y),
            &names(10),
            13,
        )
        .unwrap();
        let max = model.importances().iter().cloned().fold(0.0, f64::max);
        assert!(max < 0.25, "max importance {max}");
    }

    #[test]
    fn regressor_recovers_linear_signal() {
        let mut rng = rng_from_seed(66);
        let n = 300;
        let x = Array2::from_shape_fn((n, 4), |_| rng.gen::<f64>());
        let y: Vec<f64> = (0..n).map(|i| 10.0 * x[(i, 2)]).collect();
        let model = TreeEnsemble::fit(
            EnsembleSpec::new(EnsembleMode::RfRegressor),
            &x,
            Target::Continuous(&y),
            &names(4),
            17,
        )
        .unwrap();
        // Spot predictions track the plane within forest smoothing error.
        let lo = model.predict_value(&[0.5, 0.5, 0.1, 0.5]).unwrap();
        let hi = model.predict_value(&[0.5, 0.5, 0.9, 0.5]).unwrap();
        assert!(lo < 3.0 && hi > 7.0, "lo {lo} hi {hi}");
        let ranking = model.importance_ranking();
        assert_eq!(ranking[0], 2);
    }

    #[test]
    fn binding_gathers_model_order_from_schema() {
        use crate::montage::parse_channels;
        let channels = parse_channels(&["T7", "O2"]).unwrap();
        let schema = FeatureSchema::for_channels(&channels);
        // A model trained on a two-name subset in non-schema order.
        let model_names = vec!["alpha_O2".to_string(), "delta_T7".to_string()];
        let (x, y) = blobs(30, 2, 3);
        let model = TreeEnsemble::fit(
            EnsembleSpec::new(EnsembleMode::ExtraTrees),
            &x,
            Target::Levels(&y),
            &model_names,
            4,
        )
        .unwrap();
        let binding = model.bind(&schema).unwrap();
        let values: Vec<f64> = (0..schema.len()).map(|i| i as f64).collect();
        let mut out = Vec::new();
        binding.gather(&values, &mut out);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0], schema.position("alpha_O2").unwrap() as f64);
        assert_eq!(out[1], schema.position("delta_T7").unwrap() as f64);

        let missing = vec!["alpha_Cz".to_string()];
        let bad = TreeEnsemble::fit(
            EnsembleSpec::new(EnsembleMode::ExtraTrees),
            &Array2::from_shape_fn((30, 1), |(r, _)| x[(r, 0)]),
            Target::Levels(&y),
            &missing,
            4,
        )
        .unwrap();
        assert!(matches!(bad.bind(&schema), Err(Error::Contract(_))));
    }

    #[test]
    fn sweep_prefers_compact_model_on_planted_features() {
        // 5 weakly informative features out of 12: each alone separates the
        // classes poorly, so held-out accuracy climbs as more of them enter
        // the model.
        let mut rng = rng_from_seed(70);
        let n = 300;
        let d = 12;
        let mut x = Array2::from_shape_fn((n, d), |_| rng.gen::<f64>());
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let cls = (i % 3) as i8 - 1;
            for j in 0..5 {
                x[(i, j)] += 0.4 * cls as f64 * if j % 2 == 0 { 1.0 } else { -1.0 };
            }
            y.push(VadLevel::new(cls, -cls, cls).unwrap());
        }
        let split = 225;
        let x_train = x.slice(ndarray::s![..split, ..]).to_owned();
        let x_eval = x.slice(ndarray::s![split.., ..]).to_owned();
        let y_train = y[..split].to_vec();
        let y_eval = y[split..].to_vec();

        let mut spec = EnsembleSpec::new(EnsembleMode::ExtraTrees);
        spec.n_trees = 40;
        let (points, best) = feature_count_sweep(
            spec,
            &x_train,
            &y_train,
            &x_eval,
            &y_eval,
            &names(d),
            &[2, 5, 8, 12],
            99,
        )
        .unwrap();
        assert_eq!(points.len(), 4);
        let at = |s: usize| points.iter().find(|p| p.n_features == s).unwrap();
        assert!(at(5).average > at(2).average);
        assert!(best >= 5, "best size {best}");
        for p in &points {
            let mean = p.accuracy.iter().sum::<f64>() / 3.0;
            assert!((p.average - mean).abs() < 1e-12);
        }
    }
}
