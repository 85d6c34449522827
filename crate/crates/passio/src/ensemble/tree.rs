//! Single CART-style decision tree: exact or randomized threshold search,
//! Gini impurity for class targets, variance (MSE criterion) for continuous
//! targets.
//!
//! Trees grow depth-first with no depth limit; recursion stops on purity,
//! the minimum-leaf-size rule, or when no valid split exists. Samples route
//! left when `x[feature] < threshold`.

use ndarray::Array2;
use rand::Rng as _;

use crate::rng::Rng;

pub const N_CLASSES: usize = 3;

/// Flattened tree node. Child links index into the tree's node vector.
#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Split { feature: u32, threshold: f64, left: u32, right: u32 },
    LeafProbs([f64; N_CLASSES]),
    LeafValue(f64),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    /// Class-probability prediction; only valid for trees with `LeafProbs`.
    pub fn predict_probs(&self, row: &[f64]) -> [f64; N_CLASSES] {
        match self.leaf_for(row) {
            Node::LeafProbs(p) => *p,
            _ => unreachable!("classification tree with value leaf"),
        }
    }

    /// Mean prediction; only valid for trees with `LeafValue`.
    pub fn predict_value(&self, row: &[f64]) -> f64 {
        match self.leaf_for(row) {
            Node::LeafValue(v) => *v,
            _ => unreachable!("regression tree with probability leaf"),
        }
    }

    fn leaf_for(&self, row: &[f64]) -> &Node {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Split { feature, threshold, left, right } => {
                    at = if row[*feature as usize] < *threshold { *left } else { *right } as usize;
                }
                leaf => return leaf,
            }
        }
    }

    pub fn n_splits(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Split { .. })).count()
    }
}

/// What a tree is fitted against.
#[derive(Clone, Copy)]
pub enum FitTarget<'a> {
    /// Class indices in `0..N_CLASSES`.
    Classes(&'a [u8]),
    /// Continuous values.
    Values(&'a [f64]),
}

#[derive(Clone, Copy, Debug)]
pub struct TreeParams {
    /// Candidate features per split.
    pub mtry: usize,
    /// Minimum samples on each side of a split.
    pub min_leaf: usize,
    /// Draw one uniform threshold per candidate instead of scanning all cuts.
    pub random_thresholds: bool,
    /// Fit on a bootstrap resample of the rows.
    pub bootstrap: bool,
}

/// Fit one tree. `importance` accumulates the tree's raw impurity decreases
/// per feature (weighted by node sample fraction), un-normalized.
/// Deterministic given (`x`, `target`, `params`, `rng` state).
pub fn fit_tree(
    x: &Array2<f64>,
    target: FitTarget<'_>,
    params: &TreeParams,
    rng: &mut Rng,
    importance: &mut [f64],
) -> DecisionTree {
    let n = x.nrows();
    debug_assert!(n > 0);
    let mut indices: Vec<u32> = if params.bootstrap {
        (0..n).map(|_| rng.gen_range(0..n) as u32).collect()
    } else {
        (0..n as u32).collect()
    };
    let mut builder = TreeBuilder {
        x,
        target,
        params,
        rng,
        n_root: indices.len() as f64,
        feature_order: (0..x.ncols() as u32).collect(),
        nodes: Vec::new(),
        importance,
    };
    builder.grow(&mut indices);
    DecisionTree { nodes: builder.nodes }
}

struct TreeBuilder<'a> {
    x: &'a Array2<f64>,
    target: FitTarget<'a>,
    params: &'a TreeParams,
    rng: &'a mut Rng,
    n_root: f64,
    /// Scratch permutation for partial Fisher-Yates candidate sampling.
    feature_order: Vec<u32>,
    nodes: Vec<Node>,
    importance: &'a mut [f64],
}

/// Node statistics: class counts, or (sum, sum of squares) for values.
#[derive(Clone, Copy, Default)]
struct Stats {
    counts: [f64; N_CLASSES],
    sum: f64,
    sum_sq: f64,
    n: f64,
}

impl Stats {
    fn add(&mut self, target: &FitTarget<'_>, row: u32) {
        match target {
            FitTarget::Classes(y) => self.counts[y[row as usize] as usize] += 1.0,
            FitTarget::Values(y) => {
                let v = y[row as usize];
                self.sum += v;
                self.sum_sq += v * v;
            }
        }
        self.n += 1.0;
    }

    fn remove(&mut self, target: &FitTarget<'_>, row: u32) {
        match target {
            FitTarget::Classes(y) => self.counts[y[row as usize] as usize] -= 1.0,
            FitTarget::Values(y) => {
                let v = y[row as usize];
                self.sum -= v;
                self.sum_sq -= v * v;
            }
        }
        self.n -= 1.0;
    }

    /// Gini impurity or variance, for `n` samples.
    fn impurity(&self, target: &FitTarget<'_>) -> f64 {
        if self.n == 0.0 {
            return 0.0;
        }
        match target {
            FitTarget::Classes(_) => {
                let mut sq = 0.0;
                for c in self.counts {
                    sq += (c / self.n) * (c / self.n);
                }
                1.0 - sq
            }
            FitTarget::Values(_) => {
                let mean = self.sum / self.n;
                (self.sum_sq / self.n - mean * mean).max(0.0)
            }
        }
    }
}

struct BestSplit {
    feature: u32,
    threshold: f64,
    decrease: f64,
}

impl<'a> TreeBuilder<'a> {
    fn grow(&mut self, indices: &mut [u32]) -> u32 {
        let mut stats = Stats::default();
        for &i in indices.iter() {
            stats.add(&self.target, i);
        }
        let node_impurity = stats.impurity(&self.target);
        let n = indices.len();

        let splittable = n >= 2 * self.params.min_leaf && node_impurity > 0.0;
        let best = if splittable { self.find_split(indices, &stats, node_impurity) } else { None };

        let Some(best) = best else {
            let id = self.nodes.len() as u32;
            self.nodes.push(self.make_leaf(&stats));
            return id;
        };

        // Stable partition keeps everything deterministic.
        let mut left: Vec<u32> = Vec::with_capacity(n);
        let mut right: Vec<u32> = Vec::with_capacity(n);
        for &i in indices.iter() {
            if self.x[(i as usize, best.feature as usize)] < best.threshold {
                left.push(i);
            } else {
                right.push(i);
            }
        }
        debug_assert!(!left.is_empty() && !right.is_empty());
        self.importance[best.feature as usize] += (n as f64 / self.n_root) * best.decrease;

        let id = self.nodes.len() as u32;
        self.nodes.push(Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: 0,
            right: 0,
        });
        let left_id = self.grow(&mut left);
        let right_id = self.grow(&mut right);
        match &mut self.nodes[id as usize] {
            Node::Split { left, right, .. } => {
                *left = left_id;
                *right = right_id;
            }
            _ => unreachable!(),
        }
        id
    }

    fn make_leaf(&self, stats: &Stats) -> Node {
        match self.target {
            FitTarget::Classes(_) => {
                let mut probs = [0.0; N_CLASSES];
                for (p, c) in probs.iter_mut().zip(stats.counts) {
                    *p = c / stats.n;
                }
                Node::LeafProbs(probs)
            }
            FitTarget::Values(_) => Node::LeafValue(stats.sum / stats.n),
        }
    }

    /// Evaluate `mtry` sampled candidate features; if none yields a valid
    /// split, fall back to scanning every feature in index order so impure
    /// nodes with any non-constant feature always make progress.
    fn find_split(
        &mut self,
        indices: &[u32],
        stats: &Stats,
        node_impurity: f64,
    ) -> Option<BestSplit> {
        let d = self.feature_order.len();
        let mtry = self.params.mtry.min(d);
        // Partial Fisher-Yates over the persistent permutation: a uniform
        // without-replacement sample regardless of current order.
        for slot in 0..mtry {
            let pick = self.rng.gen_range(slot..d);
            self.feature_order.swap(slot, pick);
        }

        let mut best: Option<BestSplit> = None;
        for slot in 0..mtry {
            let feature = self.feature_order[slot];
            let cand = if self.params.random_thresholds {
                self.eval_random_threshold(indices, stats, node_impurity, feature)
            } else {
                self.eval_exact(indices, stats, node_impurity, feature)
            };
            if let Some(c) = cand {
                if best.as_ref().map_or(true, |b| c.decrease > b.decrease) {
                    best = Some(c);
                }
            }
        }
        if best.is_some() {
            return best;
        }
        // Fallback sweep. Midpoint thresholds here even in randomized mode:
        // deterministic, and only reached when every sampled candidate was
        // constant across the node.
        for feature in 0..d as u32 {
            if let Some(c) = self.eval_exact(indices, stats, node_impurity, feature) {
                return Some(c);
            }
        }
        None
    }

    /// Extra-randomized candidate: one uniform threshold in the feature's
    /// observed range.
    fn eval_random_threshold(
        &mut self,
        indices: &[u32],
        stats: &Stats,
        node_impurity: f64,
        feature: u32,
    ) -> Option<BestSplit> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &i in indices {
            let v = self.x[(i as usize, feature as usize)];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !(hi > lo) {
            return None;
        }
        let threshold = self.rng.gen_range(lo..hi);
        if threshold <= lo {
            return None; // borderline float draw: would leave one side empty
        }
        let mut left = Stats::default();
        for &i in indices {
            if self.x[(i as usize, feature as usize)] < threshold {
                left.add(&self.target, i);
            }
        }
        let n = stats.n;
        let min_leaf = self.params.min_leaf as f64;
        if left.n < min_leaf || n - left.n < min_leaf {
            return None;
        }
        let mut right = *stats;
        for &i in indices {
            if self.x[(i as usize, feature as usize)] < threshold {
                right.remove(&self.target, i);
            }
        }
        let decrease = node_impurity
            - (left.n / n) * left.impurity(&self.target)
            - (right.n / n) * right.impurity(&self.target);
        Some(BestSplit { feature, threshold, decrease })
    }

    /// Exact search: sort by value, scan midpoints between distinct values.
    fn eval_exact(
        &mut self,
        indices: &[u32],
        stats: &Stats,
        node_impurity: f64,
        feature: u32,
    ) -> Option<BestSplit> {
        let mut order: Vec<(f64, u32)> = indices
            .iter()
            .map(|&i| (self.x[(i as usize, feature as usize)], i))
            .collect();
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));

        let n = stats.n;
        let min_leaf = self.params.min_leaf;
        let mut left = Stats::default();
        let mut right = *stats;
        let mut best: Option<BestSplit> = None;
        for k in 0..order.len() - 1 {
            left.add(&self.target, order[k].1);
            right.remove(&self.target, order[k].1);
            if order[k + 1].0 <= order[k].0 {
                continue; // not a boundary between distinct values
            }
            let n_left = k + 1;
            if n_left < min_leaf || order.len() - n_left < min_leaf {
                continue;
            }
            let decrease = node_impurity
                - (left.n / n) * left.impurity(&self.target)
                - (right.n / n) * right.impurity(&self.target);
            if best.as_ref().map_or(true, |b| decrease > b.decrease) {
                let threshold = order[k].0 + (order[k + 1].0 - order[k].0) / 2.0;
                // Degenerate gaps can collapse onto the lower value; route
                // around them to keep both children non-empty.
                let threshold = if threshold > order[k].0 { threshold } else { order[k + 1].0 };
                best = Some(BestSplit { feature, threshold, decrease });
            }
        }
        best
    }
}
