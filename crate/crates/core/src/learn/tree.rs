//! Depth-limited regression trees grown with the Friedman MSE criterion.
//!
//! A candidate split of a node into left/right children scores
//! `n_l * n_r / (n_l + n_r) * (mean_l - mean_r)^2`. Thresholds sit halfway
//! between consecutive distinct feature values; rows with `x <= threshold`
//! go left. Equal scores keep the earlier candidate, so the lowest feature
//! index and then the lowest threshold win ties.

use ndarray::{ArrayView1, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Number of features examined at each node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// `ceil(sqrt(d))`.
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (d as f64).sqrt().ceil() as usize,
            MaxFeatures::All => d,
            MaxFeatures::Count(k) => k,
        };
        k.clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: 3, min_samples_split: 10, min_samples_leaf: 6, max_features: MaxFeatures::Sqrt }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        samples: usize,
        /// Mean squared deviation of the fitted targets at this node.
        impurity: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        value: f64,
        samples: usize,
        impurity: f64,
    },
}

impl TreeNode {
    pub fn samples(&self) -> usize {
        match self {
            TreeNode::Split { samples, .. } | TreeNode::Leaf { samples, .. } => *samples,
        }
    }

    pub fn impurity(&self) -> f64 {
        match self {
            TreeNode::Split { impurity, .. } | TreeNode::Leaf { impurity, .. } => *impurity,
        }
    }

    pub fn predict_row(&self, row: ArrayView1<'_, f64>) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split { feature, threshold, left, right, .. } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Visits every node depth-first, left before right.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a TreeNode)) {
        f(self);
        if let TreeNode::Split { left, right, .. } = self {
            left.walk(f);
            right.walk(f);
        }
    }

    /// Replaces every leaf value with `f(rows reaching that leaf)`.
    pub fn update_leaves(
        &mut self,
        x: ArrayView2<'_, f64>,
        rows: &[usize],
        f: &mut impl FnMut(&[usize]) -> f64,
    ) {
        match self {
            TreeNode::Leaf { value, .. } => *value = f(rows),
            TreeNode::Split { feature, threshold, left, right, .. } => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    rows.iter().copied().partition(|&i| x[[i, *feature]] <= *threshold);
                left.update_leaves(x, &l, f);
                right.update_leaves(x, &r, f);
            }
        }
    }
}

fn mean_and_impurity(targets: &[f64], rows: &[usize]) -> (f64, f64) {
    let n = rows.len() as f64;
    let mean = rows.iter().map(|&i| targets[i]).sum::<f64>() / n;
    let impurity = rows.iter().map(|&i| (targets[i] - mean).powi(2)).sum::<f64>() / n;
    (mean, impurity)
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Grows one tree on `targets` over the given rows of `x`.
///
/// `rng` only drives the per-node feature subset; row order is taken as
/// given.
pub fn grow<R: Rng>(
    x: ArrayView2<'_, f64>,
    targets: &[f64],
    rows: &[usize],
    params: &TreeParams,
    rng: &mut R,
) -> TreeNode {
    grow_node(x, targets, rows.to_vec(), 0, params, rng)
}

fn grow_node<R: Rng>(
    x: ArrayView2<'_, f64>,
    targets: &[f64],
    rows: Vec<usize>,
    depth: usize,
    params: &TreeParams,
    rng: &mut R,
) -> TreeNode {
    let (mean, impurity) = mean_and_impurity(targets, &rows);
    let n = rows.len();
    let leaf = || TreeNode::Leaf { value: mean, samples: n, impurity };
    if depth >= params.max_depth
        || n < params.min_samples_split
        || n < 2 * params.min_samples_leaf
        || impurity <= f64::EPSILON
    {
        return leaf();
    }
    let d = x.ncols();
    let k = params.max_features.resolve(d);
    let mut features = rand::seq::index::sample(rng, d, k).into_vec();
    features.sort_unstable();

    let mut best: Option<Candidate> = None;
    let mut sorted = rows.clone();
    for &feature in &features {
        sorted.sort_by(|&a, &b| x[[a, feature]].total_cmp(&x[[b, feature]]));
        if let Some(c) = best_split_on(x, targets, &sorted, feature, params.min_samples_leaf) {
            if best.as_ref().is_none_or(|b| c.gain > b.gain) {
                best = Some(c);
            }
        }
    }
    let Some(best) = best else {
        return leaf();
    };
    let (l, r): (Vec<usize>, Vec<usize>) =
        rows.iter().copied().partition(|&i| x[[i, best.feature]] <= best.threshold);
    let left = grow_node(x, targets, l, depth + 1, params, rng);
    let right = grow_node(x, targets, r, depth + 1, params, rng);
    TreeNode::Split {
        feature: best.feature,
        threshold: best.threshold,
        samples: n,
        impurity,
        left: Box::new(left),
        right: Box::new(right),
    }
}

fn best_split_on(
    x: ArrayView2<'_, f64>,
    targets: &[f64],
    sorted: &[usize],
    feature: usize,
    min_leaf: usize,
) -> Option<Candidate> {
    let n = sorted.len();
    let total: f64 = sorted.iter().map(|&i| targets[i]).sum();
    let mut left_sum = 0.0;
    let mut best: Option<Candidate> = None;
    for split in 1..n {
        left_sum += targets[sorted[split - 1]];
        if split < min_leaf || n - split < min_leaf {
            continue;
        }
        let lo = x[[sorted[split - 1], feature]];
        let hi = x[[sorted[split], feature]];
        if lo == hi {
            continue;
        }
        let (nl, nr) = (split as f64, (n - split) as f64);
        let diff = left_sum / nl - (total - left_sum) / nr;
        let gain = nl * nr / (nl + nr) * diff * diff;
        if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
            let mut threshold = (lo + hi) / 2.0;
            if threshold >= hi {
                threshold = lo;
            }
            best = Some(Candidate { feature, threshold, gain });
        }
    }
    best
}
