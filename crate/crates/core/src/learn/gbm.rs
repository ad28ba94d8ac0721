//! Gradient-boosted regression trees.
//!
//! Boosting starts from the training median. Each round fits a tree to the
//! negative gradient of the loss, re-estimates every leaf with a robust
//! location step, and adds the tree scaled by the learning rate:
//!
//! ```text
//! prediction(x) = init + learning_rate * sum_m tree_m(x)
//! ```
//!
//! For Huber loss the transition point `delta` is re-estimated every round as
//! a quantile of the current absolute residuals. Pseudo-residuals are the
//! residuals clipped to `[-delta, delta]`; leaf values are the leaf median of
//! the raw residuals plus the mean of the clipped deviations from it.

use std::cmp::Ordering;

use ndarray::{Array1, Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::tree::{grow, MaxFeatures, TreeNode, TreeParams};
use crate::stats::{median, quantile_sorted};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Huber,
    Squared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmHyper {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub loss: Loss,
    /// Quantile of absolute residuals used as the Huber `delta`.
    pub huber_quantile: f64,
    /// Split criterion; only `friedman_mse` is implemented.
    pub criterion: Criterion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    FriedmanMse,
}

impl Default for GbmHyper {
    fn default() -> Self {
        GbmHyper {
            n_estimators: 200,
            learning_rate: 0.1,
            max_depth: 3,
            min_samples_split: 10,
            min_samples_leaf: 6,
            max_features: MaxFeatures::Sqrt,
            loss: Loss::Huber,
            huber_quantile: 0.9,
            criterion: Criterion::FriedmanMse,
        }
    }
}

impl GbmHyper {
    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
            min_samples_leaf: self.min_samples_leaf,
            max_features: self.max_features,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Validation(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.huber_quantile > 0.0 && self.huber_quantile <= 1.0) {
            return Err(Error::Validation(format!("huber_quantile must lie in (0, 1], got {}", self.huber_quantile)));
        }
        if self.min_samples_leaf == 0 || self.min_samples_split < 2 {
            return Err(Error::Validation("min_samples_leaf >= 1 and min_samples_split >= 2 required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmEnsemble {
    pub init_value: f64,
    pub learning_rate: f64,
    pub n_features: usize,
    pub hyper: GbmHyper,
    pub trees: Vec<TreeNode>,
    /// Training loss after each boosting round. For Huber loss `delta` is
    /// fixed at its value for the initial residuals so the entries share one
    /// objective.
    #[serde(default)]
    pub train_loss: Vec<f64>,
}

/// The `quantile` of `|residual|`.
pub fn huber_delta(residuals: &[f64], quantile: f64) -> f64 {
    let mut abs: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
    abs.sort_by(f64::total_cmp);
    quantile_sorted(&abs, quantile)
}

pub fn huber_loss_with_delta(residuals: &[f64], delta: f64) -> f64 {
    let total: f64 = residuals
        .iter()
        .map(|r| {
            let a = r.abs();
            if a <= delta {
                0.5 * r * r
            } else {
                delta * (a - 0.5 * delta)
            }
        })
        .sum();
    total / residuals.len() as f64
}

fn squared_loss(residuals: &[f64]) -> f64 {
    residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64
}

// Lexicographic order over (row features, target) so that fitting does not
// depend on the order rows were supplied in.
fn canonical_order(x: ArrayView2<'_, f64>, y: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| {
        x.row(a)
            .iter()
            .zip(x.row(b).iter())
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or_else(|| y[a].total_cmp(&y[b]))
    });
    order
}

fn huber_leaf_value(diff: &[f64], rows: &[usize], delta: f64) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let leaf: Vec<f64> = rows.iter().map(|&i| diff[i]).collect();
    let med = median(&leaf).expect("non-empty leaf");
    let correction = leaf
        .iter()
        .map(|d| {
            let dev = d - med;
            dev.signum() * dev.abs().min(delta)
        })
        .sum::<f64>()
        / leaf.len() as f64;
    med + correction
}

impl GbmEnsemble {
    /// Fits the ensemble. Deterministic given `seed` and independent of row
    /// order.
    pub fn fit(x: ArrayView2<'_, f64>, y: &[f64], hyper: &GbmHyper, seed: u64) -> Result<Self> {
        hyper.validate()?;
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.nrows(), got: y.len() });
        }
        if y.len() < hyper.min_samples_split {
            return Err(Error::InsufficientData(format!(
                "need at least min_samples_split = {} rows, got {}",
                hyper.min_samples_split,
                y.len()
            )));
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite value in design or target".into()));
        }

        let order = canonical_order(x, y);
        let xc: Array2<f64> = x.select(ndarray::Axis(0), &order);
        let yc: Vec<f64> = order.iter().map(|&i| y[i]).collect();
        let n = yc.len();
        let rows: Vec<usize> = (0..n).collect();

        let init_value = median(&yc)?;
        let mut pred = vec![init_value; n];
        let params = hyper.tree_params();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trees = Vec::with_capacity(hyper.n_estimators);
        let mut train_loss = Vec::with_capacity(hyper.n_estimators);
        let initial: Vec<f64> = yc.iter().map(|t| t - init_value).collect();
        let loss_delta = huber_delta(&initial, hyper.huber_quantile);

        for _ in 0..hyper.n_estimators {
            let diff: Vec<f64> = yc.iter().zip(&pred).map(|(t, p)| t - p).collect();
            let tree = match hyper.loss {
                Loss::Squared => grow(xc.view(), &diff, &rows, &params, &mut rng),
                Loss::Huber => {
                    let delta = huber_delta(&diff, hyper.huber_quantile);
                    let pseudo: Vec<f64> = diff
                        .iter()
                        .map(|d| if d.abs() <= delta { *d } else { delta * d.signum() })
                        .collect();
                    let mut tree = grow(xc.view(), &pseudo, &rows, &params, &mut rng);
                    tree.update_leaves(xc.view(), &rows, &mut |leaf_rows| {
                        huber_leaf_value(&diff, leaf_rows, delta)
                    });
                    tree
                }
            };
            for (i, p) in pred.iter_mut().enumerate() {
                *p += hyper.learning_rate * tree.predict_row(xc.row(i));
            }
            let resid: Vec<f64> = yc.iter().zip(&pred).map(|(t, p)| t - p).collect();
            train_loss.push(match hyper.loss {
                Loss::Huber => huber_loss_with_delta(&resid, loss_delta),
                Loss::Squared => squared_loss(&resid),
            });
            trees.push(tree);
        }

        Ok(GbmEnsemble {
            init_value,
            learning_rate: hyper.learning_rate,
            n_features: x.ncols(),
            hyper: *hyper,
            trees,
            train_loss,
        })
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        self.predict_prefix(x, self.trees.len())
    }

    /// Prediction using only the first `n_trees` trees.
    pub fn predict_prefix(&self, x: ArrayView2<'_, f64>, n_trees: usize) -> Result<Array1<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, got: x.ncols() });
        }
        let trees = &self.trees[..n_trees.min(self.trees.len())];
        Ok(x
            .rows()
            .into_iter()
            .map(|row| {
                self.init_value
                    + self.learning_rate * trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
            })
            .collect())
    }
}

/// Mean decrease in impurity per feature.
///
/// Each split contributes `(samples / N) * (impurity - w_l * impurity_l -
/// w_r * impurity_r)` to its feature, with `w` the child sample fractions.
/// Contributions are averaged over trees and normalised to sum to one; all
/// zeros when no tree splits.
pub fn feature_importance(e: &GbmEnsemble) -> Vec<f64> {
    let mut total = vec![0.0; e.n_features];
    for tree in &e.trees {
        let root_n = tree.samples() as f64;
        tree.walk(&mut |node| {
            if let TreeNode::Split { feature, samples, impurity, left, right, .. } = node {
                let n = *samples as f64;
                let decrease = impurity
                    - left.samples() as f64 / n * left.impurity()
                    - right.samples() as f64 / n * right.impurity();
                total[*feature] += n / root_n * decrease;
            }
        });
    }
    if !e.trees.is_empty() {
        let k = e.trees.len() as f64;
        total.iter_mut().for_each(|v| *v /= k);
    }
    let sum: f64 = total.iter().sum();
    if sum > 0.0 {
        total.iter_mut().for_each(|v| *v /= sum);
    }
    total
}
