//! Gradient-boosted decision trees, built from scratch.
//!
//! The engine does exact greedy split finding with second-order (Newton)
//! gains: at every node each feature's rows are scanned in presorted order,
//! candidate thresholds are midpoints between consecutive distinct values,
//! and per-threshold gains are computed from gradient/hessian sums with L2
//! regularization. Missing values are routed down a per-split default
//! direction learned by evaluating both sides. Datasets here are small
//! (thousands of rows), so no histogram approximation is used.

mod loss;
mod train;

pub use loss::{grad_hess, mean_logloss, sigmoid, softmax_into, Objective};
pub use train::{train, EvalSet, RoundRecord, TrainLog};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::DenseMatrix;

#[derive(Debug, Error)]
pub enum BoostError {
    #[error("training set has zero rows")]
    EmptyTrainingSet,
    #[error("label count {got} does not match row count {expected}")]
    LabelMismatch { expected: usize, got: usize },
    #[error("label {label} at row {index} outside valid range for {n_classes} class(es)")]
    InvalidLabel {
        index: usize,
        label: u32,
        n_classes: usize,
    },
    #[error("input has {got} feature column(s), model was trained with {expected}")]
    FeatureCountMismatch { expected: usize, got: usize },
    #[error("invalid hyperparameters: {0}")]
    InvalidParams(String),
}

/// Hyperparameters of one boosted ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Maximum tree depth (root is depth 0).
    pub max_depth: u32,
    /// Shrinkage applied to every leaf weight.
    pub learning_rate: f64,
    /// Row sampling rate per round, without replacement, in (0, 1].
    pub subsample: f64,
    /// L2 penalty on leaf weights.
    pub l2_lambda: f64,
    /// Number of boosting rounds (upper bound when early stopping is active).
    pub n_rounds: u32,
    /// Minimum hessian sum required on each side of a split.
    pub min_child_hessian: f64,
    /// Seed for the row-subsampling stream.
    pub seed: u64,
    /// Early-stopping patience in rounds; applies only when an eval set is
    /// provided. 0 disables early stopping.
    pub patience: u32,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            max_depth: 4,
            learning_rate: 0.2,
            subsample: 0.9,
            l2_lambda: 0.0,
            n_rounds: 100,
            min_child_hessian: 1.0,
            seed: 0,
            patience: 10,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<(), BoostError> {
        if self.subsample.is_nan() || self.subsample <= 0.0 || self.subsample > 1.0 {
            return Err(BoostError::InvalidParams(format!(
                "subsample must be in (0, 1], got {}",
                self.subsample
            )));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(BoostError::InvalidParams(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.l2_lambda < 0.0 {
            return Err(BoostError::InvalidParams("l2_lambda must be >= 0".into()));
        }
        if self.min_child_hessian < 0.0 {
            return Err(BoostError::InvalidParams(
                "min_child_hessian must be >= 0".into(),
            ));
        }
        if self.max_depth == 0 {
            return Err(BoostError::InvalidParams("max_depth must be >= 1".into()));
        }
        if self.n_rounds == 0 {
            return Err(BoostError::InvalidParams("n_rounds must be >= 1".into()));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// A regression-tree node. Split thresholds are finite; rows with a missing
/// feature value follow `default_left`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        default_left: bool,
        gain: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        weight: f64,
    },
}

impl TreeNode {
    /// Leaf weight reached by `row` (missing cells are NaN).
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { weight } => return *weight,
                TreeNode::Split {
                    feature,
                    threshold,
                    default_left,
                    left,
                    right,
                    ..
                } => {
                    let v = row[*feature];
                    let go_left = if v.is_nan() { *default_left } else { v < *threshold };
                    node = if go_left { left } else { right };
                }
            }
        }
    }

    fn visit_splits(&self, f: &mut impl FnMut(usize, f64)) {
        if let TreeNode::Split {
            feature,
            gain,
            left,
            right,
            ..
        } = self
        {
            f(*feature, *gain);
            left.visit_splits(f);
            right.visit_splits(f);
        }
    }

    pub fn n_splits(&self) -> usize {
        let mut count = 0;
        self.visit_splits(&mut |_, _| count += 1);
        count
    }
}

/// Share of total split gain attributed to one feature, plus its split count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub gain_share: f64,
    pub splits: u32,
}

/// An additive ensemble of regression trees.
///
/// For `Softmax` objectives trees are stored round-major: round `r` holds one
/// tree per class at indices `r * n_classes ..`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub objective: Objective,
    pub params: HyperParams,
    /// Per-group prior scores (log-odds for binary, per-class prior logits
    /// for softmax).
    pub base_score: Vec<f64>,
    pub n_features: usize,
    pub trees: Vec<TreeNode>,
}

impl BoostedModel {
    /// Train a model; see [`train`] for the full signature with a train log.
    pub fn fit(
        objective: Objective,
        x: &DenseMatrix,
        y: &[u32],
        params: &HyperParams,
        eval: Option<EvalSet<'_>>,
    ) -> Result<(BoostedModel, TrainLog), BoostError> {
        train(objective, x, y, params, eval)
    }

    pub fn n_groups(&self) -> usize {
        self.objective.n_groups()
    }

    pub fn n_rounds_trained(&self) -> usize {
        self.trees.len() / self.n_groups()
    }

    /// Raw additive scores, row-major `n x n_groups`.
    pub fn predict_raw(&self, x: &DenseMatrix) -> Result<Vec<f64>, BoostError> {
        if x.n_cols() != self.n_features {
            return Err(BoostError::FeatureCountMismatch {
                expected: self.n_features,
                got: x.n_cols(),
            });
        }
        let groups = self.n_groups();
        let mut scores = vec![0.0; x.n_rows() * groups];
        for (i, row) in x.rows().enumerate() {
            let out = &mut scores[i * groups..(i + 1) * groups];
            out.copy_from_slice(&self.base_score);
            for (t, tree) in self.trees.iter().enumerate() {
                out[t % groups] += tree.predict_row(row);
            }
        }
        Ok(scores)
    }

    /// Predicted probabilities.
    ///
    /// Binary: an `n x 1` column of `P(y = 1)`. Softmax: `n x n_classes` rows
    /// on the probability simplex.
    pub fn predict_proba(&self, x: &DenseMatrix) -> Result<DenseMatrix, BoostError> {
        let raw = self.predict_raw(x)?;
        let groups = self.n_groups();
        let mut out = raw;
        match self.objective {
            Objective::BinaryLogistic => {
                for v in out.iter_mut() {
                    *v = sigmoid(*v);
                }
            }
            Objective::Softmax { n_classes } => {
                let mut probs = vec![0.0; n_classes];
                for row in out.chunks_exact_mut(n_classes) {
                    softmax_into(row, &mut probs);
                    row.copy_from_slice(&probs);
                }
            }
        }
        Ok(DenseMatrix::new(x.n_rows(), groups, out))
    }

    /// Raw scores for a single feature row.
    pub fn predict_row_raw(&self, row: &[f64]) -> Result<Vec<f64>, BoostError> {
        if row.len() != self.n_features {
            return Err(BoostError::FeatureCountMismatch {
                expected: self.n_features,
                got: row.len(),
            });
        }
        let groups = self.n_groups();
        let mut out = self.base_score.clone();
        for (t, tree) in self.trees.iter().enumerate() {
            out[t % groups] += tree.predict_row(row);
        }
        Ok(out)
    }

    /// Gain-based feature importance: per used feature, its share of the
    /// total split gain (shares sum to 1) and its split count. Features never
    /// split on are absent.
    pub fn feature_importance(&self) -> BTreeMap<usize, ImportanceEntry> {
        let mut gains: BTreeMap<usize, (f64, u32)> = BTreeMap::new();
        for tree in &self.trees {
            tree.visit_splits(&mut |feature, gain| {
                let e = gains.entry(feature).or_insert((0.0, 0));
                e.0 += gain.max(0.0);
                e.1 += 1;
            });
        }
        let total: f64 = gains.values().map(|(g, _)| g).sum();
        gains
            .into_iter()
            .map(|(f, (g, c))| {
                let share = if total > 0.0 { g / total } else { 0.0 };
                (
                    f,
                    ImportanceEntry {
                        gain_share: share,
                        splits: c,
                    },
                )
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization cannot fail")
    }

    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(json)
    }
}
