//! Objectives, gradients/hessians, and log-loss used by the boosting engine.

use serde::{Deserialize, Serialize};

/// Training objective of a boosted ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    /// Binary classification on {0, 1} labels; scores are log-odds.
    BinaryLogistic,
    /// Multi-class classification on {0, .., n_classes-1} labels; one score
    /// group (and one tree per round) per class.
    Softmax { n_classes: usize },
}

impl Objective {
    /// Number of score groups (trees per boosting round).
    pub fn n_groups(&self) -> usize {
        match self {
            Objective::BinaryLogistic => 1,
            Objective::Softmax { n_classes } => *n_classes,
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softmax of `logits` written into `out`.
pub fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// First and second derivatives of the cross-entropy loss with respect to the
/// raw scores.
///
/// `scores` is row-major `n x n_groups`. Binary: `g = p - y`, `h = p(1-p)`.
/// Softmax: `g_c = p_c - [y = c]`, `h_c = p_c(1-p_c)`.
pub fn grad_hess(objective: Objective, scores: &[f64], labels: &[u32]) -> (Vec<f64>, Vec<f64>) {
    let groups = objective.n_groups();
    let n = labels.len();
    assert_eq!(scores.len(), n * groups, "score/label shape mismatch");
    let mut g = vec![0.0; n * groups];
    let mut h = vec![0.0; n * groups];
    match objective {
        Objective::BinaryLogistic => {
            for i in 0..n {
                let p = sigmoid(scores[i]);
                g[i] = p - f64::from(labels[i]);
                h[i] = p * (1.0 - p);
            }
        }
        Objective::Softmax { n_classes } => {
            let mut probs = vec![0.0; n_classes];
            for i in 0..n {
                let row = &scores[i * n_classes..(i + 1) * n_classes];
                softmax_into(row, &mut probs);
                for c in 0..n_classes {
                    let target = if labels[i] as usize == c { 1.0 } else { 0.0 };
                    g[i * n_classes + c] = probs[c] - target;
                    h[i * n_classes + c] = probs[c] * (1.0 - probs[c]);
                }
            }
        }
    }
    (g, h)
}

/// Mean cross-entropy of raw scores against labels, numerically stable.
pub fn mean_logloss(objective: Objective, scores: &[f64], labels: &[u32]) -> f64 {
    let n = labels.len();
    if n == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    match objective {
        Objective::BinaryLogistic => {
            for i in 0..n {
                let s = scores[i];
                let y = f64::from(labels[i]);
                // log(1 + e^s) - y*s, computed without overflow
                total += s.max(0.0) - s * y + (-s.abs()).exp().ln_1p();
            }
        }
        Objective::Softmax { n_classes } => {
            for i in 0..n {
                let row = &scores[i * n_classes..(i + 1) * n_classes];
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + row.iter().map(|&s| (s - max).exp()).sum::<f64>().ln();
                total += lse - row[labels[i] as usize];
            }
        }
    }
    total / n as f64
}
