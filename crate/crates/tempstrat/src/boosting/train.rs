//! Training loop and exact greedy split finding.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use serde::{Deserialize, Serialize};

use super::loss::{grad_hess, mean_logloss, Objective};
use super::{BoostError, BoostedModel, HyperParams, TreeNode};
use crate::matrix::DenseMatrix;

const MIN_DENOM: f64 = 1e-16;
const PROB_CLAMP: f64 = 1e-7;

/// Holdout used for early stopping.
#[derive(Debug, Clone, Copy)]
pub struct EvalSet<'a> {
    pub x: &'a DenseMatrix,
    pub y: &'a [u32],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub train_loss: f64,
    pub eval_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub rounds: Vec<RoundRecord>,
    /// Round with the best eval loss (last round when no eval set is given).
    pub best_round: u32,
    pub stopped_early: bool,
    /// True when all training labels were identical; the model then reduces
    /// to its base score.
    pub degenerate_labels: bool,
}

struct SortedColumns {
    /// Per feature: row indices with a present value, sorted ascending by
    /// (value, row index).
    sorted: Vec<Vec<u32>>,
    /// Per feature: row indices with a missing value.
    missing: Vec<Vec<u32>>,
}

fn presort(x: &DenseMatrix) -> SortedColumns {
    let n = x.n_rows();
    let mut sorted = Vec::with_capacity(x.n_cols());
    let mut missing = Vec::with_capacity(x.n_cols());
    for f in 0..x.n_cols() {
        let mut present: Vec<u32> = Vec::new();
        let mut absent: Vec<u32> = Vec::new();
        for r in 0..n {
            if x.get(r, f).is_nan() {
                absent.push(r as u32);
            } else {
                present.push(r as u32);
            }
        }
        present.sort_by(|&a, &b| {
            x.get(a as usize, f)
                .partial_cmp(&x.get(b as usize, f))
                .expect("present values are not NaN")
                .then(a.cmp(&b))
        });
        sorted.push(present);
        missing.push(absent);
    }
    SortedColumns { sorted, missing }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    default_left: bool,
}

/// Deterministic total order on candidates: higher gain wins, ties broken by
/// lowest feature index, then lowest threshold.
fn candidate_better(new: &Candidate, cur: &Candidate) -> bool {
    if new.gain != cur.gain {
        return new.gain > cur.gain;
    }
    if new.feature != cur.feature {
        return new.feature < cur.feature;
    }
    new.threshold < cur.threshold
}

#[derive(Debug, Clone, Copy, Default)]
struct NodeStats {
    g: f64,
    h: f64,
    n: u32,
    g_min: f64,
    g_max: f64,
}

impl NodeStats {
    fn empty() -> Self {
        NodeStats {
            g: 0.0,
            h: 0.0,
            n: 0,
            g_min: f64::INFINITY,
            g_max: f64::NEG_INFINITY,
        }
    }

    fn add(&mut self, g: f64, h: f64) {
        self.g += g;
        self.h += h;
        self.n += 1;
        self.g_min = self.g_min.min(g);
        self.g_max = self.g_max.max(g);
    }
}

struct BuildNode {
    stats: NodeStats,
    split: Option<Candidate>,
    left: usize,
    right: usize,
}

#[derive(Clone, Copy)]
struct RunState {
    cum_g: f64,
    cum_h: f64,
    count: u32,
    prev: f64,
}

impl Default for RunState {
    fn default() -> Self {
        RunState {
            cum_g: 0.0,
            cum_h: 0.0,
            count: 0,
            prev: f64::NAN,
        }
    }
}

fn score_term(g: f64, h: f64, lambda: f64) -> Option<f64> {
    let denom = h + lambda;
    if denom < MIN_DENOM {
        None
    } else {
        Some(g * g / denom)
    }
}

/// Gain of splitting a node into (gl, hl) / (gr, gr), or None when a child
/// violates the hessian floor.
fn split_gain(
    gl: f64,
    hl: f64,
    gr: f64,
    hr: f64,
    parent_term: f64,
    params: &HyperParams,
) -> Option<f64> {
    if hl < params.min_child_hessian || hr < params.min_child_hessian {
        return None;
    }
    let lt = score_term(gl, hl, params.l2_lambda)?;
    let rt = score_term(gr, hr, params.l2_lambda)?;
    Some(0.5 * (lt + rt - parent_term))
}

fn leaf_weight(stats: &NodeStats, params: &HyperParams) -> f64 {
    let denom = stats.h + params.l2_lambda;
    if denom < MIN_DENOM {
        0.0
    } else {
        -stats.g / denom * params.learning_rate
    }
}

/// Grow one regression tree level-wise. `g`/`h` are row-major `n x groups`
/// arrays; the tree fits group `cls`. Rows with `active[r] == false` are
/// excluded (subsampling).
#[allow(clippy::too_many_arguments)]
fn grow_tree(
    x: &DenseMatrix,
    cols: &SortedColumns,
    g: &[f64],
    h: &[f64],
    groups: usize,
    cls: usize,
    active: &[bool],
    params: &HyperParams,
) -> TreeNode {
    let n = x.n_rows();
    let grad = |r: usize| g[r * groups + cls];
    let hess = |r: usize| h[r * groups + cls];

    const INACTIVE: u32 = u32::MAX;
    let mut pos: Vec<u32> = vec![INACTIVE; n];
    let mut root_stats = NodeStats::empty();
    for r in 0..n {
        if active[r] {
            pos[r] = 0;
            root_stats.add(grad(r), hess(r));
        }
    }
    let mut nodes: Vec<BuildNode> = vec![BuildNode {
        stats: root_stats,
        split: None,
        left: 0,
        right: 0,
    }];
    let mut frontier: Vec<usize> = vec![0];

    for _level in 0..params.max_depth {
        if frontier.is_empty() {
            break;
        }
        let size = nodes.len();
        let mut in_frontier = vec![false; size];
        let mut parent_term = vec![0.0; size];
        for &id in &frontier {
            in_frontier[id] = true;
            parent_term[id] =
                score_term(nodes[id].stats.g, nodes[id].stats.h, params.l2_lambda).unwrap_or(0.0);
        }
        let mut best: Vec<Option<Candidate>> = vec![None; size];
        let mut run: Vec<RunState> = vec![RunState::default(); size];
        let mut miss: Vec<(f64, f64)> = vec![(0.0, 0.0); size];

        for f in 0..x.n_cols() {
            for &id in &frontier {
                run[id] = RunState::default();
                miss[id] = (0.0, 0.0);
            }
            for &r in &cols.missing[f] {
                let r = r as usize;
                let nd = pos[r];
                if nd == INACTIVE || !in_frontier[nd as usize] {
                    continue;
                }
                let nd = nd as usize;
                miss[nd].0 += grad(r);
                miss[nd].1 += hess(r);
            }
            for &r in &cols.sorted[f] {
                let r = r as usize;
                let nd = pos[r];
                if nd == INACTIVE || !in_frontier[nd as usize] {
                    continue;
                }
                let nd = nd as usize;
                let v = x.get(r, f);
                let st = run[nd];
                if st.count > 0 && v > st.prev {
                    // Midpoint between consecutive distinct sorted values;
                    // fall back to the upper value if rounding collapses it.
                    let mut thr = 0.5 * (st.prev + v);
                    if thr <= st.prev {
                        thr = v;
                    }
                    let total = &nodes[nd].stats;
                    let (mg, mh) = miss[nd];
                    // Missing values go left:
                    let gain_left = split_gain(
                        st.cum_g + mg,
                        st.cum_h + mh,
                        total.g - st.cum_g - mg,
                        total.h - st.cum_h - mh,
                        parent_term[nd],
                        params,
                    );
                    // Missing values go right:
                    let gain_right = split_gain(
                        st.cum_g,
                        st.cum_h,
                        total.g - st.cum_g,
                        total.h - st.cum_h,
                        parent_term[nd],
                        params,
                    );
                    let picked = match (gain_left, gain_right) {
                        (Some(l), Some(r)) if r > l => Some((r, false)),
                        (Some(l), _) => Some((l, true)),
                        (None, Some(r)) => Some((r, false)),
                        (None, None) => None,
                    };
                    if let Some((gain, default_left)) = picked {
                        let cand = Candidate {
                            gain,
                            feature: f,
                            threshold: thr,
                            default_left,
                        };
                        if best[nd].is_none_or(|cur| candidate_better(&cand, &cur)) {
                            best[nd] = Some(cand);
                        }
                    }
                }
                let st = &mut run[nd];
                st.cum_g += grad(r);
                st.cum_h += hess(r);
                st.count += 1;
                st.prev = v;
            }
        }

        // Decide splits. A candidate is accepted on strictly positive gain,
        // or on exactly zero gain when the node's gradients are not all
        // identical (a zero-gain split of a gradient-constant node could
        // never help; of a mixed node it can, e.g. XOR-style interactions).
        let mut next_frontier = Vec::new();
        for &id in &frontier {
            let Some(cand) = best[id] else { continue };
            let stats = &nodes[id].stats;
            let accept = cand.gain > 0.0 || (cand.gain == 0.0 && stats.g_min < stats.g_max);
            if !accept {
                continue;
            }
            let left = nodes.len();
            let right = left + 1;
            nodes.push(BuildNode {
                stats: NodeStats::empty(),
                split: None,
                left: 0,
                right: 0,
            });
            nodes.push(BuildNode {
                stats: NodeStats::empty(),
                split: None,
                left: 0,
                right: 0,
            });
            let node = &mut nodes[id];
            node.split = Some(cand);
            node.left = left;
            node.right = right;
            next_frontier.push(left);
            next_frontier.push(right);
        }
        if next_frontier.is_empty() {
            break;
        }
        // Route rows to children and accumulate child stats.
        for (r, slot) in pos.iter_mut().enumerate() {
            if *slot == INACTIVE {
                continue;
            }
            let nd = *slot as usize;
            let Some(cand) = nodes[nd].split else { continue };
            let v = x.get(r, cand.feature);
            let go_left = if v.is_nan() {
                cand.default_left
            } else {
                v < cand.threshold
            };
            let child = if go_left { nodes[nd].left } else { nodes[nd].right };
            *slot = child as u32;
            let (gr, hr) = (grad(r), hess(r));
            nodes[child].stats.add(gr, hr);
        }
        frontier = next_frontier;
    }

    materialize(&nodes, 0, params)
}

fn materialize(nodes: &[BuildNode], id: usize, params: &HyperParams) -> TreeNode {
    let node = &nodes[id];
    match node.split {
        Some(cand) => TreeNode::Split {
            feature: cand.feature,
            threshold: cand.threshold,
            default_left: cand.default_left,
            gain: cand.gain,
            left: Box::new(materialize(nodes, node.left, params)),
            right: Box::new(materialize(nodes, node.right, params)),
        },
        None => TreeNode::Leaf {
            weight: leaf_weight(&node.stats, params),
        },
    }
}

fn subsample_mask(rng: &mut ChaCha8Rng, n: usize, rate: f64) -> Vec<bool> {
    if rate >= 1.0 {
        return vec![true; n];
    }
    let k = ((n as f64) * rate).round().clamp(1.0, n as f64) as usize;
    let mut idx: Vec<u32> = (0..n as u32).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    let mut mask = vec![false; n];
    for &r in &idx[..k] {
        mask[r as usize] = true;
    }
    mask
}

fn base_score(objective: Objective, y: &[u32]) -> Vec<f64> {
    let n = y.len() as f64;
    match objective {
        Objective::BinaryLogistic => {
            let p = (y.iter().filter(|&&l| l == 1).count() as f64 / n)
                .clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            vec![(p / (1.0 - p)).ln()]
        }
        Objective::Softmax { n_classes } => {
            let mut counts = vec![0usize; n_classes];
            for &l in y {
                counts[l as usize] += 1;
            }
            counts
                .iter()
                .map(|&c| (c as f64 / n).max(PROB_CLAMP).ln())
                .collect()
        }
    }
}

/// Train a boosted ensemble.
///
/// Constant labels are allowed: the result is a base-score-only model (no
/// tree ever finds a useful split), flagged in the returned log. When `eval`
/// is provided and `patience > 0`, training stops once the eval log-loss has
/// not improved for `patience` rounds and the ensemble is truncated to the
/// best round.
pub fn train(
    objective: Objective,
    x: &DenseMatrix,
    y: &[u32],
    params: &HyperParams,
    eval: Option<EvalSet<'_>>,
) -> Result<(BoostedModel, TrainLog), BoostError> {
    params.validate()?;
    let n = x.n_rows();
    if n == 0 {
        return Err(BoostError::EmptyTrainingSet);
    }
    if y.len() != n {
        return Err(BoostError::LabelMismatch {
            expected: n,
            got: y.len(),
        });
    }
    let groups = objective.n_groups();
    if let Objective::Softmax { n_classes } = objective {
        if n_classes < 2 {
            return Err(BoostError::InvalidParams(
                "softmax requires at least 2 classes".into(),
            ));
        }
    }
    let label_space = groups.max(2);
    for (i, &l) in y.iter().enumerate() {
        if (l as usize) >= label_space {
            return Err(BoostError::InvalidLabel {
                index: i,
                label: l,
                n_classes: label_space,
            });
        }
    }
    if let Some(ev) = &eval {
        if ev.x.n_cols() != x.n_cols() {
            return Err(BoostError::FeatureCountMismatch {
                expected: x.n_cols(),
                got: ev.x.n_cols(),
            });
        }
        if ev.y.len() != ev.x.n_rows() {
            return Err(BoostError::LabelMismatch {
                expected: ev.x.n_rows(),
                got: ev.y.len(),
            });
        }
    }

    let degenerate = y.windows(2).all(|w| w[0] == w[1]);
    let base = base_score(objective, y);
    let mut scores = Vec::with_capacity(n * groups);
    for _ in 0..n {
        scores.extend_from_slice(&base);
    }
    let mut eval_scores = eval.map(|ev| {
        let mut s = Vec::with_capacity(ev.x.n_rows() * groups);
        for _ in 0..ev.x.n_rows() {
            s.extend_from_slice(&base);
        }
        s
    });

    let cols = presort(x);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut trees: Vec<TreeNode> = Vec::new();
    let mut rounds: Vec<RoundRecord> = Vec::new();
    let mut best_eval = f64::INFINITY;
    let mut best_round: u32 = 0;
    let mut since_best: u32 = 0;
    let mut stopped_early = false;

    for round in 0..params.n_rounds {
        let (g, h) = grad_hess(objective, &scores, y);
        let active = subsample_mask(&mut rng, n, params.subsample);
        for cls in 0..groups {
            let tree = grow_tree(x, &cols, &g, &h, groups, cls, &active, params);
            for (i, row) in x.rows().enumerate() {
                scores[i * groups + cls] += tree.predict_row(row);
            }
            if let (Some(es), Some(ev)) = (eval_scores.as_mut(), eval.as_ref()) {
                for (i, row) in ev.x.rows().enumerate() {
                    es[i * groups + cls] += tree.predict_row(row);
                }
            }
            trees.push(tree);
        }
        let train_loss = mean_logloss(objective, &scores, y);
        let eval_loss = match (&eval_scores, &eval) {
            (Some(es), Some(ev)) => Some(mean_logloss(objective, es, ev.y)),
            _ => None,
        };
        rounds.push(RoundRecord {
            round,
            train_loss,
            eval_loss,
        });
        if let Some(el) = eval_loss {
            if el < best_eval {
                best_eval = el;
                best_round = round;
                since_best = 0;
            } else {
                since_best += 1;
                if params.patience > 0 && since_best >= params.patience {
                    stopped_early = true;
                    break;
                }
            }
        }
    }

    if eval.is_some() && params.patience > 0 {
        trees.truncate((best_round as usize + 1) * groups);
    } else {
        best_round = rounds.last().map(|r| r.round).unwrap_or(0);
    }

    let model = BoostedModel {
        objective,
        params: params.clone(),
        base_score: base,
        n_features: x.n_cols(),
        trees,
    };
    let log = TrainLog {
        rounds,
        best_round,
        stopped_early,
        degenerate_labels: degenerate,
    };
    Ok((model, log))
}
