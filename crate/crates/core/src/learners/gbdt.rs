//! One-vs-rest gradient boosting on logistic loss with exact greedy splits.
//!
//! Trees grow level by level. Each feature is sorted once per fit, and a
//! level's split search is a single pass over every sorted feature with
//! running left-side statistics kept per frontier node.

use serde::{Deserialize, Serialize};

use super::early_stop::{EarlyStopping, Observation};
use super::Probabilities;
use crate::error::{Error, Result};
use crate::metrics::Metric;

/// L2 penalty on leaf weights.
pub const LEAF_L2: f64 = 1.0;

const NO_NODE: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbdtParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub patience: usize,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            n_trees: 200,
            learning_rate: 0.1,
            max_depth: 6,
            min_samples_leaf: 1,
            patience: 50,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees < 1 {
            return Err(Error::Config("n_trees must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config(format!(
                "learning_rate must be in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if self.patience < 1 {
            return Err(Error::Config("patience must be >= 1".into()));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::Config("min_samples_leaf must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// A boosted ensemble per class: `score_k(x) = base_k + sum of tree outputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub n_features: usize,
    pub base_scores: Vec<f64>,
    /// `rounds[t][k]` is the tree for class `k` added in round `t`.
    pub rounds: Vec<Vec<Tree>>,
}

impl GbdtModel {
    pub fn n_classes(&self) -> usize {
        self.base_scores.len()
    }

    pub fn raw_scores(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.base_scores.clone();
        for round in &self.rounds {
            for (k, tree) in round.iter().enumerate() {
                s[k] += tree.predict(x);
            }
        }
        s
    }

    pub fn predict_proba(&self, values: &[f64], n_rows: usize) -> Probabilities {
        let k = self.n_classes();
        let mut out = Vec::with_capacity(n_rows * k);
        for x in values.chunks_exact(self.n_features).take(n_rows) {
            push_normalized_sigmoids(&self.raw_scores(x), &mut out);
        }
        Probabilities::new(k, out)
    }

    /// Total split gain per feature, normalized to sum to 1.
    pub fn feature_importances(&self) -> Vec<f64> {
        let mut imp = vec![0.0; self.n_features];
        for tree in self.rounds.iter().flatten() {
            for node in &tree.nodes {
                if let Node::Split { feature, gain, .. } = node {
                    imp[*feature] += gain.max(0.0);
                }
            }
        }
        let total: f64 = imp.iter().sum();
        if total > 0.0 {
            imp.iter_mut().for_each(|v| *v /= total);
        }
        imp
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn push_normalized_sigmoids(scores: &[f64], out: &mut Vec<f64>) {
    let start = out.len();
    out.extend(scores.iter().map(|&s| sigmoid(s).max(1e-300)));
    let total: f64 = out[start..].iter().sum();
    out[start..].iter_mut().for_each(|p| *p /= total);
}

struct Frontier {
    tree_node: usize,
    grad: f64,
    hess: f64,
    count: usize,
    g_min: f64,
    g_max: f64,
}

#[derive(Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
    grad_left: f64,
    hess_left: f64,
    count_left: usize,
}

#[derive(Clone, Copy)]
struct Running {
    grad: f64,
    hess: f64,
    count: usize,
    last: f64,
    started: bool,
}

fn leaf_weight(grad: f64, hess: f64) -> f64 {
    -grad / (hess + LEAF_L2)
}

fn score(grad: f64, hess: f64) -> f64 {
    grad * grad / (hess + LEAF_L2)
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let t = lo + (hi - lo) * 0.5;
    if t >= hi {
        lo
    } else {
        t
    }
}

/// Grows one regression tree on gradients `g` and hessians `h`.
///
/// `sorted[f]` lists row indices ordered by feature `f`. Splits are searched in
/// ascending feature then threshold order and replace the incumbent only on
/// strictly larger gain. A node is split when its best gain is non-negative
/// and its gradients are not all equal; zero-gain splits are what lets a tree
/// separate XOR-like patterns whose first split has no marginal benefit.
pub(crate) fn grow_tree(
    values: &[f64],
    m: usize,
    sorted: &[Vec<u32>],
    g: &[f64],
    h: &[f64],
    params: &GbdtParams,
) -> Tree {
    let n = g.len();
    let lr = params.learning_rate;
    let msl = params.min_samples_leaf;
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut node_of = vec![0u32; n];
    let (gs, hs) = (g.iter().sum::<f64>(), h.iter().sum::<f64>());
    let (g_min, g_max) = g
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mut frontier = vec![Frontier {
        tree_node: 0,
        grad: gs,
        hess: hs,
        count: n,
        g_min,
        g_max,
    }];

    for _depth in 0..params.max_depth {
        if frontier.is_empty() {
            break;
        }
        let mut best: Vec<Option<Candidate>> = vec![None; frontier.len()];
        let fresh = Running {
            grad: 0.0,
            hess: 0.0,
            count: 0,
            last: 0.0,
            started: false,
        };
        let mut run = vec![fresh; frontier.len()];
        for (f, order) in sorted.iter().enumerate() {
            run.iter_mut().for_each(|r| *r = fresh);
            for &r in order {
                let r = r as usize;
                let a = node_of[r];
                if a == NO_NODE {
                    continue;
                }
                let a = a as usize;
                let v = values[r * m + f];
                let acc = &mut run[a];
                if acc.started && v > acc.last {
                    let node = &frontier[a];
                    let count_right = node.count - acc.count;
                    if acc.count >= msl && count_right >= msl {
                        let gain = score(acc.grad, acc.hess)
                            + score(node.grad - acc.grad, node.hess - acc.hess)
                            - score(node.grad, node.hess);
                        if best[a].is_none_or(|b| gain > b.gain) {
                            best[a] = Some(Candidate {
                                feature: f,
                                threshold: midpoint(acc.last, v),
                                gain,
                                grad_left: acc.grad,
                                hess_left: acc.hess,
                                count_left: acc.count,
                            });
                        }
                    }
                }
                acc.grad += g[r];
                acc.hess += h[r];
                acc.count += 1;
                acc.last = v;
                acc.started = true;
            }
        }

        // Map frontier index -> (left, right) new frontier indices.
        let mut children: Vec<Option<(u32, u32, usize, f64)>> = vec![None; frontier.len()];
        let mut next = Vec::new();
        for (a, node) in frontier.iter().enumerate() {
            let split = best[a].filter(|c| c.gain >= -1e-12 && node.g_max - node.g_min > 1e-12);
            match split {
                Some(c) => {
                    let left = nodes.len();
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes[node.tree_node] = Node::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        gain: c.gain.max(0.0),
                        left,
                        right: left + 1,
                    };
                    let li = next.len() as u32;
                    next.push(Frontier {
                        tree_node: left,
                        grad: c.grad_left,
                        hess: c.hess_left,
                        count: c.count_left,
                        g_min: f64::INFINITY,
                        g_max: f64::NEG_INFINITY,
                    });
                    next.push(Frontier {
                        tree_node: left + 1,
                        grad: node.grad - c.grad_left,
                        hess: node.hess - c.hess_left,
                        count: node.count - c.count_left,
                        g_min: f64::INFINITY,
                        g_max: f64::NEG_INFINITY,
                    });
                    children[a] = Some((li, li + 1, c.feature, c.threshold));
                }
                None => {
                    nodes[node.tree_node] = Node::Leaf {
                        value: lr * leaf_weight(node.grad, node.hess),
                    };
                }
            }
        }
        for r in 0..n {
            let a = node_of[r];
            if a == NO_NODE {
                continue;
            }
            node_of[r] = match children[a as usize] {
                Some((l, rt, f, t)) => {
                    let c = if values[r * m + f] <= t { l } else { rt };
                    let fr = &mut next[c as usize];
                    fr.g_min = fr.g_min.min(g[r]);
                    fr.g_max = fr.g_max.max(g[r]);
                    c
                }
                None => NO_NODE,
            };
        }
        frontier = next;
    }
    for node in &frontier {
        nodes[node.tree_node] = Node::Leaf {
            value: lr * leaf_weight(node.grad, node.hess),
        };
    }
    Tree { nodes }
}

pub(crate) fn presort(values: &[f64], n: usize, m: usize) -> Vec<Vec<u32>> {
    (0..m)
        .map(|f| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| {
                values[a as usize * m + f]
                    .total_cmp(&values[b as usize * m + f])
                    .then(a.cmp(&b))
            });
            idx
        })
        .collect()
}

pub(crate) struct FitOutput {
    pub model: GbdtModel,
    pub trace: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn fit(
    params: &GbdtParams,
    n_classes: usize,
    m: usize,
    train: &[f64],
    y: &[usize],
    weights: &[f64],
    valid: &[f64],
    valid_y: &[usize],
    metric: Metric,
) -> Result<FitOutput> {
    params.validate()?;
    let n = y.len();
    let total_w: f64 = weights.iter().sum();
    let base_scores: Vec<f64> = (0..n_classes)
        .map(|k| {
            let pos: f64 = y
                .iter()
                .zip(weights)
                .filter(|(&yi, _)| yi == k)
                .map(|(_, w)| w)
                .sum();
            let p = (pos / total_w).clamp(1e-6, 1.0 - 1e-6);
            (p / (1.0 - p)).ln()
        })
        .collect();
    let sorted = presort(train, n, m);
    let mut f_train: Vec<Vec<f64>> = base_scores.iter().map(|&b| vec![b; n]).collect();
    let nv = valid_y.len();
    let mut f_valid: Vec<Vec<f64>> = base_scores.iter().map(|&b| vec![b; nv]).collect();
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    let mut rounds = Vec::new();
    let mut trace = Vec::new();
    let mut stopper = EarlyStopping::new(params.patience);

    for _ in 0..params.n_trees {
        let mut round = Vec::with_capacity(n_classes);
        for k in 0..n_classes {
            for i in 0..n {
                let p = sigmoid(f_train[k][i]);
                let target = if y[i] == k { 1.0 } else { 0.0 };
                g[i] = weights[i] * (p - target);
                h[i] = weights[i] * (p * (1.0 - p)).max(1e-16);
            }
            let tree = grow_tree(train, m, &sorted, &g, &h, params);
            for i in 0..n {
                f_train[k][i] += tree.predict(&train[i * m..(i + 1) * m]);
            }
            for i in 0..nv {
                f_valid[k][i] += tree.predict(&valid[i * m..(i + 1) * m]);
            }
            round.push(tree);
        }
        rounds.push(round);
        let pred: Vec<usize> = (0..nv)
            .map(|i| argmax((0..n_classes).map(|k| f_valid[k][i])))
            .collect();
        let score = metric.from_labels(valid_y, &pred, n_classes)?;
        trace.push(score);
        if stopper.observe(score) == Observation::Stop {
            break;
        }
    }
    let keep = stopper.best_round().map_or(rounds.len(), |r| r + 1);
    rounds.truncate(keep);
    Ok(FitOutput {
        model: GbdtModel {
            n_features: m,
            base_scores,
            rounds,
        },
        trace,
    })
}

/// Index of the largest value, lowest index on ties.
pub(crate) fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit_simple(x: &[f64], m: usize, y: &[usize], params: &GbdtParams) -> FitOutput {
        let w = vec![1.0; y.len()];
        fit(params, 2, m, x, y, &w, x, y, Metric::MacroF1).unwrap()
    }

    #[test]
    fn xor_is_shattered_at_depth_two() {
        let x = [0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0];
        let y = [0, 1, 1, 0];
        let params = GbdtParams {
            n_trees: 5,
            max_depth: 2,
            min_samples_leaf: 1,
            ..GbdtParams::default()
        };
        let out = fit_simple(&x, 2, &y, &params);
        let proba = out.model.predict_proba(&x, 4);
        assert_eq!(proba.predictions(), y.to_vec());
        assert!(out.model.rounds[0].iter().all(|t| t.depth() == 2));
    }

    #[test]
    fn depth_one_cannot_shatter_xor() {
        // Brute force over every axis-aligned stump labeling of the 4 points.
        let x = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let y = [0, 1, 1, 0];
        let mut any = false;
        for f in 0..2 {
            for left_label in 0..2 {
                let pred: Vec<usize> = x
                    .iter()
                    .map(|r| if r[f] <= 0.5 { left_label } else { 1 - left_label })
                    .collect();
                any |= pred == y;
            }
        }
        assert!(!any);
    }

    #[test]
    fn pure_leaf_dominates() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let y: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
        let out = fit_simple(&x, 1, &y, &GbdtParams::default());
        let p = out.model.predict_proba(&x, 20);
        for i in 0..20 {
            assert!(p.row(i)[y[i]] > 0.5);
        }
    }

    #[test]
    fn trace_length_respects_patience() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let y: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
        let params = GbdtParams {
            patience: 1,
            ..GbdtParams::default()
        };
        let out = fit_simple(&x, 1, &y, &params);
        // Perfect after round 1, so round 2 is the first non-improvement. It
        // ties the best score, so it is the round that is kept.
        assert_eq!(out.trace, vec![1.0, 1.0]);
        assert_eq!(out.model.rounds.len(), 2);
    }

    #[test]
    fn params_validation() {
        let bad = GbdtParams {
            learning_rate: 0.0,
            ..GbdtParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = GbdtParams {
            n_trees: 0,
            ..GbdtParams::default()
        };
        assert!(bad.validate().is_err());
    }
}
