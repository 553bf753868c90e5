//! Top-down decision-tree induction minimizing an M-alpha Bayes risk.
//!
//! Leaves are expanded breadth first (depth, then left to right). Without
//! privacy the split minimizing the unnormalized risk
//! `sum_leaves w(leaf) phi(w1(leaf) / w(leaf))` is taken and pure leaves stay
//! leaves. With privacy every leaf above the target depth is split by the
//! exponential mechanism with utility `-risk(h (+) (g, leaf))`, sensitivity
//! `3 + 2 alpha (sqrt(m) - 1)` and budget `beta_tree eps / (T d 2^depth)`,
//! so a tree spends exactly `beta_tree eps / T` on its structure.

use std::collections::VecDeque;

use crate::dataset::{Dataset, SplitCandidate};
use crate::error::{Error, Result};
use crate::loss::LossSpec;
use crate::privacy::{
    exponential_mechanism, exponential_probabilities, laplace_mechanism, BudgetAccountant, RandomSource,
};

/// Clamp applied to leaf class probabilities before the link.
pub const Q_CLAMP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaStrategy {
    Fixed(f64),
    /// `alpha_l = err(h_l) / err(h_1)`, starting from the Matsushita loss at
    /// the root and moving toward the 0/1 risk as the tree fits.
    ObjectiveCalibration,
}

impl AlphaStrategy {
    /// The alpha whose canonical link maps leaf probabilities to
    /// predictions. Objective-calibrated trees predict with the Matsushita
    /// link, the loss used at their root.
    pub fn leaf_alpha(&self) -> f64 {
        match *self {
            AlphaStrategy::Fixed(a) => a,
            AlphaStrategy::ObjectiveCalibration => 1.0,
        }
    }
}

/// Privacy parameters of one tree inside an ensemble of `trees` trees
/// sharing a total budget `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivateTreeConfig {
    pub epsilon: f64,
    pub beta_tree: f64,
    pub trees: usize,
    pub output_bound: f64,
}

impl PrivateTreeConfig {
    pub fn beta_pred(&self) -> f64 {
        1.0 - self.beta_tree
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeConfig {
    pub depth: usize,
    pub alpha: AlphaStrategy,
    pub privacy: Option<PrivateTreeConfig>,
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::config("tree depth must be >= 1"));
        }
        if let AlphaStrategy::Fixed(a) = self.alpha {
            LossSpec::m_alpha(a).map_err(|_| Error::config(format!("alpha {a} outside [0, 1]")))?;
        }
        if let Some(p) = &self.privacy {
            if !(p.epsilon > 0.0) || !p.epsilon.is_finite() {
                return Err(Error::config(format!(
                    "epsilon must be finite and > 0, got {}",
                    p.epsilon
                )));
            }
            if !(p.beta_tree > 0.0 && p.beta_tree < 1.0) {
                return Err(Error::config(format!(
                    "beta_tree must lie in (0, 1), got {}",
                    p.beta_tree
                )));
            }
            if p.trees == 0 {
                return Err(Error::config("number of trees must be >= 1"));
            }
            if !(p.output_bound > 0.0) || !p.output_bound.is_finite() {
                return Err(Error::config(format!(
                    "output bound M must be > 0, got {}",
                    p.output_bound
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeafStats {
    /// Total weight reaching the leaf.
    pub w: f64,
    /// Weight of the positive examples reaching the leaf.
    pub w1: f64,
    /// `w1 / w` clamped to `[Q_CLAMP, 1 - Q_CLAMP]`; 1/2 for empty leaves.
    pub q: f64,
    pub prediction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Split {
        split: SplitCandidate,
        left: usize,
        right: usize,
        /// Position of this split in the induction order.
        order: usize,
    },
    Leaf(LeafStats),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub depth: usize,
    pub kind: NodeKind,
}

/// What happened at one split, in induction order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRecord {
    pub node: usize,
    pub depth: usize,
    pub split: SplitCandidate,
    pub alpha: f64,
    /// Budget spent selecting the split; 0 without privacy.
    pub epsilon: f64,
    /// Unnormalized risk of the tree before the split, at `alpha`.
    pub risk_before: f64,
    /// Utility of the chosen split at sampling time: minus the unnormalized
    /// risk of the tree after the split, at `alpha`.
    pub utility: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    leaf_alpha: f64,
    splits: Vec<SplitRecord>,
}

impl DecisionTree {
    /// Assembles a tree from an arena whose node 0 is the root.
    pub fn from_parts(nodes: Vec<Node>, leaf_alpha: f64, splits: Vec<SplitRecord>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::domain("tree has no nodes"));
        }
        for n in &nodes {
            if let NodeKind::Split { left, right, .. } = n.kind {
                if left >= nodes.len() || right >= nodes.len() {
                    return Err(Error::domain("child index out of range"));
                }
            }
        }
        Ok(DecisionTree {
            nodes,
            leaf_alpha,
            splits,
        })
    }

    /// A single-leaf tree.
    pub fn constant(prediction: f64) -> Self {
        DecisionTree {
            nodes: vec![Node {
                depth: 0,
                kind: NodeKind::Leaf(LeafStats {
                    w: 0.0,
                    w1: 0.0,
                    q: 0.5,
                    prediction,
                }),
            }],
            leaf_alpha: 1.0,
            splits: Vec::new(),
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf_alpha(&self) -> f64 {
        self.leaf_alpha
    }

    pub fn splits(&self) -> &[SplitRecord] {
        &self.splits
    }

    pub fn alpha_trace(&self) -> Vec<f64> {
        self.splits.iter().map(|s| s.alpha).collect()
    }

    pub fn budget_trace(&self) -> Vec<f64> {
        self.splits.iter().map(|s| s.epsilon).collect()
    }

    pub fn leaves(&self) -> impl Iterator<Item = (usize, &Node, &LeafStats)> {
        self.nodes.iter().enumerate().filter_map(|(i, n)| match &n.kind {
            NodeKind::Leaf(s) => Some((i, n, s)),
            NodeKind::Split { .. } => None,
        })
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves().count()
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn mean_leaf_depth(&self) -> f64 {
        let (sum, n) = self
            .leaves()
            .fold((0usize, 0usize), |(s, n), (_, node, _)| (s + node.depth, n + 1));
        sum as f64 / n as f64
    }

    /// Index of the leaf reached by `row`.
    pub fn leaf_of(&self, row: &[u16]) -> usize {
        self.node_at_split_limit(row, usize::MAX)
    }

    /// Routes `row` down the tree, treating any split made at induction
    /// step `limit` or later as a leaf.
    fn node_at_split_limit(&self, row: &[u16], limit: usize) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i].kind {
                NodeKind::Split {
                    split,
                    left,
                    right,
                    order,
                } if *order < limit => {
                    i = if split.goes_left(row) { *left } else { *right };
                }
                _ => return i,
            }
        }
    }

    /// Raw (unclamped) leaf prediction for `row`.
    pub fn predict(&self, row: &[u16]) -> f64 {
        match &self.nodes[self.leaf_of(row)].kind {
            NodeKind::Leaf(s) => s.prediction,
            NodeKind::Split { .. } => unreachable!("routing ends at a leaf"),
        }
    }

    /// Path of node indices from the root to `node`, inclusive.
    pub fn path_to(&self, node: usize) -> Option<Vec<usize>> {
        fn walk(t: &DecisionTree, at: usize, target: usize, path: &mut Vec<usize>) -> bool {
            path.push(at);
            if at == target {
                return true;
            }
            if let NodeKind::Split { left, right, .. } = t.nodes[at].kind {
                if walk(t, left, target, path) || walk(t, right, target, path) {
                    return true;
                }
            }
            path.pop();
            false
        }
        let mut path = Vec::new();
        walk(self, 0, node, &mut path).then_some(path)
    }

    /// Unnormalized risk of the tree as it stood after its first `k` splits.
    pub fn risk_after_splits(&self, k: usize, dataset: &Dataset, weights: &[f64], alpha: f64) -> f64 {
        let loss = LossSpec::MAlpha(alpha);
        let mut acc = vec![(0.0f64, 0.0f64); self.nodes.len()];
        for i in 0..dataset.len() {
            let n = self.node_at_split_limit(dataset.row(i), k);
            acc[n].0 += weights[i];
            if dataset.label(i) > 0 {
                acc[n].1 += weights[i];
            }
        }
        acc.iter().map(|&(w, w1)| leaf_risk(loss, w, w1)).sum()
    }

    /// Replaces a leaf by its released value, dropping the raw statistics.
    pub(crate) fn release_leaf(&mut self, leaf: usize, value: f64) {
        if let NodeKind::Leaf(s) = &mut self.nodes[leaf].kind {
            *s = LeafStats {
                w: 0.0,
                w1: 0.0,
                q: 0.5,
                prediction: value,
            };
        }
    }
}

#[inline]
fn leaf_risk(loss: LossSpec, w: f64, w1: f64) -> f64 {
    if w <= 0.0 {
        0.0
    } else {
        w * loss.phi((w1 / w).clamp(0.0, 1.0))
    }
}

/// `sum_leaves w(leaf) phi_alpha(w1(leaf) / w(leaf))`; empty leaves add 0.
pub fn unnormalized_risk(tree: &DecisionTree, dataset: &Dataset, weights: &[f64], alpha: f64) -> f64 {
    tree.risk_after_splits(usize::MAX, dataset, weights, alpha)
}

/// Budget of a split at `depth` in a depth-`d` tree of an ensemble of `trees`
/// trees: `beta_tree eps / (T d 2^depth)`.
pub fn split_budget(depth: usize, d: usize, trees: usize, beta_tree: f64, epsilon: f64) -> Result<f64> {
    if depth >= d {
        return Err(Error::domain(format!(
            "split depth {depth} must be below tree depth {d}"
        )));
    }
    if trees == 0 {
        return Err(Error::domain("number of trees must be >= 1"));
    }
    Ok(beta_tree * epsilon / (trees as f64 * d as f64 * (depth as f64).exp2()))
}

/// `err(h_l) / err(h_1)` clamped to `[0, 1]`; 1 when the root makes no error.
pub fn objective_calibration_alpha(err_current: f64, err_root: f64) -> f64 {
    if err_root <= 0.0 {
        return 1.0;
    }
    (err_current / err_root).clamp(0.0, 1.0)
}

/// Whether `alphas` grows at most as `a_l <= a_(l-1) exp(k w_l (1 - a_(l-1)))`
/// where `weights[l]` is the normalized weight of the leaf split at step l.
pub fn is_k_monotonic(alphas: &[f64], weights: &[f64], k: f64) -> bool {
    alphas
        .windows(2)
        .zip(weights.iter().skip(1))
        .all(|(a, &w)| a[1] <= a[0] * (k * w * (1.0 - a[0])).exp() + 1e-15)
}

/// Per-leaf bookkeeping during induction.
#[derive(Debug, Clone, Default)]
struct Acc {
    w: f64,
    w1: f64,
    n_pos: usize,
    n_neg: usize,
}

impl Acc {
    fn of(dataset: &Dataset, weights: &[f64], members: &[usize]) -> Acc {
        let mut a = Acc::default();
        for &i in members {
            a.w += weights[i];
            if dataset.label(i) > 0 {
                a.w1 += weights[i];
                a.n_pos += 1;
            } else {
                a.n_neg += 1;
            }
        }
        a
    }

    /// Unweighted errors when the leaf predicts the sign of its link, which
    /// is +1 exactly when `w1 / w > 1/2` (ties predict -1).
    fn errors(&self) -> usize {
        if self.w > 0.0 && self.w1 / self.w > 0.5 {
            self.n_neg
        } else {
            self.n_pos
        }
    }

    fn is_pure(&self) -> bool {
        self.n_pos == 0 || self.n_neg == 0
    }
}

/// Grows one tree on `dataset` under the example `weights` (each > 0).
pub fn induce_tree(
    dataset: &Dataset,
    weights: &[f64],
    config: &TreeConfig,
    accountant: &mut BudgetAccountant,
    rng: &mut RandomSource,
) -> Result<DecisionTree> {
    config.validate()?;
    if weights.len() != dataset.len() {
        return Err(Error::domain("weight vector length mismatch"));
    }
    if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::domain("weights must be finite and > 0"));
    }
    let candidates = dataset.candidate_splits();
    if candidates.is_empty() {
        return Err(Error::Degenerate("no split candidates".into()));
    }
    if let Some(p) = &config.privacy {
        let need = p.beta_tree * p.epsilon / p.trees as f64;
        if !accountant.can_spend(need) {
            return Err(Error::BudgetExceeded {
                requested: need,
                remaining: accountant.remaining(),
            });
        }
    }

    let m = dataset.len();
    let d = config.depth;
    let mut nodes = vec![Node {
        depth: 0,
        kind: NodeKind::Leaf(LeafStats {
            w: 0.0,
            w1: 0.0,
            q: 0.5,
            prediction: 0.0,
        }),
    }];
    let mut members: Vec<Vec<usize>> = vec![(0..m).collect()];
    let mut accs: Vec<Acc> = vec![Acc::of(dataset, weights, &members[0])];
    let mut is_leaf = vec![true];
    let mut splits = Vec::new();

    let err_root = accs[0].errors() as f64 / m as f64;
    let mut prev_alpha = 1.0f64;
    let mut queue = VecDeque::from([0usize]);
    let mut hist = Histogram::new(dataset);

    while let Some(node) = queue.pop_front() {
        let depth = nodes[node].depth;
        if depth >= d {
            continue;
        }
        if config.privacy.is_none() && accs[node].is_pure() {
            continue;
        }
        let alpha = match config.alpha {
            AlphaStrategy::Fixed(a) => a,
            AlphaStrategy::ObjectiveCalibration => {
                let errors: usize = (0..nodes.len()).filter(|&i| is_leaf[i]).map(|i| accs[i].errors()).sum();
                let ratio = objective_calibration_alpha(errors as f64 / m as f64, err_root);
                // unweighted errors may tick up under non-uniform weights
                ratio.min(prev_alpha)
            }
        };
        prev_alpha = alpha;
        let loss = LossSpec::MAlpha(alpha);

        let risk_before: f64 = (0..nodes.len())
            .filter(|&i| is_leaf[i])
            .map(|i| leaf_risk(loss, accs[i].w, accs[i].w1))
            .sum();
        let rest = risk_before - leaf_risk(loss, accs[node].w, accs[node].w1);

        hist.fill(dataset, weights, &members[node]);
        let sides = hist.sides(&candidates);
        let utilities: Vec<f64> = sides
            .iter()
            .map(|&((wl, w1l), (wr, w1r))| -(rest + leaf_risk(loss, wl, w1l) + leaf_risk(loss, wr, w1r)))
            .collect();

        let (choice, epsilon) = match &config.privacy {
            Some(p) => {
                let eps = split_budget(depth, d, p.trees, p.beta_tree, p.epsilon)?;
                let sensitivity = loss.sensitivity_bound(m);
                let label = format!("split/depth={depth}");
                (
                    exponential_mechanism(&utilities, sensitivity, eps, &label, accountant, rng)?,
                    eps,
                )
            }
            None => {
                let best = sides
                    .iter()
                    .enumerate()
                    .filter(|(_, ((wl, _), (wr, _)))| *wl > 0.0 && *wr > 0.0)
                    .fold(None::<usize>, |best, (c, _)| match best {
                        Some(b) if utilities[b] >= utilities[c] => Some(b),
                        _ => Some(c),
                    });
                match best {
                    Some(c) => (c, 0.0),
                    None => continue,
                }
            }
        };

        let split = candidates[choice];
        let (left_members, right_members): (Vec<usize>, Vec<usize>) =
            members[node].iter().partition(|&&i| split.goes_left(dataset.row(i)));
        let left = nodes.len();
        let right = left + 1;
        for side in [left_members, right_members] {
            accs.push(Acc::of(dataset, weights, &side));
            members.push(side);
            is_leaf.push(true);
            nodes.push(Node {
                depth: depth + 1,
                kind: NodeKind::Leaf(LeafStats {
                    w: 0.0,
                    w1: 0.0,
                    q: 0.5,
                    prediction: 0.0,
                }),
            });
        }
        members[node] = Vec::new();
        is_leaf[node] = false;
        nodes[node].kind = NodeKind::Split {
            split,
            left,
            right,
            order: splits.len(),
        };
        splits.push(SplitRecord {
            node,
            depth,
            split,
            alpha,
            epsilon,
            risk_before,
            utility: utilities[choice],
        });
        queue.push_back(left);
        queue.push_back(right);
    }

    let leaf_loss = LossSpec::MAlpha(config.alpha.leaf_alpha());
    for (i, node) in nodes.iter_mut().enumerate() {
        if is_leaf[i] {
            let a = &accs[i];
            let stats = if a.w > 0.0 {
                let q = (a.w1 / a.w).clamp(Q_CLAMP, 1.0 - Q_CLAMP);
                LeafStats {
                    w: a.w,
                    w1: a.w1,
                    q,
                    prediction: leaf_loss.link_unchecked(q),
                }
            } else {
                LeafStats {
                    w: 0.0,
                    w1: 0.0,
                    q: 0.5,
                    prediction: 0.0,
                }
            };
            node.kind = NodeKind::Leaf(stats);
        }
    }
    Ok(DecisionTree {
        nodes,
        leaf_alpha: config.alpha.leaf_alpha(),
        splits,
    })
}

/// Exact selection probabilities of the private split at the root of a tree
/// grown on `dataset`: exponential mechanism over all candidates with
/// utility `-risk` under `MAlpha(alpha)`, sensitivity
/// `sensitivity_bound(m)` and budget `epsilon_node`.
pub fn root_split_probabilities(dataset: &Dataset, weights: &[f64], alpha: f64, epsilon_node: f64) -> Result<Vec<f64>> {
    let loss = LossSpec::m_alpha(alpha)?;
    if weights.len() != dataset.len() {
        return Err(Error::domain("weight vector length mismatch"));
    }
    let candidates = dataset.candidate_splits();
    let mut hist = Histogram::new(dataset);
    let all: Vec<usize> = (0..dataset.len()).collect();
    hist.fill(dataset, weights, &all);
    let utilities: Vec<f64> = hist
        .sides(&candidates)
        .iter()
        .map(|&((wl, w1l), (wr, w1r))| -(leaf_risk(loss, wl, w1l) + leaf_risk(loss, wr, w1r)))
        .collect();
    exponential_probabilities(&utilities, loss.sensitivity_bound(dataset.len()), epsilon_node)
}

/// Per-attribute, per-bin weight histograms of one leaf.
struct Histogram {
    offsets: Vec<usize>,
    w: Vec<f64>,
    w1: Vec<f64>,
}

impl Histogram {
    fn new(dataset: &Dataset) -> Self {
        let mut offsets = Vec::with_capacity(dataset.num_attributes() + 1);
        let mut total = 0;
        for d in dataset.domains() {
            offsets.push(total);
            total += d.nvpriv;
        }
        offsets.push(total);
        Histogram {
            offsets,
            w: vec![0.0; total],
            w1: vec![0.0; total],
        }
    }

    fn fill(&mut self, dataset: &Dataset, weights: &[f64], members: &[usize]) {
        self.w.iter_mut().for_each(|x| *x = 0.0);
        self.w1.iter_mut().for_each(|x| *x = 0.0);
        for &i in members {
            let pos = dataset.label(i) > 0;
            for (a, &b) in dataset.row(i).iter().enumerate() {
                let k = self.offsets[a] + b as usize;
                self.w[k] += weights[i];
                if pos {
                    self.w1[k] += weights[i];
                }
            }
        }
    }

    /// `((w_left, w1_left), (w_right, w1_right))` for every candidate.
    fn sides(&self, candidates: &[SplitCandidate]) -> Vec<((f64, f64), (f64, f64))> {
        let attrs = self.offsets.len() - 1;
        let mut prefix_w = vec![0.0; self.w.len()];
        let mut prefix_w1 = vec![0.0; self.w.len()];
        let mut totals = vec![(0.0, 0.0); attrs];
        for a in 0..attrs {
            let (mut sw, mut sw1) = (0.0, 0.0);
            for k in self.offsets[a]..self.offsets[a + 1] {
                sw += self.w[k];
                sw1 += self.w1[k];
                prefix_w[k] = sw;
                prefix_w1[k] = sw1;
            }
            totals[a] = (sw, sw1);
        }
        candidates
            .iter()
            .map(|c| {
                let k = self.offsets[c.attribute] + c.threshold as usize;
                let (tw, tw1) = totals[c.attribute];
                let (lw, lw1) = (prefix_w[k], prefix_w1[k]);
                // right side by subtraction can go slightly negative
                ((lw, lw1), ((tw - lw).max(0.0), (tw1 - lw1).max(0.0)))
            })
            .collect()
    }
}

/// Clamps every leaf prediction to `[-M, M]` and releases it with Laplace
/// noise of scale `2M / eps_leaf`, `eps_leaf = beta_pred eps / (T L)` for `L`
/// leaves. The noisy values are not clamped again, and the released leaves
/// keep no raw statistics.
pub fn noisify_leaves(
    tree: &DecisionTree,
    beta_pred: f64,
    epsilon: f64,
    trees: usize,
    output_bound: f64,
    accountant: &mut BudgetAccountant,
    rng: &mut RandomSource,
) -> Result<DecisionTree> {
    if !(output_bound > 0.0) || !output_bound.is_finite() {
        return Err(Error::domain(format!("output bound must be > 0, got {output_bound}")));
    }
    if !(beta_pred > 0.0 && beta_pred <= 1.0) || trees == 0 {
        return Err(Error::domain("beta_pred must lie in (0, 1] and trees >= 1"));
    }
    let leaves: Vec<(usize, f64)> = tree.leaves().map(|(i, _, s)| (i, s.prediction)).collect();
    let eps_leaf = leaf_budget(beta_pred, epsilon, trees, leaves.len());
    let need = eps_leaf * leaves.len() as f64;
    if !accountant.can_spend(need) {
        return Err(Error::BudgetExceeded {
            requested: need,
            remaining: accountant.remaining(),
        });
    }
    let mut out = tree.clone();
    for (i, raw) in leaves {
        let clamped = raw.clamp(-output_bound, output_bound);
        let noisy = laplace_mechanism(clamped, 2.0 * output_bound, eps_leaf, "leaf", accountant, rng)?;
        out.release_leaf(i, noisy);
    }
    Ok(out)
}

/// `beta_pred eps / (T L)`.
pub fn leaf_budget(beta_pred: f64, epsilon: f64, trees: usize, leaves: usize) -> f64 {
    beta_pred * epsilon / (trees as f64 * leaves as f64)
}

/// Unweighted fraction of examples whose label disagrees with the sign of
/// the tree's prediction (0 predicts -1).
pub fn training_error(tree: &DecisionTree, dataset: &Dataset) -> f64 {
    let wrong = (0..dataset.len())
        .filter(|&i| {
            let label = if tree.predict(dataset.row(i)) > 0.0 { 1 } else { -1 };
            label != dataset.label(i)
        })
        .count();
    wrong as f64 / dataset.len() as f64
}

/// Tree efficiency `J(node, h) = 8 w~(node) err(h)^2 / 2^depth(node)` with
/// `w~(node)` the normalized weight reaching `node`.
pub fn tree_efficiency(node: usize, tree: &DecisionTree, dataset: &Dataset, weights: &[f64]) -> Result<f64> {
    let target = tree
        .nodes()
        .get(node)
        .ok_or_else(|| Error::domain(format!("node {node} not in tree")))?;
    let path = tree
        .path_to(node)
        .ok_or_else(|| Error::domain(format!("node {node} unreachable")))?;
    let total: f64 = weights.iter().sum();
    let mut reach = 0.0;
    for i in 0..dataset.len() {
        let row = dataset.row(i);
        let mut at = 0;
        let mut on_path = true;
        for &next in &path[1..] {
            match tree.nodes()[at].kind {
                NodeKind::Split { split, left, right, .. } => {
                    let go = if split.goes_left(row) { left } else { right };
                    if go != next {
                        on_path = false;
                        break;
                    }
                    at = go;
                }
                NodeKind::Leaf(_) => unreachable!("paths only descend through splits"),
            }
        }
        if on_path {
            reach += weights[i];
        }
    }
    let err = training_error(tree, dataset);
    Ok(8.0 * (reach / total) * err * err / (target.depth as f64).exp2())
}
