//! Boosted linear combinations of trees and DP random-forest baselines.
//!
//! Boosting keeps one weight per example, starting at 1/2. Each round grows
//! a tree on the current weights, computes its leveraging coefficient
//! `beta_t = (a / m) sum_i w_i y_i h_t(x_i)` from the (released) tree
//! clamped to `[-M, M]`, then applies the mirror update of the M-alpha loss
//! `w_i <- link^-1(-beta_t y_i h_t(x_i) + link(w_i))`.

use crate::dataset::{AttributeDomain, Dataset};
use crate::error::{Error, Result};
use crate::loss::LossSpec;
use crate::privacy::{exponential_mechanism, laplace_sample, BudgetAccountant, RandomSource};
use crate::tree::{induce_tree, noisify_leaves, DecisionTree, LeafStats, Node, NodeKind, TreeConfig};

/// Lower clamp of boosting weights; the upper clamp is `1 - WEIGHT_CLAMP`.
pub const WEIGHT_CLAMP: f64 = 1e-12;

/// Anything that scores a quantized row.
pub trait Classifier {
    /// Real-valued score whose sign is the predicted class.
    fn margin(&self, row: &[u16]) -> f64;

    /// `sign(margin)`, with margin 0 predicting -1.
    fn predict_label(&self, row: &[u16]) -> i8 {
        if self.margin(row) > 0.0 {
            1
        } else {
            -1
        }
    }
}

/// Unweighted fraction of sign-mispredicted examples.
pub fn empirical_risk(model: &impl Classifier, dataset: &Dataset) -> f64 {
    if dataset.is_empty() {
        return 0.0;
    }
    let wrong = (0..dataset.len())
        .filter(|&i| model.predict_label(dataset.row(i)) != dataset.label(i))
        .count();
    wrong as f64 / dataset.len() as f64
}

/// `sum_i w~_i y_i h_i`.
pub fn edge(normalized_weights: &[f64], predictions: &[f64], labels: &[i8]) -> f64 {
    normalized_weights
        .iter()
        .zip(predictions)
        .zip(labels)
        .map(|((w, h), &y)| w * y as f64 * h)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostConfig {
    pub rounds: usize,
    pub tree: TreeConfig,
    /// Alpha of the loss whose mirror update drives the weights.
    pub lc_alpha: f64,
    pub output_bound: f64,
    /// Slack `pi` in `[0, 1)` around the default leveraging constant.
    pub pi: f64,
    /// Multiplier on `lc_alpha / M^2`, within `[1 - pi, 1 + pi]`.
    pub a_scale: f64,
}

impl BoostConfig {
    pub fn new(rounds: usize, tree: TreeConfig, output_bound: f64) -> Self {
        BoostConfig {
            rounds,
            tree,
            lc_alpha: 1.0,
            output_bound,
            pi: 0.0,
            a_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.tree.validate()?;
        if self.rounds == 0 {
            return Err(Error::config("number of boosting rounds must be >= 1"));
        }
        if !(self.lc_alpha > 0.0 && self.lc_alpha <= 1.0) {
            return Err(Error::config(format!(
                "lc_alpha must lie in (0, 1], got {}",
                self.lc_alpha
            )));
        }
        if !(self.output_bound > 0.0) || !self.output_bound.is_finite() {
            return Err(Error::config(format!(
                "output bound M must be > 0, got {}",
                self.output_bound
            )));
        }
        if !(0.0..1.0).contains(&self.pi) {
            return Err(Error::config(format!("pi must lie in [0, 1), got {}", self.pi)));
        }
        if (self.a_scale - 1.0).abs() > self.pi + 1e-15 {
            return Err(Error::config(format!(
                "a_scale {} outside [1 - pi, 1 + pi] for pi = {}",
                self.a_scale, self.pi
            )));
        }
        if let Some(p) = &self.tree.privacy {
            if p.trees != self.rounds {
                return Err(Error::config(
                    "private tree config must be built for the same number of rounds",
                ));
            }
            if p.output_bound != self.output_bound {
                return Err(Error::config("private tree config and ensemble disagree on M"));
            }
        }
        Ok(())
    }

    /// Leveraging constant `a = a_scale lc_alpha / M^2`.
    pub fn a(&self) -> f64 {
        self.a_scale * self.lc_alpha / (self.output_bound * self.output_bound)
    }
}

/// Boosting weights and the constants of the mirror update.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostState {
    pub weights: Vec<f64>,
    pub iteration: usize,
    pub a: f64,
    pub pi: f64,
    pub loss: LossSpec,
}

impl BoostState {
    pub fn new(m: usize, a: f64, pi: f64, lc_alpha: f64) -> Self {
        BoostState {
            weights: vec![0.5; m],
            iteration: 0,
            a,
            pi,
            loss: LossSpec::MAlpha(lc_alpha),
        }
    }

    /// `w~_t = (1 / m) sum_i w_i`.
    pub fn weight_mass(&self) -> f64 {
        self.weights.iter().sum::<f64>() / self.weights.len() as f64
    }

    pub fn normalized_weights(&self) -> Vec<f64> {
        let total: f64 = self.weights.iter().sum();
        self.weights.iter().map(|w| w / total).collect()
    }
}

/// `beta_t = (a / m) sum_i w_i y_i h_i`.
pub fn leveraging_coefficient(state: &BoostState, labels: &[i8], predictions: &[f64]) -> f64 {
    let m = state.weights.len() as f64;
    let s: f64 = state
        .weights
        .iter()
        .zip(labels)
        .zip(predictions)
        .map(|((w, &y), h)| w * y as f64 * h)
        .sum();
    state.a * s / m
}

/// One mirror step; weights stay within `[WEIGHT_CLAMP, 1 - WEIGHT_CLAMP]`.
pub fn update_weights(state: &BoostState, beta: f64, labels: &[i8], predictions: &[f64]) -> BoostState {
    let loss = state.loss;
    let weights = state
        .weights
        .iter()
        .zip(labels)
        .zip(predictions)
        .map(|((&w, &y), &h)| {
            let z = -beta * y as f64 * h + loss.link_unchecked(w);
            loss.inverse_link(z).clamp(WEIGHT_CLAMP, 1.0 - WEIGHT_CLAMP)
        })
        .collect();
    BoostState {
        weights,
        iteration: state.iteration + 1,
        ..state.clone()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostedEnsemble {
    pub members: Vec<(DecisionTree, f64)>,
    pub loss_alpha: f64,
    pub output_bound: f64,
    pub domains: Vec<AttributeDomain>,
}

impl BoostedEnsemble {
    pub fn num_leaves(&self) -> usize {
        self.members.iter().map(|(t, _)| t.num_leaves()).sum()
    }

    pub fn mean_leaf_depth(&self) -> f64 {
        if self.members.is_empty() {
            return 0.0;
        }
        self.members.iter().map(|(t, _)| t.mean_leaf_depth()).sum::<f64>() / self.members.len() as f64
    }
}

impl Classifier for BoostedEnsemble {
    fn margin(&self, row: &[u16]) -> f64 {
        let m = self.output_bound;
        self.members.iter().map(|(t, b)| b * t.predict(row).clamp(-m, m)).sum()
    }
}

/// Per-round diagnostics of a boosting run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoostTrace {
    /// `eta(w~_t, h_t)` with `h_t` clamped to `[-M, M]`.
    pub edges: Vec<f64>,
    /// `w~_t`, the mean boosting weight when tree `t` was grown.
    pub weight_mass: Vec<f64>,
    pub betas: Vec<f64>,
    /// `(1 / m) sum_i psi(y_i H_t(x_i))` after each round, preceded by the
    /// value 1 of the empty ensemble.
    pub surrogate: Vec<f64>,
    pub train_error: Vec<f64>,
    /// Budget spent by each round.
    pub spent: Vec<f64>,
}

/// Fits `config.rounds` boosted trees. With privacy, every round spends
/// `eps / T` on the tree (structure and leaves) and `beta_t` is computed from
/// the released leaves.
pub fn alphaboost_fit(
    dataset: &Dataset,
    config: &BoostConfig,
    accountant: &mut BudgetAccountant,
    rng: &mut RandomSource,
) -> Result<(BoostedEnsemble, BoostTrace)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Degenerate("empty training set".into()));
    }
    if let Some(p) = &config.tree.privacy {
        if !accountant.can_spend(p.epsilon) {
            return Err(Error::BudgetExceeded {
                requested: p.epsilon,
                remaining: accountant.remaining(),
            });
        }
    }
    let m = dataset.len();
    let bound = config.output_bound;
    let labels = dataset.labels();
    let mut state = BoostState::new(m, config.a(), config.pi, config.lc_alpha);
    let mut margins = vec![0.0; m];
    let mut members = Vec::with_capacity(config.rounds);
    let mut trace = BoostTrace {
        surrogate: vec![1.0],
        ..BoostTrace::default()
    };

    for _ in 0..config.rounds {
        let before = accountant.spent();
        let mut tree = induce_tree(dataset, &state.weights, &config.tree, accountant, rng)?;
        if let Some(p) = &config.tree.privacy {
            tree = noisify_leaves(&tree, p.beta_pred(), p.epsilon, p.trees, bound, accountant, rng)?;
        }
        let h: Vec<f64> = (0..m)
            .map(|i| tree.predict(dataset.row(i)).clamp(-bound, bound))
            .collect();
        let beta = leveraging_coefficient(&state, labels, &h);

        trace.edges.push(edge(&state.normalized_weights(), &h, labels));
        trace.weight_mass.push(state.weight_mass());
        trace.betas.push(beta);
        trace.spent.push(accountant.spent() - before);

        for (mi, hi) in margins.iter_mut().zip(&h) {
            *mi += beta * hi;
        }
        let surrogate = margins
            .iter()
            .zip(labels)
            .map(|(mi, &y)| state.loss.surrogate(y as f64 * mi))
            .sum::<f64>()
            / m as f64;
        trace.surrogate.push(surrogate);
        let wrong = margins
            .iter()
            .zip(labels)
            .filter(|(mi, &y)| (**mi > 0.0) != (y > 0))
            .count();
        trace.train_error.push(wrong as f64 / m as f64);

        state = update_weights(&state, beta, labels, &h);
        members.push((tree, beta));
    }

    Ok((
        BoostedEnsemble {
            members,
            loss_alpha: config.lc_alpha,
            output_bound: bound,
            domains: dataset.domains().to_vec(),
        },
        trace,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafMechanism {
    /// Both class counts released with `Lap(2 / eps_leaf)`, label by argmax.
    Laplace,
    /// Label chosen by the exponential mechanism on the class counts.
    Exponential,
}

impl LeafMechanism {
    pub fn name(&self) -> &'static str {
        match self {
            LeafMechanism::Laplace => "rf_laplace",
            LeafMechanism::Exponential => "rf_exponential",
        }
    }
}

/// Majority vote of trees whose leaves predict -1 or +1.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub trees: Vec<DecisionTree>,
    pub domains: Vec<AttributeDomain>,
}

impl Forest {
    pub fn num_leaves(&self) -> usize {
        self.trees.iter().map(|t| t.num_leaves()).sum()
    }

    pub fn mean_leaf_depth(&self) -> f64 {
        if self.trees.is_empty() {
            return 0.0;
        }
        self.trees.iter().map(|t| t.mean_leaf_depth()).sum::<f64>() / self.trees.len() as f64
    }
}

impl Classifier for Forest {
    fn margin(&self, row: &[u16]) -> f64 {
        self.trees
            .iter()
            .map(|t| if t.predict(row) > 0.0 { 1.0 } else { -1.0 })
            .sum()
    }
}

/// Complete depth-`depth` tree whose splits are drawn uniformly from the
/// candidate set, independently of the data.
pub fn random_structure(dataset: &Dataset, depth: usize, rng: &mut RandomSource) -> Result<DecisionTree> {
    let candidates = dataset.candidate_splits();
    if candidates.is_empty() {
        return Err(Error::Degenerate("no split candidates".into()));
    }
    let empty = LeafStats {
        w: 0.0,
        w1: 0.0,
        q: 0.5,
        prediction: 0.0,
    };
    let mut nodes = vec![Node {
        depth: 0,
        kind: NodeKind::Leaf(empty),
    }];
    let mut order = 0;
    let mut next = 0;
    while next < nodes.len() {
        let d = nodes[next].depth;
        if d < depth {
            let split = candidates[rng.index(candidates.len())];
            let left = nodes.len();
            nodes[next].kind = NodeKind::Split {
                split,
                left,
                right: left + 1,
                order,
            };
            order += 1;
            for _ in 0..2 {
                nodes.push(Node {
                    depth: d + 1,
                    kind: NodeKind::Leaf(empty),
                });
            }
        }
        next += 1;
    }
    DecisionTree::from_parts(nodes, 1.0, Vec::new())
}

/// DP random forest: `trees` random-structure trees of depth `depth`, each
/// leaf labelled privately with budget `eps / (T 2^d)`.
pub fn rf_fit(
    dataset: &Dataset,
    trees: usize,
    depth: usize,
    epsilon: f64,
    mechanism: LeafMechanism,
    accountant: &mut BudgetAccountant,
    rng: &mut RandomSource,
) -> Result<Forest> {
    if trees == 0 || depth == 0 {
        return Err(Error::config("forest needs trees >= 1 and depth >= 1"));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::config(format!("epsilon must be finite and > 0, got {epsilon}")));
    }
    if !accountant.can_spend(epsilon) {
        return Err(Error::BudgetExceeded {
            requested: epsilon,
            remaining: accountant.remaining(),
        });
    }
    let eps_leaf = epsilon / (trees as f64 * (depth as f64).exp2());
    let mut out = Vec::with_capacity(trees);
    for _ in 0..trees {
        let mut tree = random_structure(dataset, depth, rng)?;
        let mut counts = vec![[0.0f64; 2]; tree.nodes().len()];
        for i in 0..dataset.len() {
            let leaf = tree.leaf_of(dataset.row(i));
            counts[leaf][usize::from(dataset.label(i) > 0)] += 1.0;
        }
        let leaves: Vec<usize> = tree.leaves().map(|(i, _, _)| i).collect();
        for leaf in leaves {
            let [neg, pos] = counts[leaf];
            let label = match mechanism {
                LeafMechanism::Laplace => {
                    accountant.spend("rf_leaf", eps_leaf)?;
                    let scale = 2.0 / eps_leaf;
                    let noisy_neg = neg + laplace_sample(rng, scale)?;
                    let noisy_pos = pos + laplace_sample(rng, scale)?;
                    if noisy_pos > noisy_neg {
                        1.0
                    } else {
                        -1.0
                    }
                }
                LeafMechanism::Exponential => {
                    let pick = exponential_mechanism(&[neg, pos], 1.0, eps_leaf, "rf_leaf", accountant, rng)?;
                    if pick == 1 {
                        1.0
                    } else {
                        -1.0
                    }
                }
            };
            tree.release_leaf(leaf, label);
        }
        out.push(tree);
    }
    Ok(Forest {
        trees: out,
        domains: dataset.domains().to_vec(),
    })
}
