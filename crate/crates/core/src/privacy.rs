//! Differential privacy primitives.
//!
//! All randomness flows through an explicit [`RandomSource`]; every
//! mechanism that releases something records its epsilon in a
//! [`BudgetAccountant`] before drawing, so an over-spend fails loudly and
//! leaves nothing released.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{AttributeDomain, Dataset};
use crate::error::{Error, Result};
use crate::loss::LossSpec;

/// Seeded, platform-stable random stream (ChaCha8).
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        RandomSource {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A child stream whose seed is derived from this stream's seed and
    /// `tag`; does not advance `self`.
    pub fn derive(&self, tag: u64) -> RandomSource {
        RandomSource::new(derive_seed(self.seed, tag))
    }

    /// Uniform draw on `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n`; `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

/// splitmix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of a sub-stream identified by `tag` under `parent`.
pub fn derive_seed(parent: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ tag.rotate_left(17))
}

/// FNV-1a over bytes; a stable tag for string keys.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// One recorded expenditure.
#[derive(Debug, Clone, PartialEq)]
pub struct Spend {
    pub label: String,
    pub epsilon: f64,
}

/// Ledger of epsilon spends under sequential composition.
#[derive(Debug, Clone)]
pub struct BudgetAccountant {
    total: f64,
    spends: Vec<Spend>,
}

impl BudgetAccountant {
    /// Relative slack tolerated when the final spend lands exactly on the
    /// total up to rounding.
    const SLACK: f64 = 1e-12;

    pub fn new(total: f64) -> Result<Self> {
        if !(total >= 0.0) || !total.is_finite() {
            return Err(Error::domain(format!(
                "total budget must be finite and >= 0, got {total}"
            )));
        }
        Ok(BudgetAccountant {
            total,
            spends: Vec::new(),
        })
    }

    /// An accountant for non-private runs: any spend fails.
    pub fn none() -> Self {
        BudgetAccountant {
            total: 0.0,
            spends: Vec::new(),
        }
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Sum of recorded spends, in recording order.
    pub fn spent(&self) -> f64 {
        // fold from +0 so an empty ledger reports 0 rather than -0
        self.spends.iter().fold(0.0, |acc, s| acc + s.epsilon)
    }

    pub fn remaining(&self) -> f64 {
        (self.total - self.spent()).max(0.0)
    }

    pub fn spends(&self) -> &[Spend] {
        &self.spends
    }

    /// Sum of spends whose label starts with `prefix`.
    pub fn spent_with_prefix(&self, prefix: &str) -> f64 {
        self.spends
            .iter()
            .filter(|s| s.label.starts_with(prefix))
            .fold(0.0, |acc, s| acc + s.epsilon)
    }

    pub fn can_spend(&self, epsilon: f64) -> bool {
        self.spent() + epsilon <= self.total + Self::SLACK * self.total.max(1.0)
    }

    pub fn spend(&mut self, label: impl Into<String>, epsilon: f64) -> Result<()> {
        check_epsilon(epsilon)?;
        if !self.can_spend(epsilon) {
            return Err(Error::BudgetExceeded {
                requested: epsilon,
                remaining: self.remaining(),
            });
        }
        self.spends.push(Spend {
            label: label.into(),
            epsilon,
        });
        Ok(())
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::domain(format!("epsilon must be finite and > 0, got {epsilon}")));
    }
    Ok(())
}

/// Laplace draw by inverse CDF from a uniform `u` in `(-1/2, 1/2)`:
/// `x = -b sign(u) ln(1 - 2|u|)`.
pub fn laplace_from_uniform(u: f64, scale: f64) -> f64 {
    let sign = if u < 0.0 { -1.0 } else { 1.0 };
    -scale * sign * (1.0 - 2.0 * u.abs()).ln()
}

/// Draw from `Lap(scale)`.
pub fn laplace_sample(rng: &mut RandomSource, scale: f64) -> Result<f64> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::domain(format!(
            "Laplace scale must be finite and > 0, got {scale}"
        )));
    }
    loop {
        let u = rng.uniform() - 0.5;
        // u = -1/2 would give ln(0)
        if u > -0.5 {
            return Ok(laplace_from_uniform(u, scale));
        }
    }
}

/// Releases `value + Lap(sensitivity / epsilon)` and records the spend.
pub fn laplace_mechanism(
    value: f64,
    sensitivity: f64,
    epsilon: f64,
    label: &str,
    accountant: &mut BudgetAccountant,
    rng: &mut RandomSource,
) -> Result<f64> {
    check_epsilon(epsilon)?;
    if !(sensitivity > 0.0) || !sensitivity.is_finite() {
        return Err(Error::domain(format!(
            "sensitivity must be finite and > 0, got {sensitivity}"
        )));
    }
    accountant.spend(label, epsilon)?;
    Ok(value + laplace_sample(rng, sensitivity / epsilon)?)
}

/// Exact selection probabilities of the exponential mechanism,
/// `p_i ∝ exp(epsilon u_i / (2 sensitivity))`, computed in log space.
pub fn exponential_probabilities(utilities: &[f64], sensitivity: f64, epsilon: f64) -> Result<Vec<f64>> {
    if utilities.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    check_epsilon(epsilon)?;
    if !(sensitivity > 0.0) || !sensitivity.is_finite() {
        return Err(Error::domain(format!(
            "sensitivity must be finite and > 0, got {sensitivity}"
        )));
    }
    if utilities.iter().any(|u| !u.is_finite()) {
        return Err(Error::domain("utilities must be finite"));
    }
    let scale = epsilon / (2.0 * sensitivity);
    let max = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = utilities.iter().map(|u| ((u - max) * scale).exp()).collect();
    let z: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= z;
    }
    Ok(probs)
}

/// Inverse-CDF draw from a probability vector.
pub fn sample_index(probs: &[f64], rng: &mut RandomSource) -> usize {
    let r = rng.uniform();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if r < acc {
            return i;
        }
    }
    // rounding left r above the last partial sum
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(probs.len() - 1)
}

/// Selects an index with the exponential mechanism and records the spend.
pub fn exponential_mechanism(
    utilities: &[f64],
    sensitivity: f64,
    epsilon: f64,
    label: &str,
    accountant: &mut BudgetAccountant,
    rng: &mut RandomSource,
) -> Result<usize> {
    let probs = exponential_probabilities(utilities, sensitivity, epsilon)?;
    accountant.spend(label, epsilon)?;
    Ok(sample_index(&probs, rng))
}

/// Finite replacement grid for neighbor enumeration: a neighbor replaces
/// exactly one example by any combination of feature bins, label and weight
/// drawn from these sets.
#[derive(Debug, Clone)]
pub struct NeighborGrid {
    /// Bins allowed per attribute (empty means the attribute's full domain).
    pub feature_bins: Vec<Vec<u16>>,
    pub labels: Vec<i8>,
    pub weights: Vec<f64>,
}

impl NeighborGrid {
    /// Weights `{0.25, 0.5, 1.0}`, labels `{-1, +1}`, full feature domains.
    pub fn standard(dataset: &Dataset) -> Self {
        NeighborGrid {
            feature_bins: dataset
                .domains()
                .iter()
                .map(|d| (0..d.nvpriv as u16).collect())
                .collect(),
            labels: vec![-1, 1],
            weights: vec![0.25, 0.5, 1.0],
        }
    }

    fn replacements(&self) -> Vec<(Vec<u16>, i8, f64)> {
        let mut feature_rows: Vec<Vec<u16>> = vec![Vec::new()];
        for bins in &self.feature_bins {
            let mut next = Vec::with_capacity(feature_rows.len() * bins.len());
            for row in &feature_rows {
                for &b in bins {
                    let mut r = row.clone();
                    r.push(b);
                    next.push(r);
                }
            }
            feature_rows = next;
        }
        let mut out = Vec::new();
        for row in &feature_rows {
            for &y in &self.labels {
                for &w in &self.weights {
                    out.push((row.clone(), y, w));
                }
            }
        }
        out
    }
}

/// Largest dataset the brute-force oracle enumerates.
pub const MAX_ORACLE_EXAMPLES: usize = 8;
/// Largest number of neighbors the brute-force oracle enumerates.
pub const MAX_ORACLE_NEIGHBORS: usize = 1_000_000;

/// Exact global sensitivity of `criterion` around `base`:
/// `max |criterion(S') - criterion(S)|` over every replacement neighbor `S'`
/// on `grid`. The criterion sees `S'` through its features, labels and the
/// weights stored in the dataset.
pub fn brute_force_sensitivity<F>(criterion: F, base: &Dataset, grid: &NeighborGrid) -> Result<f64>
where
    F: Fn(&Dataset) -> f64,
{
    let m = base.len();
    if m > MAX_ORACLE_EXAMPLES {
        return Err(Error::EnumerationTooLarge(format!(
            "{m} examples, at most {MAX_ORACLE_EXAMPLES} supported"
        )));
    }
    if grid.feature_bins.len() != base.num_attributes() {
        return Err(Error::domain("neighbor grid does not match the dataset's attributes"));
    }
    let replacements = grid.replacements();
    let total = replacements.len().saturating_mul(m);
    if total > MAX_ORACLE_NEIGHBORS {
        return Err(Error::EnumerationTooLarge(format!(
            "{total} neighbors, at most {MAX_ORACLE_NEIGHBORS} supported"
        )));
    }
    let reference = criterion(base);
    let mut best: f64 = 0.0;
    let mut neighbor = base.clone();
    for i in 0..m {
        for (features, label, weight) in &replacements {
            neighbor.replace_example(i, features, *label, *weight)?;
            best = best.max((criterion(&neighbor) - reference).abs());
        }
        neighbor.replace_example(i, base.row(i), base.label(i), base.weight(i))?;
    }
    Ok(best)
}

/// A one-attribute dataset with two bins: examples with `in_leaf[i]` sit in
/// bin 0, the leaf audited by [`leaf_criterion`].
pub fn leaf_dataset(labels: &[i8], weights: &[f64], in_leaf: &[bool]) -> Result<Dataset> {
    let rows = in_leaf.iter().map(|&b| vec![if b { 0 } else { 1 }]).collect();
    let mut d = Dataset::new(vec![AttributeDomain::new("x", 0.0, 1.0, 2)?], rows, labels.to_vec())?;
    d.set_weights(weights.to_vec())?;
    Ok(d)
}

/// The per-leaf splitting criterion `w(leaf) phi(w1(leaf) / w(leaf))` of the
/// bin-0 leaf of a [`leaf_dataset`].
pub fn leaf_criterion(loss: LossSpec) -> impl Fn(&Dataset) -> f64 {
    move |d: &Dataset| {
        let (mut w, mut w1) = (0.0, 0.0);
        for i in 0..d.len() {
            if d.row(i)[0] == 0 {
                w += d.weight(i);
                if d.label(i) > 0 {
                    w1 += d.weight(i);
                }
            }
        }
        loss.perspective_at(w1, w).expect("w1 <= w by construction")
    }
}

/// Change of [`leaf_criterion`] when the single positive of an `m`-example
/// unit-weight leaf is relabelled negative; equals `m phi(1 / m)`.
pub fn one_positive_flip_delta(loss: LossSpec, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::domain("flip construction needs m >= 1"));
    }
    let mut labels = vec![-1i8; m];
    labels[0] = 1;
    let base = leaf_dataset(&labels, &vec![1.0; m], &vec![true; m])?;
    let mut flipped = base.clone();
    flipped.replace_example(0, &[0], -1, 1.0)?;
    let f = leaf_criterion(loss);
    Ok((f(&base) - f(&flipped)).abs())
}
