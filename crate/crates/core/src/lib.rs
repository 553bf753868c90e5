//! Differentially private boosting of decision trees with the M-alpha loss.
//!
//! The crate is organized bottom-up:
//!
//! - [`loss`]: Bayes risks, canonical links, surrogates and sensitivity
//!   bounds of the M-alpha family and the classical proper losses.
//! - [`privacy`]: seeded randomness, Laplace and exponential mechanisms, a
//!   budget accountant and a brute-force global-sensitivity oracle.
//! - [`dataset`]: public-domain quantization, split candidates and
//!   stratified folds.
//! - [`tree`]: greedy and exponential-mechanism tree induction with
//!   objective calibration of the loss and per-node budget.
//! - [`ensemble`]: boosted linear combinations of trees and DP random
//!   forest baselines.
//! - [`harness`] (feature `harness`): experiment grids, cumulative error
//!   curves, significance tests and sensitivity audits behind the CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod format;
pub mod loss;
pub mod privacy;
pub mod stats;
pub mod tree;

#[cfg(feature = "harness")]
pub mod harness;

pub use dataset::{AttributeDomain, Dataset, SplitCandidate};
pub use ensemble::{BoostConfig, BoostedEnsemble, Classifier, Forest, LeafMechanism};
pub use error::{Error, Result};
pub use loss::LossSpec;
pub use privacy::{BudgetAccountant, RandomSource};
pub use tree::{AlphaStrategy, DecisionTree, PrivateTreeConfig, TreeConfig};
