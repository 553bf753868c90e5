//! Experiment engine behind the `dpboost` CLI.
//!
//! - [`config`]: flat key-value experiment grids.
//! - [`experiment`]: cross-validated runs written to a versioned,
//!   resumable results CSV.
//! - [`analysis`]: cumulative test-error curves and t-test comparisons.
//! - [`audit`]: brute-force sensitivity audit of the leaf criterion.

pub mod analysis;
pub mod audit;
pub mod config;
pub mod experiment;

pub use analysis::{compare, summarize_cumulative, Comparison, Curves, Filter};
pub use audit::{sensitivity_audit, AuditRow, AuditSpec};
pub use config::ExperimentConfig;
pub use experiment::{read_results, run_experiment, ResultRecord, RunSummary};

use crate::error::Error;

/// Process exit status for an error: 2 configuration, 3 data, 4 budget.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::UnmatchedGrid(_) | Error::EnumerationTooLarge(_) => 2,
        Error::BudgetExceeded { .. } => 4,
        Error::Parse { .. }
        | Error::UnknownLabel { .. }
        | Error::ClassTooSmall { .. }
        | Error::Degenerate(_)
        | Error::EmptyCandidates
        | Error::Format { .. }
        | Error::Io { .. }
        | Error::Csv(_) => 3,
    }
}
