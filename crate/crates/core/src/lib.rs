//! Interpretable regression on data-dependent coverings.
//!
//! Candidate rules (hyperrectangles) are harvested from tree ensembles,
//! filtered by coverage, split into significant and insignificant rules,
//! and greedily reduced to a small quasi-covering. Predictions are the
//! empirical means of the cells of the partition the covering induces.

pub mod dataset;
pub mod diagnostics;
pub mod error;
pub mod estimator;
pub mod exec;
pub mod experiments;
pub mod generators;
pub mod model;
pub mod partition;
pub mod pipeline;
pub mod rules;
pub mod selection;
pub mod significance;

pub use error::{Error, Result};
pub use exec::Exec;
