//! Trend-based data quality analysis for wireless sensor networks.
//!
//! The crate screens multivariate sensor data streams for segment outliers by
//! comparing each sensor's short-term trend against its spatial neighbors
//! (angle-based dynamic time warping), then uses declarative cross-property
//! correlation rules to decide whether a suspicious segment is an erroneous
//! outlier or a genuine unusual event that shows up across correlated
//! properties at the same node.
//!
//! Modules follow the processing chain:
//!
//! - [`ingest`]: CSV data model and regular-grid alignment.
//! - [`topology`]: time-versioned spatial neighborhood matrices.
//! - [`dtw`]: angle-based trend similarity between two windows.
//! - [`screening`]: sliding windows, similarity tensor, neighbor vote.
//! - [`rules`]: correlation rule language and relationship matrix.
//! - [`classify`]: erroneous-outlier vs unusual-event verdicts.
//! - [`pipeline`]: end-to-end detection over a queried time range.
//! - [`harness`]: synthetic data generation, fault injection, scoring.

pub mod classify;
pub mod dtw;
pub mod harness;
pub mod ingest;
pub mod pipeline;
pub mod rules;
pub mod screening;
pub mod topology;

#[cfg(any(test, feature = "test-oracles"))]
pub mod oracles;
