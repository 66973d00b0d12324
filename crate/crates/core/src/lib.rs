//! Excess-mortality baselines and covid death-toll cross-checks.
//!
//! The pipeline forecasts each country's expected all-cause deaths from its
//! pre-pandemic history with Holt double exponential smoothing, derives the
//! excess over that baseline, predicts covid deaths from reported cases and
//! from excess mortality through log-log regressions, and ranks countries by
//! the discrepancy between predicted and declared counts and by per-capita
//! and per-area fatal impact.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod excess;
pub mod indexes;
pub mod ingest;
pub mod optim;
pub mod regression;
pub mod report;
pub mod timeseries;

pub use error::{Error, Result};
