//! Sequential, anytime-valid Monte-Carlo p-value estimation.
//!
//! A Monte-Carlo calibrated test reduces to a stream of i.i.d. Bernoulli
//! indicators `B_i = 1{T(Y_i) >= T(x)}` whose success probability is the
//! true p-value `p*`. This crate provides:
//!
//! - [`oracle`]: resumable, seeded sources of those indicators (synthetic,
//!   permutation test, 1-D scan statistic).
//! - [`numerics`]: log-space binomial primitives, bisection, normal quantile.
//! - [`confidence`]: the Robbins mixture confidence sequence and the
//!   one-sided Clopper-Pearson limit.
//! - [`estimators`]: fixed-sample, Andrews, Besag-Clifford, Silva-Assuncao,
//!   Wald SPRT and the anytime-valid running-minimum estimator.
//! - [`stopping`]: stopping rules and a pausable sequential runner.
//! - [`harness`]: simulation studies and validity audits.

pub mod confidence;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod numerics;
pub mod oracle;
pub mod stopping;

pub use confidence::{clopper_pearson_upper, robbins_lower, robbins_upper, ConfidenceBounds};
pub use error::{Error, Result};
pub use estimators::{AnytimeEstimate, EstimateReport, Method, StopReason};
pub use oracle::{OracleStream, SampleState, StreamKind};
pub use stopping::{run_until, StoppingRule, Trajectory};
