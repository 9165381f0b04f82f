//! P-value and decision estimators driven by an [`OracleStream`](crate::oracle::OracleStream).
//!
//! Decision-valued estimators encode `1 = reject`, `0 = do not reject`.

mod andrews;
mod anytime;
mod fixed;
mod sequential;
mod sprt;

pub use andrews::{andrews_sample_size, andrews_three_step};
pub use anytime::{anytime_update, AnytimeEstimate};
pub use fixed::{fixed_sample, inflate_p, p_biased, p_naive, p_randomized, shift_alpha, FixedKind};
pub use sequential::{besag_clifford, silva_assuncao, SilvaAssuncaoTuning};
pub use sprt::{wald_sprt, SprtDecision, WaldSprt};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Estimator that produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Naive,
    Biased,
    Randomized,
    Anytime,
    BesagClifford,
    SilvaAssuncao,
    Andrews,
    Sprt,
}

impl Method {
    pub fn is_decision(self) -> bool {
        matches!(self, Method::SilvaAssuncao | Method::Sprt)
    }
}

impl std::str::FromStr for Method {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| crate::Error::Domain(format!("unknown method {s:?}")))
    }
}

/// Why sampling stopped.
///
/// The derived ordering breaks ties between rules firing at the same step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// `p_tilde <= alpha`.
    Significant,
    /// Lower confidence limit above alpha.
    ConfidentlyInsignificant,
    Plateau,
    FixedN,
    Cap,
    /// The runner's built-in termination bound fired, not the rule.
    ImplicitCap,
    /// Besag-Clifford: `h` ones observed before `M`.
    HReached,
    /// Budget `M` exhausted.
    MaxSamples,
    /// Silva-Assuncao: `h` ones within the first `t1` draws.
    EarlyAccept,
    /// Andrews: final sample size reached.
    SampleSizeReached,
    /// SPRT crossed the upper (accept) threshold.
    UpperThreshold,
    /// SPRT crossed the lower (reject) threshold.
    LowerThreshold,
    /// SPRT hit its cap without crossing.
    Inconclusive,
}

/// What an estimator reports at the end of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub method: Method,
    /// A p-value estimate, or a decision in `{0, 1}` for decision methods.
    pub estimate: f64,
    pub n_used: u64,
    pub epsilon: Option<f64>,
    pub stopping_reason: StopReason,
    /// Lower confidence limit at the stop, for context.
    pub lower_context: Option<f64>,
    pub tuning: BTreeMap<String, f64>,
}

impl EstimateReport {
    pub(crate) fn new(method: Method, estimate: f64, n_used: u64, stopping_reason: StopReason) -> Self {
        debug_assert!((0.0..=1.0).contains(&estimate));
        EstimateReport {
            method,
            estimate,
            n_used,
            epsilon: None,
            stopping_reason,
            lower_context: None,
            tuning: BTreeMap::new(),
        }
    }

    pub(crate) fn with_tuning(mut self, key: &str, value: f64) -> Self {
        self.tuning.insert(key.to_string(), value);
        self
    }

    /// `true` when the report implies rejection at `alpha`.
    pub fn rejects(&self, alpha: f64) -> bool {
        if self.method.is_decision() {
            self.estimate == 1.0
        } else {
            self.estimate <= alpha
        }
    }

    pub fn to_json(&self) -> crate::Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
