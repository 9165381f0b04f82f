//! The anytime-valid p-value estimator.
//!
//! `p_tilde_n = min(min_{m <= n} U_m + eps, 1)` where `U_m` is the Robbins
//! upper confidence sequence at level `eps`. Because `U` covers `p*`
//! simultaneously for all `m` with probability `>= 1 - eps`, `p_tilde` never
//! falls below `p*` except with probability `eps`, at any stopping time, and
//! the running minimum makes it non-increasing.

use super::{EstimateReport, Method, StopReason};
use crate::confidence::{self, is_above_robbins_upper, is_below_robbins_lower};
use crate::error::{domain, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnytimeEstimate {
    pub n: u64,
    pub s: u64,
    /// `min_{m <= n} U_m`; 1 before the first draw.
    pub running_min_upper: f64,
    pub epsilon: f64,
    pub p_tilde: f64,
}

impl AnytimeEstimate {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return domain(format!("epsilon must lie in (0, 1), got {epsilon}"));
        }
        Ok(AnytimeEstimate {
            n: 0,
            s: 0,
            running_min_upper: 1.0,
            epsilon,
            p_tilde: 1.0,
        })
    }

    /// Absorbs one bit and returns the new `p_tilde`.
    pub fn update(&mut self, bit: bool) -> f64 {
        self.n += 1;
        self.s += bit as u64;
        // The new upper limit only matters if it undercuts the running
        // minimum, which one pmf evaluation decides.
        if is_above_robbins_upper(self.n, self.s, self.epsilon, self.running_min_upper) {
            let upper = confidence::robbins_upper_below(self.n, self.s, self.epsilon, self.running_min_upper);
            self.running_min_upper = upper.min(self.running_min_upper);
        }
        let next = (self.running_min_upper + self.epsilon).min(1.0);
        debug_assert!(next <= self.p_tilde);
        self.p_tilde = next;
        next
    }

    /// Current Robbins upper limit `U_n` (not the running minimum).
    pub fn upper(&self) -> Result<f64> {
        confidence::robbins_upper(self.n, self.s, self.epsilon)
    }

    /// Current Robbins lower limit `L_n`.
    pub fn lower(&self) -> Result<f64> {
        confidence::robbins_lower(self.n, self.s, self.epsilon)
    }

    /// `L_n > alpha`, decided without root finding.
    pub fn lower_exceeds(&self, alpha: f64) -> bool {
        self.n > 0 && is_below_robbins_lower(self.n, self.s, self.epsilon, alpha)
    }

    pub fn report(&self, stopping_reason: StopReason) -> Result<EstimateReport> {
        if self.n == 0 {
            return domain("no samples drawn");
        }
        let mut report = EstimateReport::new(Method::Anytime, self.p_tilde, self.n, stopping_reason);
        report.epsilon = Some(self.epsilon);
        report.lower_context = Some(self.lower()?);
        Ok(report)
    }
}

/// Functional form of [`AnytimeEstimate::update`].
pub fn anytime_update(state: AnytimeEstimate, bit: bool) -> AnytimeEstimate {
    let mut next = state;
    next.update(bit);
    next
}
