use super::{EstimateReport, Method, StopReason};
use crate::error::{domain, Result};
use crate::oracle::OracleStream;

/// Outcome of a Wald SPRT run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SprtDecision {
    /// `p* <= alpha - delta`: reject the tested null.
    Reject,
    /// `p* >= alpha + delta`: do not reject.
    Accept,
    Inconclusive,
}

/// Wald's SPRT of `p* <= alpha - delta` against `p* >= alpha + delta`,
/// tracking the log-likelihood ratio of the upper hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaldSprt {
    step_one: f64,
    step_zero: f64,
    upper: f64,
    lower: f64,
    llr: f64,
    n: u64,
}

impl WaldSprt {
    pub fn new(alpha: f64, delta: f64, eps0: f64, eps1: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return domain(format!("alpha must lie in (0, 1), got {alpha}"));
        }
        if !(delta > 0.0 && delta < alpha.min(1.0 - alpha)) {
            return domain(format!("need 0 < delta < min(alpha, 1 - alpha), got {delta}"));
        }
        for e in [eps0, eps1] {
            if !(e > 0.0 && e < 1.0) {
                return domain(format!("SPRT risks must lie in (0, 1), got {e}"));
            }
        }
        Ok(WaldSprt {
            step_one: ((alpha + delta) / (alpha - delta)).ln(),
            step_zero: ((1.0 - alpha - delta) / (1.0 - alpha + delta)).ln(),
            upper: ((1.0 - eps1) / eps0).ln(),
            lower: (eps1 / (1.0 - eps0)).ln(),
            llr: 0.0,
            n: 0,
        })
    }

    /// Log-likelihood ratio increment for one bit.
    pub fn increment(&self, bit: bool) -> f64 {
        if bit {
            self.step_one
        } else {
            self.step_zero
        }
    }

    pub fn llr(&self) -> f64 {
        self.llr
    }

    /// `(lower, upper)` stopping thresholds.
    pub fn thresholds(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    pub fn update(&mut self, bit: bool) -> Option<SprtDecision> {
        self.llr += self.increment(bit);
        self.n += 1;
        if self.llr >= self.upper {
            Some(SprtDecision::Accept)
        } else if self.llr <= self.lower {
            Some(SprtDecision::Reject)
        } else {
            None
        }
    }
}

/// Runs the SPRT on `stream` for at most `cap` draws. The estimate is the
/// decision (1 = reject); an inconclusive run reports 0.
pub fn wald_sprt<S: OracleStream + ?Sized>(
    stream: &mut S,
    alpha: f64,
    delta: f64,
    eps0: f64,
    eps1: f64,
    cap: u64,
) -> Result<EstimateReport> {
    let mut sprt = WaldSprt::new(alpha, delta, eps0, eps1)?;
    if cap == 0 {
        return domain("SPRT cap must be >= 1");
    }
    let mut outcome = SprtDecision::Inconclusive;
    for _ in 0..cap {
        if let Some(d) = sprt.update(stream.next_bit()) {
            outcome = d;
            break;
        }
    }
    let (estimate, reason) = match outcome {
        SprtDecision::Reject => (1.0, StopReason::LowerThreshold),
        SprtDecision::Accept => (0.0, StopReason::UpperThreshold),
        SprtDecision::Inconclusive => (0.0, StopReason::Inconclusive),
    };
    Ok(EstimateReport::new(Method::Sprt, estimate, sprt.n, reason)
        .with_tuning("alpha", alpha)
        .with_tuning("delta", delta)
        .with_tuning("eps0", eps0)
        .with_tuning("eps1", eps1)
        .with_tuning("cap", cap as f64)
        .with_tuning("llr", sprt.llr))
}
