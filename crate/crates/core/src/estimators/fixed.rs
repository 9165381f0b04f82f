use super::{EstimateReport, Method, StopReason};
use crate::error::{domain, Result};
use crate::oracle::OracleStream;

fn check(s: u64, m: u64) -> Result<()> {
    if m == 0 {
        return domain("fixed-sample estimators need m >= 1");
    }
    if s > m {
        return domain(format!("s={s} exceeds m={m}"));
    }
    Ok(())
}

/// Maximum-likelihood estimate `s / m`.
pub fn p_naive(s: u64, m: u64) -> Result<f64> {
    check(s, m)?;
    Ok(s as f64 / m as f64)
}

/// Upward-biased estimate `(1 + s) / (m + 1)`.
pub fn p_biased(s: u64, m: u64) -> Result<f64> {
    check(s, m)?;
    Ok((1 + s) as f64 / (m + 1) as f64)
}

/// Externally randomized estimate `(u + s) / (m + 1)`, exactly uniform under
/// the null for `u ~ U(0, 1)`.
pub fn p_randomized(s: u64, m: u64, u: f64) -> Result<f64> {
    check(s, m)?;
    if !(0.0..=1.0).contains(&u) {
        return domain(format!("u must lie in [0, 1], got {u}"));
    }
    Ok((u + s as f64) / (m + 1) as f64)
}

/// Stricter level `alpha - eps` for running a decision procedure whose
/// conditional type-I error is bounded by `eps`.
pub fn shift_alpha(alpha: f64, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < alpha && alpha <= 1.0) {
        return domain(format!("need 0 < eps < alpha <= 1, got alpha={alpha} eps={epsilon}"));
    }
    Ok(alpha - epsilon)
}

/// `min(p_hat + eps, 1)`.
pub fn inflate_p(p_hat: f64, epsilon: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_hat) {
        return domain(format!("p_hat must lie in [0, 1], got {p_hat}"));
    }
    if epsilon.is_nan() || epsilon < 0.0 {
        return domain(format!("epsilon must be >= 0, got {epsilon}"));
    }
    Ok((p_hat + epsilon).min(1.0))
}

/// Which fixed-sample estimator to apply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FixedKind {
    Naive,
    Biased,
    Randomized { u: f64 },
}

/// Draws exactly `m` bits and applies the chosen estimator.
pub fn fixed_sample<S: OracleStream + ?Sized>(stream: &mut S, m: u64, kind: FixedKind) -> Result<EstimateReport> {
    if m == 0 {
        return domain("fixed-sample estimators need m >= 1");
    }
    let mut s = 0;
    for _ in 0..m {
        s += stream.next_bit() as u64;
    }
    let (method, estimate) = match kind {
        FixedKind::Naive => (Method::Naive, p_naive(s, m)?),
        FixedKind::Biased => (Method::Biased, p_biased(s, m)?),
        FixedKind::Randomized { u } => (Method::Randomized, p_randomized(s, m, u)?),
    };
    let mut report = EstimateReport::new(method, estimate, m, StopReason::FixedN).with_tuning("m", m as f64);
    if let FixedKind::Randomized { u } = kind {
        report = report.with_tuning("u", u);
    }
    Ok(report)
}
