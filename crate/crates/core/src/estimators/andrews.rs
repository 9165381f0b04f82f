use super::{p_naive, EstimateReport, Method, StopReason};
use crate::error::{domain, Result};
use crate::numerics::normal_quantile;
use crate::oracle::OracleStream;

/// `ceil(z_{1 - tau/2}^2 * omega / d^2)`.
pub fn andrews_sample_size(omega: f64, d: f64, tau: f64) -> Result<u64> {
    if d.is_nan() || d <= 0.0 {
        return domain(format!("relative error bound d must be positive, got {d}"));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return domain(format!("tau must lie in (0, 1), got {tau}"));
    }
    let z = normal_quantile(1.0 - tau / 2.0)?;
    Ok((z * z * omega / (d * d)).ceil() as u64)
}

/// Andrews' three-step sample-size procedure for the naive estimator.
///
/// Stage one uses `omega0 = F/(1-F)` from the asymptotic null cdf at the
/// observed statistic (or `1/4` without it); stage two re-estimates
/// `omega = p(1-p)` from the preliminary sample; the final size is the
/// larger of the two. The two stages are applied as stated, although the
/// first is an odds and the second a variance.
pub fn andrews_three_step<S: OracleStream + ?Sized>(
    stream: &mut S,
    d: f64,
    tau: f64,
    f_inf_at_t: Option<f64>,
) -> Result<EstimateReport> {
    let omega0 = match f_inf_at_t {
        None => 0.25,
        Some(f) if (0.0..1.0).contains(&f) => f / (1.0 - f),
        Some(f) => return domain(format!("F_inf(T) must lie in [0, 1), got {f}")),
    };
    // At least one preliminary draw so the stage-two estimate exists.
    let m1 = andrews_sample_size(omega0, d, tau)?.max(1);
    let mut ones = 0u64;
    for _ in 0..m1 {
        ones += stream.next_bit() as u64;
    }
    let p1 = p_naive(ones, m1)?;
    let omega_hat = p1 * (1.0 - p1);
    let m2 = andrews_sample_size(omega_hat, d, tau)?;
    let m = m1.max(m2);
    for _ in m1..m {
        ones += stream.next_bit() as u64;
    }
    Ok(
        EstimateReport::new(Method::Andrews, p_naive(ones, m)?, m, StopReason::SampleSizeReached)
            .with_tuning("d", d)
            .with_tuning("tau", tau)
            .with_tuning("omega0", omega0)
            .with_tuning("m1", m1 as f64)
            .with_tuning("m2", m2 as f64),
    )
}
