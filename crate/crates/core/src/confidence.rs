//! Confidence limits for a Bernoulli success probability.
//!
//! [`robbins_upper`] / [`robbins_lower`] give Robbins' mixture confidence
//! sequence: at every `n` the interval is the super-level set
//! `{p : C(n,s) p^s (1-p)^(n-s) >= eps / (n+1)}`. Ville's inequality makes the
//! coverage hold simultaneously over all `n`, so the limits can be monitored
//! continuously. [`clopper_pearson_upper`] is the classic fixed-sample limit.
//!
//! All limits are returned from the outside of the final root-finding bracket,
//! so a reported upper limit is never below the exact one (and a lower limit
//! never above it).

use crate::error::{domain, Result};
use crate::numerics::{self, pmf_log_unchecked, LIMIT_TOL};
use serde::{Deserialize, Serialize};

/// Absolute tolerance on the log-pmf at a returned Robbins limit.
const LOG_PMF_TOL: f64 = 1e-10;
// A Newton step this small leaves the iterate within about this distance of
// the root.
const NEWTON_STEP_TOL: f64 = 1e-13;

/// A confidence interval for `p` at sample size `n` with `s` ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBounds {
    pub lower: f64,
    pub upper: f64,
    pub epsilon: f64,
    pub n: u64,
    pub s: u64,
}

impl ConfidenceBounds {
    pub fn contains(&self, p: f64) -> bool {
        self.lower <= p && p <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

fn check_inputs(n: u64, s: u64, epsilon: f64) -> Result<()> {
    if n == 0 {
        return domain("confidence limits need at least one sample");
    }
    if s > n {
        return domain(format!("s={s} exceeds n={n}"));
    }
    if n > numerics::MAX_COUNT {
        return domain(format!("n={n} exceeds the supported maximum"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return domain(format!("epsilon must lie in (0, 1), got {epsilon}"));
    }
    Ok(())
}

/// `ln(eps / (n + 1))`, the level of the Robbins super-level set.
pub fn robbins_log_threshold(n: u64, epsilon: f64) -> f64 {
    epsilon.ln() - ((n + 1) as f64).ln()
}

/// True iff `p` lies strictly above the Robbins upper limit at `(n, s)`.
///
/// One pmf evaluation; no root finding.
pub fn is_above_robbins_upper(n: u64, s: u64, epsilon: f64, p: f64) -> bool {
    let mode = s as f64 / n as f64;
    p > mode && pmf_log_unchecked(n, s, p) < robbins_log_threshold(n, epsilon)
}

/// True iff `p` lies strictly below the Robbins lower limit at `(n, s)`.
pub fn is_below_robbins_lower(n: u64, s: u64, epsilon: f64, p: f64) -> bool {
    let mode = s as f64 / n as f64;
    p < mode && pmf_log_unchecked(n, s, p) < robbins_log_threshold(n, epsilon)
}

/// Finds the edge of the super-level set between a point `inside` it and a
/// point `outside` it; returns the final outside point.
///
/// The log-likelihood is concave in `p`, so a Newton step taken from the
/// outside end never crosses the root. Bisection covers infinite values and
/// steps that leave the bracket.
fn boundary(n: u64, s: u64, threshold: f64, inside: f64, outside: f64) -> f64 {
    let (ones, zeros) = (s as f64, (n - s) as f64);
    let g = |p: f64| pmf_log_unchecked(n, s, p) - threshold;
    let slope = |p: f64| ones / p - zeros / (1.0 - p);
    let (mut a, mut b) = (inside, outside);
    let mut g_b = g(b);
    loop {
        if (a - b).abs() <= LIMIT_TOL && g_b.abs() <= LOG_PMF_TOL {
            return b;
        }
        let newton = b - g_b / slope(b);
        let candidate = if newton.is_finite() && (newton - a) * (b - newton) > 0.0 {
            if (b - newton).abs() <= NEWTON_STEP_TOL && g_b.abs() <= LOG_PMF_TOL {
                return b;
            }
            newton
        } else {
            0.5 * (a + b)
        };
        if candidate == a || candidate == b {
            return b;
        }
        let g_c = g(candidate);
        if g_c >= 0.0 {
            a = candidate;
        } else {
            b = candidate;
            g_b = g_c;
        }
    }
}

/// Upper limit of the Robbins confidence sequence.
///
/// Returns `sup {p in [0,1] : C(n,s) p^s (1-p)^(n-s) >= eps/(n+1)}`. The set
/// always contains the mode `s/n`, and it reaches 1 exactly when `s = n`.
pub fn robbins_upper(n: u64, s: u64, epsilon: f64) -> Result<f64> {
    check_inputs(n, s, epsilon)?;
    if s == n {
        return Ok(1.0);
    }
    let mode = s as f64 / n as f64;
    Ok(boundary(n, s, robbins_log_threshold(n, epsilon), mode, 1.0))
}

/// Robbins upper limit when it is known to lie below `cap`.
pub(crate) fn robbins_upper_below(n: u64, s: u64, epsilon: f64, cap: f64) -> f64 {
    let mode = s as f64 / n as f64;
    boundary(n, s, robbins_log_threshold(n, epsilon), mode, cap)
}

/// Lower limit of the Robbins confidence sequence; 0 when `s = 0`.
pub fn robbins_lower(n: u64, s: u64, epsilon: f64) -> Result<f64> {
    check_inputs(n, s, epsilon)?;
    if s == 0 {
        return Ok(0.0);
    }
    let mode = s as f64 / n as f64;
    Ok(boundary(n, s, robbins_log_threshold(n, epsilon), mode, 0.0))
}

/// Both Robbins limits at `(n, s)`.
pub fn robbins_bounds(n: u64, s: u64, epsilon: f64) -> Result<ConfidenceBounds> {
    Ok(ConfidenceBounds {
        lower: robbins_lower(n, s, epsilon)?,
        upper: robbins_upper(n, s, epsilon)?,
        epsilon,
        n,
        s,
    })
}

/// One-sided Clopper-Pearson upper limit from `m` samples with `s` ones.
///
/// The smallest `p` with `P(Binomial(m, p) <= s) <= eps`, i.e. the
/// `1 - eps` quantile of `Beta(s + 1, m - s)`; 1 when `s = m`.
pub fn clopper_pearson_upper(m: u64, s: u64, epsilon: f64) -> Result<f64> {
    check_inputs(m, s, epsilon)?;
    if s == m {
        return Ok(1.0);
    }
    if s == 0 {
        // (1 - p)^m = eps in closed form; still bracketed below for the
        // conservative side.
        let closed = -(epsilon.ln() / m as f64).exp_m1();
        if numerics::binomial_cdf(m, 0, closed)? <= epsilon {
            return Ok(closed);
        }
    }
    let bracket = numerics::bisect_bracket(
        |p| numerics::binomial_cdf(m, s, p).unwrap_or(f64::NAN) - epsilon,
        0.0,
        1.0,
        LIMIT_TOL,
    )?;
    Ok(bracket.hi)
}
