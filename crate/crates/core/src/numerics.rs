//! Log-space binomial primitives, bisection and the standard normal quantile.
//!
//! Binomial log-probabilities use Loader's saddle-point decomposition
//! (`stirlerr` + `bd0`), which keeps full relative accuracy for `n` up to
//! 10^9 and for probabilities deep in the tails.

use crate::error::{domain, Error, Result};
use std::f64::consts::PI;

/// Largest `n` accepted by [`log_choose`].
pub const MAX_COUNT: u64 = 1_000_000_000;

/// Default absolute tolerance for root-finding on probabilities.
pub const PROB_TOL: f64 = 1e-12;

/// Default absolute tolerance for confidence limits.
pub const LIMIT_TOL: f64 = 1e-10;

/// A natural-log probability, `value <= 0` or `-inf`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogProb(f64);

impl LogProb {
    pub const ZERO_PROB: LogProb = LogProb(f64::NEG_INFINITY);
    pub const ONE: LogProb = LogProb(0.0);

    /// Wraps a log-probability. Values slightly above zero from rounding are
    /// clamped to zero.
    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value > 1e-12 {
            return domain(format!("log-probability must be <= 0, got {value}"));
        }
        Ok(LogProb(value.min(0.0)))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn prob(self) -> f64 {
        self.0.exp()
    }
}

// stirlerr(n) = ln(n!) - (n + 1/2) ln(n) + n - ln(2 pi)/2, for n = 1..=30.
const STIRLERR_TABLE: [f64; 30] = [
    0.08106146679532726,
    0.0413406959554093,
    0.02767792568499834,
    0.020790672103765093,
    0.016644691189821193,
    0.013876128823070748,
    0.01189670994589177,
    0.010411265261972096,
    0.009255462182712733,
    0.00833056343336287,
    0.007573675487951841,
    0.00694284010720953,
    0.006408994188004207,
    0.0059513701127588475,
    0.005554733551962801,
    0.0052076559196096404,
    0.004901395948434738,
    0.004629153749334028,
    0.004385560249232324,
    0.004166319691996922,
    0.00396795421864086,
    0.0037876180684444346,
    0.0036229602246830948,
    0.003472021382978767,
    0.003333155636728093,
    0.003204970228055038,
    0.0030862786826087773,
    0.002976063983550409,
    0.0028734493623524663,
    0.0027776749297526936,
];

/// Error of Stirling's approximation to `ln(n!)`, for `n >= 1`.
fn stirlerr(n: u64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    debug_assert!(n >= 1);
    if n <= 30 {
        return STIRLERR_TABLE[(n - 1) as usize];
    }
    let x = n as f64;
    let xx = x * x;
    if n > 500 {
        (S0 - S1 / xx) / x
    } else if n > 80 {
        (S0 - (S1 - S2 / xx) / xx) / x
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / xx) / xx) / xx) / xx) / x
    }
}

/// Deviance term `x ln(x / np) + np - x`, evaluated without cancellation.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        for j in 1..1000 {
            ej *= v2;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

fn check_counts(n: u64, k: u64) -> Result<()> {
    if k > n {
        return domain(format!("k={k} exceeds n={n}"));
    }
    if n > MAX_COUNT {
        return domain(format!("n={n} exceeds the supported maximum {MAX_COUNT}"));
    }
    Ok(())
}

fn check_prob(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("probability {p} outside [0, 1]"));
    }
    Ok(())
}

/// `ln C(n, k)`.
pub fn log_choose(n: u64, k: u64) -> Result<f64> {
    check_counts(n, k)?;
    Ok(log_choose_unchecked(n, k))
}

pub(crate) fn log_choose_unchecked(n: u64, k: u64) -> f64 {
    if k == 0 || k == n {
        return 0.0;
    }
    let (nf, kf, rf) = (n as f64, k as f64, (n - k) as f64);
    let frac = kf / nf;
    // n ln n - k ln k - (n-k) ln(n-k), split into two non-negative terms.
    let entropy = -kf * frac.ln() - rf * (-frac).ln_1p();
    entropy + stirlerr(n) - stirlerr(k) - stirlerr(n - k) + 0.5 * (nf / (2.0 * PI * kf * rf)).ln()
}

/// `ln P(X = k)` for `X ~ Binomial(n, p)`.
pub fn binomial_pmf_log(n: u64, k: u64, p: f64) -> Result<LogProb> {
    check_counts(n, k)?;
    check_prob(p)?;
    Ok(LogProb(pmf_log_unchecked(n, k, p).min(0.0)))
}

pub(crate) fn pmf_log_unchecked(n: u64, k: u64, p: f64) -> f64 {
    let q = 1.0 - p;
    if p == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if q == 0.0 {
        return if k == n { 0.0 } else { f64::NEG_INFINITY };
    }
    if k == 0 {
        return n as f64 * (-p).ln_1p();
    }
    if k == n {
        return n as f64 * p.ln();
    }
    let (nf, kf, rf) = (n as f64, k as f64, (n - k) as f64);
    stirlerr(n) - stirlerr(k) - stirlerr(n - k) - bd0(kf, nf * p) - bd0(rf, nf * q)
        + 0.5 * (nf / (2.0 * PI * kf * rf)).ln()
}

/// Neumaier compensated accumulator.
#[derive(Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(self) -> f64 {
        self.sum + self.comp
    }
}

/// `P(X <= k)` for `X ~ Binomial(n, p)`.
///
/// The sum runs over whichever tail is smaller, starting at its largest
/// term and walking outwards with the pmf ratio recurrence.
pub fn binomial_cdf(n: u64, k: u64, p: f64) -> Result<f64> {
    check_counts(n, k)?;
    check_prob(p)?;
    Ok(cdf_unchecked(n, k, p))
}

fn cdf_unchecked(n: u64, k: u64, p: f64) -> f64 {
    if k >= n || p == 0.0 {
        return 1.0;
    }
    if p == 1.0 {
        return 0.0;
    }
    let q = 1.0 - p;
    let lower_tail = (k as f64) <= n as f64 * p;
    let mut acc = CompensatedSum::default();
    if lower_tail {
        let odds = q / p;
        let mut term = pmf_log_unchecked(n, k, p).exp();
        let mut j = k;
        loop {
            acc.add(term);
            if j == 0 || term <= acc.sum * 1e-18 {
                break;
            }
            term *= j as f64 / (n - j + 1) as f64 * odds;
            j -= 1;
        }
        acc.total().min(1.0)
    } else {
        let odds = p / q;
        let mut j = k + 1;
        let mut term = pmf_log_unchecked(n, j, p).exp();
        loop {
            acc.add(term);
            if j == n || term <= acc.sum * 1e-18 {
                break;
            }
            term *= (n - j) as f64 / (j + 1) as f64 * odds;
            j += 1;
        }
        (1.0 - acc.total()).clamp(0.0, 1.0)
    }
}

/// Final bracket of a bisection run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    /// Endpoint with the sign of `f(lo)` at entry.
    pub lo: f64,
    /// Endpoint with the sign of `f(hi)` at entry.
    pub hi: f64,
    pub iterations: u32,
}

impl Bracket {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Bisects `f` on `[lo, hi]` until the bracket is no wider than `tol`.
///
/// `f(lo)` and `f(hi)` must have opposite signs or one of them must vanish.
/// The returned bracket keeps the sign orientation of the input endpoints,
/// so callers needing a one-sided guarantee can pick the side they want.
pub fn bisect_bracket<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<Bracket>
where
    F: FnMut(f64) -> f64,
{
    if tol.is_nan() || tol <= 0.0 || !lo.is_finite() || !hi.is_finite() || lo > hi {
        return domain(format!("invalid bisection inputs lo={lo} hi={hi} tol={tol}"));
    }
    let f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(Bracket {
            lo,
            hi: lo,
            iterations: 0,
        });
    }
    if f_hi == 0.0 {
        return Ok(Bracket {
            lo: hi,
            hi,
            iterations: 0,
        });
    }
    if f_lo.is_nan() || f_hi.is_nan() || (f_lo > 0.0) == (f_hi > 0.0) {
        return Err(Error::Bracket { lo, hi, f_lo, f_hi });
    }
    let lo_positive = f_lo > 0.0;
    let (mut a, mut b) = (lo, hi);
    let mut iterations = 0;
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        iterations += 1;
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(Bracket {
                lo: mid,
                hi: mid,
                iterations,
            });
        }
        if (fm > 0.0) == lo_positive {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(Bracket {
        lo: a,
        hi: b,
        iterations,
    })
}

/// Root of `f` on `[lo, hi]` to within `tol` (midpoint of the final bracket).
pub fn bisect_root<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    bisect_bracket(f, lo, hi, tol).map(|b| b.midpoint())
}

/// Standard normal quantile `Phi^{-1}(q)`.
///
/// Acklam's rational approximation followed by one Halley step against
/// `erfc`. The upper half is mapped onto the lower one through the exact
/// complement `1 - q`, so the function is antisymmetric about 0.5.
pub fn normal_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return domain(format!("normal quantile needs q in (0, 1), got {q}"));
    }
    if q > 0.5 {
        Ok(-lower_normal_quantile(1.0 - q))
    } else {
        Ok(lower_normal_quantile(q))
    }
}

#[allow(clippy::excessive_precision)] // published coefficients, kept verbatim
fn lower_normal_quantile(q: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if q < P_LOW {
        let r = (-2.0 * q.ln()).sqrt();
        (((((C[0] * r + C[1]) * r + C[2]) * r + C[3]) * r + C[4]) * r + C[5])
            / ((((D[0] * r + D[1]) * r + D[2]) * r + D[3]) * r + 1.0)
    } else {
        let r0 = q - 0.5;
        let r = r0 * r0;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * r0
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    // Halley refinement.
    let e = 0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2) - q;
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}
