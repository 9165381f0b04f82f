use super::RunRecord;
use crate::error::{domain, Result};
use crate::estimators::{besag_clifford, fixed_sample, silva_assuncao, wald_sprt, FixedKind, SilvaAssuncaoTuning};
use crate::numerics::binomial_cdf;
use crate::oracle::{derive_seed, OracleStream, SyntheticStream};
use crate::stopping::{SequentialRun, StoppingRule};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Miss probability of the audit acceptance bands.
pub const AUDIT_CONFIDENCE: f64 = 1e-3;

/// Smallest `k` with `P(Binomial(records, epsilon) > k) <= delta`.
pub fn ros_band(records: u64, epsilon: f64, delta: f64) -> Result<u64> {
    let tail_ok = |k: u64| binomial_cdf(records, k, epsilon).map(|c| 1.0 - c <= delta);
    let (mut lo, mut hi) = (0u64, records);
    if tail_ok(0)? {
        return Ok(0);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if tail_ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosAudit {
    pub records: u64,
    pub violations: u64,
    pub epsilon: f64,
    /// Largest violation count consistent with a risk of `epsilon`.
    pub band: u64,
    pub pass: bool,
}

/// Counts estimates that fell below the true p-value.
pub fn audit_ros(records: &[RunRecord], epsilon: f64) -> Result<RosAudit> {
    if records.is_empty() {
        return domain("no records to audit");
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return domain(format!("epsilon must lie in (0, 1], got {epsilon}"));
    }
    let n = records.len() as u64;
    let violations = records.iter().filter(|r| r.ros_violation).count() as u64;
    let band = ros_band(n, epsilon, AUDIT_CONFIDENCE)?;
    Ok(RosAudit {
        records: n,
        violations,
        epsilon,
        band,
        pass: violations <= band,
    })
}

/// Two-sided Dvoretzky-Kiefer-Wolfowitz band `sqrt(ln(2 / delta) / (2 n))`.
pub fn dkw_band(n: u64, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceAudit {
    pub samples: u64,
    /// `sup_t (ECDF(t) - t)`, at least 0.
    pub max_excess: f64,
    pub band: f64,
    pub pass: bool,
}

impl DominanceAudit {
    pub(crate) fn not_applicable() -> Self {
        DominanceAudit {
            samples: 0,
            max_excess: 0.0,
            band: f64::INFINITY,
            pass: true,
        }
    }
}

/// Checks that the estimates are stochastically no smaller than `U(0, 1)`.
pub fn audit_uniform_dominance(estimates: &[f64]) -> Result<DominanceAudit> {
    if estimates.is_empty() {
        return domain("no estimates to audit");
    }
    if estimates.iter().any(|x| x.is_nan()) {
        return domain("estimates contain NaN");
    }
    let mut sorted = estimates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // The ECDF jumps to i/n at the i-th order statistic; the excess is
    // largest right at a jump.
    let max_excess = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (i + 1) as f64 / n as f64 - x)
        .fold(0.0f64, f64::max);
    let band = dkw_band(n as u64, AUDIT_CONFIDENCE);
    Ok(DominanceAudit {
        samples: n as u64,
        max_excess,
        band,
        pass: max_excess <= band,
    })
}

/// A reject/do-not-reject procedure run on a fresh stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionMethod {
    /// Anytime estimator with significance resolution plus a cap; rejects
    /// iff `p_tilde <= alpha` at the stop.
    Anytime {
        alpha: f64,
        epsilon: f64,
        n_max: u64,
    },
    FixedBiased {
        alpha: f64,
        m: u64,
    },
    Sprt {
        alpha: f64,
        delta: f64,
        eps0: f64,
        eps1: f64,
        cap: u64,
    },
    BesagClifford {
        alpha: f64,
        h: u64,
        max_samples: u64,
    },
    SilvaAssuncao {
        h: u64,
        t1: u64,
        c_e: f64,
        max_samples: u64,
    },
}

impl DecisionMethod {
    pub fn decide<S: OracleStream + ?Sized>(&self, stream: &mut S) -> Result<bool> {
        Ok(match *self {
            DecisionMethod::Anytime { alpha, epsilon, n_max } => {
                let rule = StoppingRule::FirstOf(vec![
                    StoppingRule::SignificanceResolved { alpha },
                    StoppingRule::Cap { n_max },
                ]);
                SequentialRun::new(epsilon)?.run(stream, &rule, None)?.report.estimate <= alpha
            }
            DecisionMethod::FixedBiased { alpha, m } => fixed_sample(stream, m, FixedKind::Biased)?.rejects(alpha),
            DecisionMethod::Sprt {
                alpha,
                delta,
                eps0,
                eps1,
                cap,
            } => wald_sprt(stream, alpha, delta, eps0, eps1, cap)?.estimate == 1.0,
            DecisionMethod::BesagClifford { alpha, h, max_samples } => {
                besag_clifford(stream, h, max_samples)?.rejects(alpha)
            }
            DecisionMethod::SilvaAssuncao {
                h,
                t1,
                c_e,
                max_samples,
            } => {
                silva_assuncao(
                    stream,
                    SilvaAssuncaoTuning {
                        h,
                        t1,
                        c_e,
                        max_samples,
                    },
                )?
                .estimate
                    == 1.0
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationAudit {
    pub pairs: u64,
    pub disagreements: u64,
    pub rate: f64,
    /// `2 epsilon + 3 SE`, with the SE of a rate of `2 epsilon`.
    pub bound: f64,
    pub pass: bool,
}

/// Runs `method` twice per pair on independent streams at `p_true` and
/// counts pairs whose decisions differ.
pub fn audit_replication_disagreement(
    method: &DecisionMethod,
    p_true: f64,
    pairs: u64,
    epsilon: f64,
    master_seed: u64,
) -> Result<ReplicationAudit> {
    if pairs == 0 {
        return domain("pairs must be >= 1");
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return domain(format!("epsilon must lie in (0, 1), got {epsilon}"));
    }
    let disagreements = (0..pairs)
        .into_par_iter()
        .map(|i| -> Result<u64> {
            let seed = derive_seed(master_seed, i);
            let a = method.decide(&mut SyntheticStream::new(p_true, derive_seed(seed, 1))?)?;
            let b = method.decide(&mut SyntheticStream::new(p_true, derive_seed(seed, 2))?)?;
            Ok((a != b) as u64)
        })
        .try_reduce(|| 0, |x, y| Ok(x + y))?;
    let nominal = (2.0 * epsilon).min(1.0);
    let bound = nominal + 3.0 * (nominal * (1.0 - nominal) / pairs as f64).sqrt();
    let rate = disagreements as f64 / pairs as f64;
    Ok(ReplicationAudit {
        pairs,
        disagreements,
        rate,
        bound,
        pass: rate <= bound,
    })
}
