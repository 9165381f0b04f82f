use super::{EstimateReport, Method, StopReason};
use crate::error::{domain, Result};
use crate::oracle::OracleStream;

/// Besag-Clifford sequential estimate: sample until `h` ones or `max_samples`
/// draws. Stopping at `l < M` with `h` ones gives `h / l`; otherwise the
/// biased estimate `(1 + S_M) / (M + 1)`.
pub fn besag_clifford<S: OracleStream + ?Sized>(stream: &mut S, h: u64, max_samples: u64) -> Result<EstimateReport> {
    if h == 0 || max_samples == 0 {
        return domain("Besag-Clifford needs h >= 1 and M >= 1");
    }
    if h > max_samples {
        return domain(format!("h={h} exceeds M={max_samples}"));
    }
    let mut ones = 0;
    for drawn in 1..=max_samples {
        ones += stream.next_bit() as u64;
        if ones == h && drawn < max_samples {
            return Ok(EstimateReport::new(
                Method::BesagClifford,
                h as f64 / drawn as f64,
                drawn,
                StopReason::HReached,
            )
            .with_tuning("h", h as f64)
            .with_tuning("max_samples", max_samples as f64));
        }
    }
    let estimate = (1 + ones) as f64 / (max_samples + 1) as f64;
    Ok(
        EstimateReport::new(Method::BesagClifford, estimate, max_samples, StopReason::MaxSamples)
            .with_tuning("h", h as f64)
            .with_tuning("max_samples", max_samples as f64),
    )
}

/// Tuning of the Silva-Assuncao truncated sequential test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SilvaAssuncaoTuning {
    /// Ones needed for early acceptance.
    pub h: u64,
    /// Last index at which early acceptance may happen.
    pub t1: u64,
    /// Rejection cut-off: reject iff `S_M < c_e` after no early stop.
    pub c_e: f64,
    pub max_samples: u64,
}

/// Silva-Assuncao decision: 0 if `h` ones appear within the first `t1`
/// draws, or if `S_M >= C_e`; 1 (reject) otherwise.
pub fn silva_assuncao<S: OracleStream + ?Sized>(stream: &mut S, tuning: SilvaAssuncaoTuning) -> Result<EstimateReport> {
    let SilvaAssuncaoTuning {
        h,
        t1,
        c_e,
        max_samples,
    } = tuning;
    if h == 0 {
        return domain("Silva-Assuncao needs h >= 1");
    }
    if t1 > max_samples || max_samples == 0 {
        return domain(format!("need 1 <= M and t1 <= M, got t1={t1} M={max_samples}"));
    }
    if c_e.is_nan() || c_e < 0.0 {
        return domain(format!("C_e must be >= 0, got {c_e}"));
    }
    let tag = |r: EstimateReport| {
        r.with_tuning("h", h as f64)
            .with_tuning("t1", t1 as f64)
            .with_tuning("c_e", c_e)
            .with_tuning("max_samples", max_samples as f64)
    };
    let mut ones = 0u64;
    for t in 1..=t1 {
        ones += stream.next_bit() as u64;
        if ones >= h {
            return Ok(tag(EstimateReport::new(
                Method::SilvaAssuncao,
                0.0,
                t,
                StopReason::EarlyAccept,
            )));
        }
    }
    for _ in t1..max_samples {
        ones += stream.next_bit() as u64;
    }
    let decision = if (ones as f64) < c_e { 1.0 } else { 0.0 };
    Ok(tag(EstimateReport::new(
        Method::SilvaAssuncao,
        decision,
        max_samples,
        StopReason::MaxSamples,
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{ScriptedStream, SyntheticStream};

    #[test]
    fn bc_all_ones() {
        let r = besag_clifford(&mut ScriptedStream::ones_only(), 3, 50).unwrap();
        assert_eq!(
            (r.n_used, r.estimate, r.stopping_reason),
            (3, 1.0, StopReason::HReached)
        );
    }

    #[test]
    fn bc_all_zeros() {
        let r = besag_clifford(&mut ScriptedStream::zeros(), 5, 99).unwrap();
        assert_eq!(r.n_used, 99);
        assert!((r.estimate - 0.01).abs() < 1e-15);
    }

    #[test]
    fn bc_alternating() {
        let r = besag_clifford(&mut ScriptedStream::from_bits("01").unwrap(), 2, 10).unwrap();
        assert_eq!((r.n_used, r.estimate), (4, 0.5));
    }

    #[test]
    fn bc_h_reached_exactly_at_m_uses_biased_form() {
        let r = besag_clifford(&mut ScriptedStream::from_bits("0001").unwrap(), 1, 4).unwrap();
        assert_eq!(r.stopping_reason, StopReason::MaxSamples);
        assert!((r.estimate - 2.0 / 5.0).abs() < 1e-15);
        assert!(besag_clifford(&mut ScriptedStream::zeros(), 5, 4).is_err());
    }

    #[test]
    fn bc_estimate_in_unit_interval() {
        for seed in 0..200 {
            let mut st = SyntheticStream::new(seed as f64 / 200.0, seed).unwrap();
            let r = besag_clifford(&mut st, 4, 60).unwrap();
            assert!(r.estimate > 0.0 && r.estimate <= 1.0);
        }
    }

    fn tuning(h: u64, t1: u64, c_e: f64, max_samples: u64) -> SilvaAssuncaoTuning {
        SilvaAssuncaoTuning {
            h,
            t1,
            c_e,
            max_samples,
        }
    }

    #[test]
    fn sa_early_accept() {
        let r = silva_assuncao(&mut ScriptedStream::from_bits("0110").unwrap(), tuning(2, 5, 3.0, 20)).unwrap();
        assert_eq!(
            (r.estimate, r.n_used, r.stopping_reason),
            (0.0, 3, StopReason::EarlyAccept)
        );
    }

    #[test]
    fn sa_all_zeros_rejects() {
        let r = silva_assuncao(&mut ScriptedStream::zeros(), tuning(2, 5, 1.0, 30)).unwrap();
        assert_eq!((r.estimate, r.n_used), (1.0, 30));
        assert!(r.rejects(0.05));
    }

    #[test]
    fn sa_boundary_ce_does_not_reject() {
        // One 1 in the first 5 (h = 2 not reached), then S_M = 3 = C_e.
        let bits = "10000".to_string() + "1000010000";
        let r = silva_assuncao(&mut ScriptedStream::from_bits(&bits).unwrap(), tuning(2, 5, 3.0, 15)).unwrap();
        assert_eq!(r.estimate, 0.0);
        assert_eq!(r.stopping_reason, StopReason::MaxSamples);
    }

    #[test]
    fn sa_invalid_tuning() {
        assert!(silva_assuncao(&mut ScriptedStream::zeros(), tuning(0, 5, 1.0, 10)).is_err());
        assert!(silva_assuncao(&mut ScriptedStream::zeros(), tuning(1, 11, 1.0, 10)).is_err());
        assert!(silva_assuncao(&mut ScriptedStream::zeros(), tuning(1, 5, -1.0, 10)).is_err());
    }
}
