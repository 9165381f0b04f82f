use super::audits::{audit_ros, audit_uniform_dominance, DominanceAudit, RosAudit};
use super::{write_records_csv, ExperimentConfig, ExperimentKind, RunRecord};
use crate::confidence::clopper_pearson_upper;
use crate::error::{domain, Error, Result};
use crate::estimators::AnytimeEstimate;
use crate::numerics::{binomial_cdf, MAX_COUNT};
use crate::oracle::DEFAULT_ENUMERATION_CAP;
use crate::oracle::{
    derive_seed, exact_permutation_pvalue, ExactPValue, PermutationDataset, StreamRng, SyntheticStream,
};
use crate::stopping::{SequentialRun, StoppingRule};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// Exact probability that the biased fixed-sample estimate
/// `(1 + S) / (m + 1)` rejects at level `alpha` when `S ~ Binomial(m, p)`.
pub fn fixed_sample_risk(p_true: f64, m: u64, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_true) {
        return domain(format!("p_true must lie in [0, 1], got {p_true}"));
    }
    if m == 0 {
        return domain("m must be >= 1");
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return domain(format!("alpha must lie in (0, 1], got {alpha}"));
    }
    // Reject iff 1 + S <= alpha (m + 1).
    let largest = (alpha * (m + 1) as f64 * (1.0 + 1e-12)).floor() as u64;
    if largest == 0 {
        return Ok(0.0);
    }
    binomial_cdf(m, (largest - 1).min(m), p_true)
}

/// The four stopping rules of the null study, labelled.
pub fn null_study_rules(alpha: f64, n_max: u64) -> Vec<(String, StoppingRule)> {
    let cap = StoppingRule::Cap { n_max };
    vec![
        ("fixed_1000".into(), StoppingRule::FixedN { n: n_max.min(1000) }),
        ("fixed_n_max".into(), StoppingRule::FixedN { n: n_max }),
        (
            "reject_or_cap".into(),
            StoppingRule::FirstOf(vec![StoppingRule::BelowAlpha { alpha }, cap.clone()]),
        ),
        (
            "plateau_or_cap".into(),
            StoppingRule::FirstOf(vec![StoppingRule::Plateau { n0: 1000, gamma: 1e-6 }, cap]),
        ),
    ]
}

/// Draws `p* ~ U(0, 1)` per replication and runs the anytime estimator
/// under every null-study rule on one shared stream. Records are ordered by
/// replication, then rule.
pub fn simulate_null_study(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let rules = null_study_rules(config.alpha, config.n_max);
    let bare: Vec<StoppingRule> = rules.iter().map(|(_, r)| r.clone()).collect();
    let per_rep = (0..config.replications)
        .into_par_iter()
        .map(|i| -> Result<Vec<RunRecord>> {
            let mut rng = StreamRng::from_seed(derive_seed(config.master_seed, i));
            let p_true = rng.uniform();
            let mut stream = SyntheticStream::new(p_true, rng.next_u64())?;
            let outcomes = SequentialRun::new(config.epsilon)?.run_each(&mut stream, &bare)?;
            Ok(rules
                .iter()
                .zip(outcomes)
                .map(|((label, _), (reason, est))| RunRecord {
                    replication_index: i,
                    rule: label.clone(),
                    p_true,
                    p_estimate: est.p_tilde,
                    n_used: est.n,
                    stop_reason: reason,
                    ros_violation: est.p_tilde < p_true,
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_rep.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: u64,
    /// Exclusive.
    pub hi: u64,
    pub count: u64,
}

/// Equal-width histogram over `[min, max]`.
pub fn histogram(values: &[u64], bins: usize) -> Vec<HistogramBin> {
    let (Some(&min), Some(&max)) = (values.iter().min(), values.iter().max()) else {
        return Vec::new();
    };
    let bins = bins.max(1) as u64;
    let width = ((max - min) / bins + 1).max(1);
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|b| HistogramBin {
            lo: min + b * width,
            hi: min + (b + 1) * width,
            count: 0,
        })
        .collect();
    for &v in values {
        out[((v - min) / width) as usize].count += 1;
    }
    while out.last().is_some_and(|b| b.count == 0) {
        out.pop();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantGrowthSummary {
    pub exact: ExactPValue,
    pub runs: u64,
    pub mean_n_used: f64,
    pub rejection_rate: f64,
    pub failures_to_reject: u64,
    pub histogram: Vec<HistogramBin>,
}

/// Exact permutation p-value by enumeration, then `replications` anytime
/// runs on a synthetic stream at that p-value.
pub fn plant_growth_study(
    config: &ExperimentConfig,
    data: &PermutationDataset,
) -> Result<(PlantGrowthSummary, Vec<RunRecord>)> {
    config.validate()?;
    let exact = exact_permutation_pvalue(data, DEFAULT_ENUMERATION_CAP)?;
    let p_true = exact.p_value;
    let rule = config.rule.clone().unwrap_or_else(|| {
        StoppingRule::FirstOf(vec![
            StoppingRule::BelowAlpha { alpha: config.alpha },
            StoppingRule::Cap { n_max: config.n_max },
        ])
    });
    let label = serde_json::to_string(&rule)?;
    let records = (0..config.replications)
        .into_par_iter()
        .map(|i| -> Result<RunRecord> {
            let mut stream = SyntheticStream::new(p_true, derive_seed(config.master_seed, i))?;
            let out = SequentialRun::new(config.epsilon)?.run(&mut stream, &rule, None)?;
            Ok(RunRecord {
                replication_index: i,
                rule: label.clone(),
                p_true,
                p_estimate: out.report.estimate,
                n_used: out.report.n_used,
                stop_reason: out.reason,
                ros_violation: out.report.estimate < p_true,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let runs = records.len() as u64;
    let total: u64 = records.iter().map(|r| r.n_used).sum();
    let rejections = records.iter().filter(|r| r.p_estimate <= config.alpha).count() as u64;
    let n_used: Vec<u64> = records.iter().map(|r| r.n_used).collect();
    let summary = PlantGrowthSummary {
        exact,
        runs,
        mean_n_used: total as f64 / runs as f64,
        rejection_rate: rejections as f64 / runs as f64,
        failures_to_reject: if p_true <= config.alpha { runs - rejections } else { 0 },
        histogram: histogram(&n_used, 20),
    };
    Ok((summary, records))
}

/// Sample counts and risks needed to reject after observing only zeros.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTable {
    pub epsilon: f64,
    pub alpha: f64,
    /// Smallest `m` with Clopper-Pearson upper `(m, 0, epsilon) <= alpha`.
    pub cp_min_samples: u64,
    pub cp_reference_m: u64,
    /// Smallest `epsilon` with Clopper-Pearson upper
    /// `(cp_reference_m, 0, epsilon) <= alpha`; 0 when every risk works.
    pub cp_min_epsilon: f64,
    /// First `n` at which the anytime estimate of an all-zero stream is
    /// `<= alpha`.
    pub anytime_first_crossing: u64,
}

pub fn all_zero_thresholds(epsilon: f64, alpha: f64) -> Result<ThresholdTable> {
    all_zero_thresholds_at(epsilon, alpha, 30)
}

pub fn all_zero_thresholds_at(epsilon: f64, alpha: f64, reference_m: u64) -> Result<ThresholdTable> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return domain(format!("epsilon must lie in (0, 1), got {epsilon}"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return domain(format!("alpha must lie in (0, 1], got {alpha}"));
    }
    if reference_m == 0 {
        return domain("reference m must be >= 1");
    }
    if alpha <= epsilon {
        return domain(format!(
            "the anytime estimate never drops to alpha={alpha} <= epsilon={epsilon}"
        ));
    }

    let cp_ok = |m: u64| clopper_pearson_upper(m, 0, epsilon).map(|u| u <= alpha);
    let mut hi = 1u64;
    while !cp_ok(hi)? {
        if hi >= MAX_COUNT {
            return domain("Clopper-Pearson threshold exceeds the supported sample count");
        }
        hi = (hi * 2).min(MAX_COUNT);
    }
    let mut lo = hi / 2; // fails, or 0
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if cp_ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let cp_min_samples = hi;

    let eps_ok = |e: f64| clopper_pearson_upper(reference_m, 0, e).map(|u| u <= alpha);
    let cp_min_epsilon = if alpha >= 1.0 {
        0.0
    } else {
        let (mut lo, mut hi) = (0.0f64, 1.0 - 1e-12);
        if !eps_ok(hi)? {
            return Err(Error::Domain(format!(
                "no epsilon < 1 gives an upper limit <= {alpha} at m={reference_m}"
            )));
        }
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if eps_ok(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };

    let mut est = AnytimeEstimate::new(epsilon)?;
    while est.update(false) > alpha {
        if est.n >= MAX_COUNT {
            return domain("anytime crossing exceeds the supported sample count");
        }
    }

    Ok(ThresholdTable {
        epsilon,
        alpha,
        cp_min_samples,
        cp_reference_m: reference_m,
        cp_min_epsilon,
        anytime_first_crossing: est.n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSummary {
    pub rule: String,
    pub mean_n_used: f64,
    pub ros: RosAudit,
    pub dominance: DominanceAudit,
}

/// JSON summary written next to the per-run CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub experiment: ExperimentKind,
    pub config_digest: String,
    pub master_seed: u64,
    pub replications: u64,
    pub records_path: PathBuf,
    pub rules: Vec<RuleSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plant_growth: Option<PlantGrowthSummary>,
    pub pass: bool,
}

fn summarize_rules(records: &[RunRecord], epsilon: f64, labels: &[String]) -> Result<Vec<RuleSummary>> {
    labels
        .iter()
        .map(|label| {
            let subset: Vec<RunRecord> = records.iter().filter(|r| &r.rule == label).cloned().collect();
            let estimates: Vec<f64> = subset.iter().map(|r| r.p_estimate).collect();
            let total: u64 = subset.iter().map(|r| r.n_used).sum();
            Ok(RuleSummary {
                rule: label.clone(),
                mean_n_used: total as f64 / subset.len().max(1) as f64,
                ros: audit_ros(&subset, epsilon)?,
                dominance: audit_uniform_dominance(&estimates)?,
            })
        })
        .collect()
}

/// Runs the configured experiment, writes per-run records to
/// `output_path` and a JSON summary to `output_path` with extension
/// `summary.json`, and returns the summary.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    config.validate()?;
    let digest = config.digest()?;
    let (records, rules, plant_growth) = match config.experiment {
        ExperimentKind::NullStudy => {
            let records = simulate_null_study(config)?;
            let labels: Vec<String> = null_study_rules(config.alpha, config.n_max)
                .into_iter()
                .map(|(label, _)| label)
                .collect();
            let rules = summarize_rules(&records, config.epsilon, &labels)?;
            (records, rules, None)
        }
        ExperimentKind::PlantGrowth => {
            let data = match &config.data_path {
                Some(path) => PermutationDataset::from_csv_path(path)?,
                None => PermutationDataset::plant_growth(),
            };
            let (summary, records) = plant_growth_study(config, &data)?;
            let rule = RuleSummary {
                rule: records.first().map(|r| r.rule.clone()).unwrap_or_default(),
                mean_n_used: summary.mean_n_used,
                ros: audit_ros(&records, config.epsilon)?,
                // A fixed p* is not uniform; dominance does not apply.
                dominance: DominanceAudit::not_applicable(),
            };
            (records, vec![rule], Some(summary))
        }
    };
    write_records_csv(&config.output_path, &records)?;
    let pass = rules.iter().all(|r| r.ros.pass && r.dominance.pass);
    let summary = ExperimentSummary {
        experiment: config.experiment,
        config_digest: digest,
        master_seed: config.master_seed,
        replications: config.replications,
        records_path: config.output_path.clone(),
        rules,
        plant_growth,
        pass,
    };
    std::fs::write(
        config.output_path.with_extension("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn risk_at_six_percent() {
        let r = fixed_sample_risk(0.06, 1000, 0.05).unwrap();
        assert!((r - 0.077_924_5).abs() < 1e-6, "{r}");
    }

    #[test]
    fn risk_edge_cases() {
        assert_eq!(fixed_sample_risk(0.0, 1000, 0.05).unwrap(), 1.0);
        assert!(fixed_sample_risk(0.5, 1000, 0.05).unwrap() < 1e-100);
        // alpha (m + 1) < 1: the estimate never reaches alpha.
        assert_eq!(fixed_sample_risk(0.0, 10, 0.05).unwrap(), 0.0);
        assert_eq!(fixed_sample_risk(0.7, 10, 1.0).unwrap(), 1.0);
        assert!(fixed_sample_risk(1.5, 10, 0.05).is_err());
    }

    #[test]
    fn risk_matches_direct_count() {
        // Direct summation over S of the rejection event.
        for &(p, m, alpha) in &[(0.03, 99u64, 0.05), (0.2, 40, 0.25), (0.01, 999, 0.01)] {
            let direct: f64 = (0..=m)
                .filter(|&s| (1 + s) as f64 / (m + 1) as f64 <= alpha)
                .map(|s| crate::numerics::binomial_pmf_log(m, s, p).unwrap().prob())
                .sum();
            let r = fixed_sample_risk(p, m, alpha).unwrap();
            assert!((r - direct).abs() < 1e-12, "{p} {m} {alpha}: {r} vs {direct}");
        }
    }

    #[test]
    fn thresholds_at_reference_settings() {
        let t = all_zero_thresholds(1e-5, 0.05).unwrap();
        assert_eq!(t.cp_min_samples, 225);
        assert_eq!(t.anytime_first_crossing, 339);
        assert!(
            (t.cp_min_epsilon - 0.95f64.powi(30)).abs() < 1e-9,
            "{}",
            t.cp_min_epsilon
        );
    }

    #[test]
    fn thresholds_at_alpha_one() {
        let t = all_zero_thresholds(0.05, 1.0).unwrap();
        assert_eq!((t.cp_min_samples, t.anytime_first_crossing), (1, 1));
        assert_eq!(t.cp_min_epsilon, 0.0);
        assert!(all_zero_thresholds(0.05, 0.05).is_err());
    }

    #[test]
    fn histogram_counts_everything() {
        let values: Vec<u64> = (0..1000).map(|i| (i * i) % 977).collect();
        let h = histogram(&values, 7);
        assert_eq!(h.iter().map(|b| b.count).sum::<u64>(), 1000);
        assert!(h.windows(2).all(|w| w[0].hi == w[1].lo));
        assert_eq!(histogram(&[5, 5, 5], 4), vec![HistogramBin { lo: 5, hi: 6, count: 3 }]);
        assert!(histogram(&[], 3).is_empty());
    }

    fn small_config(kind: ExperimentKind, out: PathBuf) -> ExperimentConfig {
        ExperimentConfig {
            experiment: kind,
            replications: 40,
            epsilon: 1e-3,
            alpha: 0.05,
            n_max: 3000,
            master_seed: 11,
            rule: None,
            output_path: out,
            data_path: None,
        }
    }

    #[test]
    fn null_study_is_reproducible_and_well_formed() {
        let cfg = small_config(ExperimentKind::NullStudy, "unused".into());
        let a = simulate_null_study(&cfg).unwrap();
        let b = simulate_null_study(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 160);
        for r in &a {
            assert!(r.p_estimate >= cfg.epsilon);
            assert_eq!(r.ros_violation, r.p_estimate < r.p_true);
            if r.rule == "reject_or_cap" && r.n_used < cfg.n_max {
                assert!(r.p_estimate <= cfg.alpha);
            }
        }
    }

    #[test]
    fn experiment_output_is_bit_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let run = |name: &str| {
            let path = dir.path().join(name);
            let summary = run_experiment(&small_config(ExperimentKind::NullStudy, path.clone())).unwrap();
            (std::fs::read(&path).unwrap(), summary)
        };
        let (a, sa) = run("a.csv");
        let (b, sb) = run("b.csv");
        assert_eq!(a, b);
        assert_eq!(sa.rules, sb.rules);
        assert!(dir.path().join("a.summary.json").exists());
    }

    #[test]
    fn plant_growth_small() {
        let mut cfg = small_config(ExperimentKind::PlantGrowth, "unused".into());
        cfg.epsilon = 1e-5;
        cfg.n_max = 100_000;
        let (summary, records) = plant_growth_study(&cfg, &PermutationDataset::plant_growth()).unwrap();
        assert_eq!((summary.exact.extreme, summary.exact.total), (4465, 184_756));
        assert_eq!(records.len(), 40);
        assert_eq!(summary.failures_to_reject, 0);
        assert!(summary.mean_n_used > 1000.0 && summary.mean_n_used < 3000.0);
    }
}
