//! End-to-end acceptance checks, one line of output per criterion.
//!
//! Runs without the libtest harness so the PASS/FAIL lines are always shown.

use anytime_mc::harness::{
    all_zero_thresholds, audit_replication_disagreement, fixed_sample_risk, plant_growth_study, simulate_null_study,
    DecisionMethod, ExperimentConfig, ExperimentKind, RunRecord,
};
use anytime_mc::harness::{audit_ros, audit_uniform_dominance, dkw_band, AUDIT_CONFIDENCE};
use anytime_mc::oracle::{
    derive_seed, exact_permutation_pvalue, PermutationDataset, ScanProblem, StreamRng, StreamSource,
    DEFAULT_ENUMERATION_CAP,
};
use anytime_mc::stopping::{write_trajectory_rows, RunCheckpoint, SequentialRun, StepRecord};
use anytime_mc::{robbins_upper, AnytimeEstimate, StoppingRule};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    check: fn() -> Outcome,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixed_sample_risk_value() -> Outcome {
    let r = fixed_sample_risk(0.06, 1000, 0.05).map_err(|e| e.to_string())?;
    ensure((0.077..=0.079).contains(&r), || {
        format!("risk {r} outside [0.077, 0.079]")
    })?;
    Ok(format!("risk = {r:.6}"))
}

fn all_zero_threshold_values() -> Outcome {
    let t = all_zero_thresholds(1e-5, 0.05).map_err(|e| e.to_string())?;
    ensure(t.cp_min_samples == 225, || {
        format!("Clopper-Pearson m = {}", t.cp_min_samples)
    })?;
    ensure(t.anytime_first_crossing == 339, || {
        format!("anytime crossing n = {}", t.anytime_first_crossing)
    })?;
    ensure((t.cp_min_epsilon - 0.215).abs() <= 1e-3, || {
        format!("m=30 epsilon = {}", t.cp_min_epsilon)
    })?;
    Ok(format!(
        "m = {}, n = {}, epsilon(m=30) = {:.4}",
        t.cp_min_samples, t.anytime_first_crossing, t.cp_min_epsilon
    ))
}

fn plant_growth_exact() -> Outcome {
    let exact = exact_permutation_pvalue(&PermutationDataset::plant_growth(), DEFAULT_ENUMERATION_CAP)
        .map_err(|e| e.to_string())?;
    ensure(exact.total == 184_756, || format!("{} splits enumerated", exact.total))?;
    ensure((exact.p_value - 0.02417).abs() <= 1e-5, || {
        format!("p* = {}", exact.p_value)
    })?;
    Ok(format!("p* = {}/{} = {:.6}", exact.extreme, exact.total, exact.p_value))
}

fn plant_growth_sequential() -> Outcome {
    let config = ExperimentConfig {
        experiment: ExperimentKind::PlantGrowth,
        replications: 10_000,
        epsilon: 1e-5,
        alpha: 0.05,
        n_max: 100_000,
        master_seed: 20_240_501,
        rule: None,
        output_path: "unused.csv".into(),
        data_path: None,
    };
    let (summary, _) = plant_growth_study(&config, &PermutationDataset::plant_growth()).map_err(|e| e.to_string())?;
    ensure((1639.0..=2003.0).contains(&summary.mean_n_used), || {
        format!("mean n = {}", summary.mean_n_used)
    })?;
    ensure(summary.failures_to_reject == 0, || {
        format!("{} failures to reject", summary.failures_to_reject)
    })?;
    Ok(format!("mean n = {:.1}, failures to reject = 0", summary.mean_n_used))
}

fn null_study_audits() -> Outcome {
    let config = ExperimentConfig {
        experiment: ExperimentKind::NullStudy,
        replications: 1000,
        epsilon: 1e-5,
        alpha: 0.05,
        n_max: 100_000,
        master_seed: 31_337,
        rule: None,
        output_path: "unused.csv".into(),
        data_path: None,
    };
    let records = simulate_null_study(&config).map_err(|e| e.to_string())?;
    let band = dkw_band(1000, AUDIT_CONFIDENCE);
    let mut parts = Vec::new();
    let mut labels: Vec<&str> = records.iter().map(|r| r.rule.as_str()).collect();
    labels.sort();
    labels.dedup();
    ensure(labels.len() == 4, || format!("{} rules", labels.len()))?;
    for label in labels {
        let subset: Vec<RunRecord> = records.iter().filter(|r| r.rule == label).cloned().collect();
        let ros = audit_ros(&subset, config.epsilon).map_err(|e| e.to_string())?;
        ensure(ros.violations == 0, || {
            format!("{label}: {} ROS violations", ros.violations)
        })?;
        ensure(subset.iter().all(|r| r.p_estimate >= config.epsilon), || {
            format!("{label}: estimate below epsilon")
        })?;
        let estimates: Vec<f64> = subset.iter().map(|r| r.p_estimate).collect();
        let dom = audit_uniform_dominance(&estimates).map_err(|e| e.to_string())?;
        ensure(dom.pass, || format!("{label}: ECDF excess {} > {band}", dom.max_excess))?;
        parts.push(format!("{label} excess {:.4}", dom.max_excess));
    }
    Ok(format!("0 violations; DKW band {band:.4}; {}", parts.join(", ")))
}

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn choose(n: u64, k: u64) -> BigInt {
    (0..k).fold(BigInt::one(), |acc, i| acc * BigInt::from(n - i) / BigInt::from(i + 1))
}

fn exact_coverage() -> Outcome {
    const HORIZON: u64 = 12;
    let mut worst = (0.0f64, 0u64, 0.0f64, 0.0f64);
    for (eps_num, eps_den) in [(1i64, 20i64), (1, 5)] {
        let eps_f = eps_num as f64 / eps_den as f64;
        let eps = ratio(eps_num, eps_den);
        // Implementation's upper limits, as exact dyadic rationals.
        let upper: Vec<Vec<BigRational>> = (0..=HORIZON)
            .map(|m| {
                (0..=m)
                    .map(|s| {
                        if m == 0 {
                            BigRational::one()
                        } else {
                            rational(robbins_upper(m, s, eps_f).unwrap())
                        }
                    })
                    .collect()
            })
            .collect();
        for k in 1..=19i64 {
            let p = ratio(k, 20);
            let q = BigRational::one() - &p;
            // First step at which the computed limit, and the exact
            // super-level-set limit, fall below p.
            let computed_miss = |m: u64, s: u64| upper[m as usize][s as usize] < p;
            let exact_miss = |m: u64, s: u64| {
                let mode = ratio(s as i64, m as i64);
                if p <= mode {
                    return false;
                }
                let lik = BigRational::from_integer(choose(m, s))
                    * num_traits::pow(p.clone(), s as usize)
                    * num_traits::pow(q.clone(), (m - s) as usize);
                lik < &eps / BigRational::from_integer(BigInt::from(m + 1))
            };
            // counts[n][S] of length-HORIZON sequences with S ones whose
            // first miss happens at or before n.
            let mut computed_counts = vec![vec![0u64; HORIZON as usize + 1]; HORIZON as usize + 1];
            let mut exact_counts = computed_counts.clone();
            for seq in 0u32..(1 << HORIZON) {
                let total = seq.count_ones() as usize;
                let (mut s, mut first_c, mut first_e) = (0u64, None, None);
                for m in 1..=HORIZON {
                    s += ((seq >> (m - 1)) & 1) as u64;
                    let (c, e) = (computed_miss(m, s), exact_miss(m, s));
                    if c && !e {
                        return Err(format!("computed limit below exact limit at m={m}, s={s}"));
                    }
                    if c && first_c.is_none() {
                        first_c = Some(m);
                    }
                    if e && first_e.is_none() {
                        first_e = Some(m);
                    }
                }
                for n in 1..=HORIZON {
                    if first_c.is_some_and(|f| f <= n) {
                        computed_counts[n as usize][total] += 1;
                    }
                    if first_e.is_some_and(|f| f <= n) {
                        exact_counts[n as usize][total] += 1;
                    }
                }
            }
            let weight: Vec<BigRational> = (0..=HORIZON)
                .map(|ones| {
                    num_traits::pow(p.clone(), ones as usize) * num_traits::pow(q.clone(), (HORIZON - ones) as usize)
                })
                .collect();
            for n in 1..=HORIZON as usize {
                for counts in [&computed_counts, &exact_counts] {
                    let prob = counts[n].iter().zip(&weight).fold(BigRational::zero(), |acc, (&c, w)| {
                        acc + BigRational::from_integer(BigInt::from(c)) * w
                    });
                    if prob > eps {
                        return Err(format!("P(miss by n={n}) = {prob} > {eps} at p={p}"));
                    }
                    let as_f = num_traits::ToPrimitive::to_f64(&prob).unwrap_or(0.0);
                    if as_f / eps_f > worst.0 {
                        worst = (as_f / eps_f, n as u64, k as f64 / 20.0, eps_f);
                    }
                }
            }
        }
    }
    Ok(format!(
        "all 2^12 outcomes x 19 p x 2 epsilon certified; worst miss/epsilon = {:.4} (n={}, p={}, epsilon={})",
        worst.0, worst.1, worst.2, worst.3
    ))
}

fn monotonicity() -> Outcome {
    let violations: u64 = (0..100_000u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = StreamRng::from_seed(derive_seed(7, i));
            let eps = 10f64.powf(-6.0 + 5.7 * rng.uniform());
            let p = rng.uniform();
            let len = 1 + rng.below(0, 300) as u64;
            let mut est = AnytimeEstimate::new(eps).unwrap();
            let mut prev = est.p_tilde;
            let mut bad = 0;
            for _ in 0..len {
                let next = est.update(rng.uniform() < p);
                if next > prev || next < eps {
                    bad += 1;
                }
                prev = next;
            }
            bad
        })
        .sum();
    ensure(violations == 0, || {
        format!("{violations} increasing or sub-epsilon steps")
    })?;
    Ok("100000 trajectories, no increase, never below epsilon".into())
}

fn replication_disagreement() -> Outcome {
    let method = DecisionMethod::Anytime {
        alpha: 0.05,
        epsilon: 1e-3,
        n_max: 1_000_000,
    };
    let audit = audit_replication_disagreement(&method, 0.04, 10_000, 1e-3, 99).map_err(|e| e.to_string())?;
    ensure(audit.pass, || format!("rate {} > bound {}", audit.rate, audit.bound))?;
    Ok(format!(
        "{} of {} pairs disagree (rate {}, bound {:.5})",
        audit.disagreements, audit.pairs, audit.rate, audit.bound
    ))
}

fn trajectory_csv(records: &[StepRecord], header: bool) -> Vec<u8> {
    let mut out = Vec::new();
    write_trajectory_rows(&mut out, records, header).unwrap();
    out
}

fn resume_determinism() -> Outcome {
    let sources = [
        ("synthetic", StreamSource::Synthetic { p_true: 0.03 }),
        (
            "permutation",
            StreamSource::Permutation(PermutationDataset::plant_growth()),
        ),
        (
            "scan",
            StreamSource::Scan(ScanProblem::contiguous(vec![0, 1, 0, 4, 3, 0, 1, 0], 0.8, 1, 4).unwrap()),
        ),
    ];
    let rule = StoppingRule::FirstOf(vec![
        StoppingRule::SignificanceResolved { alpha: 0.05 },
        StoppingRule::Plateau { n0: 200, gamma: 1e-5 },
        StoppingRule::Cap { n_max: 3000 },
    ]);
    let mut splits_checked = 0;
    for (name, source) in &sources {
        let mut stream = source.open(404).unwrap();
        let mut full_records = Vec::new();
        let full = SequentialRun::new(1e-4)
            .unwrap()
            .run(&mut *stream, &rule, Some(&mut full_records))
            .unwrap();
        let full_csv = trajectory_csv(&full_records, true);
        let mut rng = StreamRng::from_seed(derive_seed(404, splits_checked));
        let mut splits: Vec<u64> = (0..8).map(|_| 1 + rng.below(0, full_records.len()) as u64).collect();
        splits.push(1);
        splits.push(full_records.len() as u64);
        for k in splits {
            let mut first_stream = source.open(404).unwrap();
            let mut first = Vec::new();
            let pause = StoppingRule::FirstOf(vec![rule.clone(), StoppingRule::Cap { n_max: k }]);
            let mut run = SequentialRun::new(1e-4).unwrap();
            run.run(&mut *first_stream, &pause, Some(&mut first)).unwrap();
            let saved = serde_json::to_string(&run.checkpoint(&*first_stream)).unwrap();

            let checkpoint: RunCheckpoint = serde_json::from_str(&saved).unwrap();
            let mut resumed_stream = source.resume(&checkpoint.sample_state).unwrap();
            let mut resumed = SequentialRun::from_checkpoint(&checkpoint).unwrap();
            let mut second = Vec::new();
            let out = resumed.run(&mut *resumed_stream, &rule, Some(&mut second)).unwrap();

            let mut split_csv = trajectory_csv(&first, true);
            split_csv.extend(trajectory_csv(&second, false));
            ensure(split_csv == full_csv, || {
                format!("{name}: CSV differs when split at {k}")
            })?;
            ensure(out.report == full.report, || {
                format!("{name}: report differs when split at {k}")
            })?;
            splits_checked += 1;
        }
    }
    Ok(format!(
        "{splits_checked} split points over 3 stream kinds, CSV identical"
    ))
}

fn main() {
    let criteria = [
        Criterion {
            id: 1,
            name: "fixed-sample risk",
            limit: Duration::from_millis(1),
            check: fixed_sample_risk_value,
        },
        Criterion {
            id: 2,
            name: "all-zero thresholds",
            limit: Duration::from_secs(1),
            check: all_zero_threshold_values,
        },
        Criterion {
            id: 3,
            name: "plant-growth exact p-value",
            limit: Duration::from_secs(5),
            check: plant_growth_exact,
        },
        Criterion {
            id: 4,
            name: "plant-growth sequential study",
            limit: Duration::from_secs(120),
            check: plant_growth_sequential,
        },
        Criterion {
            id: 5,
            name: "null-study ROS and dominance",
            limit: Duration::from_secs(300),
            check: null_study_audits,
        },
        Criterion {
            id: 6,
            name: "exact confidence-sequence coverage",
            limit: Duration::from_secs(60),
            check: exact_coverage,
        },
        Criterion {
            id: 7,
            name: "estimate monotonicity",
            limit: Duration::from_secs(60),
            check: monotonicity,
        },
        Criterion {
            id: 8,
            name: "replication disagreement",
            limit: Duration::from_secs(120),
            check: replication_disagreement,
        },
        Criterion {
            id: 9,
            name: "resume determinism",
            limit: Duration::from_secs(10),
            check: resume_determinism,
        },
    ];

    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.check)();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > c.limit => Err(format!("{detail}; took {elapsed:.2?}, limit {:?}", c.limit)),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS criterion {} ({}): {detail} [{elapsed:.2?}]", c.id, c.name),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {} ({}): {detail} [{elapsed:.2?}]", c.id, c.name);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
