//! Simulation studies and validity audits.
//!
//! Every experiment is a pure function of its [`ExperimentConfig`]:
//! replication `i` draws from seeds derived from `(master_seed, i)`, so
//! output does not depend on how replications are scheduled across threads.

mod audits;
mod experiments;

pub use audits::{
    audit_replication_disagreement, audit_ros, audit_uniform_dominance, dkw_band, ros_band, DecisionMethod,
    DominanceAudit, ReplicationAudit, RosAudit, AUDIT_CONFIDENCE,
};
pub use experiments::{
    all_zero_thresholds, all_zero_thresholds_at, fixed_sample_risk, histogram, null_study_rules, plant_growth_study,
    run_experiment, simulate_null_study, ExperimentSummary, HistogramBin, PlantGrowthSummary, RuleSummary,
    ThresholdTable,
};

use crate::error::{domain, Error, Result};
use crate::estimators::StopReason;
use crate::stopping::StoppingRule;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    NullStudy,
    PlantGrowth,
}

/// JSON-configurable description of a simulation experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub replications: u64,
    pub epsilon: f64,
    pub alpha: f64,
    pub n_max: u64,
    pub master_seed: u64,
    /// Rule for single-rule experiments; the null study always runs its
    /// four standard rules.
    #[serde(default)]
    pub rule: Option<StoppingRule>,
    pub output_path: PathBuf,
    /// Two-column `group,value` CSV for the plant-growth study; the bundled
    /// dataset is used when absent.
    #[serde(default)]
    pub data_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return domain("replications must be >= 1");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return domain(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return domain(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.n_max == 0 {
            return domain("n_max must be >= 1");
        }
        if let Some(rule) = &self.rule {
            rule.validate()?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> Result<String> {
        let text = serde_json::to_string(self)?;
        Ok(hex::encode(Sha256::digest(text.as_bytes())))
    }
}

/// Outcome of one (replication, rule) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub replication_index: u64,
    pub rule: String,
    pub p_true: f64,
    pub p_estimate: f64,
    pub n_used: u64,
    pub stop_reason: StopReason,
    /// Some `p_tilde_n` with `n <= stop` fell below `p_true`. As `p_tilde`
    /// is non-increasing this is `p_estimate < p_true`.
    pub ros_violation: bool,
}

pub fn write_records_csv(path: impl AsRef<Path>, records: &[RunRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for r in records {
        writer.serialize(r)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_records_csv(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let records = reader
        .deserialize()
        .collect::<std::result::Result<Vec<RunRecord>, _>>()?;
    for r in &records {
        if r.ros_violation != (r.p_estimate < r.p_true) {
            return Err(Error::Dataset(format!(
                "replication {} ({}): ros_violation flag disagrees with p_estimate < p_true",
                r.replication_index, r.rule
            )));
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> ExperimentConfig {
        ExperimentConfig {
            experiment: ExperimentKind::NullStudy,
            replications: 10,
            epsilon: 1e-5,
            alpha: 0.05,
            n_max: 1000,
            master_seed: 1,
            rule: None,
            output_path: "out.csv".into(),
            data_path: None,
        }
    }

    #[test]
    fn config_round_trip_and_digest() {
        let cfg = config();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.digest().unwrap(), cfg.digest().unwrap());
        let other = ExperimentConfig {
            master_seed: 2,
            ..cfg.clone()
        };
        assert_ne!(other.digest().unwrap(), cfg.digest().unwrap());
    }

    #[test]
    fn config_validation() {
        assert!(config().validate().is_ok());
        assert!(ExperimentConfig {
            replications: 0,
            ..config()
        }
        .validate()
        .is_err());
        assert!(ExperimentConfig {
            epsilon: 1.0,
            ..config()
        }
        .validate()
        .is_err());
        assert!(ExperimentConfig { alpha: 0.0, ..config() }.validate().is_err());
    }

    #[test]
    fn records_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let records = vec![RunRecord {
            replication_index: 3,
            rule: "fixed_1000".into(),
            p_true: 0.25,
            p_estimate: 0.3,
            n_used: 1000,
            stop_reason: StopReason::FixedN,
            ros_violation: false,
        }];
        write_records_csv(&path, &records).unwrap();
        assert_eq!(read_records_csv(&path).unwrap(), records);

        let bad = vec![RunRecord {
            ros_violation: true,
            ..records[0].clone()
        }];
        write_records_csv(&path, &bad).unwrap();
        assert!(read_records_csv(&path).is_err());
    }
}
