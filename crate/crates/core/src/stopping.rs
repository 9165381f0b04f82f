//! Stopping rules and the sequential runner for the anytime estimator.
//!
//! Rules only decide when to pause; the anytime estimate is valid whichever
//! rule fires, and a paused run can be checkpointed and resumed later with
//! a different rule.

use crate::confidence::{is_below_robbins_lower, robbins_lower, robbins_upper};
use crate::error::{domain, Error, Result};
use crate::estimators::{AnytimeEstimate, EstimateReport, StopReason};
use crate::oracle::{OracleStream, SampleState};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;

/// Termination bound applied to every run on top of its rule.
pub const DEFAULT_IMPLICIT_CAP: u64 = 10_000_000;

/// When to stop drawing calibration samples.
///
/// Serialized as nested tagged objects, e.g.
/// `{"first_of":[{"significance_resolved":{"alpha":0.05}},{"cap":{"n_max":100000}}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoppingRule {
    /// Stop at exactly `n` samples.
    FixedN {
        n: u64,
    },
    /// Stop once `p_tilde <= alpha` or the lower limit exceeds `alpha`.
    SignificanceResolved {
        alpha: f64,
    },
    /// Stop once `p_tilde <= alpha` (the rejection branch only).
    BelowAlpha {
        alpha: f64,
    },
    /// Stop at `n > n0` once `(p_tilde[n - n0] - p_tilde[n]) / n0 <= gamma`.
    Plateau {
        n0: u64,
        gamma: f64,
    },
    Cap {
        n_max: u64,
    },
    /// Stop when any member fires.
    FirstOf(Vec<StoppingRule>),
}

impl StoppingRule {
    pub fn validate(&self) -> Result<()> {
        match self {
            StoppingRule::FixedN { n } if *n == 0 => domain("FixedN needs n >= 1"),
            StoppingRule::Cap { n_max } if *n_max == 0 => domain("Cap needs n_max >= 1"),
            StoppingRule::Plateau { n0, gamma } if *n0 == 0 || gamma.is_nan() || *gamma < 0.0 => domain(format!(
                "Plateau needs n0 >= 1 and gamma >= 0, got n0={n0} gamma={gamma}"
            )),
            StoppingRule::SignificanceResolved { alpha } | StoppingRule::BelowAlpha { alpha }
                if !(*alpha > 0.0 && *alpha <= 1.0) =>
            {
                domain(format!("alpha must lie in (0, 1], got {alpha}"))
            }
            StoppingRule::FirstOf(rules) if rules.is_empty() => domain("FirstOf needs at least one rule"),
            StoppingRule::FirstOf(rules) => rules.iter().try_for_each(StoppingRule::validate),
            _ => Ok(()),
        }
    }

    /// Longest look-back any plateau member needs.
    pub fn max_lag(&self) -> u64 {
        match self {
            StoppingRule::Plateau { n0, .. } => *n0,
            StoppingRule::FirstOf(rules) => rules.iter().map(StoppingRule::max_lag).max().unwrap_or(0),
            _ => 0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rule: StoppingRule = serde_json::from_str(text)?;
        rule.validate()?;
        Ok(rule)
    }
}

/// What a rule may inspect: the current estimate and recent history.
pub trait StopContext {
    fn n(&self) -> u64;
    fn s(&self) -> u64;
    fn epsilon(&self) -> f64;
    fn p_tilde(&self) -> f64;
    /// `p_tilde` at index `n - lag`, if still available (`n - lag >= 1`).
    fn p_tilde_lagged(&self, lag: u64) -> Option<f64>;
}

/// Evaluates `rule` at the current point of a trajectory.
pub fn should_stop<C: StopContext + ?Sized>(rule: &StoppingRule, ctx: &C) -> Option<StopReason> {
    let n = ctx.n();
    if n == 0 {
        return None;
    }
    match rule {
        StoppingRule::FixedN { n: target } => (n >= *target).then_some(StopReason::FixedN),
        StoppingRule::Cap { n_max } => (n >= *n_max).then_some(StopReason::Cap),
        StoppingRule::BelowAlpha { alpha } => (ctx.p_tilde() <= *alpha).then_some(StopReason::Significant),
        StoppingRule::SignificanceResolved { alpha } => {
            if ctx.p_tilde() <= *alpha {
                Some(StopReason::Significant)
            } else if is_below_robbins_lower(n, ctx.s(), ctx.epsilon(), *alpha) {
                Some(StopReason::ConfidentlyInsignificant)
            } else {
                None
            }
        }
        StoppingRule::Plateau { n0, gamma } => {
            if n <= *n0 {
                return None;
            }
            let earlier = ctx.p_tilde_lagged(*n0)?;
            ((earlier - ctx.p_tilde()) / *n0 as f64 <= *gamma).then_some(StopReason::Plateau)
        }
        StoppingRule::FirstOf(rules) => rules.iter().filter_map(|r| should_stop(r, ctx)).min(),
    }
}

/// One row of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub n: u64,
    pub s: u64,
    pub upper: f64,
    pub lower: f64,
    pub p_tilde: f64,
}

pub const TRAJECTORY_HEADER: &str = "n,s,upper,lower,p_tilde";

impl StepRecord {
    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{}", self.n, self.s, self.upper, self.lower, self.p_tilde)
    }
}

/// Per-step history of a run plus where and why it stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub epsilon: f64,
    pub records: Vec<StepRecord>,
    pub stop_index: u64,
    pub stop_reason: StopReason,
}

impl Trajectory {
    pub fn write_csv<W: Write>(&self, mut out: W, header: bool) -> Result<()> {
        write_trajectory_rows(&mut out, &self.records, header)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file), true)
    }
}

pub fn write_trajectory_rows<W: Write>(out: &mut W, records: &[StepRecord], header: bool) -> Result<()> {
    if header {
        writeln!(out, "{TRAJECTORY_HEADER}")?;
    }
    for r in records {
        writeln!(out, "{}", r.csv_row())?;
    }
    out.flush()?;
    Ok(())
}

/// A view over a complete recorded prefix, for evaluating rules offline.
pub struct TrajectoryView<'a> {
    pub epsilon: f64,
    pub records: &'a [StepRecord],
}

impl StopContext for TrajectoryView<'_> {
    fn n(&self) -> u64 {
        self.records.last().map_or(0, |r| r.n)
    }
    fn s(&self) -> u64 {
        self.records.last().map_or(0, |r| r.s)
    }
    fn epsilon(&self) -> f64 {
        self.epsilon
    }
    fn p_tilde(&self) -> f64 {
        self.records.last().map_or(1.0, |r| r.p_tilde)
    }
    fn p_tilde_lagged(&self, lag: u64) -> Option<f64> {
        let idx = self.records.len().checked_sub(1 + lag as usize)?;
        Some(self.records[idx].p_tilde)
    }
}

/// Saved state of a paused run: the stream position, the estimator and
/// enough `p_tilde` history for plateau rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunCheckpoint {
    pub sample_state: SampleState,
    pub estimate: AnytimeEstimate,
    pub recent_p_tilde: Vec<f64>,
}

impl RunCheckpoint {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let cp: RunCheckpoint = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if cp.estimate.n != cp.sample_state.n || cp.estimate.s != cp.sample_state.s {
            return Err(Error::State(
                "checkpoint estimator and stream disagree on (n, s)".into(),
            ));
        }
        Ok(cp)
    }
}

/// The anytime estimator plus the history rules need.
#[derive(Debug, Clone)]
pub struct SequentialRun {
    estimate: AnytimeEstimate,
    // p_tilde[n - k] for k = 0..retain, newest at the back.
    history: VecDeque<f64>,
    retain: usize,
    implicit_cap: u64,
}

impl StopContext for SequentialRun {
    fn n(&self) -> u64 {
        self.estimate.n
    }
    fn s(&self) -> u64 {
        self.estimate.s
    }
    fn epsilon(&self) -> f64 {
        self.estimate.epsilon
    }
    fn p_tilde(&self) -> f64 {
        self.estimate.p_tilde
    }
    fn p_tilde_lagged(&self, lag: u64) -> Option<f64> {
        let idx = self.history.len().checked_sub(1 + lag as usize)?;
        self.history.get(idx).copied()
    }
}

/// How a call to [`SequentialRun::run`] ended.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub reason: StopReason,
    pub report: EstimateReport,
}

impl SequentialRun {
    pub fn new(epsilon: f64) -> Result<Self> {
        Ok(SequentialRun {
            estimate: AnytimeEstimate::new(epsilon)?,
            history: VecDeque::new(),
            retain: 0,
            implicit_cap: DEFAULT_IMPLICIT_CAP,
        })
    }

    pub fn with_implicit_cap(mut self, cap: u64) -> Self {
        self.implicit_cap = cap.max(1);
        self
    }

    pub fn from_checkpoint(cp: &RunCheckpoint) -> Result<Self> {
        AnytimeEstimate::new(cp.estimate.epsilon)?;
        if cp.estimate.n != cp.sample_state.n || cp.estimate.s != cp.sample_state.s {
            return Err(Error::State(
                "checkpoint estimator and stream disagree on (n, s)".into(),
            ));
        }
        Ok(SequentialRun {
            estimate: cp.estimate,
            retain: cp.recent_p_tilde.len(),
            history: cp.recent_p_tilde.iter().copied().collect(),
            implicit_cap: DEFAULT_IMPLICIT_CAP,
        })
    }

    pub fn checkpoint<S: OracleStream + ?Sized>(&self, stream: &S) -> RunCheckpoint {
        RunCheckpoint {
            sample_state: stream.save_state(),
            estimate: self.estimate,
            recent_p_tilde: self.history.iter().copied().collect(),
        }
    }

    pub fn estimate(&self) -> &AnytimeEstimate {
        &self.estimate
    }

    /// Keeps enough history for plateau rules with look-back `lag`, so a
    /// checkpoint taken later can be resumed under such a rule. Rules passed
    /// to [`run`](Self::run) reserve their own look-back automatically.
    pub fn retain_history(mut self, lag: u64) -> Self {
        self.ensure_retention(lag);
        self
    }

    fn ensure_retention(&mut self, lag: u64) {
        self.retain = self.retain.max(lag as usize + 1);
    }

    fn step(&mut self, bit: bool) {
        let p = self.estimate.update(bit);
        if self.retain > 0 {
            if self.history.len() == self.retain {
                self.history.pop_front();
            }
            self.history.push_back(p);
        }
    }

    /// Draws from `stream` until `rule` (or the implicit cap) fires. A rule
    /// that already holds at the current point stops without drawing. When
    /// `recorder` is given, every new step is appended with its Robbins
    /// limits.
    pub fn run<S: OracleStream + ?Sized>(
        &mut self,
        stream: &mut S,
        rule: &StoppingRule,
        mut recorder: Option<&mut Vec<StepRecord>>,
    ) -> Result<RunOutcome> {
        rule.validate()?;
        if stream.draws() != self.estimate.n {
            return Err(Error::State(format!(
                "stream has {} draws but the estimator has {}",
                stream.draws(),
                self.estimate.n
            )));
        }
        self.ensure_retention(rule.max_lag());
        let reason = loop {
            if let Some(reason) = should_stop(rule, self) {
                break reason;
            }
            if self.estimate.n >= self.implicit_cap {
                break StopReason::ImplicitCap;
            }
            self.step(stream.next_bit());
            if let Some(rec) = recorder.as_deref_mut() {
                let (n, s, eps) = (self.estimate.n, self.estimate.s, self.estimate.epsilon);
                rec.push(StepRecord {
                    n,
                    s,
                    upper: robbins_upper(n, s, eps)?,
                    lower: robbins_lower(n, s, eps)?,
                    p_tilde: self.estimate.p_tilde,
                });
            }
        };
        let mut report = self.estimate.report(reason)?;
        report.tuning.insert("implicit_cap".into(), self.implicit_cap as f64);
        Ok(RunOutcome { reason, report })
    }

    /// Runs until every rule in `rules` has fired (or the implicit cap),
    /// returning the estimate at each rule's own stopping time.
    pub fn run_each<S: OracleStream + ?Sized>(
        &mut self,
        stream: &mut S,
        rules: &[StoppingRule],
    ) -> Result<Vec<(StopReason, AnytimeEstimate)>> {
        for r in rules {
            r.validate()?;
            self.ensure_retention(r.max_lag());
        }
        let mut results: Vec<Option<(StopReason, AnytimeEstimate)>> = vec![None; rules.len()];
        loop {
            for (slot, rule) in results.iter_mut().zip(rules) {
                if slot.is_none() {
                    if let Some(reason) = should_stop(rule, self) {
                        *slot = Some((reason, self.estimate));
                    }
                }
            }
            if results.iter().all(Option::is_some) {
                break;
            }
            if self.estimate.n >= self.implicit_cap {
                for slot in results.iter_mut().filter(|s| s.is_none()) {
                    *slot = Some((StopReason::ImplicitCap, self.estimate));
                }
                break;
            }
            self.step(stream.next_bit());
        }
        Ok(results.into_iter().map(|r| r.expect("filled")).collect())
    }
}

/// Runs the anytime estimator on `stream` until `rule` fires, recording the
/// full trajectory.
pub fn run_until<S: OracleStream + ?Sized>(
    stream: &mut S,
    epsilon: f64,
    rule: &StoppingRule,
) -> Result<(Trajectory, EstimateReport)> {
    let mut run = SequentialRun::new(epsilon)?;
    let mut records = Vec::new();
    let outcome = run.run(stream, rule, Some(&mut records))?;
    let trajectory = Trajectory {
        epsilon,
        stop_index: run.estimate.n,
        stop_reason: outcome.reason,
        records,
    };
    Ok((trajectory, outcome.report))
}
