use anytime_mc::estimators::{
    andrews_three_step, besag_clifford, fixed_sample, silva_assuncao, wald_sprt, FixedKind, SilvaAssuncaoTuning,
};
use anytime_mc::harness::{
    all_zero_thresholds_at, audit_replication_disagreement, audit_ros, audit_uniform_dominance, read_records_csv,
    run_experiment, DecisionMethod, ExperimentConfig,
};
use anytime_mc::oracle::{
    exact_permutation_pvalue, PermutationDataset, ScanProblem, StreamSource, DEFAULT_ENUMERATION_CAP,
};
use anytime_mc::stopping::{write_trajectory_rows, RunCheckpoint, SequentialRun, StepRecord};
use anytime_mc::{EstimateReport, Method, OracleStream, StoppingRule};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use std::fs::OpenOptions;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "anytime-mc", version, about = "Anytime-valid Monte-Carlo p-value estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Estimate a p-value from one stream with one method.
    Estimate(EstimateArgs),
    /// Run a simulation experiment described by a JSON config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Audit records or a decision method for validity.
    Audit {
        #[arg(long, value_enum)]
        kind: AuditKind,
        /// Records CSV for `ros`/`dominance`; JSON spec for `replication`.
        #[arg(long)]
        input: PathBuf,
        /// Risk level for the ROS audit.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Samples needed to reject after observing only zeros.
    Thresholds {
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 30)]
        reference_m: u64,
    },
    /// Exact two-sample permutation p-value by complete enumeration.
    Enumerate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
        cap: u128,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AuditKind {
    Ros,
    Dominance,
    Replication,
}

#[derive(Clone, Copy, ValueEnum)]
enum StreamArg {
    Synthetic,
    Permutation,
    Scan,
}

#[derive(clap::Args)]
struct EstimateArgs {
    #[arg(long, default_value = "anytime")]
    method: String,
    #[arg(long, value_enum, default_value = "synthetic")]
    stream: StreamArg,
    /// True p-value of a synthetic stream.
    #[arg(long)]
    p_true: Option<f64>,
    /// Two-column CSV for a permutation stream; the bundled plant-growth
    /// data when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Comma-separated observed counts for a scan stream.
    #[arg(long, value_delimiter = ',')]
    counts: Vec<u64>,
    #[arg(long)]
    mu0: Option<f64>,
    #[arg(long, default_value_t = 1)]
    min_len: usize,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Stopping rule as JSON, or a path to a JSON file.
    #[arg(long)]
    rule: Option<String>,
    #[arg(long)]
    resume_from: Option<PathBuf>,
    #[arg(long)]
    save_state: Option<PathBuf>,
    /// Write (or, when resuming, append) the trajectory as CSV.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Sample size of fixed-sample methods.
    #[arg(long, default_value_t = 1000)]
    m: u64,
    /// Uniform draw for the randomized estimator.
    #[arg(long)]
    u: Option<f64>,
    #[arg(long, default_value_t = 10)]
    h: u64,
    #[arg(long, default_value_t = 1000)]
    max_samples: u64,
    #[arg(long)]
    t1: Option<u64>,
    #[arg(long)]
    c_e: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    d: f64,
    #[arg(long, default_value_t = 0.05)]
    tau: f64,
    #[arg(long)]
    f_inf: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    #[arg(long, default_value_t = 1e-3)]
    eps0: f64,
    #[arg(long, default_value_t = 1e-3)]
    eps1: f64,
    #[arg(long, default_value_t = 10_000_000)]
    cap: u64,
}

type CliResult<T> = Result<T, Box<dyn std::error::Error>>;

/// Prints one line to stdout; a closed pipe is not an error.
fn emit(text: &str) -> CliResult<()> {
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

/// Returns whether every audit passed.
fn run(cli: Cli) -> CliResult<bool> {
    match cli.command {
        Command::Estimate(args) => estimate(args).map(|()| true),
        Command::Simulate { config } => {
            let summary = run_experiment(&ExperimentConfig::load(config)?)?;
            emit(&serde_json::to_string_pretty(&summary)?)?;
            Ok(summary.pass)
        }
        Command::Audit { kind, input, epsilon } => audit(kind, &input, epsilon),
        Command::Thresholds {
            epsilon,
            alpha,
            reference_m,
        } => {
            let table = all_zero_thresholds_at(epsilon, alpha, reference_m)?;
            emit(&serde_json::to_string_pretty(&table)?)?;
            Ok(true)
        }
        Command::Enumerate { data, cap } => {
            let dataset = PermutationDataset::from_csv_path(data)?;
            let exact = exact_permutation_pvalue(&dataset, cap)?;
            emit(&serde_json::to_string_pretty(&json!({
                "observed_statistic": dataset.statistic(),
                "extreme": exact.extreme.to_string(),
                "total": exact.total.to_string(),
                "p_value": exact.p_value,
            }))?)?;
            Ok(true)
        }
    }
}

fn stream_source(args: &EstimateArgs) -> CliResult<StreamSource> {
    Ok(match args.stream {
        StreamArg::Synthetic => {
            let p_true = args.p_true.ok_or("--p-true is required for a synthetic stream")?;
            StreamSource::Synthetic { p_true }
        }
        StreamArg::Permutation => StreamSource::Permutation(match &args.data {
            Some(path) => PermutationDataset::from_csv_path(path)?,
            None => PermutationDataset::plant_growth(),
        }),
        StreamArg::Scan => {
            let mu0 = args.mu0.ok_or("--mu0 is required for a scan stream")?;
            let max_len = args.max_len.unwrap_or(args.counts.len());
            StreamSource::Scan(ScanProblem::contiguous(
                args.counts.clone(),
                mu0,
                args.min_len,
                max_len,
            )?)
        }
    })
}

fn parse_rule(text: &str) -> CliResult<StoppingRule> {
    let path = Path::new(text);
    let body = if !text.trim_start().starts_with('{') && path.exists() {
        std::fs::read_to_string(path)?
    } else {
        text.to_string()
    };
    Ok(StoppingRule::from_json(&body)?)
}

fn estimate(args: EstimateArgs) -> CliResult<()> {
    let method: Method = args.method.parse()?;
    let source = stream_source(&args)?;
    if method != Method::Anytime {
        if args.resume_from.is_some() || args.save_state.is_some() || args.trajectory.is_some() {
            return Err("--resume-from, --save-state and --trajectory apply to the anytime method only".into());
        }
        let mut stream = source.open(args.seed)?;
        let report = fixed_method(method, &args, &mut *stream)?;
        emit(&report.to_json()?)?;
        return Ok(());
    }

    let rule = match &args.rule {
        Some(text) => parse_rule(text)?,
        None => StoppingRule::FirstOf(vec![
            StoppingRule::SignificanceResolved { alpha: args.alpha },
            StoppingRule::Cap { n_max: 100_000 },
        ]),
    };
    let (mut stream, mut run) = match &args.resume_from {
        Some(path) => {
            let checkpoint = RunCheckpoint::load(path)?;
            (
                source.resume(&checkpoint.sample_state)?,
                SequentialRun::from_checkpoint(&checkpoint)?,
            )
        }
        None => (source.open(args.seed)?, SequentialRun::new(args.epsilon)?),
    };
    let mut records: Vec<StepRecord> = Vec::new();
    let recorder = args.trajectory.as_ref().map(|_| &mut records);
    let outcome = run.run(&mut *stream, &rule, recorder)?;

    if let Some(path) = &args.trajectory {
        let append = args.resume_from.is_some() && path.exists();
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .append(append)
            .truncate(!append)
            .open(path)?;
        write_trajectory_rows(&mut BufWriter::new(file), &records, !append)?;
    }
    if let Some(path) = &args.save_state {
        run.checkpoint(&*stream).save(path)?;
    }
    emit(&outcome.report.to_json()?)?;
    Ok(())
}

fn fixed_method(method: Method, args: &EstimateArgs, stream: &mut dyn OracleStream) -> CliResult<EstimateReport> {
    Ok(match method {
        Method::Naive => fixed_sample(stream, args.m, FixedKind::Naive)?,
        Method::Biased => fixed_sample(stream, args.m, FixedKind::Biased)?,
        Method::Randomized => {
            let u = args.u.ok_or("--u is required for the randomized estimator")?;
            fixed_sample(stream, args.m, FixedKind::Randomized { u })?
        }
        Method::BesagClifford => besag_clifford(stream, args.h, args.max_samples)?,
        Method::SilvaAssuncao => {
            let tuning = SilvaAssuncaoTuning {
                h: args.h,
                t1: args.t1.ok_or("--t1 is required for Silva-Assuncao")?,
                c_e: args.c_e.ok_or("--c-e is required for Silva-Assuncao")?,
                max_samples: args.max_samples,
            };
            silva_assuncao(stream, tuning)?
        }
        Method::Andrews => andrews_three_step(stream, args.d, args.tau, args.f_inf)?,
        Method::Sprt => wald_sprt(stream, args.alpha, args.delta, args.eps0, args.eps1, args.cap)?,
        Method::Anytime => unreachable!("handled by the sequential runner"),
    })
}

/// JSON input of the replication audit.
#[derive(serde::Deserialize)]
struct ReplicationSpec {
    method: DecisionMethod,
    p_true: f64,
    pairs: u64,
    epsilon: f64,
    #[serde(default)]
    master_seed: u64,
}

fn audit(kind: AuditKind, input: &Path, epsilon: Option<f64>) -> CliResult<bool> {
    let (value, pass) = match kind {
        AuditKind::Ros => {
            let epsilon = epsilon.ok_or("--epsilon is required for the ROS audit")?;
            let records = read_records_csv(input)?;
            let mut per_rule = serde_json::Map::new();
            let mut pass = true;
            for rule in rule_labels(&records) {
                let subset: Vec<_> = records.iter().filter(|r| r.rule == rule).cloned().collect();
                let a = audit_ros(&subset, epsilon)?;
                pass &= a.pass;
                per_rule.insert(rule, serde_json::to_value(a)?);
            }
            (serde_json::Value::Object(per_rule), pass)
        }
        AuditKind::Dominance => {
            let records = read_records_csv(input)?;
            let mut per_rule = serde_json::Map::new();
            let mut pass = true;
            for rule in rule_labels(&records) {
                let estimates: Vec<f64> = records
                    .iter()
                    .filter(|r| r.rule == rule)
                    .map(|r| r.p_estimate)
                    .collect();
                let a = audit_uniform_dominance(&estimates)?;
                pass &= a.pass;
                per_rule.insert(rule, serde_json::to_value(a)?);
            }
            (serde_json::Value::Object(per_rule), pass)
        }
        AuditKind::Replication => {
            let spec: ReplicationSpec = serde_json::from_str(&std::fs::read_to_string(input)?)?;
            let a =
                audit_replication_disagreement(&spec.method, spec.p_true, spec.pairs, spec.epsilon, spec.master_seed)?;
            let pass = a.pass;
            (serde_json::to_value(a)?, pass)
        }
    };
    emit(&serde_json::to_string_pretty(&json!({ "pass": pass, "audit": value }))?)?;
    Ok(pass)
}

fn rule_labels(records: &[anytime_mc::harness::RunRecord]) -> Vec<String> {
    let mut labels: Vec<String> = Vec::new();
    for r in records {
        if !labels.contains(&r.rule) {
            labels.push(r.rule.clone());
        }
    }
    labels
}
