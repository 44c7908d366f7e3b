mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use cic_attrition::bootstrap::{self, BaseStatistic, BootstrapSpec, ResampleUnit, Statistic};
use cic_attrition::cic;
use cic_attrition::error::Error;
use cic_attrition::panel::{Cell, CsvSchema, OutcomeField, PanelSample};
use cic_attrition::report::{EstimateReport, EstimateRow};
use cic_attrition::sim;

use config::ConfigFile;

/// Threads for bootstrap and Monte Carlo parallelism; unset = all cores.
const THREADS_ENV: &str = "CIC_ATTRITION_THREADS";

#[derive(Parser)]
#[command(
    name = "cic-attrition",
    version,
    about = "Attrition-corrected treatment effects via quantile-quantile imputation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate treatment effects from a panel CSV with bootstrap inference
    Estimate(EstimateArgs),
    /// Run a Monte Carlo study on a built-in design
    Simulate(SimulateArgs),
    /// Validate a panel CSV and report cell structure and support overlap
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Args)]
struct CommonArgs {
    /// Flat key = value config file; flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Input panel CSV (columns id,g,r,y0,y1[,cluster])
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    bootstrap_draws: Option<usize>,
    /// Cluster column name; enables cluster resampling
    #[arg(long)]
    cluster_col: Option<String>,
    /// Include propensity-trimmed IPW estimates (IPW2)
    #[arg(long, overrides_with = "no_trim")]
    trim: bool,
    #[arg(long)]
    no_trim: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Design preset: I, II, or III
    #[arg(long)]
    design: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    /// Monte Carlo replications
    #[arg(long)]
    reps: Option<usize>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    cluster_col: Option<String>,
}

/// Exit-code contract: 0 success, 1 usage/config error, 2 data validation
/// failure, 3 estimation failure.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Failure {
        Failure { code: 1, message: message.into() }
    }

    fn data(message: impl Into<String>) -> Failure {
        Failure { code: 2, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Failure {
        let code = match &err {
            Error::UnknownDesign(_)
            | Error::InvalidArgument(_)
            | Error::InvalidTrimRule { .. }
            | Error::InvalidBootstrapSpec(_) => 1,
            Error::Io(_)
            | Error::Csv(_)
            | Error::MissingColumn(_)
            | Error::MalformedRow { .. }
            | Error::EmptySample
            | Error::EmptyCell { .. }
            | Error::Y1ForAttritors { .. }
            | Error::MissingClusterId(_) => 2,
            Error::SingleClassOutcome
            | Error::PropensityFitFailed
            | Error::AllTrimmed
            | Error::TooManyBootstrapFailures { .. } => 3,
        };
        Failure { code, message: err.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(threads) = std::env::var(THREADS_ENV) {
        match threads.parse::<usize>() {
            Ok(k) if k > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
            }
            _ => {
                eprintln!("error: {THREADS_ENV} must be a positive integer");
                return ExitCode::from(1);
            }
        }
    }
    let outcome = match cli.command {
        Command::Estimate(args) => run_estimate(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Validate(args) => run_validate(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn load_config(common: &CommonArgs) -> Result<ConfigFile, Failure> {
    match &common.config {
        Some(path) => ConfigFile::load(path).map_err(Failure::usage),
        None => Ok(ConfigFile::default()),
    }
}

/// Flag wins, then config file, then default.
fn resolve<T>(flag: Option<T>, file: Result<Option<T>, String>, default: T) -> Result<T, Failure> {
    Ok(flag.or(file.map_err(Failure::usage)?).unwrap_or(default))
}

fn resolve_format(common: &CommonArgs, cfg: &ConfigFile) -> Result<Format, Failure> {
    if let Some(f) = common.format {
        return Ok(f);
    }
    match cfg.get("format") {
        None => Ok(Format::Text),
        Some("json") => Ok(Format::Json),
        Some("csv") => Ok(Format::Csv),
        Some("text") => Ok(Format::Text),
        Some(other) => Err(Failure::usage(format!("config key 'format': unknown value '{other}'"))),
    }
}

fn emit(common: &CommonArgs, cfg: &ConfigFile, content: &str) -> Result<(), Failure> {
    let out = common
        .out
        .clone()
        .or_else(|| cfg.get("out").map(PathBuf::from));
    match out {
        Some(path) => std::fs::write(&path, content)
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{content}");
            Ok(())
        }
    }
}

fn schema_with_cluster(cluster_col: Option<String>) -> CsvSchema {
    CsvSchema {
        cluster: cluster_col.or_else(|| CsvSchema::default().cluster),
        ..CsvSchema::default()
    }
}

fn route_of(stat: BaseStatistic) -> &'static str {
    match stat {
        BaseStatistic::NaiveDeltaR => "uncorrected",
        BaseStatistic::AttR | BaseStatistic::AtuR | BaseStatistic::AteR => "respondents-only",
        BaseStatistic::AteRandomAssignment => "random-assignment",
        BaseStatistic::AteNoRandomAssignment => "no-random-assignment",
        BaseStatistic::IpwAteR { .. } | BaseStatistic::IpwAte { .. } => "missing-at-random",
    }
}

fn estimand_of(stat: BaseStatistic) -> &'static str {
    match stat {
        BaseStatistic::NaiveDeltaR | BaseStatistic::AteR | BaseStatistic::IpwAteR { .. } => "ATE-R",
        BaseStatistic::AttR => "ATT-R",
        BaseStatistic::AtuR => "ATU-R",
        BaseStatistic::AteRandomAssignment
        | BaseStatistic::AteNoRandomAssignment
        | BaseStatistic::IpwAte { .. } => "ATE",
    }
}

fn run_estimate(args: EstimateArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.common)?;
    let format = resolve_format(&args.common, &cfg)?;
    let input: PathBuf = args
        .input
        .or_else(|| cfg.get("input").map(PathBuf::from))
        .ok_or_else(|| Failure::usage("estimate requires --input"))?;
    let seed = resolve(args.common.seed, cfg.get_parsed("seed"), 0)?;
    let draws = resolve(args.bootstrap_draws, cfg.get_parsed("bootstrap-draws"), 999)?;
    let trim = if args.no_trim {
        false
    } else if args.trim {
        true
    } else {
        cfg.get_bool("trim").map_err(Failure::usage)?.unwrap_or(true)
    };
    let cluster_col = args
        .cluster_col
        .or_else(|| cfg.get("cluster-col").map(String::from));
    let cluster_resampling = cluster_col.is_some();

    let schema = schema_with_cluster(cluster_col.clone());
    let sample = PanelSample::load_csv(&input, &schema)?;
    let spec = BootstrapSpec {
        draws,
        seed,
        resample_unit: if cluster_resampling {
            ResampleUnit::Cluster
        } else {
            ResampleUnit::Unit
        },
        ci_level: 0.95,
    };
    spec.validate(&sample)?;

    let config_echo = json!({
        "mode": "estimate",
        "input": input.display().to_string(),
        "seed": seed,
        "bootstrap-draws": draws,
        "trim": trim,
        "cluster-col": cluster_col,
        "ci-level": spec.ci_level,
    });
    let mut report = EstimateReport::new(config_echo, sample.attrition_summary());

    let mut singles = vec![
        BaseStatistic::NaiveDeltaR,
        BaseStatistic::AttR,
        BaseStatistic::AtuR,
        BaseStatistic::AteR,
        BaseStatistic::AteRandomAssignment,
        BaseStatistic::AteNoRandomAssignment,
        BaseStatistic::IpwAteR { trimmed: false },
        BaseStatistic::IpwAte { trimmed: false },
    ];
    if trim {
        singles.push(BaseStatistic::IpwAteR { trimmed: true });
        singles.push(BaseStatistic::IpwAte { trimmed: true });
    }

    let mut computed = Vec::new();
    for &stat in &singles {
        match bootstrap::bootstrap(&sample, Statistic::Single(stat), &spec) {
            Ok(result) => {
                let mut notes = estimator_notes(&sample, stat);
                if result.failures > 0 {
                    notes.push(format!("{} bootstrap replicates failed", result.failures));
                }
                report.estimates.push(EstimateRow {
                    estimand: estimand_of(stat).into(),
                    estimator: stat.label(),
                    route: route_of(stat).into(),
                    point: result.point,
                    se: Some(result.se),
                    ci_lower: Some(result.ci.0),
                    ci_upper: Some(result.ci.1),
                    n_used: sample.len(),
                    notes,
                });
                computed.push(stat);
            }
            Err(err) => report
                .warnings
                .push(format!("{} skipped: {err}", stat.label())),
        }
    }

    // Panel-B-style rows: each correction minus the naive contrast, with a
    // bootstrap SE for the difference itself.
    if computed.contains(&BaseStatistic::NaiveDeltaR) {
        for &stat in computed.iter().filter(|&&s| s != BaseStatistic::NaiveDeltaR) {
            let diff = Statistic::Difference(stat, BaseStatistic::NaiveDeltaR);
            match bootstrap::bootstrap(&sample, diff, &spec) {
                Ok(result) => report.estimates.push(EstimateRow {
                    estimand: format!("{} - naive", estimand_of(stat)),
                    estimator: diff.label(),
                    route: route_of(stat).into(),
                    point: result.point,
                    se: Some(result.se),
                    ci_lower: Some(result.ci.0),
                    ci_upper: Some(result.ci.1),
                    n_used: sample.len(),
                    notes: Vec::new(),
                }),
                Err(err) => report
                    .warnings
                    .push(format!("{} skipped: {err}", diff.label())),
            }
        }
    }

    match bootstrap::diagnostic_pvalue(&sample, &spec) {
        Ok(diag) => report.diagnostics = Some(diag),
        Err(err) => report
            .warnings
            .push(format!("random-assignment diagnostic skipped: {err}")),
    }

    let content = match format {
        Format::Json => report.to_json()?,
        Format::Csv => report.to_csv(),
        Format::Text => report.to_text(),
    };
    emit(&args.common, &cfg, &content)
}

/// Point-estimate caveats worth surfacing next to the bootstrap numbers.
fn estimator_notes(sample: &PanelSample, stat: BaseStatistic) -> Vec<String> {
    let mut notes = Vec::new();
    let detail = match stat {
        BaseStatistic::AttR => cic::att_r(sample).ok(),
        BaseStatistic::AtuR => cic::atu_r(sample).ok(),
        BaseStatistic::AteR => cic::ate_r(sample).ok(),
        BaseStatistic::AteRandomAssignment => cic::ate_random_assignment(sample).ok(),
        BaseStatistic::AteNoRandomAssignment => {
            cic::ate_no_random_assignment(sample).ok().map(|d| d.ate)
        }
        _ => None,
    };
    if let Some(value) = &detail {
        if value.support_warning {
            notes.push(format!(
                "support warning: {:.1}% of imputations clamped to the identifying range",
                value.clamp_fraction * 100.0
            ));
        }
    }
    if matches!(
        stat,
        BaseStatistic::AteRandomAssignment | BaseStatistic::AteNoRandomAssignment
    ) {
        for (cell, arm) in [(Cell::TREAT_ATTR, "treatment"), (Cell::CONTROL_ATTR, "control")] {
            if sample.cell_count(cell) == 0 {
                notes.push(format!(
                    "no attritors in the {arm} arm; that term enters with zero weight"
                ));
            }
        }
    }
    if let BaseStatistic::IpwAteR { trimmed: true } | BaseStatistic::IpwAte { trimmed: true } = stat
    {
        let trimmed = match stat {
            BaseStatistic::IpwAteR { .. } => {
                cic_attrition::ipw::ipw_ate_r(sample, Some(Default::default()))
                    .map(|v| v.trimmed)
                    .unwrap_or(0)
            }
            _ => cic_attrition::ipw::ipw_ate(sample, Some(Default::default()))
                .map(|v| v.trimmed)
                .unwrap_or(0),
        };
        if trimmed > 0 {
            notes.push(format!("{trimmed} units dropped by propensity trimming"));
        }
    }
    notes
}

fn run_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.common)?;
    let format = resolve_format(&args.common, &cfg)?;
    let design_name = args
        .design
        .or_else(|| cfg.get("design").map(String::from))
        .ok_or_else(|| Failure::usage("simulate requires --design {I|II|III}"))?;
    let n = resolve(args.n, cfg.get_parsed("n"), 2000)?;
    let sigma = resolve(args.sigma, cfg.get_parsed("sigma"), 2.0)?;
    let beta2 = resolve(args.beta2, cfg.get_parsed("beta2"), 0.0)?;
    let reps = resolve(args.reps, cfg.get_parsed("reps"), 1000)?;
    let seed = resolve(args.common.seed, cfg.get_parsed("seed"), 0)?;

    let design = sim::design_preset(&design_name, n, sigma, beta2, seed)?;
    let summary = sim::run_monte_carlo(&design, reps, &sim::default_estimators(), 2_000_000)?;

    let content = match format {
        Format::Json => serde_json::to_string_pretty(&summary)
            .map_err(|e| Failure::usage(format!("summary serialization: {e}")))?,
        Format::Csv => summary.to_csv(),
        Format::Text => summary.to_text(),
    };
    emit(&args.common, &cfg, &content)
}

fn run_validate(args: ValidateArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.common)?;
    let format = resolve_format(&args.common, &cfg)?;
    let input: PathBuf = args
        .input
        .or_else(|| cfg.get("input").map(PathBuf::from))
        .ok_or_else(|| Failure::usage("validate requires --input"))?;
    let cluster_col = args
        .cluster_col
        .or_else(|| cfg.get("cluster-col").map(String::from));
    let schema = schema_with_cluster(cluster_col);

    let file = std::fs::File::open(&input)
        .map_err(|e| Failure::data(format!("cannot read {}: {e}", input.display())))?;
    let scan = PanelSample::scan_csv(file, &schema)?;

    let mut warnings = Vec::new();
    if let Some(sample) = &scan.sample {
        warnings.extend(support_overlap_warnings(sample));
    }

    let content = match format {
        Format::Json => validate_json(&input, &scan, &warnings)?,
        _ => validate_text(&input, &scan, &warnings),
    };
    emit(&args.common, &cfg, &content)?;
    if scan.violations.is_empty() && scan.sample.is_some() {
        Ok(())
    } else {
        Err(Failure::data(format!(
            "{} of {} rows invalid",
            scan.violations.len(),
            scan.rows_read
        )))
    }
}

/// Range-containment diagnostics for the imputation support assumptions:
/// each cell whose baselines get pushed through a transform should sit
/// inside the identifying respondents' observed baseline range.
fn support_overlap_warnings(sample: &PanelSample) -> Vec<String> {
    let range = |cell: Cell| -> Option<(f64, f64)> {
        let values = sample.subsample(cell, OutcomeField::Baseline).ok()?;
        if values.is_empty() {
            return None;
        }
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Some((min, max))
    };
    let checks = [
        (Cell::TREAT_RESP, Cell::CONTROL_RESP, "treated respondents", "control respondents", "ATT-R"),
        (Cell::CONTROL_RESP, Cell::TREAT_RESP, "control respondents", "treated respondents", "ATU-R"),
        (Cell::TREAT_ATTR, Cell::TREAT_RESP, "treated attritors", "treated respondents", "ATE-RA"),
        (Cell::CONTROL_ATTR, Cell::CONTROL_RESP, "control attritors", "control respondents", "ATE-RA"),
    ];
    let mut warnings = Vec::new();
    for (inner, outer, inner_name, outer_name, estimand) in checks {
        if let (Some((imin, imax)), Some((omin, omax))) = (range(inner), range(outer)) {
            if imin < omin || imax > omax {
                warnings.push(format!(
                    "support overlap: {inner_name} baseline range [{imin}, {imax}] exceeds \
                     {outer_name} range [{omin}, {omax}]; {estimand} imputation will clamp"
                ));
            }
        }
    }
    warnings
}

fn validate_text(input: &Path, scan: &cic_attrition::panel::CsvScan, warnings: &[String]) -> String {
    let mut out = format!("{}: {} rows read\n", input.display(), scan.rows_read);
    if scan.violations.is_empty() {
        out.push_str("valid\n");
    } else {
        out.push_str(&format!("{} violations:\n", scan.violations.len()));
        for (_, message) in &scan.violations {
            out.push_str(&format!("  {message}\n"));
        }
    }
    if let Some(sample) = &scan.sample {
        let summary = sample.attrition_summary();
        out.push_str("\ncell counts:\n");
        for cell in Cell::ALL {
            out.push_str(&format!(
                "  g={} r={}: {}\n",
                cell.g,
                cell.r,
                sample.cell_count(cell)
            ));
        }
        out.push_str(&format!(
            "attrition: overall {:.3}, treatment {:.3}, control {:.3}\n",
            summary.overall, summary.treatment, summary.control
        ));
    }
    for warning in warnings {
        out.push_str(&format!("warning: {warning}\n"));
    }
    out
}

fn validate_json(
    input: &Path,
    scan: &cic_attrition::panel::CsvScan,
    warnings: &[String],
) -> Result<String, Failure> {
    let cells = scan.sample.as_ref().map(|sample| {
        Cell::ALL
            .iter()
            .map(|cell| json!({"g": cell.g, "r": cell.r, "count": sample.cell_count(*cell)}))
            .collect::<Vec<_>>()
    });
    let value = json!({
        "input": input.display().to_string(),
        "rows_read": scan.rows_read,
        "valid": scan.violations.is_empty(),
        "violations": scan.violations.iter()
            .map(|(row, message)| json!({"row": row, "message": message}))
            .collect::<Vec<_>>(),
        "cells": cells,
        "attrition": scan.sample.as_ref().map(|s| {
            serde_json::to_value(s.attrition_summary()).unwrap()
        }),
        "warnings": warnings,
    });
    serde_json::to_string_pretty(&value)
        .map_err(|e| Failure::usage(format!("validation report serialization: {e}")))
}
