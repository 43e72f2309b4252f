//! Command-line interface: generate synthetic data, fit single models,
//! and run the tradeoff / estimator-accuracy experiment suites.
//!
//! Exit codes: 0 on success, 1 on invalid input or usage, 2 when the only
//! failure is that a requested method is infeasible on the data.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use causalfair_cli::output::{
    fmt_float, to_file, write_estimator_csv, write_metrics_csv, write_scores_csv,
};
use causalfair_cli::{run_estimator_accuracy, run_tradeoff, DataSource};
use causalfair_core::data::{load_csv, save_csv, ColumnConfig, Dataset, Task};
use causalfair_core::error::{Error, Result};
use causalfair_core::estimators::mean_difference;
use causalfair_core::models::{export_json, fit, Method, MethodSpec};
use causalfair_core::propensity::{fit_propensity, FitOptions};
use causalfair_core::synthetic::{generate, preset, Case, GroundTruth, SyntheticConfig};

#[derive(Parser)]
#[command(
    name = "causalfair",
    version,
    about = "Fairness-constrained linear models with causal-effect estimator constraints"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Column mapping shared by every subcommand that reads a CSV dataset.
#[derive(Args, Debug)]
struct CsvArgs {
    /// Input CSV file with a header row
    #[arg(long)]
    csv: PathBuf,
    /// Name of the binary (0/1) sensitive column
    #[arg(long)]
    sensitive: String,
    /// Name of the label column
    #[arg(long)]
    label: String,
    /// Comma-separated names of the explanatory feature columns
    #[arg(long, value_delimiter = ',')]
    explanatory: Vec<String>,
    /// Task: regression or classification
    #[arg(long, default_value = "regression")]
    task: String,
    /// Do not append an all-ones intercept column
    #[arg(long)]
    no_intercept: bool,
}

impl CsvArgs {
    fn load(&self) -> Result<Dataset> {
        let config = ColumnConfig {
            sensitive: self.sensitive.clone(),
            label: self.label.clone(),
            explanatory: self.explanatory.clone(),
            task: parse_task(&self.task)?,
            intercept: !self.no_intercept,
        };
        load_csv(&self.csv, &config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset CSV plus a ground-truth JSON sidecar
    Generate {
        /// Preset name: default, imbalance, degenerate, or inferred
        #[arg(long, conflicts_with = "config")]
        case: Option<String>,
        /// JSON file with full generator settings (alternative to --case)
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override the preset's number of rows
        #[arg(long)]
        n: Option<usize>,
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
        /// Sidecar JSON path (default: <out>.gt.json)
        #[arg(long)]
        ground_truth: Option<PathBuf>,
    },
    /// Fit one method on a CSV dataset and export the model as JSON
    Fit {
        #[command(flatten)]
        data: CsvArgs,
        /// Method: unconstrained, single, multi:K, ipw, or dr
        #[arg(long)]
        method: String,
        /// Model JSON path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a method suite over repeated trials and emit a metrics CSV
    Tradeoff {
        /// Preset name; each trial draws a fresh dataset
        #[arg(long, conflicts_with = "csv")]
        case: Option<String>,
        /// Fixed CSV dataset reused for every trial
        #[arg(long, requires = "sensitive", requires = "label")]
        csv: Option<PathBuf>,
        #[arg(long)]
        sensitive: Option<String>,
        #[arg(long)]
        label: Option<String>,
        #[arg(long, value_delimiter = ',')]
        explanatory: Vec<String>,
        #[arg(long, default_value = "regression")]
        task: String,
        #[arg(long)]
        no_intercept: bool,
        /// Ground-truth sidecar JSON for a CSV dataset (enables discrim_pred)
        #[arg(long)]
        ground_truth: Option<PathBuf>,
        /// Comma-separated methods, e.g. single,multi:5,ipw,dr
        #[arg(long, default_value = "single,multi:2,ipw,dr")]
        methods: String,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write per-trial rows before the aggregate rows
        #[arg(long)]
        per_trial: bool,
        /// Fraction of rows held out for evaluation (0 = in-sample)
        #[arg(long, default_value_t = 0.0)]
        holdout: f64,
        /// Output CSV path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare label-estimator accuracy against the generator ground truth
    Estimators {
        /// Preset name: default, imbalance, degenerate, or inferred
        #[arg(long)]
        case: String,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit propensity scores on a CSV dataset and report the AUC
    Propensity {
        #[command(flatten)]
        data: CsvArgs,
        /// Scores CSV path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_task(name: &str) -> Result<Task> {
    match name.to_ascii_lowercase().as_str() {
        "regression" => Ok(Task::Regression),
        "classification" => Ok(Task::Classification),
        other => Err(Error::Config(format!(
            "unknown task '{other}' (expected regression or classification)"
        ))),
    }
}

fn parse_case(name: &str) -> Result<Case> {
    Case::from_name(name).ok_or_else(|| {
        Error::Config(format!(
            "unknown case '{name}' (expected default, imbalance, degenerate, or inferred)"
        ))
    })
}

fn parse_method(token: &str) -> Result<Method> {
    let t = token.trim().to_ascii_lowercase();
    if let Some(k_text) = t
        .strip_prefix("multi:")
        .or_else(|| t.strip_prefix("multi_md:"))
    {
        let k: usize = k_text
            .parse()
            .map_err(|_| Error::Config(format!("invalid stratum count in '{token}'")))?;
        if k == 0 {
            return Err(Error::Config("multi:K requires K >= 1".into()));
        }
        return Ok(Method::MultiMd(k));
    }
    match t.as_str() {
        "unconstrained" | "ols" => Ok(Method::Unconstrained),
        "single" | "single_md" => Ok(Method::SingleMd),
        "ipw" | "faircee_ipw" => Ok(Method::FairCeeIpw),
        "dr" | "faircee_dr" => Ok(Method::FairCeeDr),
        "multi" | "multi_md" => Err(Error::Config(
            "multi requires a stratum count, e.g. multi:3".into(),
        )),
        other => Err(Error::Config(format!("unknown method '{other}'"))),
    }
}

fn parse_methods(list: &str) -> Result<Vec<MethodSpec>> {
    let methods: Result<Vec<MethodSpec>> = list
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| parse_method(t).map(MethodSpec::new))
        .collect();
    let methods = methods?;
    if methods.is_empty() {
        return Err(Error::Config("methods list is empty".into()));
    }
    Ok(methods)
}

/// Sidecar document written next to generated CSVs and read back by
/// `tradeoff --ground-truth`.
#[derive(Serialize, Deserialize)]
struct Sidecar {
    config: SyntheticConfig,
    discrim: f64,
    explanatory_bias: f64,
}

fn run_generate(
    case: Option<String>,
    config_path: Option<PathBuf>,
    seed: u64,
    n: Option<usize>,
    out: PathBuf,
    ground_truth: Option<PathBuf>,
) -> Result<()> {
    let mut config = match (case, config_path) {
        (Some(name), None) => preset(parse_case(&name)?),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(&path)?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("invalid generator config: {e}")))?
        }
        (None, None) => {
            return Err(Error::Config(
                "generate needs either --case or --config".into(),
            ))
        }
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    };
    config.seed = seed;
    if let Some(n) = n {
        config.n = n;
    }
    let (dataset, gt) = generate(&config)?;
    save_csv(&out, &dataset)?;
    let sidecar_path = ground_truth.unwrap_or_else(|| sidecar_default(&out));
    let sidecar = Sidecar {
        config,
        discrim: gt.discrim,
        explanatory_bias: gt.explanatory_bias,
    };
    let text = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| Error::Config(format!("sidecar serialization failed: {e}")))?;
    std::fs::write(&sidecar_path, text + "\n")?;
    println!(
        "wrote {} rows to {} (ground truth in {})",
        dataset.n(),
        out.display(),
        sidecar_path.display()
    );
    Ok(())
}

fn sidecar_default(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".gt.json");
    PathBuf::from(name)
}

fn run_fit(data: CsvArgs, method: String, out: Option<PathBuf>) -> Result<()> {
    let dataset = data.load()?;
    let spec = MethodSpec::new(parse_method(&method)?);
    let model = fit(&dataset, &spec)?;
    let json = export_json(&model);
    match out {
        Some(path) => {
            std::fs::write(&path, json + "\n")?;
            let preds = dataset.x.dot(&model.solution.w);
            let md = mean_difference(&preds, &dataset.s)?;
            println!("model written to {}", path.display());
            println!("objective = {}", fmt_float(model.solution.objective));
            println!("md_pred = {}", fmt_float(md));
            if let Some(scores) = &model.scores_used {
                println!("propensity_auc = {}", fmt_float(scores.auc));
            }
        }
        None => println!("{json}"),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_tradeoff_cmd(
    case: Option<String>,
    csv: Option<PathBuf>,
    sensitive: Option<String>,
    label: Option<String>,
    explanatory: Vec<String>,
    task: String,
    no_intercept: bool,
    ground_truth: Option<PathBuf>,
    methods: String,
    trials: usize,
    seed: u64,
    per_trial: bool,
    holdout: f64,
    out: Option<PathBuf>,
) -> Result<()> {
    let source = match (case, csv) {
        (Some(name), None) => DataSource::Case(parse_case(&name)?),
        (None, Some(path)) => {
            let args = CsvArgs {
                csv: path,
                sensitive: sensitive.expect("clap enforces --sensitive with --csv"),
                label: label.expect("clap enforces --label with --csv"),
                explanatory,
                task,
                no_intercept,
            };
            let dataset = args.load()?;
            let gt = match ground_truth {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)?;
                    let sidecar: Sidecar = serde_json::from_str(&text)
                        .map_err(|e| Error::Config(format!("invalid ground-truth JSON: {e}")))?;
                    Some(GroundTruth {
                        discrim: sidecar.discrim,
                        explanatory_bias: sidecar.explanatory_bias,
                    })
                }
                None => None,
            };
            DataSource::Fixed {
                dataset: Box::new(dataset),
                ground_truth: gt,
            }
        }
        (None, None) => {
            return Err(Error::Config(
                "tradeoff needs either --case or --csv".into(),
            ))
        }
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    };
    let methods = parse_methods(&methods)?;
    let output = run_tradeoff(&source, &methods, trials, seed, holdout)?;
    match out {
        Some(path) => to_file(&path, |f| write_metrics_csv(f, &output, per_trial))?,
        None => write_metrics_csv(std::io::stdout().lock(), &output, per_trial)?,
    }
    Ok(())
}

fn run_estimators_cmd(case: String, trials: usize, seed: u64, out: Option<PathBuf>) -> Result<()> {
    let case = parse_case(&case)?;
    let (rows, max_k) = run_estimator_accuracy(case, trials, seed)?;
    match out {
        Some(path) => {
            to_file(&path, |f| write_estimator_csv(f, &rows))?;
            println!("max feasible K = {max_k}");
        }
        None => write_estimator_csv(std::io::stdout().lock(), &rows)?,
    }
    Ok(())
}

fn run_propensity(data: CsvArgs, out: Option<PathBuf>) -> Result<()> {
    let dataset = data.load()?;
    let scores = fit_propensity(&dataset, FitOptions::default())?;
    match out {
        Some(path) => {
            to_file(&path, |f| write_scores_csv(f, &scores, &dataset.s))?;
            println!("auc = {}", fmt_float(scores.auc));
        }
        None => {
            write_scores_csv(std::io::stdout().lock(), &scores, &dataset.s)?;
            let mut err = std::io::stderr().lock();
            let _ = writeln!(err, "auc = {}", fmt_float(scores.auc));
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            case,
            config,
            seed,
            n,
            out,
            ground_truth,
        } => run_generate(case, config, seed, n, out, ground_truth),
        Command::Fit { data, method, out } => run_fit(data, method, out),
        Command::Tradeoff {
            case,
            csv,
            sensitive,
            label,
            explanatory,
            task,
            no_intercept,
            ground_truth,
            methods,
            trials,
            seed,
            per_trial,
            holdout,
            out,
        } => run_tradeoff_cmd(
            case,
            csv,
            sensitive,
            label,
            explanatory,
            task,
            no_intercept,
            ground_truth,
            methods,
            trials,
            seed,
            per_trial,
            holdout,
            out,
        ),
        Command::Estimators {
            case,
            trials,
            seed,
            out,
        } => run_estimators_cmd(case, trials, seed, out),
        Command::Propensity { data, out } => run_propensity(data, out),
    }
}

fn main() -> ExitCode {
    match Cli::try_parse() {
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                ExitCode::SUCCESS
            } else {
                eprint!("{e}");
                ExitCode::from(1)
            }
        }
        Ok(cli) => match run(cli) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(if e.is_infeasibility() { 2 } else { 1 })
            }
        },
    }
}
