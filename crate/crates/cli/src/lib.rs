//! Command-line front end: experiments from a config file, single-model
//! training and prediction, chart rendering.

pub mod charts;
pub mod config;
pub mod experiment;
pub mod model;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use riskclass::data::{mislabel, remove_features};
use riskclass::models::Classifier;

use crate::config::{Chart, ExperimentConfig};
use crate::model::{fit, ModelFile, MODEL_FILE_VERSION};

/// An error with its exit code: 1 for runtime and data problems, 2 for
/// usage problems.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn runtime(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<riskclass::Error> for CliError {
    fn from(e: riskclass::Error) -> Self {
        CliError::runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "riskclass-cli",
    version,
    about = "Risk-averse multi-class classification experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Experiment config file (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config's base seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (experiment, report) or file (train, predict).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for trials.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub jobs: u32,
    /// Only print errors.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one configured method on the whole (perturbed) dataset and write a model file.
    Train {
        /// Method id from the config.
        #[arg(long)]
        method: String,
    },
    /// Predict the classes of the rows of a CSV file.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Columns that are not features.
        #[arg(long)]
        label_column: Option<String>,
        #[arg(long)]
        sensitive_column: Option<String>,
    },
    /// Run all trials and write tables and charts.
    Experiment,
    /// Re-render charts from the CSV files of an output directory.
    Report,
    /// Check a config without running it.
    Validate,
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

fn load_config(global: &GlobalArgs) -> Result<ExperimentConfig, CliError> {
    let path = global
        .config
        .as_deref()
        .ok_or_else(|| CliError::usage("--config is required"))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = global.seed {
        cfg.base_seed = seed;
    }
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let g = &cli.global;
    let say = |msg: String| {
        if !g.quiet {
            println!("{msg}");
        }
    };
    match &cli.command {
        Command::Validate => {
            let cfg = load_config(g)?;
            for f in cfg.input_files() {
                if !f.is_file() {
                    return Err(CliError::runtime(format!("input file {} does not exist", f.display())));
                }
            }
            say(format!(
                "config ok: {} methods, {} trials",
                cfg.methods.len(),
                cfg.trials
            ));
            Ok(())
        }
        Command::Experiment => {
            let mut cfg = load_config(g)?;
            if let Some(out) = &g.out {
                cfg.output = out.clone();
            }
            let run = experiment::run_experiment(&cfg, g.jobs as usize)?;
            let mut written = output::write_all(&run, &cfg.output)?;
            written.extend(charts::render_charts(&cfg.output, &cfg.charts)?);
            for m in run.trials.iter().flat_map(|t| &t.methods) {
                if let Some(err) = &m.result.error {
                    eprintln!("warning: trial {} method {}: {err}", m.result.trial, m.result.method_id);
                }
            }
            let total = run.trials.len() * cfg.methods.len();
            if run.n_failed() == total {
                return Err(CliError::runtime("every trial failed"));
            }
            say(format!(
                "{} trials x {} methods ({} failed); {} files in {}",
                cfg.trials,
                cfg.methods.len(),
                run.n_failed(),
                written.len(),
                cfg.output.display()
            ));
            for (mi, m) in cfg.methods.iter().enumerate() {
                let ok: Vec<f64> = run.results(mi).filter(|r| r.is_ok()).map(|r| r.avg_f1).collect();
                if !ok.is_empty() {
                    say(format!(
                        "  {:<24} mean macro-F1 {:.4}",
                        m.id,
                        ok.iter().sum::<f64>() / ok.len() as f64
                    ));
                }
            }
            Ok(())
        }
        Command::Report => {
            let (dir, which) = match (&g.out, &g.config) {
                (Some(out), _) => (out.clone(), vec![Chart::F1Cdf, Chart::Roc, Chart::Convergence]),
                (None, Some(_)) => {
                    let cfg = load_config(g)?;
                    (cfg.output.clone(), cfg.charts.clone())
                }
                (None, None) => return Err(CliError::usage("report needs --out DIR or --config")),
            };
            if !dir.join("metrics.csv").is_file() {
                return Err(CliError::runtime(format!(
                    "{} holds no experiment output",
                    dir.display()
                )));
            }
            let written = charts::render_charts(&dir, &which)?;
            say(format!("{} charts in {}", written.len(), dir.join("charts").display()));
            Ok(())
        }
        Command::Train { method } => {
            let cfg = load_config(g)?;
            let out = g
                .out
                .as_deref()
                .ok_or_else(|| CliError::usage("train needs --out FILE"))?;
            let m = cfg
                .methods
                .iter()
                .find(|m| m.id == *method)
                .ok_or_else(|| CliError::runtime(format!("no method {method:?} in the config")))?;
            let seed = cfg.base_seed;
            let data = cfg.cap(cfg.load_dataset(seed)?, seed);
            let data = if cfg.perturb.mislabel_rate > 0.0 {
                mislabel(&data, cfg.perturb.mislabel_rate, seed)?
            } else {
                data
            };
            let data = if cfg.perturb.feature_remove_rate > 0.0 {
                remove_features(&data, cfg.perturb.feature_remove_rate, seed)?.0
            } else {
                data
            };
            let fitted = fit(&m.kind, &data, seed)?;
            ModelFile {
                version: MODEL_FILE_VERSION,
                method_id: m.id.clone(),
                method_kind: m.kind.name().to_string(),
                class_names: data.class_names().to_vec(),
                model: fitted.model,
            }
            .write(out)?;
            say(format!("wrote {} ({} on {} points)", out.display(), m.id, data.len()));
            Ok(())
        }
        Command::Predict {
            model,
            input,
            label_column,
            sensitive_column,
        } => {
            let file = ModelFile::read(model)?;
            let skip: Vec<&str> = label_column
                .iter()
                .chain(sensitive_column)
                .map(String::as_str)
                .collect();
            let points = read_features(input, &skip)?;
            let n = file.model.n_features();
            let mut rows = Vec::with_capacity(points.len());
            for (i, x) in points.iter().enumerate() {
                if x.len() != n {
                    return Err(CliError::runtime(format!(
                        "dimension mismatch: the model expects {n} features, row {} of {} has {}",
                        i + 1,
                        input.display(),
                        x.len()
                    )));
                }
                let scores = file.model.scores(x)?;
                rows.push((riskclass::models::argmax(&scores), scores));
            }
            let mut header = vec!["row".to_string(), "prediction".to_string()];
            header.extend(file.class_names.iter().map(|c| format!("score_{c}")));
            let write = |w: Box<dyn Write>| -> Result<(), csv::Error> {
                let mut w = csv::Writer::from_writer(w);
                w.write_record(&header)?;
                for (i, (p, scores)) in rows.iter().enumerate() {
                    let mut rec = vec![(i + 1).to_string(), file.class_names[*p].clone()];
                    rec.extend(scores.iter().map(|s| output::num(*s)));
                    w.write_record(&rec)?;
                }
                w.flush()?;
                Ok(())
            };
            match &g.out {
                Some(path) => {
                    let f = std::fs::File::create(path)
                        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
                    write(Box::new(f)).map_err(|e| CliError::runtime(e.to_string()))?;
                }
                None => write(Box::new(std::io::stdout())).map_err(|e| CliError::runtime(e.to_string()))?,
            }
            Ok(())
        }
    }
}

/// Numeric rows of a headered CSV file without the `skip` columns.
fn read_features(path: &Path, skip: &[&str]) -> Result<Vec<Vec<f64>>, CliError> {
    let err = |e: csv::Error| CliError::runtime(format!("cannot read {}: {e}", path.display()));
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(err)?;
    let headers = r.headers().map_err(err)?.clone();
    for s in skip {
        if !headers.iter().any(|h| h == *s) {
            return Err(CliError::runtime(format!("{} has no column {s:?}", path.display())));
        }
    }
    let keep: Vec<usize> = (0..headers.len()).filter(|&i| !skip.contains(&&headers[i])).collect();
    let mut points = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(err)?;
        let x = keep
            .iter()
            .map(|&i| {
                let cell = rec.get(i).unwrap_or_default();
                cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    CliError::runtime(format!(
                        "{}:{}: column {:?} is not a number: {cell:?}",
                        path.display(),
                        line + 2,
                        &headers[i]
                    ))
                })
            })
            .collect::<Result<Vec<f64>, CliError>>()?;
        points.push(x);
    }
    Ok(points)
}
