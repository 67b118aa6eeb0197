//! Trial loop: one split and perturbation per trial, every method trained
//! on the same training set and scored on the same untouched test set.

use rayon::prelude::*;
use riskclass::data::rng::trial_seed;
use riskclass::data::{mislabel, remove_features, split, Dataset};
use riskclass::eval::{class_risks, f1_scores, TrialResult};
use riskclass::fairness::fairness_metrics;
use riskclass::models::Classifier;
use riskclass::two_stage::TraceRow;

use crate::config::ExperimentConfig;
use crate::model::{fit, Fit};
use crate::CliError;

/// One method in one trial.
#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub result: TrialResult,
    /// Base-class scores of every test point.
    pub test_scores: Vec<Vec<f64>>,
    pub trace: Vec<TraceRow>,
    pub iterations: Option<usize>,
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub trial: usize,
    pub seed: u64,
    pub test_labels: Vec<usize>,
    /// In config method order.
    pub methods: Vec<MethodOutcome>,
}

#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub config: ExperimentConfig,
    pub class_names: Vec<String>,
    pub trials: Vec<TrialOutput>,
}

impl ExperimentRun {
    pub fn seeds(&self) -> Vec<u64> {
        self.trials.iter().map(|t| t.seed).collect()
    }

    /// Results of method `m` (config index), trial order.
    pub fn results(&self, m: usize) -> impl Iterator<Item = &TrialResult> {
        self.trials.iter().map(move |t| &t.methods[m].result)
    }

    pub fn method_index(&self, id: &str) -> Option<usize> {
        self.config.methods.iter().position(|m| m.id == id)
    }

    pub fn n_failed(&self) -> usize {
        self.trials
            .iter()
            .flat_map(|t| &t.methods)
            .filter(|m| !m.result.is_ok())
            .count()
    }
}

/// Training and test sets of one trial.
pub fn prepare_trial(
    cfg: &ExperimentConfig,
    fixed: Option<&Dataset>,
    seed: u64,
) -> riskclass::Result<(Dataset, Dataset)> {
    let data = match fixed {
        Some(d) => d.clone(),
        None => cfg.load_dataset(seed).map_err(|e| riskclass::Error::Data(e.message))?,
    };
    let data = cfg.cap(data, seed);
    let (mut train, test) = split(&data, cfg.test_fraction, seed, true)?;
    if cfg.perturb.mislabel_rate > 0.0 {
        train = mislabel(&train, cfg.perturb.mislabel_rate, seed)?;
    }
    if cfg.perturb.feature_remove_rate > 0.0 {
        train = remove_features(&train, cfg.perturb.feature_remove_rate, seed)?.0;
    }
    Ok((train, test))
}

fn evaluate(
    fit: &Fit,
    train: &Dataset,
    test: &Dataset,
    positive: Option<usize>,
    trial: usize,
    seed: u64,
    id: &str,
) -> riskclass::Result<MethodOutcome> {
    let model = &fit.model;
    let test_scores = model.scores_all(test.points())?;
    let pred: Vec<usize> = test_scores.iter().map(|s| riskclass::models::argmax(s)).collect();
    let f1 = f1_scores(&pred, test.labels(), test.n_classes())?;
    let tr = class_risks(model, train, &[0.0, 1.0])?;
    let te = class_risks(model, test, &[0.0, 1.0])?;
    let fairness = match (positive, test.sensitive()) {
        (Some(p), Some(groups)) => Some(fairness_metrics(&pred, test.labels(), groups, p, test.n_classes())?),
        _ => None,
    };
    let [train_exp, train_msd]: [Vec<f64>; 2] = tr.try_into().expect("two risk rows");
    let [test_exp, test_msd]: [Vec<f64>; 2] = te.try_into().expect("two risk rows");
    Ok(MethodOutcome {
        result: TrialResult {
            trial,
            seed,
            method_id: id.to_string(),
            per_class_f1: f1.per_class,
            avg_f1: f1.macro_avg,
            train_exp,
            train_msd,
            test_exp,
            test_msd,
            fairness,
            error: None,
        },
        test_scores,
        trace: fit.state.as_ref().map(|s| s.trace.clone()).unwrap_or_default(),
        iterations: fit.state.as_ref().map(|s| s.k),
        gamma: fit.gamma,
    })
}

fn failed(trial: usize, seed: u64, id: &str, err: String) -> MethodOutcome {
    MethodOutcome {
        result: TrialResult::failed(trial, seed, id, err),
        test_scores: Vec::new(),
        trace: Vec::new(),
        iterations: None,
        gamma: None,
    }
}

fn run_trial(cfg: &ExperimentConfig, fixed: Option<&Dataset>, positive: Option<usize>, trial: usize) -> TrialOutput {
    let seed = trial_seed(cfg.base_seed, trial as u64);
    let (train, test) = match prepare_trial(cfg, fixed, seed) {
        Ok(parts) => parts,
        Err(e) => {
            let msg = format!("preparing data: {e}");
            return TrialOutput {
                trial,
                seed,
                test_labels: Vec::new(),
                methods: cfg
                    .methods
                    .iter()
                    .map(|m| failed(trial, seed, &m.id, msg.clone()))
                    .collect(),
            };
        }
    };
    let methods = cfg
        .methods
        .iter()
        .map(|m| {
            fit(&m.kind, &train, seed)
                .and_then(|f| evaluate(&f, &train, &test, positive, trial, seed, &m.id))
                .unwrap_or_else(|e| failed(trial, seed, &m.id, e.to_string()))
        })
        .collect();
    TrialOutput {
        trial,
        seed,
        test_labels: test.labels().to_vec(),
        methods,
    }
}

/// Runs every trial on a pool of `jobs` threads. Data loading and config
/// problems are reported before any trial starts; failures inside a trial
/// are recorded in its results.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentRun, CliError> {
    let first = cfg.load_dataset(trial_seed(cfg.base_seed, 0))?;
    let class_names = first.class_names().to_vec();
    let has_sensitive = first.sensitive().is_some();
    let positive = match &cfg.fairness {
        Some(f) => {
            if !has_sensitive {
                return Err(CliError::runtime(
                    "fairness metrics need a dataset with a sensitive attribute",
                ));
            }
            Some(class_names.iter().position(|c| *c == f.positive_class).ok_or_else(|| {
                CliError::runtime(format!(
                    "positive class {:?} is not a class of the dataset",
                    f.positive_class
                ))
            })?)
        }
        None => None,
    };
    if !has_sensitive && cfg.methods.iter().any(|m| m.kind.name() == "two-stage-fair") {
        return Err(CliError::runtime(
            "two-stage-fair needs a dataset with a sensitive attribute",
        ));
    }
    let fixed = (!cfg.is_synthetic()).then_some(first);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::runtime(format!("cannot start worker pool: {e}")))?;
    let trials: Vec<TrialOutput> = pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_trial(cfg, fixed.as_ref(), positive, t))
            .collect()
    });
    Ok(ExperimentRun {
        config: cfg.clone(),
        class_names,
        trials,
    })
}
