//! Classification metrics, risk tables and paired comparisons of methods.

mod roc;
mod stats;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fairness::FairnessReport;
use crate::models::{class_slacks, Classifier};
use crate::risk::{evaluate, EmpiricalRV, RiskSpec};

pub use roc::{margin_statistic, roc_auc, Roc};
pub use stats::{compare, dominance, ecdf, paired_t, ComparisonReport, Dominance, PairedT};

/// One-vs-rest F1 per class and their unweighted mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Scores {
    pub per_class: Vec<f64>,
    pub macro_avg: f64,
    /// Classes whose F1 had a zero denominator (reported as 0).
    pub undefined: Vec<bool>,
}

pub fn f1_scores(predictions: &[usize], truth: &[usize], n_classes: usize) -> Result<F1Scores> {
    if predictions.len() != truth.len() {
        return Err(Error::dim("f1 predictions", truth.len(), predictions.len()));
    }
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fn_ = vec![0usize; n_classes];
    for (&p, &t) in predictions.iter().zip(truth) {
        if p >= n_classes || t >= n_classes {
            return Err(Error::data(format!("class index {} out of range", p.max(t))));
        }
        if p == t {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let mut per_class = Vec::with_capacity(n_classes);
    let mut undefined = Vec::with_capacity(n_classes);
    for c in 0..n_classes {
        let denom = 2 * tp[c] + fp[c] + fn_[c];
        undefined.push(denom == 0);
        per_class.push(if denom == 0 {
            0.0
        } else {
            2.0 * tp[c] as f64 / denom as f64
        });
    }
    let macro_avg = if n_classes == 0 {
        0.0
    } else {
        per_class.iter().sum::<f64>() / n_classes as f64
    };
    Ok(F1Scores {
        per_class,
        macro_avg,
        undefined,
    })
}

/// A labeled row of per-class risks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub label: String,
    pub values: Vec<f64>,
}

/// Row label for a split and semideviation weight: "Exp Val" at `c = 0`,
/// "MSD (c=...)" otherwise.
pub fn risk_row_label(split: &str, c: f64) -> String {
    if c == 0.0 {
        format!("{split} Exp Val")
    } else {
        format!("{split} MSD (c={c})")
    }
}

/// Per-class order-1 semideviation of the margin slacks at each `c`, on the
/// training points and then on the test points.
pub fn empirical_risk_table<C: Classifier + ?Sized>(
    model: &C,
    train: &Dataset,
    test: &Dataset,
    c_values: &[f64],
) -> Result<Vec<RiskRow>> {
    let mut rows = Vec::new();
    for (name, data) in [("Train", train), ("Test", test)] {
        let risks = class_risks(model, data, c_values)?;
        for (c, values) in c_values.iter().zip(risks) {
            rows.push(RiskRow {
                label: risk_row_label(name, *c),
                values,
            });
        }
    }
    Ok(rows)
}

/// `out[k][i]`: semideviation with weight `c_values[k]` of class `i`'s
/// slacks. Empty classes get 0.
pub fn class_risks<C: Classifier + ?Sized>(model: &C, data: &Dataset, c_values: &[f64]) -> Result<Vec<Vec<f64>>> {
    if model.n_features() != data.feature_dim() {
        return Err(Error::dim("risk table data", model.n_features(), data.feature_dim()));
    }
    let slacks = class_slacks(model, data)?;
    c_values
        .iter()
        .map(|&c| {
            let spec = RiskSpec::msd(c);
            slacks
                .iter()
                .map(|z| {
                    if z.is_empty() {
                        Ok(0.0)
                    } else {
                        evaluate(&EmpiricalRV::uniform(z.clone())?, &spec)
                    }
                })
                .collect()
        })
        .collect()
}

/// Everything recorded for one method in one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub method_id: String,
    pub per_class_f1: Vec<f64>,
    pub avg_f1: f64,
    /// Per-class slack expectation and MSD (c = 1), training points.
    pub train_exp: Vec<f64>,
    pub train_msd: Vec<f64>,
    pub test_exp: Vec<f64>,
    pub test_msd: Vec<f64>,
    pub fairness: Option<FairnessReport>,
    /// Set when the trial failed for this method; metrics are then empty.
    pub error: Option<String>,
}

impl TrialResult {
    pub fn failed(trial: usize, seed: u64, method_id: &str, error: String) -> Self {
        TrialResult {
            trial,
            seed,
            method_id: method_id.to_string(),
            per_class_f1: Vec::new(),
            avg_f1: f64::NAN,
            train_exp: Vec::new(),
            train_msd: Vec::new(),
            test_exp: Vec::new(),
            test_msd: Vec::new(),
            fairness: None,
            error: Some(error),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::LinearModel;

    #[test]
    fn f1_examples() {
        let perfect = f1_scores(&[0, 1, 2, 1], &[0, 1, 2, 1], 3).unwrap();
        assert_eq!(perfect.per_class, vec![1.0; 3]);
        assert_eq!(perfect.macro_avg, 1.0);

        let half = f1_scores(&[0, 1, 0, 1], &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(half.per_class, vec![0.5, 0.5]);
        assert_eq!(half.macro_avg, 0.5);

        let absent = f1_scores(&[0, 0], &[0, 0], 2).unwrap();
        assert_eq!(absent.per_class, vec![1.0, 0.0]);
        assert_eq!(absent.undefined, vec![false, true]);

        assert!(f1_scores(&[0], &[0, 1], 2).is_err());
    }

    fn line() -> (LinearModel, Dataset) {
        let m = LinearModel::new(vec![vec![-1.0], vec![1.0]], vec![0.0, 0.0]).unwrap();
        let d = Dataset::from_labels(vec![vec![-2.0], vec![-1.0], vec![1.0], vec![3.0]], vec![0, 0, 1, 1], 2).unwrap();
        (m, d)
    }

    #[test]
    fn separated_points_have_zero_risk() {
        let (m, d) = line();
        let rows = empirical_risk_table(&m, &d, &d, &[0.0, 1.0]).unwrap();
        let labels: Vec<&str> = rows.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(
            labels,
            ["Train Exp Val", "Train MSD (c=1)", "Test Exp Val", "Test MSD (c=1)"]
        );
        assert!(rows.iter().all(|r| r.values == vec![0.0, 0.0]));
    }

    #[test]
    fn two_slacks_give_hand_values() {
        // class 1 points with slacks 0 and 2 under psi = (0, x)
        let m = LinearModel::new(vec![vec![0.0], vec![1.0]], vec![0.0, 0.0]).unwrap();
        let d = Dataset::from_labels(vec![vec![-1.0], vec![1.0], vec![5.0]], vec![0, 0, 1], 2).unwrap();
        let risks = class_risks(&m, &d, &[0.0, 1.0]).unwrap();
        assert!((risks[0][0] - 1.0).abs() < 1e-12);
        assert!((risks[1][0] - 1.5).abs() < 1e-12);
        assert_eq!(risks[0][1], 0.0);
    }
}
