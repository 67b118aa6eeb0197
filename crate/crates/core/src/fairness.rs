//! Risk composed over sensitive contexts, class-by-group splitting and
//! group fairness metrics.
//!
//! For class `i` and context `s`, `V(i, s)` is the inner risk of the class
//! errors restricted to context `s`. `W(i)` applies the context measure to
//! `V(i, .)` under the conditional context probabilities of class `i`, and
//! the outer measure over classes gives the total.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::f1_scores;
use crate::risk::{evaluate, EmpiricalRV, RiskSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextualSpec {
    /// Applied to each class-context cell.
    pub inner: RiskSpec,
    /// Applied over contexts within a class.
    pub context: RiskSpec,
    /// Applied over classes.
    pub outer: RiskSpec,
}

/// `cells[i][s]` holds the errors of class `i` in context `s`;
/// `joint_probs[i][s]` is the probability of that cell (summing to 1).
pub fn contextual_risk(
    cells: &[Vec<Option<EmpiricalRV>>],
    joint_probs: &[Vec<f64>],
    spec: &ContextualSpec,
) -> Result<f64> {
    if cells.len() != joint_probs.len() {
        return Err(Error::dim("contextual probabilities", cells.len(), joint_probs.len()));
    }
    let mut class_risk = Vec::with_capacity(cells.len());
    let mut class_prob = Vec::with_capacity(cells.len());
    for (i, (row, probs)) in cells.iter().zip(joint_probs).enumerate() {
        if row.len() != probs.len() {
            return Err(Error::dim("contextual probabilities", row.len(), probs.len()));
        }
        let mut v = Vec::with_capacity(row.len());
        for (s, cell) in row.iter().enumerate() {
            let rv = cell
                .as_ref()
                .ok_or_else(|| Error::data(format!("context cell (class {i}, context {s}) is empty")))?;
            v.push(evaluate(rv, &spec.inner)?);
        }
        let mass: f64 = probs.iter().sum();
        if !(mass > 0.0) {
            return Err(Error::data(format!("class {i} has zero probability")));
        }
        let conditional: Vec<f64> = probs.iter().map(|p| p / mass).collect();
        class_risk.push(evaluate(&EmpiricalRV::new(v, conditional)?, &spec.context)?);
        class_prob.push(mass);
    }
    evaluate(&EmpiricalRV::new(class_risk, class_prob)?, &spec.outer)
}

/// Relabeling of a dataset into one class per nonempty (class, group) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSplit {
    pub base_classes: Vec<String>,
    /// Sorted distinct sensitive values.
    pub sensitive_values: Vec<String>,
    /// `mapping[class][group]`: split class index, `None` for empty cells.
    pub mapping: Vec<Vec<Option<usize>>>,
    /// `(class, group)` of each split class.
    pub cells: Vec<(usize, usize)>,
    /// Training frequency of each split class.
    pub group_probs: Vec<f64>,
    pub warnings: Vec<String>,
}

impl GroupSplit {
    pub fn n_split_classes(&self) -> usize {
        self.cells.len()
    }

    /// Base class of a split class.
    pub fn collapse(&self, split_class: usize) -> usize {
        self.cells[split_class].0
    }

    pub fn collapse_all(&self, labels: &[usize]) -> Vec<usize> {
        labels.iter().map(|&c| self.collapse(c)).collect()
    }

    /// Group index of a sensitive value.
    pub fn group_index(&self, value: &str) -> Option<usize> {
        self.sensitive_values.iter().position(|v| v == value)
    }
}

/// Splits on the dataset's sensitive attribute.
pub fn split_by_sensitive(data: &Dataset) -> Result<(Dataset, GroupSplit)> {
    let groups = data
        .sensitive()
        .ok_or_else(|| Error::data("dataset has no sensitive attribute"))?
        .to_vec();
    split_on(data, groups, data.points().to_vec())
}

/// Splits on feature `column`, read as a categorical value and removed from
/// the features. The values become the dataset's sensitive attribute.
pub fn split_by_group(data: &Dataset, column: usize) -> Result<(Dataset, GroupSplit)> {
    if column >= data.feature_dim() {
        return Err(Error::data(format!(
            "sensitive column {column} is out of range for {} features",
            data.feature_dim()
        )));
    }
    let groups: Vec<String> = data.points().iter().map(|x| format!("{}", x[column])).collect();
    let points = data
        .points()
        .iter()
        .map(|x| {
            let mut x = x.clone();
            x.remove(column);
            x
        })
        .collect();
    split_on(data, groups, points)
}

fn split_on(data: &Dataset, groups: Vec<String>, points: Vec<Vec<f64>>) -> Result<(Dataset, GroupSplit)> {
    if groups.iter().any(|g| g.is_empty()) {
        return Err(Error::data("missing sensitive values"));
    }
    let values: Vec<String> = groups.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    if values.len() < 2 {
        return Err(Error::data("the sensitive attribute needs at least two values"));
    }
    let group_of: Vec<usize> = groups
        .iter()
        .map(|g| values.binary_search(g).expect("value collected above"))
        .collect();
    let n_classes = data.n_classes();
    let mut counts = vec![vec![0usize; values.len()]; n_classes];
    for (&y, &g) in data.labels().iter().zip(&group_of) {
        counts[y][g] += 1;
    }
    let mut mapping = vec![vec![None; values.len()]; n_classes];
    let mut cells = Vec::new();
    let mut warnings = Vec::new();
    let mut names = Vec::new();
    for (c, row) in counts.iter().enumerate() {
        for (g, &count) in row.iter().enumerate() {
            if count == 0 {
                warnings.push(format!(
                    "class {} has no points in group {}; cell dropped",
                    data.class_names()[c],
                    values[g]
                ));
                continue;
            }
            mapping[c][g] = Some(cells.len());
            cells.push((c, g));
            names.push(format!("{}|{}", data.class_names()[c], values[g]));
        }
    }
    let total = data.len() as f64;
    let group_probs = cells.iter().map(|&(c, g)| counts[c][g] as f64 / total).collect();
    let labels = data
        .labels()
        .iter()
        .zip(&group_of)
        .map(|(&y, &g)| mapping[y][g].expect("nonempty cell"))
        .collect();
    let split = Dataset::new(points, labels, names)?.with_sensitive(groups)?;
    Ok((
        split,
        GroupSplit {
            base_classes: data.class_names().to_vec(),
            sensitive_values: values,
            mapping,
            cells,
            group_probs,
            warnings,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    /// Largest gap between group positive rates.
    pub parity_diff: f64,
    /// Smallest ratio between group positive rates.
    pub statistical_rate: f64,
    /// Some group had a zero positive rate, so a ratio had a zero
    /// denominator; `statistical_rate` is then 0.
    pub rate_undefined: bool,
    pub per_group_positive_rates: BTreeMap<String, f64>,
    /// Macro F1 on the base classes.
    pub f1: f64,
}

/// Group positive-prediction rates and the parity gap and statistical rate
/// between them. With more than two groups the gap is the largest pairwise
/// gap and the rate the smallest pairwise ratio.
pub fn fairness_metrics(
    predictions: &[usize],
    base_truth: &[usize],
    groups: &[String],
    positive_class: usize,
    n_classes: usize,
) -> Result<FairnessReport> {
    if predictions.len() != base_truth.len() {
        return Err(Error::dim("fairness truth", predictions.len(), base_truth.len()));
    }
    if predictions.len() != groups.len() {
        return Err(Error::dim("fairness groups", predictions.len(), groups.len()));
    }
    let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for (&p, g) in predictions.iter().zip(groups) {
        let e = tally.entry(g.as_str()).or_default();
        e.0 += usize::from(p == positive_class);
        e.1 += 1;
    }
    if tally.len() < 2 {
        return Err(Error::data("fairness metrics need at least two groups"));
    }
    let rates: BTreeMap<String, f64> = tally
        .into_iter()
        .map(|(g, (pos, n))| (g.to_string(), pos as f64 / n as f64))
        .collect();
    let lo = rates.values().copied().fold(f64::INFINITY, f64::min);
    let hi = rates.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let rate_undefined = lo == 0.0;
    let statistical_rate = if rate_undefined { 0.0 } else { lo / hi };
    Ok(FairnessReport {
        parity_diff: hi - lo,
        statistical_rate,
        rate_undefined,
        per_group_positive_rates: rates,
        f1: f1_scores(predictions, base_truth, n_classes)?.macro_avg,
    })
}
