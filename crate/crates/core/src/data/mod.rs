//! Labeled datasets, file loaders, splits and perturbations.
//!
//! Class labels are stored 0-based; `class_names` keeps the original label
//! text in class order.

mod io;
mod perturb;
pub mod rng;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_csv, load_idx, CsvOptions};
pub use perturb::{cap_per_class, mislabel, remove_features, select_classes, split, FeatureMask, PerturbSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DatasetRepr", into = "DatasetRepr")]
pub struct Dataset {
    points: Vec<Vec<f64>>,
    labels: Vec<usize>,
    class_names: Vec<String>,
    class_index: Vec<Vec<usize>>,
    feature_dim: usize,
    sensitive: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct DatasetRepr {
    class_names: Vec<String>,
    points: Vec<Vec<f64>>,
    labels: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sensitive: Option<Vec<String>>,
}

impl TryFrom<DatasetRepr> for Dataset {
    type Error = Error;

    fn try_from(r: DatasetRepr) -> Result<Self> {
        let ds = Dataset::new(r.points, r.labels, r.class_names)?;
        match r.sensitive {
            Some(s) => ds.with_sensitive(s),
            None => Ok(ds),
        }
    }
}

impl From<Dataset> for DatasetRepr {
    fn from(d: Dataset) -> Self {
        DatasetRepr {
            class_names: d.class_names,
            points: d.points,
            labels: d.labels,
            sensitive: d.sensitive,
        }
    }
}

impl Dataset {
    /// Validates labels and dimensions. Classes may be empty here; training
    /// routines check for empty classes themselves.
    pub fn new(points: Vec<Vec<f64>>, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::dim("dataset labels", points.len(), labels.len()));
        }
        let n_classes = class_names.len();
        if n_classes == 0 {
            return Err(Error::data("dataset needs at least one class"));
        }
        let feature_dim = points.first().map_or(0, Vec::len);
        let mut class_index = vec![Vec::new(); n_classes];
        for (idx, (x, &y)) in points.iter().zip(&labels).enumerate() {
            if x.len() != feature_dim {
                return Err(Error::dim("dataset point", feature_dim, x.len()));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::data(format!("point {idx} has a non-finite feature")));
            }
            if y >= n_classes {
                return Err(Error::data(format!("label {y} of point {idx} is out of range")));
            }
            class_index[y].push(idx);
        }
        Ok(Dataset {
            points,
            labels,
            class_names,
            class_index,
            feature_dim,
            sensitive: None,
        })
    }

    /// Builds a dataset with classes named `1..=n_classes`.
    pub fn from_labels(points: Vec<Vec<f64>>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        Self::new(points, labels, (1..=n_classes).map(|c| c.to_string()).collect())
    }

    pub fn with_sensitive(mut self, sensitive: Vec<String>) -> Result<Self> {
        if sensitive.len() != self.len() {
            return Err(Error::dim("sensitive column", self.len(), sensitive.len()));
        }
        self.sensitive = Some(sensitive);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, idx: usize) -> &[f64] {
        &self.points[idx]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// Indices of the points of class `class`, in dataset order.
    pub fn class_indices(&self, class: usize) -> &[usize] {
        &self.class_index[class]
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        self.class_index.iter().map(Vec::len).collect()
    }

    /// Empirical class frequencies `m_i / m`.
    pub fn class_probs(&self) -> Vec<f64> {
        let m = self.len() as f64;
        self.class_index.iter().map(|c| c.len() as f64 / m).collect()
    }

    pub fn sensitive(&self) -> Option<&[String]> {
        self.sensitive.as_deref()
    }

    /// Points of class `class`.
    pub fn class_points(&self, class: usize) -> impl Iterator<Item = &[f64]> + '_ {
        self.class_index[class].iter().map(|&i| self.points[i].as_slice())
    }

    /// Errors unless there are at least two classes and none is empty.
    pub fn require_trainable(&self) -> Result<()> {
        if self.n_classes() < 2 {
            return Err(Error::data("training needs at least two classes"));
        }
        if let Some(c) = self.class_index.iter().position(Vec::is_empty) {
            return Err(Error::data(format!("class {} has no points", self.class_names[c])));
        }
        Ok(())
    }

    /// Sub-dataset of the given point indices (order kept, classes kept).
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let points = indices.iter().map(|&i| self.points[i].clone()).collect();
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        let mut ds =
            Dataset::new(points, labels, self.class_names.clone()).expect("subset of a valid dataset is valid");
        ds.sensitive = self
            .sensitive
            .as_ref()
            .map(|s| indices.iter().map(|&i| s[i].clone()).collect());
        ds
    }

    /// Same points with new labels (and possibly a new class list).
    pub fn relabel(&self, labels: Vec<usize>, class_names: Vec<String>) -> Result<Dataset> {
        let mut ds = Dataset::new(self.points.clone(), labels, class_names)?;
        ds.sensitive = self.sensitive.clone();
        Ok(ds)
    }

    pub(crate) fn with_points(&self, points: Vec<Vec<f64>>) -> Result<Dataset> {
        let mut ds = Dataset::new(points, self.labels.clone(), self.class_names.clone())?;
        ds.sensitive = self.sensitive.clone();
        Ok(ds)
    }

    pub fn summary(&self) -> DatasetSummary {
        let sensitive_values: Vec<String> = self
            .sensitive
            .iter()
            .flatten()
            .cloned()
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        DatasetSummary {
            n_points: self.len(),
            feature_dim: self.feature_dim,
            classes: self
                .class_names
                .iter()
                .zip(&self.class_index)
                .map(|(name, idx)| ClassSummary {
                    name: name.clone(),
                    count: idx.len(),
                })
                .collect(),
            sensitive_values,
        }
    }
}

/// Class sizes and dimensions, for structured dumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_points: usize,
    pub feature_dim: usize,
    pub classes: Vec<ClassSummary>,
    pub sensitive_values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub name: String,
    pub count: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        Dataset::from_labels(vec![vec![0.0], vec![1.0], vec![2.0]], vec![0, 1, 0], 2).unwrap()
    }

    #[test]
    fn class_index_follows_labels() {
        let d = toy();
        assert_eq!(d.class_indices(0), &[0, 2]);
        assert_eq!(d.class_sizes(), vec![2, 1]);
        assert_eq!(d.class_probs(), vec![2.0 / 3.0, 1.0 / 3.0]);
        assert!(d.require_trainable().is_ok());
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(Dataset::from_labels(vec![vec![0.0], vec![1.0, 2.0]], vec![0, 1], 2).is_err());
        assert!(Dataset::from_labels(vec![vec![0.0]], vec![3], 2).is_err());
        assert!(Dataset::from_labels(vec![vec![f64::NAN]], vec![0], 2).is_err());
    }

    #[test]
    fn empty_class_is_not_trainable() {
        let d = Dataset::from_labels(vec![vec![0.0]], vec![0], 2).unwrap();
        assert!(d.require_trainable().is_err());
    }

    #[test]
    fn subset_keeps_sensitive() {
        let d = toy().with_sensitive(vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let s = d.subset(&[2, 1]);
        assert_eq!(s.labels(), &[0, 1]);
        assert_eq!(s.sensitive().unwrap(), &["c".to_string(), "b".to_string()]);
    }

    #[test]
    fn summary_counts() {
        let s = toy().summary();
        assert_eq!(s.n_points, 3);
        assert_eq!(s.classes[1].count, 1);
    }
}
