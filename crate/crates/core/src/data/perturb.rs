use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::rng::{stream, Stream};
use super::Dataset;
use crate::error::{Error, Result};

/// Perturbations applied to a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbSpec {
    #[serde(default)]
    pub mislabel_rate: f64,
    #[serde(default)]
    pub feature_remove_rate: f64,
    #[serde(default)]
    pub per_class_limit: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl PerturbSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.mislabel_rate) {
            return Err(Error::param("mislabel_rate must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.feature_remove_rate) {
            return Err(Error::param("feature_remove_rate must lie in [0, 1)"));
        }
        if self.per_class_limit == Some(0) {
            return Err(Error::param("per_class_limit must be positive"));
        }
        Ok(())
    }
}

/// Moves `floor(rate * m_i)` points of every class `i` into other classes so
/// that each class keeps its size: class `j` receives as many foreign points
/// as it gives away.
///
/// A class can only give away as many points as the other classes give
/// away in total; when one class's quota exceeds that (possible with two
/// unequal classes) it is lowered to match.
pub fn mislabel(data: &Dataset, rate: f64, seed: u64) -> Result<Dataset> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::param("mislabel rate must lie in [0, 1)"));
    }
    let n_classes = data.n_classes();
    if n_classes < 2 {
        return Err(Error::data("mislabeling needs at least two classes"));
    }
    let mut quota: Vec<usize> = data
        .class_sizes()
        .iter()
        .map(|&m| (rate * m as f64).floor() as usize)
        .collect();
    let total: usize = quota.iter().sum();
    let (big, &k_max) = quota
        .iter()
        .enumerate()
        .max_by_key(|e| (*e.1, usize::MAX - e.0))
        .unwrap();
    if 2 * k_max > total {
        quota[big] = total - k_max;
    }
    let total: usize = quota.iter().sum();
    if total == 0 {
        return Ok(data.clone());
    }

    let mut movers: Vec<(usize, usize)> = Vec::with_capacity(total);
    for (class, &k) in quota.iter().enumerate() {
        let members = data.class_indices(class);
        let mut rng = stream(seed, Stream::Mislabel, class as u64);
        let mut picked: Vec<usize> = index::sample(&mut rng, members.len(), k)
            .into_iter()
            .map(|p| members[p])
            .collect();
        picked.sort_unstable();
        movers.extend(picked.into_iter().map(|i| (i, class)));
    }
    let mut slots: Vec<usize> = quota
        .iter()
        .enumerate()
        .flat_map(|(c, &k)| std::iter::repeat_n(c, k))
        .collect();
    let mut rng = stream(seed, Stream::MislabelAssign, 0);
    slots.shuffle(&mut rng);
    if !repair(&movers, &mut slots, &mut rng) {
        rotate_assign(&movers, &mut slots);
    }

    let mut labels = data.labels().to_vec();
    for (&(i, _), &c) in movers.iter().zip(&slots) {
        labels[i] = c;
    }
    data.relabel(labels, data.class_names().to_vec())
}

/// Swaps slots until no point keeps its own class. Returns false if stuck.
fn repair<R: Rng>(movers: &[(usize, usize)], slots: &mut [usize], rng: &mut R) -> bool {
    let n = slots.len();
    for p in 0..n {
        if slots[p] != movers[p].1 {
            continue;
        }
        let start = rng.random_range(0..n);
        let partner = (0..n)
            .map(|o| (start + o) % n)
            .find(|&q| slots[q] != movers[p].1 && slots[p] != movers[q].1);
        match partner {
            Some(q) => slots.swap(p, q),
            None => return false,
        }
    }
    true
}

/// Deterministic fallback: classes sorted, shifted by the largest quota.
fn rotate_assign(movers: &[(usize, usize)], slots: &mut [usize]) {
    let mut order: Vec<usize> = (0..movers.len()).collect();
    order.sort_by_key(|&p| movers[p].1);
    let sorted: Vec<usize> = order.iter().map(|&p| movers[p].1).collect();
    let n = sorted.len();
    let mut shift = 0;
    let mut run = 0;
    for w in 0..n {
        run = if w > 0 && sorted[w] == sorted[w - 1] {
            run + 1
        } else {
            1
        };
        shift = shift.max(run);
    }
    for (pos, &p) in order.iter().enumerate() {
        slots[p] = sorted[(pos + shift) % n];
    }
}

/// Coordinates zeroed by [`remove_features`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMask {
    pub removed: Vec<usize>,
}

impl FeatureMask {
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        let points = data
            .points()
            .iter()
            .map(|x| {
                let mut x = x.clone();
                for &j in &self.removed {
                    x[j] = 0.0;
                }
                x
            })
            .collect();
        data.with_points(points)
    }
}

/// Zeroes one seeded set of `floor(rate * n)` coordinates in every point.
pub fn remove_features(data: &Dataset, rate: f64, seed: u64) -> Result<(Dataset, FeatureMask)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::param("feature removal rate must lie in [0, 1)"));
    }
    let n = data.feature_dim();
    let k = (rate * n as f64).floor() as usize;
    if k >= n && n > 0 {
        return Err(Error::param("feature mask would remove every feature"));
    }
    let mut rng = stream(seed, Stream::FeatureMask, 0);
    let mut removed = index::sample(&mut rng, n, k).into_vec();
    removed.sort_unstable();
    let mask = FeatureMask { removed };
    Ok((mask.apply(data)?, mask))
}

/// Train/test split. The test part receives `ceil(f * m_i)` points of every
/// class (stratified) or `ceil(f * m)` points overall; both parts must keep
/// every class.
pub fn split(data: &Dataset, test_fraction: f64, seed: u64, stratified: bool) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::param("test fraction must lie in (0, 1)"));
    }
    let mut test = Vec::new();
    if stratified {
        for class in 0..data.n_classes() {
            let members = data.class_indices(class);
            let m = members.len();
            let k = (test_fraction * m as f64).ceil() as usize;
            if k == 0 || k >= m {
                return Err(Error::data(format!(
                    "class {} with {m} points is too small to split",
                    data.class_names()[class]
                )));
            }
            let mut rng = stream(seed, Stream::Split, class as u64);
            test.extend(index::sample(&mut rng, m, k).into_iter().map(|p| members[p]));
        }
    } else {
        let m = data.len();
        let k = (test_fraction * m as f64).ceil() as usize;
        let mut rng = stream(seed, Stream::Split, 0);
        test.extend(index::sample(&mut rng, m, k.min(m)));
    }
    test.sort_unstable();
    let mut in_test = vec![false; data.len()];
    for &i in &test {
        in_test[i] = true;
    }
    let train: Vec<usize> = (0..data.len()).filter(|&i| !in_test[i]).collect();
    let (train, test) = (data.subset(&train), data.subset(&test));
    for part in [&train, &test] {
        if let Some(c) = part.class_sizes().iter().position(|&s| s == 0) {
            return Err(Error::data(format!(
                "split leaves class {} empty on one side",
                data.class_names()[c]
            )));
        }
    }
    Ok((train, test))
}

/// Keeps at most `limit` seeded random points per class.
pub fn cap_per_class(data: &Dataset, limit: usize, seed: u64) -> Dataset {
    let mut keep = Vec::new();
    for class in 0..data.n_classes() {
        let members = data.class_indices(class);
        if members.len() <= limit {
            keep.extend_from_slice(members);
        } else {
            let mut rng = stream(seed, Stream::Cap, class as u64);
            keep.extend(
                index::sample(&mut rng, members.len(), limit)
                    .into_iter()
                    .map(|p| members[p]),
            );
        }
    }
    keep.sort_unstable();
    data.subset(&keep)
}

/// Restricts to the named classes, renumbered in the given order.
pub fn select_classes(data: &Dataset, names: &[String]) -> Result<Dataset> {
    let mut map = vec![None; data.n_classes()];
    for (new, name) in names.iter().enumerate() {
        let old = data
            .class_names()
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::data(format!("unknown class {name:?}")))?;
        if map[old].is_some() {
            return Err(Error::data(format!("class {name:?} listed twice")));
        }
        map[old] = Some(new);
    }
    let keep: Vec<usize> = (0..data.len()).filter(|&i| map[data.labels()[i]].is_some()).collect();
    let sub = data.subset(&keep);
    let labels = sub.labels().iter().map(|&y| map[y].unwrap()).collect();
    sub.relabel(labels, names.to_vec())
}
