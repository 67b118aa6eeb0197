//! Seeded synthetic datasets.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::rng::{stream, Stream};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Isotropic Gaussian blobs; class `i` is centred at `separation * e_i`
/// (coordinate axes, wrapping when there are more classes than features).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub n_classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub separation: f64,
    pub spread: f64,
}

pub fn blobs(spec: &BlobSpec, seed: u64) -> Result<Dataset> {
    if spec.n_classes < 2 || spec.dim == 0 || spec.per_class == 0 {
        return Err(Error::param(
            "blobs need two classes, one feature and one point per class",
        ));
    }
    let noise = Normal::new(0.0, spec.spread).map_err(|e| Error::param(e.to_string()))?;
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for c in 0..spec.n_classes {
        let mut rng = stream(seed, Stream::Synthetic, c as u64);
        for _ in 0..spec.per_class {
            let mut x: Vec<f64> = (0..spec.dim).map(|_| noise.sample(&mut rng)).collect();
            x[c % spec.dim] += spec.separation;
            points.push(x);
            labels.push(c);
        }
    }
    Dataset::from_labels(points, labels, spec.n_classes)
}

/// Concentric rings in the plane; class `i` lies at radius `radii[i]` with
/// Gaussian radial noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingSpec {
    pub radii: Vec<f64>,
    pub per_class: usize,
    pub noise: f64,
}

pub fn rings(spec: &RingSpec, seed: u64) -> Result<Dataset> {
    if spec.radii.len() < 2 || spec.per_class == 0 {
        return Err(Error::param("rings need two radii and one point per class"));
    }
    let noise = Normal::new(0.0, spec.noise).map_err(|e| Error::param(e.to_string()))?;
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (c, &r) in spec.radii.iter().enumerate() {
        let mut rng = stream(seed, Stream::Synthetic, c as u64);
        for _ in 0..spec.per_class {
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let rad = r + noise.sample(&mut rng);
            points.push(vec![rad * angle.cos(), rad * angle.sin()]);
            labels.push(c);
        }
    }
    Dataset::from_labels(points, labels, spec.radii.len())
}

/// Two classes, two sensitive groups ("g0", "g1").
///
/// Each point gets a group (`group1_share`) and a class; the probability
/// of the positive class (class 2, index 1) is `base_rate + bias / 2` in
/// group `g0` and `base_rate - bias / 2` in `g1`. Features are Gaussian
/// around a class centre plus a group shift `group_shift * e_2`, so the
/// group is visible to a linear classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub n_points: usize,
    pub dim: usize,
    pub base_rate: f64,
    pub bias: f64,
    pub group1_share: f64,
    pub separation: f64,
    pub group_shift: f64,
    pub spread: f64,
}

pub fn groups(spec: &GroupSpec, seed: u64) -> Result<Dataset> {
    let rate0 = spec.base_rate + spec.bias / 2.0;
    let rate1 = spec.base_rate - spec.bias / 2.0;
    if spec.dim < 2 || !(0.0..=1.0).contains(&rate0) || !(0.0..=1.0).contains(&rate1) {
        return Err(Error::param("group data need two features and rates in [0, 1]"));
    }
    let mut rng = stream(seed, Stream::Synthetic, 0);
    let mut points = Vec::with_capacity(spec.n_points);
    let mut labels = Vec::with_capacity(spec.n_points);
    let mut sensitive = Vec::with_capacity(spec.n_points);
    for _ in 0..spec.n_points {
        let g1 = rng.random_bool(spec.group1_share);
        let positive = rng.random_bool(if g1 { rate1 } else { rate0 });
        let mut x: Vec<f64> = (0..spec.dim)
            .map(|_| spec.spread * rng.sample::<f64, _>(StandardNormal))
            .collect();
        x[0] += if positive {
            spec.separation / 2.0
        } else {
            -spec.separation / 2.0
        };
        if g1 {
            x[1] += spec.group_shift;
        }
        points.push(x);
        labels.push(usize::from(positive));
        sensitive.push(if g1 { "g1" } else { "g0" }.to_string());
    }
    Dataset::from_labels(points, labels, 2)?.with_sensitive(sensitive)
}
