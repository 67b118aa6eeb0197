use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use riskclass::data::Dataset;
use riskclass::risk::{RiskSpec, SystemicSpec};
use riskclass::two_stage::TwoStageConfig;

/// Outer measures cycled through by [`two_stage_instance`].
pub fn outer_for(seed: u64) -> RiskSpec {
    [
        RiskSpec::expectation(),
        RiskSpec::msd(0.05),
        RiskSpec::msd(0.5),
        RiskSpec::avar(0.5),
    ][seed as usize % 4]
}

/// Random shifted Gaussian classes: 2-4 classes, 1-5 features, 3-20 points each.
pub fn two_stage_instance(seed: u64) -> (Dataset, TwoStageConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_classes = rng.random_range(2..=4);
    let dim = rng.random_range(1..=5);
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for c in 0..n_classes {
        let m = rng.random_range(3..=20);
        for _ in 0..m {
            let mut x: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            x[c % dim] += 1.5;
            points.push(x);
            labels.push(c);
        }
    }
    let data = Dataset::from_labels(points, labels, n_classes).unwrap();
    let cfg = TwoStageConfig::new(SystemicSpec {
        inner: RiskSpec::expectation(),
        outer: outer_for(seed),
        class_probs: Vec::new(),
    });
    (data, cfg)
}
