use proptest::prelude::*;
use riskclass::data::{cap_per_class, mislabel, remove_features, split, Dataset};

fn dataset(sizes: &[usize], dim: usize) -> Dataset {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut k = 0.0;
    for (c, &m) in sizes.iter().enumerate() {
        for _ in 0..m {
            points.push((0..dim).map(|j| k * 0.5 + j as f64).collect());
            labels.push(c);
            k += 1.0;
        }
    }
    Dataset::from_labels(points, labels, sizes.len()).unwrap()
}

fn sorted_points(d: &Dataset) -> Vec<Vec<u64>> {
    let mut p: Vec<Vec<u64>> = d
        .points()
        .iter()
        .map(|x| x.iter().map(|v| v.to_bits()).collect())
        .collect();
    p.sort();
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn mislabel_keeps_points_and_sizes(
        sizes in prop::collection::vec(1usize..40, 2..6),
        rate in 0.0..0.99f64,
        seed in any::<u64>(),
    ) {
        let d = dataset(&sizes, 2);
        let out = mislabel(&d, rate, seed).unwrap();
        prop_assert_eq!(out.class_sizes(), d.class_sizes());
        prop_assert_eq!(sorted_points(&out), sorted_points(&d));
        prop_assert_eq!(out.points(), d.points());
        let again = mislabel(&d, rate, seed).unwrap();
        prop_assert_eq!(again.labels(), out.labels());
    }

    #[test]
    fn mislabel_moves_the_quota_when_classes_are_balanced(
        n_classes in 2usize..6,
        m in 1usize..60,
        rate in 0.0..0.99f64,
        seed in any::<u64>(),
    ) {
        let d = dataset(&vec![m; n_classes], 1);
        let out = mislabel(&d, rate, seed).unwrap();
        let quota = (rate * m as f64).floor() as usize;
        for c in 0..n_classes {
            let moved = d.class_indices(c).iter().filter(|&&i| out.labels()[i] != c).count();
            prop_assert_eq!(moved, quota);
        }
    }

    #[test]
    fn feature_removal_is_idempotent_under_zero_rate(
        dim in 1usize..30,
        rate in 0.0..0.99f64,
        seed in any::<u64>(),
    ) {
        let d = dataset(&[3, 4], dim);
        let (once, mask) = remove_features(&d, rate, seed).unwrap();
        let (twice, empty) = remove_features(&once, 0.0, seed ^ 1).unwrap();
        prop_assert_eq!(once.points(), twice.points());
        prop_assert!(empty.removed.is_empty());
        prop_assert_eq!(mask.removed.len(), (rate * dim as f64).floor() as usize);
        for x in once.points() {
            for &j in &mask.removed {
                prop_assert_eq!(x[j], 0.0);
            }
        }
        let (repeat, same) = remove_features(&d, rate, seed).unwrap();
        prop_assert_eq!(same, mask);
        prop_assert_eq!(repeat.points(), once.points());
    }

    #[test]
    fn stratified_split_partitions_each_class(
        sizes in prop::collection::vec(4usize..40, 2..5),
        fraction in 0.05..0.5f64,
        seed in any::<u64>(),
    ) {
        let d = dataset(&sizes, 2);
        let (train, test) = split(&d, fraction, seed, true).unwrap();
        for (c, &m) in sizes.iter().enumerate() {
            let t = (fraction * m as f64).ceil() as usize;
            prop_assert_eq!(test.class_sizes()[c], t);
            prop_assert_eq!(train.class_sizes()[c], m - t);
        }
        let mut all = sorted_points(&train);
        all.extend(sorted_points(&test));
        all.sort();
        prop_assert_eq!(all, sorted_points(&d));
        let (train2, _) = split(&d, fraction, seed, true).unwrap();
        prop_assert_eq!(train2.points(), train.points());
    }

    #[test]
    fn cap_limits_every_class(
        sizes in prop::collection::vec(1usize..30, 2..5),
        limit in 1usize..20,
        seed in any::<u64>(),
    ) {
        let d = dataset(&sizes, 1);
        let capped = cap_per_class(&d, limit, seed);
        for (c, &m) in sizes.iter().enumerate() {
            prop_assert_eq!(capped.class_sizes()[c], m.min(limit));
        }
    }
}

#[test]
fn ten_percent_of_a_thousand_per_class() {
    let d = dataset(&[1000, 1000, 1000], 1);
    let out = mislabel(&d, 0.1, 2024).unwrap();
    for c in 0..3 {
        let moved = d.class_indices(c).iter().filter(|&&i| out.labels()[i] != c).count();
        assert_eq!(moved, 100);
    }
}

#[test]
fn zero_test_fraction_is_rejected() {
    assert!(split(&dataset(&[5, 5], 1), 0.0, 1, true).is_err());
    let (train, test) = split(&dataset(&[10, 10], 1), 0.3, 1, true).unwrap();
    assert_eq!(train.class_sizes(), vec![7, 7]);
    assert_eq!(test.class_sizes(), vec![3, 3]);
}
