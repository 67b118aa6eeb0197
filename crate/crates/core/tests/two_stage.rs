mod support;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use riskclass::data::Dataset;
use riskclass::models::class_slacks;
use riskclass::risk::{RiskSpec, SystemicSpec};
use riskclass::solver::SolveStatus;
use riskclass::two_stage::{
    evaluate_theta, extensive_form, second_stage, solve_master, train_two_stage, train_two_stage_from, Cut,
    SolverState, StepKind, Theta, TwoStageConfig,
};
use support::instances::two_stage_instance;

fn random_theta(rng: &mut ChaCha8Rng, n_classes: usize, dim: usize, scale: f64) -> Theta {
    Theta {
        blocks: (0..n_classes)
            .map(|_| {
                (0..=dim)
                    .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect(),
    }
}

fn perturbed(theta: &Theta, dir: &Theta, h: f64) -> Theta {
    Theta {
        blocks: theta
            .blocks
            .iter()
            .zip(&dir.blocks)
            .map(|(t, d)| t.iter().zip(d).map(|(a, b)| a + h * b).collect())
            .collect(),
    }
}

fn inner_product(a: &[Vec<f64>], b: &Theta) -> f64 {
    a.iter()
        .zip(&b.blocks)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .sum()
}

#[test]
fn decomposition_matches_extensive_form() {
    for seed in 0..12 {
        let (data, cfg) = two_stage_instance(seed);
        let (_, state) = train_two_stage(&data, &cfg).unwrap();
        let oracle = extensive_form(&data, &cfg).unwrap();
        assert_eq!(state.status, SolveStatus::Optimal, "seed {seed}");
        assert!(
            (state.rho_bar - oracle).abs() <= 1e-4,
            "seed {seed}: {} vs {oracle}",
            state.rho_bar
        );
    }
}

#[test]
fn ridge_term_is_shared_with_the_oracle() {
    let (data, mut cfg) = two_stage_instance(5);
    cfg.ridge = 0.1;
    let (model, state) = train_two_stage(&data, &cfg).unwrap();
    let oracle = extensive_form(&data, &cfg).unwrap();
    assert!((state.rho_bar - oracle).abs() <= 1e-4, "{} vs {oracle}", state.rho_bar);
    assert!(model.weight_norm_sq() > 0.0);
}

#[test]
fn trace_invariants_hold() {
    for seed in 0..8 {
        let (data, cfg) = two_stage_instance(seed);
        let (_, state) = train_two_stage(&data, &cfg).unwrap();
        let trace = &state.trace;
        assert_eq!(trace[0].step_kind, StepKind::Descent);
        for row in trace {
            assert!(row.alpha <= row.rho_bar + 1e-8, "seed {seed} k {}", row.k);
        }
        for pair in trace.windows(2) {
            let (prev, cur) = (&pair[0], &pair[1]);
            assert!(cur.rho_bar <= prev.rho_bar, "seed {seed} k {}", cur.k);
            let bound = (1.0 - cfg.theta) * prev.rho_bar + cfg.theta * prev.alpha;
            match cur.step_kind {
                StepKind::Descent => {
                    assert!(cur.rho_k <= bound);
                    assert_eq!(cur.rho_bar, cur.rho_k);
                }
                StepKind::Null => {
                    assert!(cur.rho_k > bound);
                    assert_eq!(cur.rho_bar, prev.rho_bar);
                }
            }
        }
        let last = trace.last().unwrap();
        assert!(last.rho_bar - last.alpha <= 1e-6 * (1.0 + last.rho_bar.abs()));
    }
}

#[test]
fn terminal_step_vanishes_at_tight_tolerance() {
    for seed in 0..8 {
        let (data, mut cfg) = two_stage_instance(seed);
        cfg.stop_tol = Some(1e-9);
        let (_, state) = train_two_stage(&data, &cfg).unwrap();
        assert_eq!(state.status, SolveStatus::Optimal);
        let step = state.trace.last().unwrap().step_norm;
        assert!(step <= 1e-3, "seed {seed}: {step}");
    }
}

#[test]
fn stored_cuts_underestimate_the_recourse() {
    let (data, cfg) = two_stage_instance(2);
    let (_, state) = train_two_stage(&data, &cfg).unwrap();
    let inner = RiskSpec::expectation();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (n_classes, dim) = (data.n_classes(), data.feature_dim());
    for _ in 0..100 {
        let probe = perturbed(&state.w, &random_theta(&mut rng, n_classes, dim, 1.0), 1.0);
        let fresh: Vec<f64> = (0..n_classes)
            .map(|i| second_stage(&probe, i, &data, &inner).unwrap().value)
            .collect();
        for cut in state.cuts.iter() {
            if let Cut::Scenario { class, .. } = cut {
                let v = cut.scenario_value(&probe).unwrap();
                assert!(fresh[*class] >= v - 1e-6, "class {class}: {} < {v}", fresh[*class]);
            }
        }
    }
}

#[test]
fn second_stage_gradients_are_subgradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for seed in 0..6 {
        let (data, _) = two_stage_instance(seed);
        let (n_classes, dim) = (data.n_classes(), data.feature_dim());
        for inner in [RiskSpec::expectation(), RiskSpec::msd(0.7)] {
            let theta = random_theta(&mut rng, n_classes, dim, 1.0);
            for i in 0..n_classes {
                let base = second_stage(&theta, i, &data, &inner).unwrap();
                for _ in 0..10 {
                    let dir = random_theta(&mut rng, n_classes, dim, 1.0);
                    let h = 1e-4;
                    let moved = second_stage(&perturbed(&theta, &dir, h), i, &data, &inner).unwrap();
                    let predicted = base.value + h * inner_product(&base.gradients, &dir);
                    assert!(moved.value >= predicted - 1e-6, "{} < {predicted}", moved.value);
                }
            }
        }
    }
}

fn one_point_each() -> Dataset {
    Dataset::from_labels(vec![vec![1.0], vec![-1.0]], vec![0, 1], 2).unwrap()
}

#[test]
fn second_stage_hand_values() {
    let data = one_point_each();
    let theta = Theta::from_model_parts(&[vec![1.0], vec![-1.0]], &[0.0, 0.0]);
    let s = second_stage(&theta, 0, &data, &RiskSpec::expectation()).unwrap();
    assert!(s.value.abs() < 1e-9);

    let equal = Theta::from_model_parts(&[vec![0.3], vec![0.3]], &[0.1, 0.1]);
    for i in 0..2 {
        for inner in [RiskSpec::expectation(), RiskSpec::msd(1.0)] {
            let s = second_stage(&equal, i, &data, &inner).unwrap();
            assert!((s.value - 1.0).abs() < 1e-9);
        }
    }
}

fn master_state(n_classes: usize, dim: usize) -> (SolverState, TwoStageConfig) {
    let w = Theta {
        blocks: (0..n_classes)
            .map(|i| (0..=dim).map(|k| (i + k) as f64 * 0.25).collect())
            .collect(),
    };
    let cfg = TwoStageConfig::new(SystemicSpec {
        inner: RiskSpec::expectation(),
        outer: RiskSpec::expectation(),
        class_probs: vec![1.0 / n_classes as f64; n_classes],
    });
    (SolverState::new(w), cfg)
}

#[test]
fn master_with_flat_cuts_stays_at_center() {
    let (mut state, cfg) = master_state(3, 2);
    let values = [0.5, 2.0, 1.25];
    state.cuts.push(Cut::Objective { mu: vec![1.0 / 3.0; 3] });
    for (i, &v) in values.iter().enumerate() {
        state.cuts.push(Cut::Scenario {
            class: i,
            value: v,
            gradients: vec![vec![0.0; 3]; 3],
            anchor: state.w.clone(),
        });
    }
    let m = solve_master(&state, &cfg).unwrap();
    assert!((m.alpha - values.iter().sum::<f64>() / 3.0).abs() < 1e-7);
    assert!(m.theta.distance(&state.w) < 1e-6);
}

#[test]
fn master_without_binding_cuts_is_zero() {
    let (mut state, cfg) = master_state(2, 1);
    state.cuts.push(Cut::Objective { mu: vec![0.5, 0.5] });
    for i in 0..2 {
        state.cuts.push(Cut::Scenario {
            class: i,
            value: -1.0,
            gradients: vec![vec![0.0; 2]; 2],
            anchor: state.w.clone(),
        });
    }
    let m = solve_master(&state, &cfg).unwrap();
    assert!(m.alpha.abs() < 1e-7);
    assert!(m.r.iter().all(|r| r.abs() < 1e-7));
    assert!(m.theta.distance(&state.w) < 1e-6);
}

#[test]
fn heavy_proximal_weight_pins_the_master() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut state, mut cfg) = master_state(3, 4);
    cfg.prox_sigma = 1e6;
    state.cuts.push(Cut::Objective { mu: vec![1.0 / 3.0; 3] });
    for i in 0..3 {
        let g = random_theta(&mut rng, 3, 4, 5.0);
        state.cuts.push(Cut::Scenario {
            class: i,
            value: 3.0,
            gradients: g.blocks,
            anchor: state.w.clone(),
        });
    }
    let m = solve_master(&state, &cfg).unwrap();
    assert!(m.theta.distance(&state.w) <= 1e-3);
}

#[test]
fn master_requires_cuts() {
    let (state, cfg) = master_state(2, 1);
    assert!(solve_master(&state, &cfg).is_err());
}

#[test]
fn warm_start_at_optimum_closes_quickly() {
    let (data, mut cfg) = two_stage_instance(1);
    cfg.stop_tol = Some(1e-9);
    let (_, first) = train_two_stage(&data, &cfg).unwrap();
    cfg.stop_tol = None;
    let (_, second) = train_two_stage_from(&data, &cfg, first.w.clone()).unwrap();
    assert_eq!(second.trace[0].step_kind, StepKind::Descent);
    assert!((second.trace[0].rho_k - first.rho_bar).abs() < 1e-9);
    assert_eq!(second.status, SolveStatus::Optimal);
    assert!(second.k <= first.k.min(10), "{} vs {}", second.k, first.k);
}

#[test]
fn descent_parameter_changes_the_path_not_the_limit() {
    let (data, mut cfg) = two_stage_instance(6);
    cfg.theta = 0.05;
    let (_, low) = train_two_stage(&data, &cfg).unwrap();
    cfg.theta = 0.95;
    let (_, high) = train_two_stage(&data, &cfg).unwrap();
    assert!((low.rho_bar - high.rho_bar).abs() <= 1e-4);
    let descents = |s: &SolverState| s.trace.iter().filter(|r| r.step_kind == StepKind::Descent).count();
    assert_ne!((low.k, descents(&low)), (high.k, descents(&high)));
}

#[test]
fn extensive_form_identical_classes_costs_one() {
    let data = Dataset::from_labels(vec![vec![0.5, -1.0]; 6], vec![0, 0, 0, 1, 1, 1], 2).unwrap();
    for outer in [RiskSpec::expectation(), RiskSpec::msd(0.5), RiskSpec::avar(0.5)] {
        let cfg = TwoStageConfig::new(SystemicSpec {
            inner: RiskSpec::expectation(),
            outer,
            class_probs: Vec::new(),
        });
        assert!((extensive_form(&data, &cfg).unwrap() - 1.0).abs() < 1e-7);
    }
}

#[test]
fn expectation_value_is_the_weighted_mean_slack() {
    let (data, cfg) = two_stage_instance(4);
    let value = extensive_form(&data, &cfg).unwrap();
    let (model, state) = train_two_stage(&data, &cfg).unwrap();
    let slacks = class_slacks(&model, &data).unwrap();
    let probs = data.class_probs();
    let weighted: f64 = slacks
        .iter()
        .zip(&probs)
        .map(|(z, p)| p * z.iter().sum::<f64>() / z.len() as f64)
        .sum();
    assert!((weighted - value).abs() < 1e-4, "{weighted} vs {value}");
    let eval = evaluate_theta(&state.w, &data, &cfg).unwrap();
    assert!((eval.objective - state.rho_bar).abs() < 1e-12);
}
