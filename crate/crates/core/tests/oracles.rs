//! Hand-derived and brute-force reference values for the core operations.

mod common;

use std::collections::BTreeMap;

use common::*;
use ilens_core::distribution::{compute_z, delta_distribution, normalize, order_distribution};
use ilens_core::extract::{extract, interactions_for_split, matching_error, ExtractConfig, SplitParams};
use ilens_core::generalization::jaccard_values;
use ilens_core::parametric::{build_m_matrix, decay_eval, decay_predict, disentangle, spindle_eval, DecayParams, FitGrid, SpindleParams};
use ilens_core::table::check_sparsity_conditions;
use ilens_core::zoo::{masked_table, train, DatasetConfig, SyntheticDataset, TrainConfig};
use ilens_core::*;
use nalgebra::DMatrix;
use rand::Rng;

fn lv(values: &[f64]) -> LatticeVector {
    LatticeVector::from_values(values.to_vec()).unwrap()
}

fn iset(n: usize, and: &[(&[usize], f64)], or: &[(&[usize], f64)], tau: f64) -> InteractionSet {
    let mut i_and = LatticeVector::zeros(n).unwrap();
    for (s, x) in and {
        i_and.set(mask(s), *x);
    }
    let mut i_or = LatticeVector::zeros(n).unwrap();
    for (s, x) in or {
        i_or.set(mask(s), *x);
    }
    InteractionSet::new(0.0, i_and, i_or, tau).unwrap()
}

#[test]
fn mobius_frozen_values() {
    assert_eq!(mobius_and(&lv(&[0.0, 1.0, 1.0, 3.0])).as_slice(), &[0.0, 1.0, 1.0, 1.0]);
    assert_eq!(mobius_or(&lv(&[0.0, 2.0])).as_slice(), &[0.0, 2.0]);
    assert_eq!(naive_or(&[0.0, 2.0]), vec![0.0, 2.0]);
}

#[test]
fn fast_transforms_match_brute_force() {
    let mut r = rng(1);
    for n in 0..=6 {
        let u = random_vector(n, &mut r);
        let (and, or) = (mobius_and(&u), mobius_or(&u));
        for (fast, slow) in and.as_slice().iter().zip(naive_and(u.as_slice())) {
            assert!(rel_close(*fast, slow, 1e-12));
        }
        for (fast, slow) in or.as_slice().iter().zip(naive_or(u.as_slice())) {
            assert!(rel_close(*fast, slow, 1e-12));
        }
    }
}

#[test]
fn reconstruct_frozen_values() {
    let n = 2;
    let and = iset(n, &[(&[0, 1], 2.0)], &[], 0.0);
    assert_eq!(reconstruct(1.0, &and.i_and, &and.i_or, mask(&[0])).unwrap(), 1.0);
    assert_eq!(reconstruct(1.0, &and.i_and, &and.i_or, mask(&[0, 1])).unwrap(), 3.0);
    let or = iset(n, &[], &[(&[0, 1], 2.0)], 0.0);
    assert_eq!(reconstruct(0.0, &or.i_and, &or.i_or, mask(&[0])).unwrap(), 2.0);
    assert_eq!(reconstruct(0.0, &or.i_and, &or.i_or, SubsetMask::EMPTY).unwrap(), 0.0);
}

#[test]
fn reconstruct_matches_subset_enumeration() {
    let mut r = rng(2);
    let (a, o) = (random_vector(5, &mut r), random_vector(5, &mut r));
    for t in SubsetMask::all(5) {
        let fast = reconstruct(0.7, &a, &o, t).unwrap();
        assert!((fast - naive_reconstruct(0.7, a.as_slice(), o.as_slice(), t.index())).abs() < 1e-12);
    }
}

#[test]
fn log_odds_near_one() {
    let v = log_odds(1.0 - 1e-12).unwrap();
    // ln((1 − p) / p) evaluated in closed form: ln(1e12 − 1).
    let want = (1e12f64 - 1.0).ln();
    assert!((v - want).abs() < 1e-3, "{v} vs {want}");
    assert!((v - 27.63).abs() < 0.01);
}

#[test]
fn synthetic_model_frozen_values() {
    let mut and = BTreeMap::new();
    and.insert(mask(&[0, 1]), 2.0);
    let m = SyntheticModel::new(3, 1.0, and, BTreeMap::new()).unwrap();
    assert_eq!(m.eval(mask(&[0, 1])), 3.0);
    assert_eq!(m.eval(SubsetMask::EMPTY), 1.0);
    let mut or = BTreeMap::new();
    or.insert(mask(&[0, 1]), 2.0);
    let m = SyntheticModel::new(3, 0.5, BTreeMap::new(), or).unwrap();
    assert_eq!(m.eval(mask(&[1])), 2.5);
}

#[test]
fn evaluator_table_matches_reconstruction_oracle() {
    let m = SyntheticModel::random(6, 9, (0.5, 3.0), 4).unwrap();
    let t = ValueTable::from_evaluator(6, |s| m.eval(s)).unwrap();
    let truth = m.interactions(0.0).unwrap();
    for (s, v) in t.values().iter() {
        let h = naive_reconstruct(m.bias, truth.i_and.as_slice(), truth.i_or.as_slice(), s.index());
        assert!((v - h).abs() < 1e-12);
    }
}

#[test]
fn planted_and_only_recovery() {
    let mut planted = BTreeMap::new();
    planted.insert(mask(&[0, 1]), 2.0);
    planted.insert(mask(&[2, 3, 4]), -1.5);
    planted.insert(mask(&[5]), 0.75);
    let m = SyntheticModel::new(6, 0.3, planted, BTreeMap::new()).unwrap();
    let t = m.table().unwrap();
    let ex = extract(&t, &ExtractConfig::default()).unwrap();
    assert!(ex.interactions.l1_norm() <= m.l1_norm() + 1e-3);
    assert!(matching_error(&t, &ex.interactions, &ex.split).unwrap() <= 1e-6);
}

#[test]
fn constant_and_random_tables() {
    let t = ValueTable::from_evaluator(4, |_| -2.5).unwrap();
    let ex = extract(&t, &ExtractConfig::default()).unwrap();
    assert_eq!(ex.interactions.bias, -2.5);
    assert_eq!(ex.interactions.l1_norm(), 0.0);

    let mut r = rng(5);
    let t = ValueTable::from_evaluator(3, |_| r.random_range(-1.0..1.0)).unwrap();
    let cfg = ExtractConfig {
        enable_noise: false,
        ..ExtractConfig::default()
    };
    let ex = extract(&t, &cfg).unwrap();
    let h = ex.interactions.outputs();
    for (s, v) in t.values().iter() {
        assert!((v - h.get(s)).abs() <= 1e-9);
    }
}

#[test]
fn matching_for_random_splits() {
    let mut r = rng(6);
    for n in 1..=8 {
        let t = ValueTable::new(random_vector(n, &mut r));
        let sp = SplitParams {
            gamma: random_vector(n, &mut r),
            noise: LatticeVector::zeros(n).unwrap(),
            zeta: 0.0,
        };
        let iset = interactions_for_split(&t, &sp, 0.0).unwrap();
        assert!(matching_error(&t, &iset, &sp).unwrap() <= 1e-9);
    }
}

#[test]
fn salient_threshold_on_planted_effects() {
    let s = iset(3, &[(&[0, 1], 2.0), (&[2], 0.01)], &[], 0.0);
    let (and, or) = salient_filter(&s, 0.1).unwrap();
    assert_eq!(and, vec![mask(&[0, 1])]);
    assert!(or.is_empty());
}

#[test]
fn order_distribution_frozen_values() {
    let d = order_distribution(&iset(2, &[(&[0], -1.0)], &[(&[0], 1.0)], 0.0), false);
    assert_eq!((d.pos[1], d.neg[1]), (1.0, 1.0));
    let a = iset(2, &[(&[0], 1.0)], &[], 0.0);
    let b = iset(2, &[(&[0], 3.0)], &[], 0.0);
    assert_eq!(delta_distribution(&a, &b).unwrap().neg[1], 2.0);
}

#[test]
fn normalizing_by_own_z_gives_unit_first_order() {
    let s = iset(3, &[(&[0], 0.4), (&[1], 1.1), (&[0, 2], -3.0)], &[(&[2], 0.5)], 0.0);
    let z = compute_z(std::slice::from_ref(&s)).unwrap();
    let d = normalize(&order_distribution(&s, true), z).unwrap();
    assert!((d.pos[1] + d.neg[1] - 1.0).abs() < 1e-12);
}

#[test]
fn spindle_against_integer_factorials() {
    let fact = |k: u64| (1..=k).product::<u64>() as f64;
    let v = spindle_eval(SpindleParams { alpha: 0.5, beta: 2.0 }, 10, 3).unwrap();
    let want = 2.0 * fact(5) / (fact(3) * fact(2));
    assert_eq!(want, 20.0);
    assert!((v - want).abs() < 1e-9);
}

#[test]
fn m_matrix_hand_solve_and_dense_oracle() {
    let m = build_m_matrix(1.0, 1, InteractionKind::And).unwrap();
    let want = DMatrix::from_row_slice(2, 2, &[9.0, 4.0, 2.0, 3.0]) / 19.0;
    assert!((m - want).abs().max() <= 1e-12);

    // Dense LU of the textbook formula on the explicit trigger matrix.
    let n = 3;
    let delta = 0.3;
    let j = trigger_matrix(n, InteractionKind::And).unwrap();
    let g = j.transpose() * &j;
    let c = DMatrix::from_fn(8, 8, |r, k| {
        if r == k {
            8.0 * 2f64.powi((r as u32).count_ones() as i32) * delta * delta
        } else {
            0.0
        }
    });
    let want = (&g + c).lu().solve(&g).unwrap();
    let got = build_m_matrix(delta, n, InteractionKind::And).unwrap();
    assert!((got - want).abs().max() < 1e-12);
}

#[test]
fn decay_attenuates_high_orders_more() {
    let n = 6;
    let low = iset(n, &[(&[2], 1.0)], &[], 0.0);
    let high = iset(n, &[(&[0, 1, 2, 3, 4, 5], 1.0)], &[], 0.0);
    let ratio = |s: &InteractionSet, target: SubsetMask| decay_predict(s, 0.1).unwrap().i_and.get(target).abs();
    assert!(ratio(&low, mask(&[2])) > ratio(&high, SubsetMask::full(n)));

    let zero = InteractionSet::empty(n, 0.0).unwrap();
    assert_eq!(decay_predict(&zero, 0.5).unwrap().l1_norm(), 0.0);
    let d0 = decay_eval(&low, DecayParams { delta: 0.0, decay_scale: 1.0 }).unwrap();
    let direct = order_distribution(&low, false);
    for m in 0..=n {
        assert!((d0.pos[m] - direct.pos[m]).abs() < 1e-9);
    }
    let twice = decay_eval(&high, DecayParams { delta: 0.2, decay_scale: 2.0 }).unwrap();
    let once = decay_eval(&high, DecayParams { delta: 0.2, decay_scale: 1.0 }).unwrap();
    for m in 0..=n {
        assert!((twice.pos[m] - 2.0 * once.pos[m]).abs() < 1e-12);
    }
}

#[test]
fn disentangle_recovers_synthetic_inputs() {
    let n = 6;
    let grid = FitGrid {
        deltas: vec![0.01, 0.03, 0.1, 0.3],
        ..FitGrid::default()
    };
    let i_star = SyntheticModel::random(n, 20, (0.5, 3.0), 11).unwrap().interactions(0.0).unwrap();

    // Spindle only.
    let mut a = ilens_core::OrderDistribution::zeros(n);
    for m in 1..=n {
        let s = spindle_eval(SpindleParams { alpha: 0.6, beta: 2.0 }, n, m).unwrap();
        a.pos[m] = s;
        a.neg[m] = s;
    }
    let fit = disentangle(&a, &i_star, &grid).unwrap();
    assert_eq!(fit.alpha, 0.6);
    assert!((fit.beta - 2.0).abs() < 1e-6);
    assert_eq!(fit.decay_scale, 0.0);

    // Decay only.
    let a = decay_eval(&i_star, DecayParams { delta: 0.1, decay_scale: 1.5 }).unwrap();
    let fit = disentangle(&a, &i_star, &grid).unwrap();
    assert_eq!(fit.delta, 0.1);
    assert!((fit.decay_scale - 1.5).abs() < 1e-6);
    assert_eq!(fit.beta, 0.0);
}

#[test]
fn jaccard_hand_case() {
    assert_eq!(jaccard_values(&[1.0, 0.0, 2.0], &[0.5, 1.0, 2.0]).unwrap(), 0.625);
}

#[test]
fn backprop_matches_finite_differences() {
    let net = TinyNet::new(&[6, 8, 5, 1], 3).unwrap();
    let mut r = rng(3);
    let x: Vec<f64> = (0..6).map(|_| r.random_range(-1.0..1.0)).collect();
    let (p, i) = gradient_mismatch(&net, &x);
    assert!(p <= 1e-4 && i <= 1e-4, "param {p}, input {i}");
}

#[test]
fn tiny_parameter_noise_barely_moves_the_table() {
    let net = TinyNet::new(&[10, 12, 12, 1], 9).unwrap();
    let groups = ilens_core::zoo::contiguous_groups(5, 2);
    let x = vec![0.3; 10];
    let base = masked_table(&net, &x, &groups).unwrap();
    let shift = |sigma: f64| {
        let t = masked_table(&ilens_core::zoo::gaussian_perturb(&net, sigma, 1).unwrap(), &x, &groups).unwrap();
        t.values().as_slice().iter().zip(base.values().as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let (small, larger) = (shift(1e-4), shift(1e-3));
    assert!(small < larger && larger < 0.05, "{small} {larger}");
}

#[test]
fn trained_network_diagnostics() {
    let data = SyntheticDataset::generate(&DatasetConfig {
        n_variables: 6,
        features_per_variable: 1,
        n_train: 80,
        n_test: 20,
        hidden_interactions: 4,
        hidden_max_order: 2,
        ..DatasetConfig::default()
    })
    .unwrap();
    let net = TinyNet::new(&[6, 16, 16, 1], 0).unwrap();
    let cfg = TrainConfig {
        epochs: 20,
        checkpoint_epochs: vec![0, 20],
        ..TrainConfig::default()
    };
    let run = train(&net, &data, &cfg).unwrap();
    let again = train(&net, &data, &cfg).unwrap();
    assert_eq!(run.checkpoints[1].net, again.checkpoints[1].net);
    assert!(run.checkpoints[1].train_loss < run.checkpoints[0].train_loss);

    let trained = &run.checkpoints[1].net;
    let t = masked_table(trained, &data.features[data.test[0]], &data.groups).unwrap();
    let report = check_sparsity_conditions(&t, &[0.5, 1.0, 2.0, 4.0]);
    assert!(report.mean_output_by_order.iter().all(|x| x.is_finite()));
    assert!(report.max_violation.is_finite());
    let ex = extract(&t, &ExtractConfig::default()).unwrap();
    let m = max_order(&ex.interactions, ex.interactions.tau);
    assert!((1..=6).contains(&m));
}
