mod common;

use std::path::Path;

use ilens_core::distribution::{delta_distribution, normalize, order_distribution, OrderDistribution};
use ilens_core::extract::{extract, interactions_for_split, matching_error, ExtractConfig, SplitParams};
use ilens_core::generalization::jaccard_values;
use ilens_core::table::check_sparsity_conditions;
use ilens_core::*;
use proptest::prelude::*;

fn lattice(max_n: usize) -> impl Strategy<Value = LatticeVector> {
    (0..=max_n).prop_flat_map(|n| {
        prop::collection::vec(-10.0f64..10.0, 1 << n).prop_map(|v| LatticeVector::from_values(v).unwrap())
    })
}

fn pair(max_n: usize) -> impl Strategy<Value = (LatticeVector, LatticeVector)> {
    (0..=max_n).prop_flat_map(|n| {
        let side = move || prop::collection::vec(-10.0f64..10.0, 1 << n).prop_map(|v| LatticeVector::from_values(v).unwrap());
        (side(), side())
    })
}

fn iset_of(a: &LatticeVector, o: &LatticeVector, tau: f64) -> InteractionSet {
    InteractionSet::new(0.5, a.clone(), o.clone(), tau).unwrap()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
}

fn quick_cfg() -> ExtractConfig {
    ExtractConfig {
        iterations: 400,
        ..ExtractConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transforms_round_trip(u in lattice(8)) {
        prop_assert!(close(zeta_and(&mobius_and(&u)).as_slice(), u.as_slice(), 1e-9));
        // The OR side only sees outputs relative to the empty sample.
        let shifted = u.sub(&LatticeVector::from_fn(u.n(), |_| u.get(SubsetMask::EMPTY)).unwrap()).unwrap();
        prop_assert!(close(zeta_or(&mobius_or(&u)).as_slice(), shifted.as_slice(), 1e-9));
        let mut i = u.clone();
        i.set(SubsetMask::EMPTY, 0.0);
        prop_assert!(close(mobius_or(&zeta_or(&i)).as_slice(), i.as_slice(), 1e-9));
    }

    #[test]
    fn mobius_is_linear((u, w) in pair(7), a in -3.0f64..3.0) {
        let combo = LatticeVector::from_values(u.as_slice().iter().zip(w.as_slice()).map(|(x, y)| a * x + y).collect()).unwrap();
        let lhs = mobius_and(&combo);
        let rhs: Vec<f64> = mobius_and(&u).as_slice().iter().zip(mobius_and(&w).as_slice()).map(|(x, y)| a * x + y).collect();
        prop_assert!(close(lhs.as_slice(), &rhs, 1e-9));
        let lhs = mobius_or(&combo);
        let rhs: Vec<f64> = mobius_or(&u).as_slice().iter().zip(mobius_or(&w).as_slice()).map(|(x, y)| a * x + y).collect();
        prop_assert!(close(lhs.as_slice(), &rhs, 1e-9));
    }

    #[test]
    fn any_split_matches_the_table((v, g) in pair(7)) {
        let t = ValueTable::new(v.clone());
        let sp = SplitParams { gamma: g, noise: LatticeVector::zeros(v.n()).unwrap(), zeta: 0.0 };
        let iset = interactions_for_split(&t, &sp, 0.0).unwrap();
        prop_assert!(matching_error(&t, &iset, &sp).unwrap() <= 1e-9 * (1.0 + t.values().as_slice().iter().fold(0.0f64, |m, x| m.max(x.abs()))));
    }

    #[test]
    fn signed_mass_sums_to_full_output((v, g) in pair(6)) {
        let t = ValueTable::new(v.clone());
        // Gauge where the OR component vanishes on the empty sample.
        let mut g = g;
        g.set(SubsetMask::EMPTY, 0.5 * v.get(SubsetMask::EMPTY));
        let sp = SplitParams { gamma: g, noise: LatticeVector::zeros(v.n()).unwrap(), zeta: 0.0 };
        let iset = interactions_for_split(&t, &sp, 0.0).unwrap();
        let d = order_distribution(&iset, false);
        let signed: f64 = d.pos.iter().zip(&d.neg).map(|(p, n)| p - n).sum();
        let full = v.get(SubsetMask::full(v.n()));
        prop_assert!((signed - full).abs() <= 1e-8 * (1.0 + full.abs()));
    }

    #[test]
    fn delta_is_antisymmetric((a, o) in pair(5), (b, p) in pair(5)) {
        prop_assume!(a.n() == b.n());
        let (x, y) = (iset_of(&a, &o, 0.0), iset_of(&b, &p, 0.0));
        let xy = delta_distribution(&x, &y).unwrap();
        let yx = delta_distribution(&y, &x).unwrap();
        prop_assert_eq!(&xy.pos, &yx.neg);
        prop_assert_eq!(&xy.neg, &yx.pos);
    }

    #[test]
    fn normalizing_scales_and_keeps_argmax((a, o) in pair(6), z in 0.01f64..100.0) {
        let d = order_distribution(&iset_of(&a, &o, 0.0), false);
        let nd = normalize(&d, z).unwrap();
        prop_assert_eq!(nd.argmax_order(), d.argmax_order());
        prop_assert!(close(&nd.pos.iter().map(|x| x * z).collect::<Vec<_>>(), &d.pos, 1e-12));
    }

    #[test]
    fn jaccard_invariances(
        xs in prop::collection::vec((0.0f64..5.0, 0.0f64..5.0), 1..40),
        c in 0.01f64..100.0,
        pad in 0usize..5,
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = xs.into_iter().unzip();
        prop_assume!(a.iter().chain(&b).any(|&x| x > 0.0));
        let s = jaccard_values(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(s, jaccard_values(&b, &a).unwrap());
        let scale = |v: &[f64]| v.iter().map(|x| x * c).collect::<Vec<_>>();
        prop_assert!((jaccard_values(&scale(&a), &scale(&b)).unwrap() - s).abs() < 1e-12);
        let padded = |v: &[f64]| v.iter().copied().chain(std::iter::repeat_n(0.0, pad)).collect::<Vec<_>>();
        prop_assert_eq!(jaccard_values(&padded(&a), &padded(&b)).unwrap(), s);
        prop_assert_eq!(jaccard_values(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn sparsity_check_ignores_constant_shift(v in lattice(6), c in -50.0f64..50.0) {
        let t = ValueTable::new(v);
        let shifted = t.map_values(|x| x + c).unwrap();
        let (r, s) = (check_sparsity_conditions(&t, &[0.5, 1.0, 2.0]), check_sparsity_conditions(&shifted, &[0.5, 1.0, 2.0]));
        prop_assert!(close(&r.mean_output_by_order, &s.mean_output_by_order, 1e-9));
        prop_assert_eq!(r.condition2_ok, s.condition2_ok);
        prop_assert_eq!(r.condition3_ok, s.condition3_ok);
    }

    #[test]
    fn files_round_trip((a, o) in pair(6), tau in 0.0f64..2.0) {
        let origin = Path::new("mem");
        let t = ValueTable::new(a.clone()).with_sample_id("s");
        prop_assert_eq!(&ValueTable::from_json(&t.to_json(), origin).unwrap(), &t);
        let s = iset_of(&a, &o, tau);
        prop_assert_eq!(&InteractionSet::from_json(&s.to_json(), origin).unwrap(), &s);
        let d = order_distribution(&s, true);
        prop_assert_eq!(&OrderDistribution::from_csv(&d.to_csv(), origin).unwrap(), &d);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn symmetric_split_is_scale_equivariant(v in lattice(6), c in -10.0f64..10.0) {
        let t = ValueTable::new(v);
        let sp = SplitParams::zeros(t.n()).unwrap();
        let base = interactions_for_split(&t, &sp, 0.0).unwrap();
        let scaled = interactions_for_split(&t.map_values(|x| c * x).unwrap(), &sp, 0.0).unwrap();
        let want = base.scaled(c).unwrap();
        prop_assert!(close(scaled.i_and.as_slice(), want.i_and.as_slice(), 1e-12));
        prop_assert!(close(scaled.i_or.as_slice(), want.i_or.as_slice(), 1e-12));
    }

    // Power-of-two factors keep every floating-point step exact, so the
    // optimizer follows the same path in scaled units.
    #[test]
    fn optimized_salient_sets_are_scale_invariant(v in lattice(4), k in -4i32..=4) {
        let c = 2f64.powi(k);
        let t = ValueTable::new(v);
        let base = extract(&t, &quick_cfg()).unwrap().interactions;
        let scaled = extract(&t.map_values(|x| c * x).unwrap(), &quick_cfg()).unwrap().interactions;
        prop_assert_eq!(&scaled.omega_and, &base.omega_and);
        prop_assert_eq!(&scaled.omega_or, &base.omega_or);
        prop_assert!(close(scaled.i_and.as_slice(), base.scaled(c).unwrap().i_and.as_slice(), 1e-12));
    }

    #[test]
    fn extraction_never_ends_worse_than_it_starts(v in lattice(5), seed in 0u64..1000) {
        let t = ValueTable::new(v);
        let cfg = ExtractConfig { seed, ..quick_cfg() };
        let ex = extract(&t, &cfg).unwrap();
        prop_assert!(ex.trace.best_loss <= ex.trace.initial_loss + 1e-12);
        let again = extract(&t, &cfg).unwrap();
        prop_assert_eq!(ex.interactions, again.interactions);
    }
}
