mod common;

use proptest::prelude::*;
use qlab_core::qpoints::{best_matching, g_distance, g_distance_sq};
use qlab_core::QPoint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn qpoint(q: usize, n: usize) -> impl Strategy<Value = QPoint> {
    prop::collection::vec(-5.0f64..5.0, q * n).prop_map(move |c| QPoint::new(q, n, c).unwrap())
}

fn triple() -> impl Strategy<Value = (QPoint, QPoint, QPoint)> {
    (1usize..=6, 1usize..=3).prop_flat_map(|(q, n)| (qpoint(q, n), qpoint(q, n), qpoint(q, n)))
}

proptest! {
    #[test]
    fn metric_axioms((a, b, c) in triple()) {
        let ab = g_distance(&a, &b).unwrap();
        let ba = g_distance(&b, &a).unwrap();
        prop_assert!(g_distance(&a, &a).unwrap() < 1e-12);
        prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab));
        let ac = g_distance(&a, &c).unwrap();
        let cb = g_distance(&c, &b).unwrap();
        prop_assert!(ab <= ac + cb + 1e-9);
    }

    #[test]
    fn sheet_order_is_irrelevant((a, b, _) in triple(), seed in any::<u64>()) {
        let mut sheets: Vec<Vec<f64>> = a.sheets().map(<[f64]>::to_vec).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(sheets.as_mut_slice(), &mut rng);
        let shuffled = QPoint::from_sheets(&sheets).unwrap();
        let d0 = g_distance_sq(&a, &b).unwrap();
        let d1 = g_distance_sq(&shuffled, &b).unwrap();
        prop_assert!((d0 - d1).abs() <= 1e-12 * (1.0 + d0));
    }

    #[test]
    fn matching_attains_the_minimum((a, b, _) in triple()) {
        let m = best_matching(&a, &b).unwrap();
        let oracle = common::brute_force_matching(&a, &b);
        prop_assert!((m.cost - oracle).abs() <= 1e-12 * oracle.max(1.0));
        let paired: f64 = (0..a.q())
            .map(|i| a.sheet(i).iter().zip(b.sheet(m.permutation.image(i))).map(|(x, y)| (x - y).powi(2)).sum::<f64>())
            .sum();
        prop_assert!((paired - m.cost).abs() <= 1e-12 * oracle.max(1.0));
    }
}

#[test]
fn distance_of_shifted_collapse() {
    let a = QPoint::repeated(3, &[0.0, 0.0]);
    let b = QPoint::repeated(3, &[3.0, 4.0]);
    assert!((g_distance(&a, &b).unwrap() - 75f64.sqrt()).abs() < 1e-12);
}

#[test]
fn dimension_mismatch_is_an_error() {
    let a = QPoint::zero(2, 2);
    let b = QPoint::zero(3, 2);
    assert!(g_distance(&a, &b).is_err());
    assert!(best_matching(&a, &QPoint::zero(2, 3)).is_err());
}
