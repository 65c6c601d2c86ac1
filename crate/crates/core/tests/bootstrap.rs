// SPDX-License-Identifier: MIT OR Apache-2.0

use mft_core::bootstrap::{
    bootstrap_decision, bootstrap_test, max_count_difference, permuted_series,
};
use mft_core::process_sim::{simulate_rpvv, LifetimeSchedule};
use mft_core::{EventSeries, WindowSet};
use proptest::prelude::*;

fn gamma_series(seed: u64) -> EventSeries {
    simulate_rpvv(&LifetimeSchedule::iid(2.0, 20.0).unwrap(), 300.0, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn permutation_keeps_count_and_final_time(
        gaps in proptest::collection::vec(0.001f64..5.0, 1..300),
        seed in any::<u64>(),
        index in 0u64..1000,
    ) {
        let mut t = 0.0;
        let times: Vec<f64> = gaps.iter().map(|g| { t += g; t }).collect();
        let s = EventSeries::new(times, t + 1.0).unwrap();
        let p = permuted_series(&s, seed, index);
        prop_assert_eq!(p.len(), s.len());
        let last = *s.times().last().unwrap();
        prop_assert!((p.last().unwrap() - last).abs() <= 1e-12 * last * gaps.len() as f64);
        prop_assert!(p.windows(2).all(|w| w[0] <= w[1]));
        let mut a = gaps.clone();
        let mut b: Vec<f64> = std::iter::once(p[0]).chain(p.windows(2).map(|w| w[1] - w[0])).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12 * last * gaps.len() as f64);
        }
    }
}

#[test]
fn statistic_is_reproducible_per_permutation() {
    let s = gamma_series(1);
    let w = WindowSet::new(vec![10.0, 30.0]).unwrap();
    let p1 = permuted_series(&s, 4, 17);
    let p2 = permuted_series(&s, 4, 17);
    assert_eq!(
        max_count_difference(&p1, s.horizon(), &w).to_bits(),
        max_count_difference(&p2, s.horizon(), &w).to_bits()
    );
}

#[test]
fn early_stopping_agrees_with_the_full_test() {
    let w = WindowSet::new(vec![10.0, 30.0, 60.0]).unwrap();
    for seed in 0..12 {
        let s = gamma_series(seed);
        for alpha in [0.05, 0.3, 0.7] {
            let full = bootstrap_test(&s, &w, alpha, 80, seed).unwrap();
            let fast = bootstrap_decision(&s, &w, alpha, 80, seed).unwrap();
            assert_eq!(full.decision, fast, "seed {seed}, alpha {alpha}");
        }
    }
}

#[test]
fn thresholds_from_different_seeds_agree() {
    let s = gamma_series(2);
    let w = WindowSet::new(vec![10.0, 30.0]).unwrap();
    let a = bootstrap_test(&s, &w, 0.05, 1000, 1).unwrap();
    let b = bootstrap_test(&s, &w, 0.05, 1000, 2).unwrap();
    // The statistic is an integer count difference; its 95 % quantile moves
    // by at most a few counts between independent runs.
    assert!(
        (a.threshold - b.threshold).abs() <= 3.0,
        "{} vs {}",
        a.threshold,
        b.threshold
    );
    assert_eq!(a.statistic, b.statistic);
}
