// SPDX-License-Identifier: MIT OR Apache-2.0

use mft_core::filtered_derivative::g_process;
use mft_core::rng::stream;
use mft_core::EventSeries;
use proptest::prelude::*;
use rand::Rng;

/// `G_{h,t}` from the definitions alone: counts in `(t-h, t]` and `(t, t+h]`,
/// life times with both ends inside a window, two-pass mean and corrected
/// variance, zero when either window holds no life time.
fn brute_g(times: &[f64], t: f64, h: f64) -> f64 {
    let window = |lo: f64, hi: f64| -> Vec<f64> {
        times
            .iter()
            .copied()
            .filter(|&x| x > lo && x <= hi)
            .collect()
    };
    let summary = |ev: &[f64]| -> Option<(f64, f64)> {
        if ev.len() < 2 {
            return None;
        }
        let lifes: Vec<f64> = ev.windows(2).map(|w| w[1] - w[0]).collect();
        let n = lifes.len() as f64;
        let mean = lifes.iter().sum::<f64>() / n;
        let var = if lifes.len() < 2 {
            0.0
        } else {
            lifes.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        };
        Some((mean, var))
    };
    let left = window(t - h, t);
    let right = window(t, t + h);
    let (Some((ml, vl)), Some((mr, vr))) = (summary(&left), summary(&right)) else {
        return 0.0;
    };
    let s2 = (vr / mr.powi(3) + vl / ml.powi(3)) * h;
    if s2 > 0.0 {
        (right.len() as f64 - left.len() as f64) / s2.sqrt()
    } else {
        0.0
    }
}

fn random_series(seed: u64) -> (EventSeries, f64) {
    let mut rng = stream(seed, &[]);
    let horizon = rng.random_range(5.0..50.0);
    let n = rng.random_range(0..=20);
    let mut times: Vec<f64> = (0..n)
        .map(|_| horizon * (1.0 - rng.random::<f64>()))
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let h = horizon * rng.random_range(0.05..0.5);
    (EventSeries::new(times, horizon).unwrap(), h)
}

#[test]
fn exact_sweep_matches_dense_grid() {
    for seed in 0..100 {
        let (s, h) = random_series(seed);
        let g = g_process(&s, h).unwrap();
        let (lo, hi) = (h, s.horizon() - h);
        let n = ((hi - lo) / (h / 1000.0)).floor() as usize;
        let mut grid: Vec<f64> = (1..=n).map(|k| lo + k as f64 * h / 1000.0).collect();
        grid.push(hi);
        for t in grid.into_iter().filter(|&t| t > lo && t <= hi) {
            let want = brute_g(s.times(), t, h);
            let got = g.eval(t).unwrap();
            assert!(
                (got - want).abs() <= 1e-12 * want.abs().max(1.0),
                "seed {seed}, t = {t}: sweep {got}, brute {want}"
            );
        }
    }
}

#[test]
fn brute_force_is_constant_between_breakpoints() {
    for seed in 100..130 {
        let (s, h) = random_series(seed);
        let g = g_process(&s, h).unwrap();
        for (a, b, v) in g.segments() {
            for f in [0.1, 0.5, 0.9] {
                let t = a + f * (b - a);
                if t > h && t < b {
                    let want = brute_g(s.times(), t, h);
                    assert!((want - v).abs() <= 1e-12 * v.abs().max(1.0));
                }
            }
        }
    }
}

fn gaps_to_series(gaps: &[f64], tail: f64) -> EventSeries {
    let mut t = 0.0;
    let times: Vec<f64> = gaps
        .iter()
        .map(|g| {
            t += g;
            t
        })
        .collect();
    EventSeries::new(times, t + tail).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scaling_leaves_g_unchanged(
        gaps in proptest::collection::vec(0.01f64..2.0, 4..80),
        tail in 0.1f64..5.0,
        frac in 0.05f64..0.45,
        c in prop_oneof![Just(0.5f64), Just(2.0), Just(4.0), Just(0.25)],
    ) {
        let s = gaps_to_series(&gaps, tail);
        let h = frac * s.horizon();
        // Powers of two keep every product exact.
        let scaled = EventSeries::new(s.times().iter().map(|x| x * c).collect(), s.horizon() * c).unwrap();
        let g = g_process(&s, h).unwrap();
        let gc = g_process(&scaled, h * c).unwrap();
        prop_assert_eq!(g.n_segments(), gc.n_segments());
        for ((a, _, v), (ac, _, vc)) in g.segments().zip(gc.segments()) {
            prop_assert_eq!(a * c, ac);
            prop_assert!((v - vc).abs() <= 1e-9 * v.abs().max(1.0), "{} vs {}", v, vc);
        }
    }

    #[test]
    fn time_shift_moves_g(
        gaps in proptest::collection::vec(0.01f64..2.0, 4..80),
        tail in 0.1f64..5.0,
        frac in 0.05f64..0.45,
        shift in 0.0f64..20.0,
    ) {
        let s = gaps_to_series(&gaps, tail);
        let h = frac * s.horizon();
        let moved = EventSeries::new(
            s.times().iter().map(|x| x + shift).collect(),
            s.horizon() + shift,
        ).unwrap();
        let g = g_process(&s, h).unwrap();
        let gm = g_process(&moved, h).unwrap();
        for (a, b, v) in g.segments() {
            let t = if a < b { 0.5 * (a + b) } else { b };
            let vm = gm.eval(t + shift).unwrap();
            prop_assert!((v - vm).abs() <= 1e-9 * v.abs().max(1.0), "t = {}: {} vs {}", t, v, vm);
        }
    }
}
