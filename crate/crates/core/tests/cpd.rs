// SPDX-License-Identifier: MIT OR Apache-2.0

use mft_core::cpd::{
    in_neighborhood, mfa, score_detections, sfa, sfa_cap, ChangePointEstimate, WindowDetections,
};
use mft_core::StepProcess;
use proptest::prelude::*;

const HORIZON: f64 = 700.0;

/// A step process on `(h, T - h]` with `values.len() - 1` sorted breakpoints.
fn step_process(h: f64, cuts: &[f64], values: &[f64]) -> StepProcess {
    let (lo, hi) = (h, HORIZON - h);
    let mut bps: Vec<f64> = cuts.iter().map(|u| lo + u * (hi - lo)).collect();
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    bps.retain(|&b| b > lo && b <= hi);
    let vals = values[..=bps.len()].to_vec();
    StepProcess::new(lo, hi, bps, vals).unwrap()
}

fn windows_strategy() -> impl Strategy<Value = Vec<(f64, Vec<f64>, Vec<f64>)>> {
    proptest::collection::vec(
        (
            5.0f64..150.0,
            proptest::collection::vec(0.0f64..1.0, 0..60),
            proptest::collection::vec(-1.0f64..6.0, 61),
        ),
        1..5,
    )
}

proptest! {
    #[test]
    fn sfa_is_capped_and_never_reenters_excluded_regions(
        h in 5.0f64..200.0,
        cuts in proptest::collection::vec(0.0f64..1.0, 0..200),
        values in proptest::collection::vec(-1.0f64..6.0, 201),
        q in 0.0f64..3.0,
    ) {
        let r = step_process(h, &cuts, &values);
        let est = sfa(&r, h, q);
        prop_assert!(est.len() <= sfa_cap(HORIZON - 2.0 * h, h));
        for (i, e) in est.iter().enumerate() {
            prop_assert_eq!(e.order, i);
            prop_assert!(e.time >= h && e.time <= HORIZON - h);
            prop_assert!(r.eval(e.time).unwrap() > q);
            for earlier in &est[..i] {
                prop_assert!(!(e.time > earlier.time - h && e.time < earlier.time + h));
            }
        }
    }

    #[test]
    fn mfa_is_idempotent(ws in windows_strategy(), q in 0.0f64..3.0) {
        let mut per_window = Vec::new();
        for (h, cuts, values) in &ws {
            let h = h.round();
            if per_window.iter().any(|w: &WindowDetections| w.h == h) {
                continue;
            }
            let r = step_process(h, cuts, values);
            per_window.push(WindowDetections { h, estimates: sfa(&r, h, q) });
        }
        let first = mfa(&per_window, HORIZON);
        let regrouped: Vec<WindowDetections> = per_window
            .iter()
            .map(|w| WindowDetections {
                h: w.h,
                estimates: first.iter().filter(|e| e.window == w.h).copied().collect(),
            })
            .collect();
        prop_assert_eq!(mfa(&regrouped, HORIZON), first);
    }

    #[test]
    fn mfa_keeps_the_smallest_window_and_separates_the_rest(ws in windows_strategy(), q in 0.0f64..3.0) {
        let mut per_window = Vec::new();
        for (h, cuts, values) in &ws {
            let h = h.round();
            if per_window.iter().any(|w: &WindowDetections| w.h == h) {
                continue;
            }
            let r = step_process(h, cuts, values);
            per_window.push(WindowDetections { h, estimates: sfa(&r, h, q) });
        }
        let accepted = mfa(&per_window, HORIZON);
        let smallest = per_window.iter().min_by(|a, b| a.h.total_cmp(&b.h)).unwrap();
        for e in &smallest.estimates {
            prop_assert!(accepted.contains(e));
        }
        for e in accepted.iter().filter(|e| e.window > smallest.h) {
            for other in accepted.iter().filter(|o| o.window < e.window) {
                prop_assert!(!in_neighborhood(other.time, e.time, e.window, HORIZON));
            }
        }
    }
}

/// Augmenting path matching over the neighborhood relation.
fn kuhn(est: &[ChangePointEstimate], cps: &[f64]) -> usize {
    fn augment(
        e: usize,
        adj: &[Vec<usize>],
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for &c in &adj[e] {
            if !seen[c] {
                seen[c] = true;
                if owner[c].is_none_or(|o| augment(o, adj, seen, owner)) {
                    owner[c] = Some(e);
                    return true;
                }
            }
        }
        false
    }
    let adj: Vec<Vec<usize>> = est
        .iter()
        .map(|e| {
            (0..cps.len())
                .filter(|&i| in_neighborhood(cps[i], e.time, e.window, HORIZON))
                .collect()
        })
        .collect();
    let mut owner = vec![None; cps.len()];
    (0..est.len())
        .filter(|&e| augment(e, &adj, &mut vec![false; cps.len()], &mut owner))
        .count()
}

proptest! {
    #[test]
    fn matched_count_is_a_maximum_matching(
        raw in proptest::collection::vec((0.0f64..HORIZON, 5.0f64..150.0), 0..25),
        cps in proptest::collection::vec(0.0f64..HORIZON, 0..25),
    ) {
        let est: Vec<ChangePointEstimate> = raw
            .iter()
            .enumerate()
            .map(|(order, &(time, window))| ChangePointEstimate { time, window, order })
            .collect();
        let s = score_detections(&est, &cps, HORIZON);
        prop_assert_eq!(s.matched, kuhn(&est, &cps));
        prop_assert!(s.matched <= s.correct.min(s.detected_true));
    }
}
