// SPDX-License-Identifier: MIT OR Apache-2.0

//! Change point estimation from the scaled processes `R_{h,t}`.
//!
//! The single filter algorithm repeatedly takes the leftmost maximizer of
//! `R_{h,·}` outside the neighborhoods of earlier detections while the
//! maximum exceeds `Q`. The multiple filter algorithm keeps every detection
//! of the smallest window and adds detections of larger windows whose own
//! neighborhood holds no accepted point.

use serde::{Deserialize, Serialize};

use crate::mft::TestResult;
use crate::series::EventSeries;
use crate::step::StepProcess;

/// One estimated change point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangePointEstimate {
    pub time: f64,
    /// Window that detected it.
    pub window: f64,
    /// Position in its window's detection sequence, starting at 0.
    pub order: usize,
}

/// Detections of one window in detection order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowDetections {
    pub h: f64,
    pub estimates: Vec<ChangePointEstimate>,
}

/// `x ∈ B_h(c) = (c - h, c + h) ∩ (h, T - h]`.
pub fn in_neighborhood(x: f64, c: f64, h: f64, horizon: f64) -> bool {
    x > c - h && x < c + h && x > h && x <= horizon - h
}

/// Largest number of detections a window can produce on its region: the
/// estimates are pairwise at least `h` apart inside an interval of length
/// `T - 2h`.
pub fn sfa_cap(region_len: f64, h: f64) -> usize {
    (region_len / h).floor() as usize + 1
}

/// Single filter algorithm on the scaled process `r` of window `h`.
pub fn sfa(r: &StepProcess, h: f64, q: f64) -> Vec<ChangePointEstimate> {
    let cap = sfa_cap(r.hi() - r.lo(), h);
    let mut excluded: Vec<(f64, f64)> = Vec::new();
    let mut out = Vec::new();
    while out.len() < cap {
        match r.max_with_argmax(&excluded) {
            Some((value, c)) if value > q => {
                out.push(ChangePointEstimate {
                    time: c,
                    window: h,
                    order: out.len(),
                });
                excluded.push((c - h, c + h));
            }
            _ => break,
        }
    }
    out
}

/// Multiple filter algorithm. Windows are processed in ascending order; the
/// result is sorted by time.
pub fn mfa(per_window: &[WindowDetections], horizon: f64) -> Vec<ChangePointEstimate> {
    let mut windows: Vec<&WindowDetections> = per_window.iter().collect();
    windows.sort_by(|a, b| a.h.total_cmp(&b.h));
    let mut accepted: Vec<ChangePointEstimate> = Vec::new();
    for (i, w) in windows.iter().enumerate() {
        for est in &w.estimates {
            let blocked = i > 0
                && accepted
                    .iter()
                    .any(|a| in_neighborhood(a.time, est.time, w.h, horizon));
            if !blocked {
                accepted.push(*est);
            }
        }
    }
    accepted.sort_by(|a, b| a.time.total_cmp(&b.time));
    accepted
}

/// Event rate on one segment `(start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentRate {
    pub start: f64,
    pub end: f64,
    pub count: usize,
    pub rate: f64,
}

/// Count per unit time between consecutive change points, over `0, ĉ_1, …, T`.
pub fn estimate_rates(series: &EventSeries, change_points: &[f64]) -> Vec<SegmentRate> {
    let mut bounds = Vec::with_capacity(change_points.len() + 2);
    bounds.push(0.0);
    bounds.extend(
        change_points
            .iter()
            .copied()
            .filter(|&c| c > 0.0 && c < series.horizon()),
    );
    bounds.push(series.horizon());
    bounds
        .windows(2)
        .map(|w| {
            let count = series.counting(w[1]) - series.counting(w[0]);
            SegmentRate {
                start: w[0],
                end: w[1],
                count,
                rate: count as f64 / (w[1] - w[0]),
            }
        })
        .collect()
}

pub const REPORT_SCHEMA: u32 = 1;

/// Outcome of test plus estimation on one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePointReport {
    pub schema: u32,
    pub accepted: Vec<ChangePointEstimate>,
    pub per_window: Vec<WindowDetections>,
    pub segments: Vec<SegmentRate>,
    pub test: TestResult,
}

impl ChangePointReport {
    pub fn change_points(&self) -> Vec<f64> {
        self.accepted.iter().map(|e| e.time).collect()
    }
}

/// Runs SFA on every window of a test result and merges with MFA. Nothing is
/// detected when the test accepts.
pub fn detect(series: &EventSeries, test: TestResult) -> ChangePointReport {
    let per_window: Vec<WindowDetections> = test
        .traces
        .iter()
        .map(|tr| WindowDetections {
            h: tr.h,
            estimates: if test.rejected() {
                sfa(&tr.r, tr.h, test.threshold)
            } else {
                Vec::new()
            },
        })
        .collect();
    let accepted = mfa(&per_window, series.horizon());
    let cps: Vec<f64> = accepted.iter().map(|e| e.time).collect();
    ChangePointReport {
        schema: REPORT_SCHEMA,
        accepted,
        segments: estimate_rates(series, &cps),
        per_window,
        test,
    }
}

/// Scoring of estimates against known change points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionScore {
    /// Estimates whose neighborhood holds a true change point.
    pub correct: usize,
    pub false_positives: usize,
    /// True change points lying in the neighborhood of some estimate.
    pub detected_true: usize,
    /// Largest number of estimate and change point pairs, each used once,
    /// with the change point in the estimate's neighborhood.
    pub matched: usize,
    pub n_true: usize,
}

/// An estimate is correct iff its `h`-neighborhood (with its own detecting
/// window `h`) overlaps a true change point.
pub fn score_detections(
    estimates: &[ChangePointEstimate],
    true_cps: &[f64],
    horizon: f64,
) -> DetectionScore {
    let hit = |e: &ChangePointEstimate, c: f64| in_neighborhood(c, e.time, e.window, horizon);
    let correct = estimates
        .iter()
        .filter(|e| true_cps.iter().any(|&c| hit(e, c)))
        .count();
    let detected_true = true_cps
        .iter()
        .filter(|&&c| estimates.iter().any(|e| hit(e, c)))
        .count();
    DetectionScore {
        correct,
        false_positives: estimates.len() - correct,
        detected_true,
        matched: match_count(estimates, true_cps, horizon),
        n_true: true_cps.len(),
    }
}

/// Maximum matching between neighborhoods and points. Taking neighborhoods,
/// clipped to their region, by right end and giving each the leftmost free
/// point inside is optimal.
fn match_count(estimates: &[ChangePointEstimate], true_cps: &[f64], horizon: f64) -> usize {
    let mut cps = true_cps.to_vec();
    cps.sort_by(f64::total_cmp);
    let mut used = vec![false; cps.len()];
    let mut order: Vec<&ChangePointEstimate> = estimates.iter().collect();
    let right_end = |e: &ChangePointEstimate| (e.time + e.window).min(horizon - e.window);
    order.sort_by(|a, b| right_end(a).total_cmp(&right_end(b)));
    order
        .into_iter()
        .filter(|e| {
            let free = (0..cps.len())
                .find(|&i| !used[i] && in_neighborhood(cps[i], e.time, e.window, horizon));
            free.map(|i| used[i] = true).is_some()
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(time: f64, window: f64, order: usize) -> ChangePointEstimate {
        ChangePointEstimate {
            time,
            window,
            order,
        }
    }

    #[test]
    fn sfa_below_threshold_is_empty() {
        let r = StepProcess::new(50.0, 650.0, vec![100.0], vec![1.0, 2.0]).unwrap();
        assert!(sfa(&r, 50.0, 2.75).is_empty());
    }

    #[test]
    fn sfa_single_peak_at_infimum() {
        let r = StepProcess::new(50.0, 650.0, vec![100.0, 102.0], vec![0.0, 3.75, 0.0]).unwrap();
        assert_eq!(sfa(&r, 50.0, 2.75), vec![est(100.0, 50.0, 0)]);
    }

    #[test]
    fn sfa_two_peaks_in_height_order() {
        // Brute force: the first maximum is the taller peak at 300; its
        // neighborhood (250, 350) leaves the peak at 100 which also exceeds Q.
        let r = StepProcess::new(
            50.0,
            650.0,
            vec![100.0, 105.0, 300.0, 310.0],
            vec![0.0, 3.0, 0.0, 4.0, 0.0],
        )
        .unwrap();
        let got = sfa(&r, 50.0, 2.75);
        assert_eq!(got, vec![est(300.0, 50.0, 0), est(100.0, 50.0, 1)]);
    }

    #[test]
    fn sfa_respects_cap_on_monotone_process() {
        // Strictly increasing R: every detection lands on the left edge of
        // the remaining region, exactly h apart.
        let bps: Vec<f64> = (1..600).map(|i| 50.0 + i as f64).collect();
        let vals: Vec<f64> = (0..600).map(|i| 3.0 + i as f64).collect();
        let r = StepProcess::new(50.0, 650.0, bps, vals).unwrap();
        let got = sfa(&r, 50.0, 2.75);
        assert!(got.len() <= sfa_cap(600.0, 50.0));
        for (i, a) in got.iter().enumerate() {
            for b in &got[..i] {
                assert!((a.time - b.time).abs() >= 50.0);
            }
        }
    }

    #[test]
    fn mfa_rules() {
        let w1 = WindowDetections {
            h: 10.0,
            estimates: vec![est(100.0, 10.0, 0)],
        };
        let w2 = WindowDetections {
            h: 50.0,
            estimates: vec![est(130.0, 50.0, 0), est(300.0, 50.0, 1)],
        };
        let acc: Vec<f64> = mfa(&[w2.clone(), w1.clone()], 700.0)
            .iter()
            .map(|e| e.time)
            .collect();
        assert_eq!(acc, vec![100.0, 300.0]);
        // A single window is taken as is, even with points closer than h.
        let only = WindowDetections {
            h: 10.0,
            estimates: vec![est(200.0, 10.0, 0), est(100.0, 10.0, 1)],
        };
        let acc: Vec<f64> = mfa(&[only], 700.0).iter().map(|e| e.time).collect();
        assert_eq!(acc, vec![100.0, 200.0]);
    }

    #[test]
    fn mfa_schematic_three_windows() {
        let w1 = WindowDetections {
            h: 10.0,
            estimates: vec![est(100.0, 10.0, 0), est(400.0, 10.0, 1)],
        };
        let w2 = WindowDetections {
            h: 30.0,
            estimates: vec![est(120.0, 30.0, 0), est(250.0, 30.0, 1)],
        };
        let w3 = WindowDetections {
            h: 60.0,
            estimates: vec![est(290.0, 60.0, 0), est(550.0, 60.0, 1)],
        };
        let acc: Vec<f64> = mfa(&[w1, w2, w3], 700.0).iter().map(|e| e.time).collect();
        assert_eq!(acc, vec![100.0, 250.0, 400.0, 550.0]);
    }

    #[test]
    fn rates_per_segment() {
        let times: Vec<f64> = (1..=700).map(f64::from).collect();
        let s = EventSeries::new(times, 700.0).unwrap();
        let r = estimate_rates(&s, &[]);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].rate, 1.0);

        let times: Vec<f64> = (1..=350).map(|i| i as f64 * 0.5).collect();
        let s = EventSeries::new(times, 350.0).unwrap();
        let r = estimate_rates(&s, &[175.0]);
        assert_eq!(r.iter().map(|x| x.rate).collect::<Vec<_>>(), vec![2.0, 0.0]);
    }

    #[test]
    fn scoring_rule() {
        let e = [
            est(345.0, 10.0, 0),
            est(100.0, 50.0, 0),
            est(600.0, 75.0, 0),
        ];
        let s = score_detections(&e, &[350.0], 700.0);
        assert_eq!(s.correct, 1);
        assert_eq!(s.false_positives, 2);
        assert_eq!(s.detected_true, 1);
        let s = score_detections(&e, &[320.0], 700.0);
        assert_eq!(s.correct, 0);
        assert_eq!(s.detected_true, 0);
    }
}
