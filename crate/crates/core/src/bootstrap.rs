// SPDX-License-Identifier: MIT OR Apache-2.0

//! Permutation test built on the raw count difference `|N_ri - N_le|`.
//!
//! Exists for comparison with the multiple filter test: shuffling life times
//! is exact for i.i.d. life times but breaks down when their variance varies.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mft::Decision;
use crate::rng::stream;
use crate::series::EventSeries;
use crate::stats::{upper_quantile, upper_quantile_rank};
use crate::window::WindowSet;

/// Default number of permutations.
pub const DEFAULT_PERMS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    /// `max_{h,t} |N_ri - N_le|` of the observed series.
    pub statistic: f64,
    /// Empirical `(1 - α)`-quantile of the permuted statistics.
    pub threshold: f64,
    pub n_perms: usize,
    pub alpha: f64,
    pub decision: Decision,
}

/// `max_t |N(t+h) - 2N(t) + N(t-h)|` over `t ∈ (h, T - h]`.
///
/// The difference only jumps up where `t ± h` meets an event and only jumps
/// down where `t` meets an event, so its maximum is attained at the left end
/// or at some `S_j ± h`, and its minimum at the left end or at some `S_j`.
fn max_abs_difference_one(s: &[f64], horizon: f64, h: f64, index: &RankIndex) -> i64 {
    let (lo, hi) = (h, horizon - h);
    if lo > hi {
        return 0;
    }
    let rank = |x: f64| index.rank(x) as i64;
    let d_lo = rank(lo + h) - 2 * rank(lo);
    let (mut max_d, mut min_d) = (d_lo, d_lo);
    let range = |shift: f64| {
        let first = s.partition_point(|&v| v + shift <= lo);
        (first, s.partition_point(|&v| v + shift <= hi).max(first))
    };
    let own = |j: usize| (j + 1) as i64;
    let (f0, e0) = range(-h);
    let (f1, e1) = range(h);
    let (f2, e2) = range(0.0);
    let (from, to) = (f0.min(f1).min(f2), e0.max(e1).max(e2));
    // back[j] = N(S_j - h), fwd[j] = N(S_j + h), shared by the passes.
    let back: Vec<i64> = s[from..to].iter().map(|&v| rank(v - h)).collect();
    let fwd: Vec<i64> = s[from..to].iter().map(|&v| rank(v + h)).collect();

    // t = S_j - h: the right window gains S_j.
    for j in f0..e0 {
        let t = s[j] - h;
        max_d = max_d.max(own(j) - 2 * back[j - from] + rank(t - h));
    }
    // t = S_j + h: the left window loses S_j.
    for j in f1..e1 {
        let t = s[j] + h;
        max_d = max_d.max(rank(t + h) - 2 * fwd[j - from] + own(j));
    }
    // t = S_j: the event moves from the right to the left window.
    for j in f2..e2 {
        min_d = min_d.min(fwd[j - from] - 2 * own(j) + back[j - from]);
    }
    max_d.max(-min_d)
}

/// Constant time `#{i : s[i] <= x}` for sorted `s` through equal-width
/// buckets over `[0, T]`.
///
/// Bucket indices are a monotone function of the value, so every event in a
/// lower bucket is `<= x` and every event in a higher bucket is `> x`; only
/// the bucket of `x` itself is scanned.
struct RankIndex {
    /// Event times followed by `+inf` sentinels.
    padded: Vec<f64>,
    /// `start[b]` = number of events in buckets below `b`.
    start: Vec<u32>,
    scale: f64,
}

const SENTINELS: usize = 3;

impl RankIndex {
    fn new(s: &[f64], horizon: f64) -> Self {
        let buckets = 2 * s.len() + 1;
        let scale = buckets as f64 / horizon;
        let mut start = vec![0u32; buckets + 1];
        let bucket = |x: f64| ((x * scale).max(0.0) as usize).min(buckets - 1);
        for &v in s {
            start[bucket(v) + 1] += 1;
        }
        for b in 1..=buckets {
            start[b] += start[b - 1];
        }
        let mut padded = Vec::with_capacity(s.len() + SENTINELS);
        padded.extend_from_slice(s);
        padded.extend([f64::INFINITY; SENTINELS]);
        Self {
            padded,
            start,
            scale,
        }
    }

    #[inline]
    fn rank(&self, x: f64) -> usize {
        let buckets = self.start.len() - 1;
        let b = ((x * self.scale).max(0.0) as usize).min(buckets - 1);
        let first = self.start[b] as usize;
        let s = &self.padded;
        let mut r = first + (s[first] <= x) as usize + (s[first + 1] <= x) as usize;
        if s[first + 2] <= x {
            r = first + 2;
            while s[r] <= x {
                r += 1;
            }
        }
        r
    }
}

/// `max_{h ∈ H} max_{t ∈ (h, T-h]} |N_ri(t, h) - N_le(t, h)|` for sorted event times.
pub fn max_count_difference(times: &[f64], horizon: f64, windows: &WindowSet) -> f64 {
    let index = RankIndex::new(times, horizon);
    windows
        .iter()
        .map(|h| max_abs_difference_one(times, horizon, h, &index))
        .max()
        .unwrap_or(0) as f64
}

/// Permutation test: every life time, including the first gap from 0, is
/// shuffled and the events are rebuilt by cumulative summation.
pub fn bootstrap_test(
    series: &EventSeries,
    windows: &WindowSet,
    alpha: f64,
    n_perms: usize,
    seed: u64,
) -> Result<BootstrapResult> {
    let (windows, statistic, lifes) = prepare(series, windows, alpha, n_perms)?;
    let horizon = series.horizon();

    let mut permuted: Vec<f64> = (0..n_perms)
        .into_par_iter()
        .map_init(
            || (lifes.clone(), Vec::with_capacity(lifes.len())),
            |(buf, times), p| {
                buf.copy_from_slice(&lifes);
                permute_events(buf, times, &mut stream(seed, &[p as u64]));
                max_count_difference(times, horizon, &windows)
            },
        )
        .collect();
    let threshold = upper_quantile(&mut permuted, alpha);
    Ok(BootstrapResult {
        statistic,
        threshold,
        n_perms,
        alpha,
        decision: if statistic > threshold {
            Decision::Reject
        } else {
            Decision::Accept
        },
    })
}

/// Checks the inputs; returns the usable windows, the observed statistic and
/// all life times.
fn prepare(
    series: &EventSeries,
    windows: &WindowSet,
    alpha: f64,
    n_perms: usize,
) -> Result<(WindowSet, f64, Vec<f64>)> {
    if series.len() < 2 {
        return Err(Error::TooFewEvents {
            got: series.len(),
            need: 2,
        });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if n_perms == 0 {
        return Err(invalid("need at least one permutation"));
    }
    let horizon = series.horizon();
    let (kept, _) = windows.restrict_to_horizon(horizon);
    let windows = kept.ok_or_else(|| invalid("no window fits into T/2"))?;
    let statistic = max_count_difference(series.times(), horizon, &windows);
    Ok((windows, statistic, all_life_times(series.times())))
}

/// Decision of [`bootstrap_test`] with the same arguments, computed with
/// early stopping.
///
/// The observed statistic exceeds the `k`-th smallest permuted statistic iff
/// at least `k` permutations fall below it, so permutations are drawn in
/// blocks until that count is reached or can no longer be reached. Each
/// permutation stops at the first window whose difference reaches the
/// observed value.
pub fn bootstrap_decision(
    series: &EventSeries,
    windows: &WindowSet,
    alpha: f64,
    n_perms: usize,
    seed: u64,
) -> Result<Decision> {
    const BLOCK: usize = 16;
    let (windows, statistic, lifes) = prepare(series, windows, alpha, n_perms)?;
    let horizon = series.horizon();
    let k = upper_quantile_rank(n_perms, alpha);
    let descending: Vec<f64> = windows.as_slice().iter().rev().copied().collect();
    let (mut below, mut at_least) = (0usize, 0usize);
    let mut next = 0;
    while next < n_perms {
        let end = (next + BLOCK).min(n_perms);
        let hits: Vec<bool> = (next..end)
            .into_par_iter()
            .map_init(
                || (lifes.clone(), Vec::with_capacity(lifes.len())),
                |(buf, times), p| {
                    buf.copy_from_slice(&lifes);
                    permute_events(buf, times, &mut stream(seed, &[p as u64]));
                    let index = RankIndex::new(times, horizon);
                    descending.iter().any(|&h| {
                        max_abs_difference_one(times, horizon, h, &index) as f64 >= statistic
                    })
                },
            )
            .collect();
        at_least += hits.iter().filter(|&&hit| hit).count();
        below += hits.iter().filter(|&&hit| !hit).count();
        if below >= k {
            return Ok(Decision::Reject);
        }
        if at_least > n_perms - k {
            return Ok(Decision::Accept);
        }
        next = end;
    }
    Ok(Decision::Accept)
}

/// `S_1, S_2 - S_1, …`.
fn all_life_times(times: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    times
        .iter()
        .map(|&t| {
            let d = t - prev;
            prev = t;
            d
        })
        .collect()
}

fn permute_events(lifes: &mut [f64], out: &mut Vec<f64>, rng: &mut crate::rng::StreamRng) {
    lifes.shuffle(rng);
    out.clear();
    let mut t = 0.0;
    out.extend(lifes.iter().map(|&d| {
        t += d;
        t
    }));
}

/// One permutation of `series`, as used by [`bootstrap_test`] for permutation `index`.
pub fn permuted_series(series: &EventSeries, seed: u64, index: u64) -> Vec<f64> {
    let mut lifes = all_life_times(series.times());
    let mut out = Vec::with_capacity(lifes.len());
    permute_events(&mut lifes, &mut out, &mut stream(seed, &[index]));
    out
}
