// SPDX-License-Identifier: MIT OR Apache-2.0

//! Windowed event counts and the plug-in variance estimator of `N_ri - N_le`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::EventSeries;

/// `N_(a,b]`: number of events in the half-open interval `(a, b]`.
pub fn count(series: &EventSeries, a: f64, b: f64) -> Result<usize> {
    if a < 0.0 || b > series.horizon() || a > b || a.is_nan() || b.is_nan() {
        return Err(Error::IntervalOutOfRange {
            a,
            b,
            horizon: series.horizon(),
        });
    }
    Ok(series.counting(b) - series.counting(a))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `(t - h, t]`
    Left,
    /// `(t, t + h]`
    Right,
}

/// Life times whose two bounding events both lie in the chosen window.
pub fn window_lifetimes(series: &EventSeries, t: f64, h: f64, side: Side) -> Vec<f64> {
    let (lo, hi) = match side {
        Side::Left => (t - h, t),
        Side::Right => (t, t + h),
    };
    let s = series.times();
    let a = s.partition_point(|&x| x <= lo);
    let b = s.partition_point(|&x| x <= hi);
    if b < a + 2 {
        return Vec::new();
    }
    s[a..b].windows(2).map(|w| w[1] - w[0]).collect()
}

/// Per-window life time summaries at one `(t, h)` and the resulting `ŝ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub n_left: usize,
    pub n_right: usize,
    pub mu_left: f64,
    pub mu_right: f64,
    pub var_left: f64,
    pub var_right: f64,
    pub s_hat_sq: f64,
}

impl WindowStats {
    /// `N_ri - N_le`.
    pub fn count_difference(&self) -> f64 {
        self.n_right as f64 - self.n_left as f64
    }

    /// `G_{h,t}`, zero when `ŝ = 0`.
    pub fn g(&self) -> f64 {
        if self.s_hat_sq > 0.0 {
            self.count_difference() / self.s_hat_sq.sqrt()
        } else {
            0.0
        }
    }
}

/// `ŝ² = (σ̂²_ri/μ̂³_ri + σ̂²_le/μ̂³_le)·h` if both means are positive, else 0.
pub fn s_hat_sq(mu_left: f64, var_left: f64, mu_right: f64, var_right: f64, h: f64) -> f64 {
    if mu_left.min(mu_right) > 0.0 {
        (var_right / (mu_right * mu_right * mu_right) + var_left / (mu_left * mu_left * mu_left))
            * h
    } else {
        0.0
    }
}

pub fn window_stats(series: &EventSeries, t: f64, h: f64) -> WindowStats {
    LifetimeTable::new(series.times()).stats_at(t, h)
}

/// Windows holding at most this many life times are summarised directly;
/// larger ones use shifted prefix sums.
const DIRECT_LIMIT: usize = 64;

/// Prefix sums of life times for O(1) window summaries.
///
/// Sums are taken over `ξ - m` with `m` the global mean life time, which
/// keeps the one-pass variance well conditioned on long series.
#[derive(Debug, Clone)]
pub struct LifetimeTable<'a> {
    times: &'a [f64],
    shift: f64,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl<'a> LifetimeTable<'a> {
    pub fn new(times: &'a [f64]) -> Self {
        let n_life = times.len().saturating_sub(1);
        let shift = if n_life > 0 {
            (times[times.len() - 1] - times[0]) / n_life as f64
        } else {
            0.0
        };
        let mut sum = Vec::with_capacity(n_life + 1);
        let mut sum_sq = Vec::with_capacity(n_life + 1);
        let (mut s1, mut s2) = (0.0, 0.0);
        sum.push(0.0);
        sum_sq.push(0.0);
        for w in times.windows(2) {
            let d = (w[1] - w[0]) - shift;
            s1 += d;
            s2 += d * d;
            sum.push(s1);
            sum_sq.push(s2);
        }
        Self {
            times,
            shift,
            sum,
            sum_sq,
        }
    }

    pub fn times(&self) -> &'a [f64] {
        self.times
    }

    /// Mean and corrected variance of the life times between events
    /// `first..end` (indices into the event array), with the zero conventions
    /// for empty and single-element sets.
    pub fn summary(&self, first: usize, end: usize) -> (f64, f64) {
        if end < first + 2 {
            return (0.0, 0.0);
        }
        let n = end - first - 1;
        if n <= DIRECT_LIMIT {
            let s = &self.times[first..end];
            let nf = n as f64;
            let mean = s.windows(2).map(|w| w[1] - w[0]).sum::<f64>() / nf;
            if n == 1 {
                return (mean, 0.0);
            }
            let ss = s
                .windows(2)
                .map(|w| {
                    let d = (w[1] - w[0]) - mean;
                    d * d
                })
                .sum::<f64>();
            return (mean, ss / (nf - 1.0));
        }
        let nf = n as f64;
        let s1 = self.sum[end - 1] - self.sum[first];
        let s2 = self.sum_sq[end - 1] - self.sum_sq[first];
        let mean = self.shift + s1 / nf;
        let var = ((s2 - s1 * s1 / nf) / (nf - 1.0)).max(0.0);
        (mean, var)
    }

    /// Statistics for the windows `(lo, mid]` and `(mid, hi]` given the event
    /// index boundaries `a = N(lo)`, `b = N(mid)`, `c = N(hi)`.
    pub fn stats_from_indices(&self, a: usize, b: usize, c: usize, h: f64) -> WindowStats {
        let (mu_left, var_left) = self.summary(a, b);
        let (mu_right, var_right) = self.summary(b, c);
        WindowStats {
            n_left: b - a,
            n_right: c - b,
            mu_left,
            mu_right,
            var_left,
            var_right,
            s_hat_sq: s_hat_sq(mu_left, var_left, mu_right, var_right, h),
        }
    }

    pub fn stats_at(&self, t: f64, h: f64) -> WindowStats {
        let n = |x: f64| self.times.partition_point(|&s| s <= x);
        self.stats_from_indices(n(t - h), n(t), n(t + h), h)
    }
}
