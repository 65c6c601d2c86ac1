// SPDX-License-Identifier: MIT OR Apache-2.0

//! Right-continuous piecewise constant functions on a bounded interval.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Step function on `[lo, hi]`.
///
/// Segment `k` covers `[b_{k-1}, b_k)` with `b_{-1} = lo`; the last segment
/// is closed at `hi`. A breakpoint equal to `hi` yields a final segment that
/// is the single point `hi`. The left end `lo` is treated as open: it is the
/// infimum of the first segment but not itself a point of the domain, which
/// matches the analysis region `(h, T - h]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepProcess {
    lo: f64,
    hi: f64,
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl StepProcess {
    pub fn new(lo: f64, hi: f64, breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(invalid(format!("invalid domain [{lo}, {hi}]")));
        }
        if values.len() != breakpoints.len() + 1 {
            return Err(invalid(format!(
                "{} breakpoints need {} values, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                values.len()
            )));
        }
        let mut prev = lo;
        for &b in &breakpoints {
            if !(b > prev && b <= hi) {
                return Err(invalid(format!(
                    "breakpoint {b} out of order or outside ({lo}, {hi}]"
                )));
            }
            prev = b;
        }
        Ok(Self {
            lo,
            hi,
            breakpoints,
            values,
        })
    }

    pub(crate) fn from_parts_unchecked(
        lo: f64,
        hi: f64,
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(values.len(), breakpoints.len() + 1);
        Self {
            lo,
            hi,
            breakpoints,
            values,
        }
    }

    pub fn constant(lo: f64, hi: f64, value: f64) -> Result<Self> {
        Self::new(lo, hi, Vec::new(), vec![value])
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_segments(&self) -> usize {
        self.values.len()
    }

    /// `(start, end, value)` of segment `k`.
    pub fn segment(&self, k: usize) -> (f64, f64, f64) {
        let start = if k == 0 {
            self.lo
        } else {
            self.breakpoints[k - 1]
        };
        let end = self.breakpoints.get(k).copied().unwrap_or(self.hi);
        (start, end, self.values[k])
    }

    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.values.len()).map(|k| self.segment(k))
    }

    /// Value at `t`, or `None` outside `[lo, hi]`. At `lo` this returns the
    /// right limit.
    pub fn eval(&self, t: f64) -> Option<f64> {
        if !(t >= self.lo && t <= self.hi) {
            return None;
        }
        Some(self.values[self.breakpoints.partition_point(|&b| b <= t)])
    }

    /// Applies `f` to every value, keeping the breakpoints.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            lo: self.lo,
            hi: self.hi,
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Maximum over the domain minus the open intervals in `excluded`,
    /// together with the infimum of the maximizing set.
    ///
    /// Endpoints of excluded intervals stay available. Returns `None` when
    /// nothing of the domain remains.
    pub fn max_with_argmax(&self, excluded: &[(f64, f64)]) -> Option<(f64, f64)> {
        let holes = merge_open_intervals(excluded);
        let last = self.values.len() - 1;
        let mut p = 0;
        let mut best: Option<(f64, f64)> = None;
        for k in 0..=last {
            let (start, end, value) = self.segment(k);
            if let Some((bv, _)) = best {
                if value <= bv {
                    continue;
                }
            }
            let open_start = k == 0 && self.lo < self.hi;
            while p < holes.len() && holes[p].1 <= start {
                p += 1;
            }
            let mut x = start;
            let mut q = p;
            if q < holes.len() {
                let (a, b) = holes[q];
                if a < x || (open_start && a <= x) {
                    x = b;
                    q += 1;
                }
            }
            // Merged holes never overlap, so at most one jump is needed.
            debug_assert!(q >= holes.len() || !(holes[q].0 < x && x < holes[q].1));
            let available = if k == last { x <= end } else { x < end };
            if available {
                best = Some((value, x));
            }
        }
        best
    }

    /// CSV with columns `t_start,t_end,value`, each number rounded to
    /// `digits` significant digits.
    pub fn to_csv(&self, digits: usize) -> String {
        let mut out = String::with_capacity(self.values.len() * 40 + 24);
        out.push_str("t_start,t_end,value\n");
        for (s, e, v) in self.segments() {
            writeln!(
                out,
                "{},{},{}",
                format_significant(s, digits),
                format_significant(e, digits),
                format_significant(v, digits)
            )
            .unwrap();
        }
        out
    }
}

/// Default precision of exported numbers.
pub const DEFAULT_CSV_DIGITS: usize = 9;

/// Rounds to `digits` significant digits and prints the shortest decimal
/// that reads back as the rounded value.
pub fn format_significant(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let digits = digits.max(1);
    let rounded: f64 = format!("{:.*e}", digits - 1, x).parse().unwrap();
    format!("{rounded}")
}

fn merge_open_intervals(intervals: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = intervals.iter().copied().filter(|(a, b)| a < b).collect();
    v.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(v.len());
    for (a, b) in v {
        match merged.last_mut() {
            Some(last) if a < last.1 => last.1 = last.1.max(b),
            _ => merged.push((a, b)),
        }
    }
    merged
}
