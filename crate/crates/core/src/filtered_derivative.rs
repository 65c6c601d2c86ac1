// SPDX-License-Identifier: MIT OR Apache-2.0

//! Exact step-function construction of the filtered derivative process
//! `G_{h,t} = (N_ri - N_le) / ŝ` and its scaled version `R_{h,t}`.
//!
//! As `t` moves through `(h, T - h]`, the counts and the window life time
//! sets only change when `t - h`, `t` or `t + h` crosses an event. The
//! breakpoints are therefore `{S_i - h, S_i, S_i + h}` restricted to the
//! analysis region, and every piece is evaluated once at an interior point.

use serde::{Deserialize, Serialize};

use crate::counting::LifetimeTable;
use crate::error::{invalid, Error, Result};
use crate::limit::LimitCalibration;
use crate::series::EventSeries;
use crate::step::StepProcess;

/// The analysis region `(h, T - h]` of one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRegion {
    pub h: f64,
    pub lo: f64,
    pub hi: f64,
}

impl AnalysisRegion {
    pub fn new(h: f64, horizon: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(invalid(format!("window must be positive, got {h}")));
        }
        if h > horizon / 2.0 {
            return Err(Error::WindowTooLarge { h, horizon });
        }
        Ok(Self {
            h,
            lo: h,
            hi: horizon - h,
        })
    }

    pub fn contains(&self, t: f64) -> bool {
        t > self.lo && t <= self.hi
    }
}

/// Merges the three shifted copies of the event times that fall in `(lo, hi]`.
fn breakpoints(times: &[f64], h: f64, lo: f64, hi: f64) -> Vec<f64> {
    let n = times.len();
    let mut out = Vec::with_capacity(3 * n);
    let (mut i, mut j, mut k) = (0, 0, 0);
    // Skip to the first candidate of each stream above `lo`.
    while i < n && times[i] - h <= lo {
        i += 1;
    }
    while j < n && times[j] <= lo {
        j += 1;
    }
    while k < n && times[k] + h <= lo {
        k += 1;
    }
    loop {
        let a = if i < n { times[i] - h } else { f64::INFINITY };
        let b = if j < n { times[j] } else { f64::INFINITY };
        let c = if k < n { times[k] + h } else { f64::INFINITY };
        let m = a.min(b).min(c);
        if m > hi {
            break;
        }
        if out.last().is_none_or(|&last| m > last) {
            out.push(m);
        }
        if a == m {
            i += 1;
        }
        if b == m {
            j += 1;
        }
        if c == m {
            k += 1;
        }
    }
    out
}

/// Builds `t ↦ G_{h,t}` on `(h, T - h]` exactly.
pub fn g_process(series: &EventSeries, h: f64) -> Result<StepProcess> {
    let region = AnalysisRegion::new(h, series.horizon())?;
    let times = series.times();
    let table = LifetimeTable::new(times);
    let bps = breakpoints(times, h, region.lo, region.hi);
    let n = times.len();
    let horizon = series.horizon();

    let mut values = Vec::with_capacity(bps.len() + 1);
    let (mut ia, mut ib, mut ic) = (0usize, 0usize, 0usize);
    for k in 0..=bps.len() {
        let start = if k == 0 { region.lo } else { bps[k - 1] };
        let end = bps.get(k).copied().unwrap_or(region.hi);
        // The closed right end is evaluated exactly, with its right window
        // bounded by the horizon itself.
        let (t, right) = if start == region.hi {
            (region.hi, horizon)
        } else {
            let mid = 0.5 * (start + end);
            (mid, mid + h)
        };
        let left = t - h;
        while ia < n && times[ia] <= left {
            ia += 1;
        }
        while ib < n && times[ib] <= t {
            ib += 1;
        }
        while ic < n && times[ic] <= right {
            ic += 1;
        }
        values.push(table.stats_from_indices(ia, ib, ic, h).g());
    }
    Ok(StepProcess::from_parts_unchecked(
        region.lo, region.hi, bps, values,
    ))
}

/// `R_{h,t} = (|G_{h,t}| - mean_h) / sd_h`.
pub fn scale_abs(g: &StepProcess, mean: f64, sd: f64) -> StepProcess {
    g.map(|v| (v.abs() - mean) / sd)
}

/// Scales `g` with the limit maxima statistics recorded for window `h`.
pub fn r_process(g: &StepProcess, calib: &LimitCalibration, h: f64) -> Result<StepProcess> {
    let w = calib.window(h)?;
    Ok(scale_abs(g, w.mean, w.sd()))
}
