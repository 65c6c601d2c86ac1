// SPDX-License-Identifier: MIT OR Apache-2.0

//! The multiple filter test of rate stationarity.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filtered_derivative::{g_process, scale_abs};
use crate::limit::{CalibrationKey, LimitCalibration};
use crate::series::EventSeries;
use crate::step::StepProcess;
use crate::window::{same_window, WindowSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Reject,
    Accept,
}

/// `M_h = max |G_{h,t}|` and its standardized value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowResult {
    pub h: f64,
    pub max_abs_g: f64,
    pub standardized: f64,
}

/// The processes behind one window's contribution.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowTrace {
    pub h: f64,
    pub g: StepProcess,
    pub r: StepProcess,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// Global statistic `M`.
    #[serde(rename = "M")]
    pub statistic: f64,
    #[serde(rename = "Q")]
    pub threshold: f64,
    pub alpha: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "H")]
    pub windows: Vec<f64>,
    /// Requested windows larger than `T/2`.
    pub dropped_windows: Vec<f64>,
    pub per_window: Vec<WindowResult>,
    pub decision: Decision,
    pub calibration: CalibrationKey,
    #[serde(skip)]
    pub traces: Vec<WindowTrace>,
}

impl TestResult {
    pub fn rejected(&self) -> bool {
        self.decision == Decision::Reject
    }

    pub fn trace(&self, h: f64) -> Option<&WindowTrace> {
        self.traces.iter().find(|t| same_window(t.h, h))
    }
}

/// Runs the test on `series` with windows `windows`.
///
/// Windows above `T/2` are dropped with a warning; the remaining set must
/// match the calibration exactly, as must the horizon.
pub fn run_test(
    series: &EventSeries,
    windows: &WindowSet,
    calib: &LimitCalibration,
) -> Result<TestResult> {
    let horizon = series.horizon();
    let (kept, dropped) = windows.restrict_to_horizon(horizon);
    if !dropped.is_empty() {
        warn!(
            "dropping windows {dropped:?} larger than T/2 = {}",
            horizon / 2.0
        );
    }
    let kept = kept.ok_or_else(|| {
        Error::CalibrationMismatch(format!("no window fits into T/2 = {}", horizon / 2.0))
    })?;
    if (calib.horizon - horizon).abs() > 1e-9 * horizon.max(1.0) {
        return Err(Error::CalibrationMismatch(format!(
            "series horizon {horizon} but calibration for T = {}",
            calib.horizon
        )));
    }
    let same_set = kept.len() == calib.windows.len()
        && kept
            .iter()
            .zip(calib.windows.iter())
            .all(|(a, b)| same_window(a, b));
    if !same_set {
        return Err(Error::CalibrationMismatch(format!(
            "windows {:?} but calibration for {:?}",
            kept.as_slice(),
            calib.windows.as_slice()
        )));
    }

    let traces = kept
        .as_slice()
        .par_iter()
        .map(|&h| {
            let w = calib.window(h)?;
            let g = g_process(series, h)?;
            let r = scale_abs(&g, w.mean, w.sd());
            Ok(WindowTrace { h, g, r })
        })
        .collect::<Result<Vec<_>>>()?;

    let per_window: Vec<WindowResult> = traces
        .iter()
        .map(|tr| {
            let w = calib.window(tr.h)?;
            let max_abs_g = tr.g.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            Ok(WindowResult {
                h: tr.h,
                max_abs_g,
                standardized: w.standardize(max_abs_g),
            })
        })
        .collect::<Result<_>>()?;
    let statistic = per_window
        .iter()
        .map(|w| w.standardized)
        .fold(f64::NEG_INFINITY, f64::max);
    let decision = if statistic > calib.q {
        Decision::Reject
    } else {
        Decision::Accept
    };
    Ok(TestResult {
        statistic,
        threshold: calib.q,
        alpha: calib.alpha,
        horizon,
        windows: kept.as_slice().to_vec(),
        dropped_windows: dropped,
        per_window,
        decision,
        calibration: calib.key(),
        traces,
    })
}
