// SPDX-License-Identifier: MIT OR Apache-2.0

//! The Gaussian limit process and Monte Carlo calibration of the test.
//!
//! Under the null hypothesis `G_{h,t}` converges to
//! `L_{h,t} = ((W_{t+h} - W_t) - (W_t - W_{t-h})) / sqrt(2h)` for a standard
//! Brownian motion `W`. The calibration draws `W` on a grid, takes
//! `M*_h = sup |L_{h,t}|` over `(h, T - h]` for every window from the same
//! path (with the supremum between grid points drawn from its exact
//! conditional law), and derives the per-window mean and variance of `M*_h` together
//! with the `(1 - α)`-quantile `Q` of the standardized global maximum.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::stream;
use crate::stats::{mean_var, upper_quantile};
use crate::step::StepProcess;
use crate::window::{same_window, WindowSet};

pub const CALIBRATION_SCHEMA: u32 = 1;

/// Default number of limit process draws.
pub const DEFAULT_SIMS: usize = 10_000;

/// Grid points per smallest window in the default discretization.
const POINTS_PER_MIN_WINDOW: f64 = 50.0;

/// Upper bound on the number of grid steps of one path.
const MAX_GRID_STEPS: f64 = 2.0e6;

/// Brownian motion sampled at `0, δ, 2δ, …, T`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    step: f64,
    values: Vec<f64>,
}

impl BrownianPath {
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.step * self.n_steps() as f64
    }
}

/// Number of grid steps covering `horizon` with spacing at most `grid_step`.
fn grid_steps(horizon: f64, grid_step: f64) -> usize {
    ((horizon / grid_step) - 1e-9).ceil().max(1.0) as usize
}

fn validate_grid(horizon: f64, grid_step: f64) -> Result<()> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(invalid(format!("horizon must be positive, got {horizon}")));
    }
    if !(grid_step > 0.0 && grid_step <= horizon / 100.0 * (1.0 + 1e-12)) {
        return Err(invalid(format!(
            "grid step must lie in (0, T/100] = (0, {}], got {grid_step}",
            horizon / 100.0
        )));
    }
    Ok(())
}

fn fill_path(buf: &mut Vec<f64>, n_steps: usize, step: f64, rng: &mut crate::rng::StreamRng) {
    let sd = step.sqrt();
    buf.clear();
    buf.reserve(n_steps + 1);
    buf.push(0.0);
    let mut w = 0.0;
    for _ in 0..n_steps {
        let z: f64 = StandardNormal.sample(rng);
        w += sd * z;
        buf.push(w);
    }
}

/// Draws `W` on a grid over `[0, T]`. The spacing is `T / ⌈T / grid_step⌉`,
/// i.e. the requested step shrunk so the grid ends exactly at `T`.
pub fn simulate_brownian_path(horizon: f64, grid_step: f64, seed: u64) -> Result<BrownianPath> {
    validate_grid(horizon, grid_step)?;
    let n = grid_steps(horizon, grid_step);
    let step = horizon / n as f64;
    let mut values = Vec::new();
    fill_path(&mut values, n, step, &mut stream(seed, &[0]));
    Ok(BrownianPath { step, values })
}

/// Window size in grid steps: `h / δ` rounded, at least 1 and at most half the grid.
fn snap(h: f64, step: f64, n_steps: usize) -> usize {
    ((h / step).round() as usize).clamp(1, (n_steps / 2).max(1))
}

/// Grid indices `k` with `kδ ∈ (mδ, T - mδ]`; the single point `T/2` when that
/// set is empty.
fn index_range(m: usize, n_steps: usize) -> std::ops::RangeInclusive<usize> {
    let end = n_steps - m;
    (m + 1).min(end)..=end
}

/// `L_{h,t}` at the grid points of the analysis region, with `h` snapped to
/// the grid. Point `kδ` holds on `[kδ, (k+1)δ)`; the first value also covers
/// the gap down to the open left end.
pub fn limit_process_on_grid(path: &BrownianPath, h: f64) -> Result<StepProcess> {
    if !(h > 0.0 && h <= path.horizon() / 2.0 * (1.0 + 1e-12)) {
        return Err(Error::WindowTooLarge {
            h,
            horizon: path.horizon(),
        });
    }
    let n = path.n_steps();
    let m = snap(h, path.step, n);
    let w = &path.values;
    let scale = 1.0 / (2.0 * m as f64 * path.step).sqrt();
    let range = index_range(m, n);
    let first = *range.start();
    let values: Vec<f64> = range
        .clone()
        .map(|k| (w[k + m] - 2.0 * w[k] + w[k - m]) * scale)
        .collect();
    let breakpoints: Vec<f64> = range.skip(1).map(|k| k as f64 * path.step).collect();
    debug_assert!(first >= m);
    StepProcess::new(
        m as f64 * path.step,
        (n - m) as f64 * path.step,
        breakpoints,
        values,
    )
}

/// Intervals whose bridge beats the running maximum with probability below
/// `exp(-BRIDGE_SKIP)` are not sampled.
const BRIDGE_SKIP: f64 = 20.0;

/// `sup |L_{h,t}|` over the analysis region for each snapped window.
///
/// With `X_k = W_{k+m} - 2 W_k + W_{k-m}`, conditionally on the grid values
/// of `W` the path of `X` between two grid points is a Brownian bridge with
/// variance rate `1 + 4 + 1 = 6`. Its supremum over an interval of length
/// `δ` from `a` to `b` satisfies `P(max >= y) = exp(-2 (y - a)(y - b) / (6δ))`
/// and is drawn by inversion, so the grid does not bias the maxima low.
fn max_abs_limit(
    w: &[f64],
    step: f64,
    snapped: &[usize],
    rng: &mut crate::rng::StreamRng,
    out: &mut Vec<f64>,
) {
    let n = w.len() - 1;
    let var = 6.0 * step;
    out.clear();
    for &m in snapped {
        let x = |k: usize| w[k + m] - 2.0 * w[k] + w[k - m];
        let (first, last) = (m, n - m);
        let mut best: f64 = 0.0;
        for k in first..=last {
            best = best.max(x(k).abs());
        }
        let mut a = x(first);
        for k in first..last {
            let b = x(k + 1);
            for (lo, hi) in [(a, b), (-a, -b)] {
                if 2.0 * (best - lo) * (best - hi) > BRIDGE_SKIP * var {
                    continue;
                }
                let u = 1.0 - rng.random::<f64>();
                let top = 0.5 * (lo + hi + ((lo - hi).powi(2) - 2.0 * var * u.ln()).sqrt());
                best = best.max(top);
            }
            a = b;
        }
        out.push(best / (2.0 * m as f64 * step).sqrt());
    }
}

/// Autocovariance of `(L_{h,t})_t` at lag `v`.
pub fn autocovariance(h: f64, v: f64) -> f64 {
    let v = v.abs();
    if v <= h {
        1.0 - 1.5 * v / h
    } else if v <= 2.0 * h {
        -1.0 + 0.5 * v / h
    } else {
        0.0
    }
}

/// Default grid spacing: `min(H) / 50`, coarsened if the path would exceed
/// two million steps.
pub fn default_grid_step(horizon: f64, windows: &WindowSet) -> f64 {
    (windows.min() / POINTS_PER_MIN_WINDOW).max(horizon / MAX_GRID_STEPS)
}

/// Limit maxima `M*_h` of many independent draws, one row per draw.
///
/// All windows of a row come from the same Brownian path, so any subset of
/// the windows can be calibrated from the same draws.
#[derive(Debug, Clone)]
pub struct LimitSamples {
    horizon: f64,
    windows: WindowSet,
    snapped: Vec<f64>,
    grid_step: f64,
    n_sims: usize,
    seed: u64,
    maxima: Vec<f64>,
}

impl LimitSamples {
    pub fn simulate(
        horizon: f64,
        windows: &WindowSet,
        n_sims: usize,
        grid_step: Option<f64>,
        seed: u64,
    ) -> Result<Self> {
        if let Some(&h) = windows.as_slice().iter().find(|&&h| h > horizon / 2.0) {
            return Err(Error::WindowTooLarge { h, horizon });
        }
        if n_sims < 2 {
            return Err(invalid(format!(
                "need at least 2 simulations, got {n_sims}"
            )));
        }
        let requested = grid_step.unwrap_or_else(|| default_grid_step(horizon, windows));
        validate_grid(horizon, requested)?;
        let n = grid_steps(horizon, requested);
        let step = horizon / n as f64;
        let snapped_m: Vec<usize> = windows.iter().map(|h| snap(h, step, n)).collect();
        let snapped = snapped_m.iter().map(|&m| m as f64 * step).collect();
        let k = windows.len();

        let rows: Vec<Vec<f64>> = (0..n_sims)
            .into_par_iter()
            .map_init(
                || (Vec::with_capacity(n + 1), Vec::with_capacity(k)),
                |(path, row), i| {
                    let mut rng = stream(seed, &[i as u64]);
                    fill_path(path, n, step, &mut rng);
                    max_abs_limit(path, step, &snapped_m, &mut rng, row);
                    row.clone()
                },
            )
            .collect();
        Ok(Self {
            horizon,
            windows: windows.clone(),
            snapped,
            grid_step: step,
            n_sims,
            seed,
            maxima: rows.into_iter().flatten().collect(),
        })
    }

    pub fn windows(&self) -> &WindowSet {
        &self.windows
    }

    pub fn grid_step(&self) -> f64 {
        self.grid_step
    }

    pub fn n_sims(&self) -> usize {
        self.n_sims
    }

    /// `M*_h` of draw `draw` for window index `j`.
    pub fn maximum(&self, draw: usize, j: usize) -> f64 {
        self.maxima[draw * self.windows.len() + j]
    }

    /// Column of `M*_h` values for window index `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_sims).map(|i| self.maximum(i, j)).collect()
    }

    /// Standardized global maxima `M*` for the windows in `subset`.
    pub fn global_maxima(&self, subset: &WindowSet) -> Result<(Vec<WindowCalibration>, Vec<f64>)> {
        let idx = subset
            .iter()
            .map(|h| self.windows.position(h).ok_or(Error::MissingCalibration(h)))
            .collect::<Result<Vec<_>>>()?;
        let per_window = idx
            .iter()
            .map(|&j| {
                let (mean, variance) = mean_var(&self.column(j));
                let h = self.windows.as_slice()[j];
                if variance > 0.0 {
                    Ok(WindowCalibration {
                        h,
                        snapped_h: self.snapped[j],
                        mean,
                        variance,
                    })
                } else {
                    Err(Error::DegenerateCalibration(h))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let sds: Vec<f64> = per_window.iter().map(WindowCalibration::sd).collect();
        let globals = (0..self.n_sims)
            .map(|i| {
                idx.iter()
                    .zip(&per_window)
                    .zip(&sds)
                    .map(|((&j, w), sd)| (self.maximum(i, j) - w.mean) / sd)
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        Ok((per_window, globals))
    }

    /// Calibration record for `subset` at level `alpha`.
    pub fn calibration(&self, subset: &WindowSet, alpha: f64) -> Result<LimitCalibration> {
        validate_alpha(alpha)?;
        let (per_window, mut globals) = self.global_maxima(subset)?;
        let q = upper_quantile(&mut globals, alpha);
        Ok(LimitCalibration {
            schema: CALIBRATION_SCHEMA,
            horizon: self.horizon,
            windows: subset.clone(),
            alpha,
            n_sims: self.n_sims,
            grid_step: self.grid_step,
            seed: self.seed,
            per_window,
            q,
        })
    }
}

fn validate_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Mean and variance of `M*_h` for one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowCalibration {
    pub h: f64,
    /// Window length actually used on the simulation grid.
    pub snapped_h: f64,
    pub mean: f64,
    pub variance: f64,
}

impl WindowCalibration {
    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    /// `(x - mean) / sd`.
    pub fn standardize(&self, x: f64) -> f64 {
        (x - self.mean) / self.sd()
    }
}

/// Persisted calibration of the multiple filter test for `(T, H, α)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCalibration {
    pub schema: u32,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "H")]
    pub windows: WindowSet,
    pub alpha: f64,
    pub n_sims: usize,
    pub grid_step: f64,
    pub seed: u64,
    pub per_window: Vec<WindowCalibration>,
    #[serde(rename = "Q")]
    pub q: f64,
}

impl LimitCalibration {
    pub fn window(&self, h: f64) -> Result<&WindowCalibration> {
        self.per_window
            .iter()
            .find(|w| same_window(w.h, h))
            .ok_or(Error::MissingCalibration(h))
    }

    /// Cache key over everything that determines the record.
    pub fn key(&self) -> CalibrationKey {
        CalibrationKey {
            horizon: self.horizon,
            windows: self.windows.as_slice().to_vec(),
            alpha: self.alpha,
            n_sims: self.n_sims,
            grid_step: self.grid_step,
            seed: self.seed,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        if c.schema != CALIBRATION_SCHEMA {
            return Err(invalid(format!(
                "unsupported calibration schema {}",
                c.schema
            )));
        }
        Ok(c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Identity of a calibration run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationKey {
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "H")]
    pub windows: Vec<f64>,
    pub alpha: f64,
    pub n_sims: usize,
    pub grid_step: f64,
    pub seed: u64,
}

impl CalibrationKey {
    /// Key for the default grid of `windows`.
    pub fn new(
        horizon: f64,
        windows: &WindowSet,
        alpha: f64,
        n_sims: usize,
        grid_step: Option<f64>,
        seed: u64,
    ) -> Self {
        let requested = grid_step.unwrap_or_else(|| default_grid_step(horizon, windows));
        let step = horizon / grid_steps(horizon, requested) as f64;
        Self {
            horizon,
            windows: windows.as_slice().to_vec(),
            alpha,
            n_sims,
            grid_step: step,
            seed,
        }
    }

    /// Stable textual form, usable as a file name stem.
    pub fn canonical(&self) -> String {
        let hs: Vec<String> = self.windows.iter().map(|h| format!("{h}")).collect();
        format!(
            "T{}_H{}_a{}_n{}_d{}_s{}",
            self.horizon,
            hs.join("-"),
            self.alpha,
            self.n_sims,
            self.grid_step,
            self.seed
        )
    }
}

/// Simulates the limit process and calibrates the test for `(T, H, α)`.
pub fn calibrate(
    horizon: f64,
    windows: &WindowSet,
    alpha: f64,
    n_sims: usize,
    grid_step: Option<f64>,
    seed: u64,
) -> Result<LimitCalibration> {
    validate_alpha(alpha)?;
    LimitSamples::simulate(horizon, windows, n_sims, grid_step, seed)?.calibration(windows, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn autocovariance_examples() {
        assert_eq!(autocovariance(10.0, 0.0), 1.0);
        assert_eq!(autocovariance(10.0, 10.0), -0.5);
        assert_eq!(autocovariance(10.0, -10.0), -0.5);
        assert_eq!(autocovariance(10.0, 5.0), 0.25);
        assert_eq!(autocovariance(10.0, 15.0), -0.25);
        assert_eq!(autocovariance(10.0, 20.0), 0.0);
        assert_eq!(autocovariance(10.0, 30.0), 0.0);
    }

    #[test]
    fn path_starts_at_zero_and_ends_at_horizon() {
        let p = simulate_brownian_path(100.0, 0.3, 1).unwrap();
        assert_eq!(p.values()[0], 0.0);
        assert!((p.horizon() - 100.0).abs() < 1e-9);
        assert!(p.step() <= 0.3);
        assert!(simulate_brownian_path(100.0, 2.0, 1).is_err());
        assert!(simulate_brownian_path(100.0, 0.0, 1).is_err());
    }

    #[test]
    fn brownian_variance_at_horizon() {
        let n = 10_000;
        let ends: Vec<f64> = (0..n)
            .map(|s| {
                *simulate_brownian_path(10.0, 0.1, s)
                    .unwrap()
                    .values()
                    .last()
                    .unwrap()
            })
            .collect();
        let (m, v) = mean_var(&ends);
        assert!(m.abs() < 3.0 * (10.0f64 / n as f64).sqrt());
        assert!((v - 10.0).abs() < 0.5, "{v}");
    }

    #[test]
    fn disjoint_increments_uncorrelated() {
        let n = 10_000;
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for s in 0..n {
            let p = simulate_brownian_path(10.0, 0.1, s).unwrap();
            let w = p.values();
            xs.push(w[30] - w[0]);
            ys.push(w[100] - w[60]);
        }
        let (mx, vx) = mean_var(&xs);
        let (my, vy) = mean_var(&ys);
        let cov = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - mx) * (y - my))
            .sum::<f64>()
            / (n - 1) as f64;
        let corr = cov / (vx * vy).sqrt();
        assert!(corr.abs() < 3.0 / (n as f64).sqrt(), "{corr}");
    }

    #[test]
    fn limit_grid_region() {
        let p = simulate_brownian_path(100.0, 0.5, 3).unwrap();
        let l = limit_process_on_grid(&p, 10.0).unwrap();
        assert_eq!(l.lo(), 10.0);
        assert_eq!(l.hi(), 90.0);
        // Grid points 10.5 ..= 90.
        assert_eq!(l.n_segments(), 160);
        assert!(limit_process_on_grid(&p, 60.0).is_err());
        let half = limit_process_on_grid(&p, 50.0).unwrap();
        assert_eq!(half.n_segments(), 1);
    }

    #[test]
    fn limit_marginal_moments() {
        let n = 10_000;
        let (mut at, mut lag) = (Vec::new(), Vec::new());
        for s in 0..n {
            let p = simulate_brownian_path(60.0, 0.2, s).unwrap();
            let l = limit_process_on_grid(&p, 10.0).unwrap();
            at.push(l.eval(25.0).unwrap());
            lag.push(l.eval(35.0).unwrap());
        }
        let (m, v) = mean_var(&at);
        assert!(m.abs() < 3.0 / (n as f64).sqrt(), "{m}");
        assert!((v - 1.0).abs() < 0.05, "{v}");
        let (m2, v2) = mean_var(&lag);
        let cov = at
            .iter()
            .zip(&lag)
            .map(|(x, y)| (x - m) * (y - m2))
            .sum::<f64>()
            / (n - 1) as f64;
        let corr = cov / (v * v2).sqrt();
        assert!((corr + 0.5).abs() < 0.03, "{corr}");
    }

    #[test]
    fn degenerate_inputs() {
        let w = WindowSet::single(10.0).unwrap();
        assert!(calibrate(100.0, &w, 0.05, 1, None, 0).is_err());
        assert!(calibrate(100.0, &w, 0.0, 100, None, 0).is_err());
        assert!(matches!(
            calibrate(15.0, &w, 0.05, 100, None, 0),
            Err(Error::WindowTooLarge { .. })
        ));
    }

    #[test]
    fn json_round_trip_and_key() {
        let w = WindowSet::new(vec![10.0, 25.0]).unwrap();
        let c = calibrate(200.0, &w, 0.05, 200, None, 4).unwrap();
        let back = LimitCalibration::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.key(), CalibrationKey::new(200.0, &w, 0.05, 200, None, 4));
        assert!(c.window(25.0).is_ok());
        assert!(matches!(c.window(50.0), Err(Error::MissingCalibration(_))));
        let text = c.to_json().unwrap();
        for field in [
            "\"T\"",
            "\"H\"",
            "\"alpha\"",
            "\"n_sims\"",
            "\"grid_step\"",
            "\"seed\"",
            "\"Q\"",
        ] {
            assert!(text.contains(field), "{field}");
        }
    }
}
