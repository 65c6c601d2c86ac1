// SPDX-License-Identifier: MIT OR Apache-2.0

//! Library side of the `mft` command: configuration, window selection,
//! calibration caching and the end-to-end analysis.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use mft_core::cpd::{detect, ChangePointReport};
use mft_core::limit::{CalibrationKey, DEFAULT_SIMS};
use mft_core::step::{format_significant, DEFAULT_CSV_DIGITS};
use mft_core::{calibrate, run_test, Error, EventSeries, LimitCalibration, Result, WindowSet};
use sha2::{Digest, Sha256};

/// Environment variable naming the calibration cache directory.
pub const CACHE_ENV: &str = "MFT_CACHE_DIR";

/// Expected events in the smallest automatic window.
pub const AUTO_MIN_EVENTS: f64 = 150.0;
/// Fewer expected events than this in a window of `T/2` is too sparse.
pub const SPARSE_EVENTS: f64 = 100.0;
pub const AUTO_MAX_WINDOWS: usize = 7;
/// Largest automatic window as a multiple of the smallest.
pub const AUTO_SPAN: usize = 6;

/// Process exit codes.
pub const EXIT_ACCEPT: i32 = 0;
pub const EXIT_REJECT: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum WindowChoice {
    Auto,
    List(WindowSet),
}

impl FromStr for WindowChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("auto") {
            Ok(Self::Auto)
        } else {
            WindowSet::parse(s).map(Self::List)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: PathBuf,
    /// Overrides the horizon from the file header or last event.
    pub horizon: Option<f64>,
    pub alpha: f64,
    pub windows: WindowChoice,
    pub n_sims: usize,
    pub grid_step: Option<f64>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub emit_traces: bool,
    /// Calibration cache; `None` disables caching.
    pub cache_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            horizon: None,
            alpha: 0.05,
            windows: WindowChoice::Auto,
            n_sims: DEFAULT_SIMS,
            grid_step: None,
            seed: 1,
            output_dir: output_dir.into(),
            emit_traces: false,
            cache_dir: std::env::var_os(CACHE_ENV).map(PathBuf::from),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if let Some(t) = self.horizon {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "T must be positive, got {t}"
                )));
            }
        }
        Ok(())
    }
}

/// Smallest number `>= x` of the form `m * 10^k` with `m` in
/// `{1, 1.5, 2, 2.5, 3, 4, 5, 6, 7.5}`.
pub fn nice_ceil(x: f64) -> f64 {
    const MANTISSAS: [f64; 10] = [1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 7.5, 10.0];
    assert!(x.is_finite() && x > 0.0, "nice_ceil of {x}");
    let k = x.log10().floor() as i32;
    // Division by a positive power keeps values like 0.15 exact.
    let scale = |m: f64| {
        if k >= 0 {
            m * 10f64.powi(k)
        } else {
            m / 10f64.powi(-k)
        }
    };
    MANTISSAS
        .iter()
        .map(|&m| scale(m))
        // Guards against `log10` landing just below an exact power of ten.
        .find(|&v| v >= x * (1.0 - 1e-12))
        .unwrap_or_else(|| scale(10.0))
}

/// Windows for a series of unknown character: the smallest holds about 150
/// expected events, the others are its multiples up to six times, capped
/// at `T/2`.
pub fn auto_windows(series: &EventSeries) -> Result<WindowSet> {
    let horizon = series.horizon();
    let rate = series.mean_rate();
    let half = horizon / 2.0;
    if series.is_empty() || rate * half < SPARSE_EVENTS {
        return Err(Error::SeriesTooSparse(format!(
            "{} events on (0, {horizon}] give {:.1} expected events in a window of T/2; need {SPARSE_EVENTS}",
            series.len(),
            rate * half
        )));
    }
    let h_min = nice_ceil(AUTO_MIN_EVENTS / rate).min(half);
    let windows: Vec<f64> = (1..=AUTO_SPAN.min(AUTO_MAX_WINDOWS))
        .map(|k| k as f64 * h_min)
        .filter(|&h| h <= half)
        .collect();
    WindowSet::new(windows)
}

/// Reads the event file and applies the horizon override.
pub fn load_series(path: &Path, horizon: Option<f64>) -> Result<EventSeries> {
    let series = EventSeries::read(path)?;
    match horizon {
        Some(t) => series.with_horizon(t),
        None => Ok(series),
    }
}

/// Windows for `series`, with those above `T/2` dropped.
pub fn resolve_windows(
    choice: &WindowChoice,
    series: &EventSeries,
) -> Result<(WindowSet, Vec<f64>)> {
    match choice {
        WindowChoice::Auto => Ok((auto_windows(series)?, Vec::new())),
        WindowChoice::List(w) => {
            let (kept, dropped) = w.restrict_to_horizon(series.horizon());
            if !dropped.is_empty() {
                warn!(
                    "dropping windows {dropped:?} larger than T/2 = {}",
                    series.horizon() / 2.0
                );
            }
            let kept = kept.ok_or(Error::WindowTooLarge {
                h: w.min(),
                horizon: series.horizon(),
            })?;
            Ok((kept, dropped))
        }
    }
}

/// Cache file name for `key`.
pub fn cache_file_name(key: &CalibrationKey) -> String {
    let digest = Sha256::digest(key.canonical().as_bytes());
    let mut hex = String::with_capacity(64);
    for b in digest {
        write!(hex, "{b:02x}").unwrap();
    }
    format!("calibration-{}.json", &hex[..32])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    Disabled,
    Hit,
    Miss,
}

/// Loads the calibration for `(T, H, alpha, n_sims, grid, seed)` from the
/// cache or simulates and stores it.
pub fn cached_calibration(
    horizon: f64,
    windows: &WindowSet,
    alpha: f64,
    n_sims: usize,
    grid_step: Option<f64>,
    seed: u64,
    cache_dir: Option<&Path>,
) -> Result<(LimitCalibration, CacheStatus)> {
    let key = CalibrationKey::new(horizon, windows, alpha, n_sims, grid_step, seed);
    let Some(dir) = cache_dir else {
        let calib = calibrate(horizon, windows, alpha, n_sims, grid_step, seed)?;
        return Ok((calib, CacheStatus::Disabled));
    };
    let path = dir.join(cache_file_name(&key));
    if path.exists() {
        match LimitCalibration::load(&path) {
            Ok(c) if c.key() == key => {
                info!("calibration cache hit {}", path.display());
                return Ok((c, CacheStatus::Hit));
            }
            Ok(_) => warn!(
                "ignoring cache entry {} with a different key",
                path.display()
            ),
            Err(e) => warn!("ignoring unreadable cache entry {}: {e}", path.display()),
        }
    }
    let calib = calibrate(horizon, windows, alpha, n_sims, grid_step, seed)?;
    fs::create_dir_all(dir)?;
    // Write then rename so concurrent runs never read a partial file.
    let tmp = dir.join(format!(".{}.{}", cache_file_name(&key), std::process::id()));
    calib.save(&tmp)?;
    fs::rename(&tmp, &path)?;
    Ok((calib, CacheStatus::Miss))
}

/// Outcome of [`analyze`].
#[derive(Debug, Clone)]
pub struct Analysis {
    pub report: ChangePointReport,
    pub calibration: LimitCalibration,
    pub cache: CacheStatus,
    pub written: Vec<PathBuf>,
}

impl Analysis {
    pub fn exit_code(&self) -> i32 {
        if self.report.test.rejected() {
            EXIT_REJECT
        } else {
            EXIT_ACCEPT
        }
    }
}

pub fn rates_csv(report: &ChangePointReport) -> String {
    let mut out = String::from("start,end,count,rate\n");
    for s in &report.segments {
        writeln!(
            out,
            "{},{},{},{}",
            format_significant(s.start, DEFAULT_CSV_DIGITS),
            format_significant(s.end, DEFAULT_CSV_DIGITS),
            s.count,
            format_significant(s.rate, DEFAULT_CSV_DIGITS)
        )
        .unwrap();
    }
    out
}

/// File name of the trace of window `h`.
pub fn trace_file_name(h: f64) -> String {
    format!("trace_h{h}.csv")
}

/// Test plus change point estimation on one event file, written to
/// `config.output_dir`.
pub fn analyze(config: &RunConfig) -> Result<Analysis> {
    config.validate()?;
    let series = load_series(&config.input, config.horizon)?;
    let (windows, dropped) = resolve_windows(&config.windows, &series)?;
    info!(
        "{} events on (0, {}], windows {:?}",
        series.len(),
        series.horizon(),
        windows.as_slice()
    );
    let (calibration, cache) = cached_calibration(
        series.horizon(),
        &windows,
        config.alpha,
        config.n_sims,
        config.grid_step,
        config.seed,
        config.cache_dir.as_deref(),
    )?;
    let mut test = run_test(&series, &windows, &calibration)?;
    test.dropped_windows = dropped;
    let report = detect(&series, test);

    let out = &config.output_dir;
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        let path = out.join(name);
        fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    put(
        "report.json".into(),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    put("calibration.json".into(), calibration.to_json()? + "\n")?;
    put("rates.csv".into(), rates_csv(&report))?;
    if config.emit_traces {
        for tr in &report.test.traces {
            put(trace_file_name(tr.h), trace_csv(tr))?;
        }
    }
    Ok(Analysis {
        report,
        calibration,
        cache,
        written,
    })
}

/// `G` and `R` of one window as a step function table.
pub fn trace_csv(trace: &mft_core::mft::WindowTrace) -> String {
    let mut out = String::from("t_start,t_end,g,r\n");
    for (k, (a, b, g)) in trace.g.segments().enumerate() {
        let r = trace.r.values()[k];
        let f = |x: f64| format_significant(x, DEFAULT_CSV_DIGITS);
        writeln!(out, "{},{},{},{}", f(a), f(b), f(g), f(r)).unwrap();
    }
    out
}
