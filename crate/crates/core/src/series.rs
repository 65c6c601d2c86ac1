// SPDX-License-Identifier: MIT OR Apache-2.0

//! Observed event times and their plain-text file format.
//!
//! The format is one ASCII decimal time per line, strictly increasing, with
//! an optional `# T=<horizon>` header. Other lines starting with `#` and blank
//! lines are ignored. Without a header the horizon is the last event time.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Strictly increasing event times on `(0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSeries {
    times: Vec<f64>,
    horizon: f64,
}

impl EventSeries {
    pub fn new(times: Vec<f64>, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(invalid(format!("horizon must be positive, got {horizon}")));
        }
        let mut prev = 0.0;
        for (i, &t) in times.iter().enumerate() {
            if !t.is_finite() || t <= prev {
                return Err(invalid(format!(
                    "event {i} at {t} is not strictly increasing in (0, T]"
                )));
            }
            prev = t;
        }
        if prev > horizon {
            return Err(invalid(format!(
                "last event {prev} exceeds horizon {horizon}"
            )));
        }
        Ok(Self { times, horizon })
    }

    pub fn empty(horizon: f64) -> Result<Self> {
        Self::new(Vec::new(), horizon)
    }

    pub(crate) fn from_sorted_unchecked(times: Vec<f64>, horizon: f64) -> Self {
        debug_assert!(times.windows(2).all(|w| w[0] < w[1]));
        Self { times, horizon }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Events per time unit over the whole horizon.
    pub fn mean_rate(&self) -> f64 {
        self.times.len() as f64 / self.horizon
    }

    /// Life times `S_i - S_{i-1}` for `i >= 2`; the leading gap from 0 is
    /// not included.
    pub fn life_times(&self) -> Vec<f64> {
        self.times.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `N_t`, the number of events in `(0, t]`.
    pub fn counting(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t)
    }

    /// Same series with a different horizon.
    pub fn with_horizon(self, horizon: f64) -> Result<Self> {
        Self::new(self.times, horizon)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut horizon = None;
        let mut times = Vec::new();
        let mut prev = 0.0;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(value) = comment.trim().strip_prefix("T=") {
                    let t: f64 = value.trim().parse().map_err(|_| Error::Parse {
                        line: line_no,
                        message: format!("invalid horizon {:?}", value.trim()),
                    })?;
                    if !(t.is_finite() && t > 0.0) {
                        return Err(Error::Parse {
                            line: line_no,
                            message: format!("horizon must be positive, got {t}"),
                        });
                    }
                    horizon = Some(t);
                }
                continue;
            }
            let t: f64 = line.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid event time {line:?}"),
            })?;
            if !t.is_finite() || t <= prev {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("event time {t} is not strictly increasing and positive"),
                });
            }
            prev = t;
            times.push(t);
        }
        let horizon = match horizon {
            Some(h) => h,
            None if times.is_empty() => {
                return Err(Error::Parse {
                    line: 0,
                    message: "no events and no `# T=` header".into(),
                })
            }
            None => prev,
        };
        if prev > horizon {
            return Err(Error::Parse {
                line: 0,
                message: format!("last event {prev} exceeds horizon {horizon}"),
            });
        }
        Ok(Self { times, horizon })
    }

    /// Serializes with a `# T=` header. Times use the shortest decimal that
    /// round-trips, so `parse(to_text(s)) == s`.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.times.len() * 20 + 16);
        writeln!(out, "# T={}", self.horizon).unwrap();
        for t in &self.times {
            writeln!(out, "{t}").unwrap();
        }
        out
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}
