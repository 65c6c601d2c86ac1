// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A sorted set of distinct window half-widths `h > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WindowSet(Vec<f64>);

impl WindowSet {
    /// Sorts and deduplicates. Fails on an empty set or a non-positive width.
    pub fn new(mut windows: Vec<f64>) -> Result<Self> {
        if windows.is_empty() {
            return Err(invalid("window set is empty"));
        }
        if let Some(bad) = windows.iter().find(|h| !(h.is_finite() && **h > 0.0)) {
            return Err(invalid(format!("window {bad} must be positive")));
        }
        windows.sort_by(f64::total_cmp);
        windows.dedup();
        Ok(Self(windows))
    }

    pub fn single(h: f64) -> Result<Self> {
        Self::new(vec![h])
    }

    /// Parses a comma separated list such as `10,25,50`.
    pub fn parse(list: &str) -> Result<Self> {
        let windows = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| invalid(format!("bad window {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(windows)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.0[0]
    }

    pub fn max(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }

    /// Splits into windows usable on horizon `t` (`h <= t/2`) and the dropped rest.
    pub fn restrict_to_horizon(&self, horizon: f64) -> (Option<WindowSet>, Vec<f64>) {
        let (kept, dropped): (Vec<f64>, Vec<f64>) =
            self.0.iter().partition(|&&h| h <= horizon / 2.0);
        let kept = if kept.is_empty() {
            None
        } else {
            Some(WindowSet(kept))
        };
        (kept, dropped)
    }

    /// Index of `h` within the set, matching to a relative tolerance of 1e-9.
    pub fn position(&self, h: f64) -> Option<usize> {
        self.0.iter().position(|&w| same_window(w, h))
    }

    /// The seven windows used by the default studies.
    pub fn standard_seven() -> Self {
        Self(vec![10.0, 25.0, 50.0, 75.0, 100.0, 125.0, 150.0])
    }
}

pub(crate) fn same_window(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

impl TryFrom<Vec<f64>> for WindowSet {
    type Error = crate::error::Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<WindowSet> for Vec<f64> {
    fn from(w: WindowSet) -> Self {
        w.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorts_and_dedups() {
        let w = WindowSet::parse("50, 10,25,10").unwrap();
        assert_eq!(w.as_slice(), &[10.0, 25.0, 50.0]);
        assert!(WindowSet::parse("").is_err());
        assert!(WindowSet::parse("10,-1").is_err());
        assert!(WindowSet::parse("10,x").is_err());
    }

    #[test]
    fn restrict_drops_oversized() {
        let w = WindowSet::standard_seven();
        let (kept, dropped) = w.restrict_to_horizon(200.0);
        assert_eq!(kept.unwrap().as_slice(), &[10.0, 25.0, 50.0, 75.0, 100.0]);
        assert_eq!(dropped, vec![125.0, 150.0]);
        assert!(w.restrict_to_horizon(10.0).0.is_none());
    }
}
