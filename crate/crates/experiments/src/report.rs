// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// How a cell estimate is judged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Check {
    /// Reported only.
    Info,
    /// `|estimate - target| <= max(tolerance, 3 SE)`.
    Near {
        target: f64,
        tolerance: f64,
    },
    /// `lo <= estimate <= hi`.
    Range {
        lo: f64,
        hi: f64,
    },
    AtLeast {
        bound: f64,
    },
    AtMost {
        bound: f64,
    },
    /// Qualitative statement evaluated by the experiment itself.
    Holds {
        holds: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub label: String,
    pub estimate: f64,
    /// Monte Carlo standard error, `NaN` where not applicable.
    pub se: f64,
    pub n: usize,
    pub check: Check,
}

impl Cell {
    pub fn info(label: impl Into<String>, estimate: f64, se: f64, n: usize) -> Self {
        Self {
            label: label.into(),
            estimate,
            se,
            n,
            check: Check::Info,
        }
    }

    /// A proportion `successes / n` with its binomial standard error.
    pub fn proportion(label: impl Into<String>, successes: usize, n: usize) -> Self {
        let p = successes as f64 / n as f64;
        Self::info(label, p, proportion_se(p, n), n)
    }

    pub fn with_check(mut self, check: Check) -> Self {
        self.check = check;
        self
    }

    /// `None` for informational cells.
    pub fn pass(&self) -> Option<bool> {
        let e = self.estimate;
        match self.check {
            Check::Info => None,
            Check::Near { target, tolerance } => Some((e - target).abs() <= tolerance),
            Check::Range { lo, hi } => Some(e >= lo && e <= hi),
            Check::AtLeast { bound } => Some(e >= bound),
            Check::AtMost { bound } => Some(e <= bound),
            Check::Holds { holds } => Some(holds),
        }
    }
}

pub fn proportion_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let (m, v) = mft_core::stats::mean_var(xs);
    (m, (v / xs.len() as f64).sqrt())
}

/// Plot-ready table emitted as CSV.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn num(x: f64) -> String {
    mft_core::step::format_significant(x, 6)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub spec: crate::ExperimentSpec,
    pub cells: Vec<Cell>,
    pub table: Table,
    pub notes: Vec<String>,
    /// Wall-clock seconds; the only field that varies between identical runs.
    pub runtime_secs: f64,
}

impl ExperimentReport {
    pub fn cell(&self, label: &str) -> Option<&Cell> {
        self.cells.iter().find(|c| c.label == label)
    }

    /// True when no checked cell fails.
    pub fn passed(&self) -> bool {
        self.cells.iter().all(|c| c.pass() != Some(false))
    }

    pub fn cells_csv(&self) -> String {
        let mut out = String::from("label,estimate,se,n,check,pass\n");
        for c in &self.cells {
            let check = match c.check {
                Check::Info => "info".to_string(),
                Check::Near { target, tolerance } => format!("near {target} +- {tolerance}"),
                Check::Range { lo, hi } => format!("in [{lo} {hi}]"),
                Check::AtLeast { bound } => format!(">= {bound}"),
                Check::AtMost { bound } => format!("<= {bound}"),
                Check::Holds { .. } => "holds".to_string(),
            };
            let pass = c.pass().map_or(String::new(), |p| p.to_string());
            writeln!(
                out,
                "{},{},{},{},{},{}",
                c.label,
                num(c.estimate),
                num(c.se),
                c.n,
                check,
                pass
            )
            .unwrap();
        }
        out
    }

    /// Human readable verdict lines.
    pub fn summary(&self) -> String {
        let mut out = format!("== {} ({:.1}s)\n", self.name, self.runtime_secs);
        for c in &self.cells {
            let verdict = match c.pass() {
                None => "    ",
                Some(true) => "PASS",
                Some(false) => "FAIL",
            };
            writeln!(
                out,
                "  [{verdict}] {:<44} {:>10} (se {}, n {})",
                c.label,
                num(c.estimate),
                num(c.se),
                c.n
            )
            .unwrap();
        }
        for n in &self.notes {
            writeln!(out, "  note: {n}").unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn near_ignores_the_standard_error() {
        let c = Cell::info("x", 0.059, 0.02, 100).with_check(Check::Near {
            target: 0.05,
            tolerance: 0.01,
        });
        assert_eq!(c.pass(), Some(true));
        let c = Cell::info("x", 0.061, 0.5, 100).with_check(Check::Near {
            target: 0.05,
            tolerance: 0.01,
        });
        assert_eq!(c.pass(), Some(false));
    }

    #[test]
    fn proportion_carries_se() {
        let c = Cell::proportion("p", 25, 100);
        assert_eq!(c.estimate, 0.25);
        assert!((c.se - (0.25f64 * 0.75 / 100.0).sqrt()).abs() < 1e-15);
    }
}
