// SPDX-License-Identifier: MIT OR Apache-2.0

//! Simulation studies for the multiple filter test.
//!
//! Each study is a pure function of its [`ExperimentSpec`]: the same spec
//! gives the same report apart from `runtime_secs`.

mod report;
mod studies;

use std::fmt;
use std::str::FromStr;

use mft_core::process_sim::{ChangePointModel, GammaLaw, RandomChangePointModel};
use mft_core::{Error, Result, WindowSet};
use serde::{Deserialize, Serialize};

pub use report::{mean_se, proportion_se, Cell, Check, ExperimentReport, Table};
pub use studies::{
    run_multiwindow_study, run_q_sweep, run_significance_heatmap, run_table1, run_table2,
    run_worked_example,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    QSweep,
    Significance,
    Table1,
    Table2,
    Multiwindow,
    WorkedExample,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        Self::QSweep,
        Self::Significance,
        Self::Table1,
        Self::Table2,
        Self::Multiwindow,
        Self::WorkedExample,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::QSweep => "q-sweep",
            Self::Significance => "significance",
            Self::Table1 => "table1",
            Self::Table2 => "table2",
            Self::Multiwindow => "multiwindow",
            Self::WorkedExample => "worked-example",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = mft_core::Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|k| k.name()).collect();
                invalid(format!(
                    "unknown experiment {s:?}; expected one of {names:?}"
                ))
            })
    }
}

/// Replicate budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    /// Reduced replicate counts that run in minutes on a laptop.
    Desk,
    /// Replicate counts of the original studies.
    Full,
}

/// Model and sweep parameters of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Model {
    QSweep {
        horizons: Vec<f64>,
        /// Windows tried alone and paired with the smallest one.
        single_windows: Vec<f64>,
        pair_windows: Vec<f64>,
    },
    Significance {
        /// Log-spaced life time means, inclusive.
        mu_range: (f64, f64),
        /// Log-spaced life time standard deviations, inclusive.
        sigma_range: (f64, f64),
        size: usize,
    },
    Table1 {
        first: GammaLaw,
        second: GammaLaw,
        grids: Vec<usize>,
    },
    Table2 {
        before: GammaLaw,
        /// Gamma rate parameters after the change; equal to `before.rate` gives a null row.
        after_rates: Vec<f64>,
        change_point: f64,
    },
    Multiwindow {
        model: RandomChangePointModel,
        single_windows: Vec<f64>,
        /// Width of the moving average over the single window curve.
        smoothing: usize,
    },
    WorkedExample {
        model: ChangePointModel,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: ExperimentKind,
    pub model: Model,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "H")]
    pub windows: Vec<f64>,
    pub alpha: f64,
    pub n_replicates: usize,
    /// Limit process draws per calibration.
    pub n_sims: usize,
    /// Permutations per bootstrap test.
    pub n_perms: usize,
    /// `None` selects the default calibration grid.
    pub grid_step: Option<f64>,
    pub seed: u64,
    pub scale: Scale,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

fn step_range(from: usize, to: usize, step: usize) -> Vec<f64> {
    (from..=to).step_by(step).map(|h| h as f64).collect()
}

impl ExperimentSpec {
    /// Default spec of `kind` at `scale`.
    pub fn new(kind: ExperimentKind, scale: Scale) -> Self {
        let full = scale == Scale::Full;
        let h7 = WindowSet::standard_seven().as_slice().to_vec();
        let (model, windows, n_replicates, n_perms) = match kind {
            ExperimentKind::QSweep => {
                let mut pair_windows = step_range(11, 15, 1);
                pair_windows.extend(step_range(20, 150, 5));
                (
                    Model::QSweep {
                        horizons: vec![200.0, 700.0, 1400.0],
                        single_windows: h7.clone(),
                        pair_windows,
                    },
                    h7,
                    0,
                    0,
                )
            }
            ExperimentKind::Significance => (
                Model::Significance {
                    mu_range: (0.02, 0.2),
                    sigma_range: (0.004, 0.04),
                    size: 10,
                },
                h7,
                if full { 10_000 } else { 1000 },
                0,
            ),
            ExperimentKind::Table1 => (
                Model::Table1 {
                    first: GammaLaw {
                        shape: 0.5,
                        rate: 15.0,
                    },
                    second: GammaLaw {
                        shape: 5.0,
                        rate: 150.0,
                    },
                    grids: vec![5000, 10_000, 20_000],
                },
                h7,
                if full { 1000 } else { 300 },
                if full { 1000 } else { 300 },
            ),
            ExperimentKind::Table2 => (
                Model::Table2 {
                    before: GammaLaw {
                        shape: 2.0,
                        rate: 24.0,
                    },
                    after_rates: vec![24.0, 25.0, 26.0, 28.0, 30.0],
                    change_point: 350.0,
                },
                h7,
                if full { 10_000 } else { 1000 },
                0,
            ),
            ExperimentKind::Multiwindow => (
                Model::Multiwindow {
                    model: RandomChangePointModel::default(),
                    single_windows: step_range(10, 100, 1),
                    smoothing: 5,
                },
                step_range(10, 150, 5),
                if full { 1000 } else { 300 },
                0,
            ),
            ExperimentKind::WorkedExample => (
                Model::WorkedExample {
                    model: ChangePointModel::three_change_points(),
                },
                h7,
                if full { 1000 } else { 200 },
                0,
            ),
        };
        Self {
            name: kind,
            model,
            horizon: 700.0,
            windows,
            alpha: 0.05,
            n_replicates,
            n_sims: mft_core::limit::DEFAULT_SIMS,
            n_perms,
            grid_step: None,
            seed: 20_240_101,
            scale,
        }
    }

    pub fn window_set(&self) -> Result<WindowSet> {
        WindowSet::new(self.windows.clone())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        let needs_replicates = !matches!(self.model, Model::QSweep { .. });
        if needs_replicates && self.n_replicates < 100 {
            return Err(invalid(format!(
                "reported proportions need at least 100 replicates, got {}",
                self.n_replicates
            )));
        }
        if self.n_sims < 2 {
            return Err(invalid("need at least 2 calibration draws"));
        }
        let kind_matches = matches!(
            (&self.model, self.name),
            (Model::QSweep { .. }, ExperimentKind::QSweep)
                | (Model::Significance { .. }, ExperimentKind::Significance)
                | (Model::Table1 { .. }, ExperimentKind::Table1)
                | (Model::Table2 { .. }, ExperimentKind::Table2)
                | (Model::Multiwindow { .. }, ExperimentKind::Multiwindow)
                | (Model::WorkedExample { .. }, ExperimentKind::WorkedExample)
        );
        if !kind_matches {
            return Err(invalid(format!("model does not belong to {}", self.name)));
        }
        self.window_set().map(|_| ())
    }
}

/// Runs the study named by `spec.name`.
pub fn run(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    match spec.name {
        ExperimentKind::QSweep => run_q_sweep(spec),
        ExperimentKind::Significance => run_significance_heatmap(spec),
        ExperimentKind::Table1 => run_table1(spec),
        ExperimentKind::Table2 => run_table2(spec),
        ExperimentKind::Multiwindow => run_multiwindow_study(spec),
        ExperimentKind::WorkedExample => run_worked_example(spec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
        }
        assert!("fig9".parse::<ExperimentKind>().is_err());
    }

    #[test]
    fn default_specs_validate() {
        for k in ExperimentKind::ALL {
            for s in [Scale::Desk, Scale::Full] {
                ExperimentSpec::new(k, s).validate().unwrap();
            }
        }
    }

    #[test]
    fn too_few_replicates_rejected() {
        let mut spec = ExperimentSpec::new(ExperimentKind::Table2, Scale::Desk);
        spec.n_replicates = 50;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = ExperimentSpec::new(ExperimentKind::Multiwindow, Scale::Desk);
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentSpec>(&text).unwrap(), spec);
    }
}
