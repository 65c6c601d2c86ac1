// SPDX-License-Identifier: MIT OR Apache-2.0

//! Multiple filter test (MFT) and multiple filter algorithm (MFA) for rate
//! change points in point processes whose life time variance may vary.
//!
//! The pipeline is: calibrate the threshold on the Gaussian limit process
//! ([`limit::calibrate`]), compute the filtered derivative processes of the
//! data and test ([`mft::run_test`]), then estimate change points
//! ([`cpd::detect`]).

pub mod bootstrap;
pub mod counting;
pub mod cpd;
pub mod error;
pub mod filtered_derivative;
pub mod limit;
pub mod mft;
pub mod process_sim;
pub mod rng;
pub mod series;
pub mod stats;
pub mod step;
pub mod window;

pub use error::{Error, Result};
pub use limit::{calibrate, LimitCalibration};
pub use mft::{run_test, Decision, TestResult};
pub use series::EventSeries;
pub use step::StepProcess;
pub use window::WindowSet;
