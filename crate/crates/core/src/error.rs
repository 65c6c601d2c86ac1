// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

/// Errors raised by the simulation, testing and detection routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("interval ({a}, {b}] is outside (0, {horizon}]")]
    IntervalOutOfRange { a: f64, b: f64, horizon: f64 },

    #[error("window {h} exceeds half the horizon {horizon}")]
    WindowTooLarge { h: f64, horizon: f64 },

    #[error("no calibration entry for window {0}")]
    MissingCalibration(f64),

    #[error("degenerate calibration: variance of limit maxima is zero for window {0}")]
    DegenerateCalibration(f64),

    #[error("calibration mismatch: {0}")]
    CalibrationMismatch(String),

    #[error("too few events: got {got}, need {need}")]
    TooFewEvents { got: usize, need: usize },

    #[error("series too sparse: {0}")]
    SeriesTooSparse(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
