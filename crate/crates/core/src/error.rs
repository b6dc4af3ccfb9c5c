use thiserror::Error;

/// Errors produced by the model, allocator, controller and simulation runner.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("rotor index {0} out of range, expected 1..=4")]
    InvalidRotorIndex(usize),

    #[error("gimbal singularity: |cos(pitch)| = {cos_pitch:e} below tolerance {tolerance:e}")]
    GimbalSingularity { cos_pitch: f64, tolerance: f64 },

    #[error("degenerate matrix: {0}")]
    DegenerateMatrix(String),

    #[error("hover infeasible: weight {weight:.4} N exceeds available vertical thrust {available:.4} N")]
    InfeasibleHover { weight: f64, available: f64 },

    #[error("degenerate thrust direction: |f| = {magnitude:e} N")]
    DegenerateDirection { magnitude: f64 },

    #[error("integration diverged at t = {time:.6} s")]
    Divergence { time: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mission: {0}")]
    Mission(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("empty telemetry")]
    EmptyTelemetry,

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
