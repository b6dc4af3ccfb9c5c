//! Summary statistics over a telemetry stream.

use std::fmt;

use crate::error::{Error, Result};
use crate::sim::telemetry::TelemetryRecord;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunMetrics {
    /// RMS distance to the position setpoint, m.
    pub rms_position_error: f64,
    /// rad
    pub max_abs_roll: f64,
    /// rad
    pub max_abs_pitch: f64,
    /// Largest |yaw|, rad.
    pub yaw_excursion: f64,
    /// Mean normalised motor output.
    pub mean_motor: f64,
    pub max_motor: f64,
    /// Fraction of rows with any saturated channel.
    pub saturated_fraction: f64,
    /// Time the mission completed, s.
    pub completion_time: Option<f64>,
    /// Rows the statistics cover.
    pub samples: usize,
}

impl RunMetrics {
    pub fn max_tilt(&self) -> f64 {
        self.max_abs_roll.max(self.max_abs_pitch)
    }
}

/// Metrics over rows with `t >= window_start`. The mission completion time
/// is taken from the whole stream. If no row lies in the window every row
/// is used.
pub fn compute_metrics(telemetry: &[TelemetryRecord], window_start: f64) -> Result<RunMetrics> {
    if telemetry.is_empty() {
        return Err(Error::EmptyTelemetry);
    }
    let mut rows: Vec<&TelemetryRecord> = telemetry.iter().filter(|r| r.t >= window_start - 1e-9).collect();
    if rows.is_empty() {
        rows = telemetry.iter().collect();
    }
    let n = rows.len() as f64;
    let mut m = RunMetrics {
        samples: rows.len(),
        completion_time: telemetry.iter().find(|r| r.complete).map(|r| r.t),
        ..RunMetrics::default()
    };
    let mut sq = 0.0;
    let mut motor_sum = 0.0;
    let mut saturated = 0usize;
    for r in &rows {
        sq += (r.position - r.setpoint).norm_squared();
        m.max_abs_roll = m.max_abs_roll.max(r.attitude.roll.abs());
        m.max_abs_pitch = m.max_abs_pitch.max(r.attitude.pitch.abs());
        m.yaw_excursion = m.yaw_excursion.max(r.attitude.yaw.abs());
        motor_sum += r.motor.iter().sum::<f64>() / 4.0;
        m.max_motor = r.motor.iter().fold(m.max_motor, |a, &b| a.max(b));
        if r.saturation.any() {
            saturated += 1;
        }
    }
    m.rms_position_error = (sq / n).sqrt();
    m.mean_motor = motor_sum / n;
    m.saturated_fraction = saturated as f64 / n;
    Ok(m)
}

impl fmt::Display for RunMetrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "samples = {}", self.samples)?;
        writeln!(f, "rms_position_error_m = {:.6}", self.rms_position_error)?;
        writeln!(f, "max_abs_roll_deg = {:.4}", self.max_abs_roll.to_degrees())?;
        writeln!(f, "max_abs_pitch_deg = {:.4}", self.max_abs_pitch.to_degrees())?;
        writeln!(f, "yaw_excursion_deg = {:.4}", self.yaw_excursion.to_degrees())?;
        writeln!(f, "mean_motor = {:.5}", self.mean_motor)?;
        writeln!(f, "max_motor = {:.5}", self.max_motor)?;
        writeln!(f, "saturated_fraction = {:.5}", self.saturated_fraction)?;
        match self.completion_time {
            Some(t) => write!(f, "completion_time_s = {t:.3}"),
            None => write!(f, "completion_time_s = none"),
        }
    }
}
