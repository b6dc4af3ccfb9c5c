//! Fixed-step closed-loop simulation.
//!
//! The plant is integrated with RK4 at `physics_dt`; the controller,
//! allocator and servo model run every `control_dt` and hold their outputs
//! in between. Runs are deterministic: the same configuration and mission
//! produce bit-identical telemetry.

pub mod config;
pub mod metrics;
pub mod runner;
pub mod telemetry;

pub use config::{load_config, parse_config, SimConfig, CONFIG_KEYS};
pub use metrics::{compute_metrics, RunMetrics};
pub use runner::{run, RunFailure, RunOutput, Simulation, StepOutput};
pub use telemetry::{parse_telemetry, write_telemetry, TelemetryRecord, TelemetryWriter};
