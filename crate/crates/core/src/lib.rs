//! Flight dynamics, control allocation and closed-loop simulation for a
//! quadrotor whose four rotors tilt about their arm axes.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: frames, rotations and Euler-rate kinematics
//! - [`vehicle`]: rotor model, propulsive wrench, rigid-body dynamics and RK4
//! - [`allocation`]: effectiveness matrix, pseudo-inverse allocation and
//!   actuator extraction/normalisation
//! - [`control`]: cascaded position/attitude control in omnidirectional or
//!   conventional mode
//! - [`mission`]: waypoint missions and setpoint scheduling
//! - [`sim`]: configuration, deterministic runner, telemetry and metrics
//! - [`verify`]: independent oracles and self-checks

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod allocation;
pub mod control;
pub mod error;
pub mod geometry;
mod linalg;
pub mod mission;
pub mod sim;
pub mod vehicle;
pub mod verify;

pub use allocation::{
    ActuatorForces, EffectivenessMatrix, Extraction, LateralEnvelope, NormalizedOutputs,
    Saturation,
};
pub use control::{ControlMode, Controller, ControllerGains, PidGains, Setpoint};
pub use error::{Error, Result};
pub use geometry::{EulerAngles, Mat3, Vec3};
pub use mission::{Mission, MissionProgress, Waypoint};
pub use sim::{RunMetrics, SimConfig, TelemetryRecord};
pub use vehicle::{ActuatorCommands, Disturbance, ServoModel, VehicleParams, VehicleState, Wrench};
pub use verify::CheckReport;
