//! Closed-loop simulation: mission, controller, allocation and plant.

use log::{debug, info};

use crate::allocation::{extract_commands, extract_commands_locked, normalize, EffectivenessMatrix, Extraction};
use crate::control::{ControlMode, ControlOutput, Controller, Setpoint};
use crate::error::{Error, Result};
use crate::mission::{Mission, MissionProgress};
use crate::sim::config::SimConfig;
use crate::sim::metrics::{compute_metrics, RunMetrics};
use crate::sim::telemetry::TelemetryRecord;
use crate::vehicle::{servo_filter, step, ActuatorCommands, VehicleState};

/// A completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub telemetry: Vec<TelemetryRecord>,
    pub metrics: RunMetrics,
}

/// A run that stopped early, with the telemetry logged up to that point.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub telemetry: Vec<TelemetryRecord>,
    pub error: Error,
}

/// One control step's worth of internal signals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    pub record: TelemetryRecord,
    pub control: ControlOutput,
    pub extraction: Extraction,
    /// Commands sent to the plant after the servo model.
    pub applied: ActuatorCommands,
}

/// Stepwise simulation. [`run`] drives one of these to the end.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: SimConfig,
    mission: Mission,
    effectiveness: EffectivenessMatrix,
    controller: Controller,
    progress: MissionProgress,
    state: VehicleState,
    applied_tilt: [f64; 4],
    step_index: usize,
}

impl Simulation {
    pub fn new(config: SimConfig, mission: Mission) -> Result<Self> {
        config.validate()?;
        mission.validate()?;
        let effectiveness = match config.mode {
            ControlMode::Omnidirectional => EffectivenessMatrix::new(&config.params),
            ControlMode::Conventional => EffectivenessMatrix::fixed_tilt(&config.params),
        };
        Ok(Self {
            controller: Controller::new(config.mode, config.gains.clone()),
            state: VehicleState::at_rest(config.initial_position),
            effectiveness,
            progress: MissionProgress::new(),
            applied_tilt: [0.0; 4],
            step_index: 0,
            config,
            mission,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn state(&self) -> &VehicleState {
        &self.state
    }

    pub fn set_state(&mut self, state: VehicleState) {
        self.state = state;
    }

    pub fn progress(&self) -> &MissionProgress {
        &self.progress
    }

    /// Time of the next control step.
    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.config.control_dt
    }

    /// Setpoint during takeoff: a vertical climb to the mission altitude
    /// along a smoothstep profile, with velocity and acceleration feed-forward.
    fn takeoff_setpoint(&self, t: f64) -> Setpoint {
        let start = self.config.initial_position;
        let target = crate::geometry::Vec3::new(start.x, start.y, self.mission.takeoff_altitude);
        let span = self.config.takeoff_duration;
        let s = (t / span).clamp(0.0, 1.0);
        Setpoint {
            position: start + (target - start) * (s * s * (3.0 - 2.0 * s)),
            yaw: 0.0,
            velocity: Some((target - start) * (6.0 * s * (1.0 - s) / span)),
            acceleration: Some((target - start) * (6.0 * (1.0 - 2.0 * s) / (span * span))),
        }
    }

    /// Runs the control law against the current state and logs it, without
    /// advancing the plant.
    pub fn control(&mut self) -> Result<StepOutput> {
        let t = self.time();
        let cfg = &self.config;
        let params = &cfg.params;

        let sp = if t < cfg.takeoff_duration {
            self.takeoff_setpoint(t)
        } else {
            let before = self.progress.index;
            let sp = self.progress.current_setpoint(&self.mission, &self.state, t);
            if self.progress.index != before {
                debug!("t={t:.3} waypoint {} -> {}", before + 1, self.progress.index + 1);
            }
            sp
        };

        let control = self.controller.update(&sp, &self.state, params, cfg.control_dt)?;
        let u = self.effectiveness.allocate(&control.wrench);
        let extraction = match cfg.mode {
            ControlMode::Omnidirectional => extract_commands(&u, params),
            ControlMode::Conventional => extract_commands_locked(&u, params),
        };
        let mut applied = extraction.commands;
        applied.beta = servo_filter(applied.beta, self.applied_tilt, cfg.control_dt, cfg.servo_model);
        self.applied_tilt = applied.beta;

        let outputs = normalize(&applied, params);
        let record = TelemetryRecord {
            t,
            position: self.state.position,
            attitude: self.state.attitude,
            velocity: self.state.velocity,
            body_rate: self.state.body_rate,
            setpoint: sp.position,
            omega: applied.omega,
            beta: applied.beta,
            motor: outputs.motor,
            servo: outputs.servo,
            saturation: extraction.saturation.merge(&outputs.saturated),
            waypoint: self.progress.index,
            complete: self.progress.complete,
        };
        Ok(StepOutput {
            record,
            control,
            extraction,
            applied,
        })
    }

    /// Integrates the plant over one control period with `cmds` held.
    pub fn advance(&mut self, cmds: &ActuatorCommands) -> Result<()> {
        let cfg = &self.config;
        let t0 = self.time();
        let mut s = self.state;
        for k in 0..cfg.substeps() {
            s = step(&s, cmds, &cfg.disturbance, &cfg.params, cfg.physics_dt).map_err(|e| match e {
                Error::Divergence { .. } => Error::Divergence {
                    time: t0 + (k + 1) as f64 * cfg.physics_dt,
                },
                other => other,
            })?;
        }
        self.state = s;
        self.step_index += 1;
        Ok(())
    }
}

/// Runs the mission for the configured duration. Telemetry has one row per
/// control step at `t = k · control_dt`, including both end points.
pub fn run(config: &SimConfig, mission: &Mission) -> std::result::Result<RunOutput, RunFailure> {
    let fail = |telemetry, error| RunFailure { telemetry, error };
    let mut sim = Simulation::new(config.clone(), mission.clone()).map_err(|e| fail(Vec::new(), e))?;
    let rows = config.control_steps();
    let mut telemetry = Vec::with_capacity(rows);
    for k in 0..rows {
        let out = match sim.control() {
            Ok(out) => out,
            Err(e) => return Err(fail(telemetry, e)),
        };
        telemetry.push(out.record);
        if k + 1 == rows {
            break;
        }
        if let Err(e) = sim.advance(&out.applied) {
            return Err(fail(telemetry, e));
        }
    }
    let metrics = compute_metrics(&telemetry, config.takeoff_duration).map_err(|e| fail(Vec::new(), e))?;
    info!(
        "run finished: {} rows, rms error {:.4} m, completion {:?}",
        telemetry.len(),
        metrics.rms_position_error,
        metrics.completion_time
    );
    Ok(RunOutput { telemetry, metrics })
}
