//! Cascaded position and attitude control.
//!
//! The outer loop turns position error into a world-frame force demand
//! (position P into velocity PID). In [`ControlMode::Conventional`] that force
//! becomes a tilt setpoint and a body-z thrust, as on an ordinary quadrotor.
//! In [`ControlMode::Omnidirectional`] the attitude setpoint is held level and
//! the full force vector is passed to allocation in the body frame.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{self, wrap_angle, EulerAngles, Mat3, Vec3};
use crate::vehicle::{VehicleParams, VehicleState, Wrench};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ControlMode {
    /// Level attitude; translation through tilted rotors.
    #[default]
    Omnidirectional,
    /// Gimbals locked; translation by tilting the airframe.
    Conventional,
}

impl FromStr for ControlMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "omni" | "omnidirectional" => Ok(ControlMode::Omnidirectional),
            "conventional" | "conv" => Ok(ControlMode::Conventional),
            other => Err(Error::InvalidParameter(format!("unknown control mode `{other}`"))),
        }
    }
}

impl fmt::Display for ControlMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ControlMode::Omnidirectional => "omni",
            ControlMode::Conventional => "conventional",
        })
    }
}

/// One PID channel. `integral_limit` bounds the integrator's contribution
/// to the output (`|i * ∫e| ≤ integral_limit`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidGains {
    pub p: f64,
    pub i: f64,
    pub d: f64,
    pub integral_limit: f64,
}

impl PidGains {
    pub const fn new(p: f64, i: f64, d: f64, integral_limit: f64) -> Self {
        Self {
            p,
            i,
            d,
            integral_limit,
        }
    }

    pub const fn p_only(p: f64) -> Self {
        Self::new(p, 0.0, 0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerGains {
    /// Position error to velocity setpoint, 1/s.
    pub pos_p: Vec3,
    /// Velocity loop; output is acceleration in m/s².
    pub vel: [PidGains; 3],
    /// Attitude error to body-rate setpoint, 1/s.
    pub att_p: Vec3,
    /// Rate loop; output is angular acceleration in rad/s², scaled by inertia.
    pub rate: [PidGains; 3],
    /// m/s
    pub max_velocity_xy: f64,
    pub max_velocity_z: f64,
    /// m/s²
    pub max_accel_xy: f64,
    pub max_accel_z: f64,
    /// rad/s
    pub max_rate: f64,
    /// Per-axis torque clamp, N·m.
    pub torque_limit: Vec3,
}

impl Default for ControllerGains {
    fn default() -> Self {
        let vel = PidGains::new(3.0, 0.4, 0.1, 2.0);
        let rate_xy = PidGains::new(20.0, 5.0, 0.05, 20.0);
        let rate_z = PidGains::new(10.0, 2.0, 0.0, 10.0);
        Self {
            pos_p: Vec3::new(1.0, 1.0, 1.0),
            vel: [vel; 3],
            att_p: Vec3::new(6.0, 6.0, 4.0),
            rate: [rate_xy, rate_xy, rate_z],
            max_velocity_xy: 1.0,
            max_velocity_z: 0.75,
            max_accel_xy: 3.0,
            max_accel_z: 4.0,
            max_rate: 4.0,
            torque_limit: Vec3::new(2.0, 2.0, 0.5),
        }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<()> {
        let all_pid = self.vel.iter().chain(self.rate.iter());
        for g in all_pid {
            if !(g.p >= 0.0 && g.i >= 0.0 && g.d >= 0.0) {
                return Err(Error::InvalidParameter("PID gains must be non-negative".into()));
            }
            if !(g.integral_limit > 0.0) {
                return Err(Error::InvalidParameter("integrator limits must be positive".into()));
            }
        }
        if self.pos_p.iter().chain(self.att_p.iter()).any(|g| !(*g >= 0.0)) {
            return Err(Error::InvalidParameter("P gains must be non-negative".into()));
        }
        let limits = [
            self.max_velocity_xy,
            self.max_velocity_z,
            self.max_accel_xy,
            self.max_accel_z,
            self.max_rate,
        ];
        if limits.iter().chain(self.torque_limit.iter()).any(|l| !(*l > 0.0)) {
            return Err(Error::InvalidParameter("controller limits must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Setpoint {
    /// World frame, m.
    pub position: Vec3,
    pub yaw: f64,
    /// World-frame velocity feed-forward, m/s.
    pub velocity: Option<Vec3>,
    /// World-frame acceleration feed-forward, m/s².
    pub acceleration: Option<Vec3>,
}

impl Setpoint {
    pub fn at(position: Vec3) -> Self {
        Self {
            position,
            ..Self::default()
        }
    }
}

/// Three independent PID channels with derivative on measurement.
#[derive(Debug, Clone, Default)]
struct PidAxes {
    integral: Vec3,
    prev_measurement: Option<Vec3>,
}

impl PidAxes {
    fn update(&mut self, gains: &[PidGains; 3], error: Vec3, measurement: Vec3, dt: f64) -> Vec3 {
        let rate = match self.prev_measurement {
            Some(prev) => (measurement - prev) / dt,
            None => Vec3::zeros(),
        };
        self.prev_measurement = Some(measurement);
        let mut out = Vec3::zeros();
        for k in 0..3 {
            let g = &gains[k];
            if g.i > 0.0 {
                let bound = g.integral_limit / g.i;
                self.integral[k] = (self.integral[k] + error[k] * dt).clamp(-bound, bound);
            } else {
                self.integral[k] = 0.0;
            }
            out[k] = g.p * error[k] + g.i * self.integral[k] - g.d * rate[k];
        }
        out
    }
}

fn clamp_norm(v: Vec3, max: f64) -> Vec3 {
    let n = v.norm();
    if n > max {
        v * (max / n)
    } else {
        v
    }
}

fn clamp_horizontal(v: Vec3, max_xy: f64, max_z: f64) -> Vec3 {
    let xy = clamp_norm(Vec3::new(v.x, v.y, 0.0), max_xy);
    Vec3::new(xy.x, xy.y, v.z.clamp(-max_z, max_z))
}

/// Outer loop: world-frame force demand from a position setpoint.
#[derive(Debug, Clone, Default)]
pub struct PositionController {
    velocity_pid: PidAxes,
}

impl PositionController {
    pub fn new() -> Self {
        Self::default()
    }

    /// Integrator contribution of the velocity loop, m/s².
    pub fn integral_output(&self, gains: &ControllerGains) -> Vec3 {
        Vec3::from_fn(|k, _| gains.vel[k].i * self.velocity_pid.integral[k])
    }

    pub fn update(
        &mut self,
        sp: &Setpoint,
        state: &VehicleState,
        gains: &ControllerGains,
        params: &VehicleParams,
        dt: f64,
    ) -> Vec3 {
        let mut velocity_sp = gains.pos_p.component_mul(&(sp.position - state.position));
        if let Some(ff) = sp.velocity {
            velocity_sp += ff;
        }
        let velocity_sp = clamp_horizontal(velocity_sp, gains.max_velocity_xy, gains.max_velocity_z);
        let accel = self.velocity_pid.update(
            &gains.vel,
            velocity_sp - state.velocity,
            state.velocity,
            dt,
        ) + sp.acceleration.unwrap_or_else(Vec3::zeros);
        let accel = clamp_horizontal(accel, gains.max_accel_xy, gains.max_accel_z);
        let force = params.mass * (accel - geometry::gravity());
        clamp_norm(force, 4.0 * params.thrust_max)
    }
}

/// Attitude setpoint for a force demand.
///
/// Omnidirectional mode always returns level attitude. Conventional mode
/// aligns body z with the demanded force at the commanded yaw.
pub fn attitude_setpoint(
    mode: ControlMode,
    force: &Vec3,
    yaw: f64,
    params: &VehicleParams,
) -> Result<EulerAngles> {
    match mode {
        ControlMode::Omnidirectional => Ok(EulerAngles::ZERO),
        ControlMode::Conventional => {
            let magnitude = force.norm();
            if !(magnitude >= 1e-6 * params.weight()) {
                return Err(Error::DegenerateDirection { magnitude });
            }
            let z_b = force / magnitude;
            let y_c = Vec3::new(-yaw.sin(), yaw.cos(), 0.0);
            let mut x_b = y_c.cross(&z_b);
            if x_b.norm() < 1e-9 {
                // thrust horizontal along the yaw side axis
                x_b = Vec3::new(0.0, 0.0, 1.0).cross(&z_b);
            }
            let x_b = x_b.normalize();
            let y_b = z_b.cross(&x_b);
            let r = Mat3::from_columns(&[x_b, y_b, z_b]);
            Ok(geometry::rotation_to_euler(&r))
        }
    }
}

/// Attitude error with each component wrapped onto the shortest path.
pub fn attitude_error(setpoint: &EulerAngles, attitude: &EulerAngles) -> Vec3 {
    Vec3::new(
        wrap_angle(setpoint.roll - attitude.roll),
        wrap_angle(setpoint.pitch - attitude.pitch),
        wrap_angle(setpoint.yaw - attitude.yaw),
    )
}

/// Inner loop: body torque from an attitude setpoint.
#[derive(Debug, Clone, Default)]
pub struct AttitudeController {
    rate_pid: PidAxes,
}

impl AttitudeController {
    pub fn new() -> Self {
        Self::default()
    }

    /// Integrator contribution of the rate loop, rad/s².
    pub fn integral_output(&self, gains: &ControllerGains) -> Vec3 {
        Vec3::from_fn(|k, _| gains.rate[k].i * self.rate_pid.integral[k])
    }

    pub fn update(
        &mut self,
        setpoint: &EulerAngles,
        state: &VehicleState,
        gains: &ControllerGains,
        params: &VehicleParams,
        dt: f64,
    ) -> Vec3 {
        let error = attitude_error(setpoint, &state.attitude);
        let rate_sp = gains
            .att_p
            .component_mul(&error)
            .map(|r| r.clamp(-gains.max_rate, gains.max_rate));
        let accel = self
            .rate_pid
            .update(&gains.rate, rate_sp - state.body_rate, state.body_rate, dt);
        let torque = params.inertia * accel;
        Vec3::from_fn(|k, _| torque[k].clamp(-gains.torque_limit[k], gains.torque_limit[k]))
    }
}

/// Body-frame wrench setpoint from a world-frame force and body torque.
pub fn compose_wrench(mode: ControlMode, force: &Vec3, torque: &Vec3, state: &VehicleState) -> Wrench {
    let body_force = match mode {
        ControlMode::Omnidirectional => state.attitude.to_rotation().transpose() * force,
        ControlMode::Conventional => Vec3::new(0.0, 0.0, force.norm()),
    };
    Wrench::new(*torque, body_force)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlOutput {
    pub force: Vec3,
    pub attitude_setpoint: EulerAngles,
    pub wrench: Wrench,
}

/// Full cascade with its integrator state.
#[derive(Debug, Clone)]
pub struct Controller {
    pub mode: ControlMode,
    pub gains: ControllerGains,
    pub position: PositionController,
    pub attitude: AttitudeController,
}

impl Controller {
    pub fn new(mode: ControlMode, gains: ControllerGains) -> Self {
        Self {
            mode,
            gains,
            position: PositionController::new(),
            attitude: AttitudeController::new(),
        }
    }

    pub fn update(
        &mut self,
        sp: &Setpoint,
        state: &VehicleState,
        params: &VehicleParams,
        dt: f64,
    ) -> Result<ControlOutput> {
        let force = self.position.update(sp, state, &self.gains, params, dt);
        let attitude_sp = attitude_setpoint(self.mode, &force, sp.yaw, params)?;
        let torque = self
            .attitude
            .update(&attitude_sp, state, &self.gains, params, dt);
        Ok(ControlOutput {
            force,
            attitude_setpoint: attitude_sp,
            wrench: compose_wrench(self.mode, &force, &torque, state),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const DT: f64 = 0.004;

    fn params() -> VehicleParams {
        VehicleParams::default()
    }

    fn p_only() -> ControllerGains {
        ControllerGains {
            pos_p: Vec3::new(1.0, 1.0, 1.0),
            vel: [PidGains::p_only(2.0); 3],
            att_p: Vec3::new(1.0, 1.0, 1.0),
            rate: [PidGains::p_only(1.0); 3],
            max_velocity_xy: 100.0,
            max_velocity_z: 100.0,
            max_accel_xy: 100.0,
            max_accel_z: 100.0,
            max_rate: 100.0,
            torque_limit: Vec3::new(100.0, 100.0, 100.0),
        }
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("omni".parse::<ControlMode>().unwrap(), ControlMode::Omnidirectional);
        assert_eq!("Conventional".parse::<ControlMode>().unwrap(), ControlMode::Conventional);
        assert!("hex".parse::<ControlMode>().is_err());
        assert_eq!(ControlMode::Conventional.to_string(), "conventional");
    }

    #[test]
    fn at_setpoint_only_gravity_compensation() {
        let p = params();
        let state = VehicleState::at_rest(Vec3::new(0.5, 0.5, 1.5));
        let f = PositionController::new().update(
            &Setpoint::at(state.position),
            &state,
            &ControllerGains::default(),
            &p,
            DT,
        );
        assert_abs_diff_eq!(f, Vec3::new(0.0, 0.0, p.mass * 9.81), epsilon = 1e-12);
    }

    #[test]
    fn p_cascade_arithmetic() {
        let p = params();
        let state = VehicleState::at_rest(Vec3::zeros());
        let f = PositionController::new().update(
            &Setpoint::at(Vec3::new(1.0, 0.0, 0.0)),
            &state,
            &p_only(),
            &p,
            DT,
        );
        assert_abs_diff_eq!(f.x, 2.0 * p.mass, epsilon = 1e-12);
    }

    #[test]
    fn force_clamped_to_thrust_envelope() {
        let p = params();
        let state = VehicleState::at_rest(Vec3::zeros());
        let f = PositionController::new().update(
            &Setpoint::at(Vec3::new(100.0, 0.0, 30.0)),
            &state,
            &p_only(),
            &p,
            DT,
        );
        assert_abs_diff_eq!(f.norm(), 4.0 * p.thrust_max, epsilon = 1e-9);
        assert!(f.x > 0.0 && f.z > 0.0);
        // direction preserved: x/z ratio matches the unclamped demand
        // horizontal demand of 200 m/s² is first cut to max_accel_xy
        let a_x = 100.0;
        let a_z = 2.0 * 30.0 + 9.81;
        assert_abs_diff_eq!(f.x / f.z, a_x / a_z, epsilon = 1e-9);
    }

    #[test]
    fn attitude_setpoint_examples() {
        let p = params();
        let mg = p.weight();
        assert_eq!(
            attitude_setpoint(ControlMode::Omnidirectional, &Vec3::new(5.0, -3.0, 1.0), 0.3, &p).unwrap(),
            EulerAngles::ZERO
        );
        let level = attitude_setpoint(ControlMode::Conventional, &Vec3::new(0.0, 0.0, mg), 0.0, &p).unwrap();
        assert_abs_diff_eq!(level.to_vector(), Vec3::zeros(), epsilon = 1e-15);

        let tilt = 10f64.to_radians();
        let eta = attitude_setpoint(
            ControlMode::Conventional,
            &Vec3::new(mg * tilt.tan(), 0.0, mg),
            0.0,
            &p,
        )
        .unwrap();
        assert_abs_diff_eq!(eta.pitch, tilt, epsilon = 1e-12);
        assert_abs_diff_eq!(eta.roll, 0.0, epsilon = 1e-12);

        let r = attitude_setpoint(ControlMode::Conventional, &Vec3::zeros(), 0.0, &p);
        assert!(matches!(r, Err(Error::DegenerateDirection { .. })));
    }

    #[test]
    fn conventional_setpoint_aligns_body_z() {
        let p = params();
        let f = Vec3::new(3.0, -2.0, 18.0);
        let eta = attitude_setpoint(ControlMode::Conventional, &f, 0.7, &p).unwrap();
        let z = eta.to_rotation().column(2).into_owned();
        assert_abs_diff_eq!(z, f.normalize(), epsilon = 1e-12);
        assert_abs_diff_eq!(eta.yaw, 0.7, epsilon = 0.05);
    }

    #[test]
    fn attitude_control_examples() {
        let p = params();
        let g = p_only();
        let state = VehicleState::default();
        let tau = AttitudeController::new().update(&EulerAngles::ZERO, &state, &g, &p, DT);
        assert_eq!(tau, Vec3::zeros());

        let err = 0.2;
        let tau = AttitudeController::new().update(&EulerAngles::new(0.0, 0.0, err), &state, &g, &p, DT);
        assert_abs_diff_eq!(tau.z, g.att_p.z * g.rate[2].p * err * p.inertia[(2, 2)], epsilon = 1e-15);
        assert_eq!(tau.x, 0.0);
        let tau = AttitudeController::new().update(&EulerAngles::new(0.0, 0.0, -err), &state, &g, &p, DT);
        assert!(tau.z < 0.0);
    }

    #[test]
    fn yaw_error_takes_short_way() {
        let e = attitude_error(
            &EulerAngles::new(0.0, 0.0, 179f64.to_radians()),
            &EulerAngles::new(0.0, 0.0, -179f64.to_radians()),
        );
        assert_abs_diff_eq!(e.z, -2f64.to_radians(), epsilon = 1e-12);
    }

    #[test]
    fn compose_examples() {
        let p = params();
        let mg = p.weight();
        let level = VehicleState::default();
        let f = Vec3::new(1.0, 0.0, mg);
        let w = compose_wrench(ControlMode::Omnidirectional, &f, &Vec3::zeros(), &level);
        assert_abs_diff_eq!(w.force, f, epsilon = 1e-15);
        let w = compose_wrench(ControlMode::Conventional, &f, &Vec3::zeros(), &level);
        assert_abs_diff_eq!(w.force, Vec3::new(0.0, 0.0, (1.0 + mg * mg).sqrt()), epsilon = 1e-12);
        let yawed = VehicleState {
            attitude: EulerAngles::new(0.0, 0.0, std::f64::consts::FRAC_PI_2),
            ..level
        };
        let w = compose_wrench(ControlMode::Omnidirectional, &f, &Vec3::zeros(), &yawed);
        assert_abs_diff_eq!(w.force, Vec3::new(0.0, -1.0, mg), epsilon = 1e-12);
    }

    #[test]
    fn zero_error_gives_hover_wrench() {
        let p = params();
        for mode in [ControlMode::Omnidirectional, ControlMode::Conventional] {
            let mut c = Controller::new(mode, ControllerGains::default());
            let state = VehicleState::at_rest(Vec3::new(0.0, 0.0, 1.5));
            let out = c.update(&Setpoint::at(state.position), &state, &p, DT).unwrap();
            assert_abs_diff_eq!(out.wrench.torque, Vec3::zeros(), epsilon = 1e-15);
            assert_abs_diff_eq!(out.wrench.force, Vec3::new(0.0, 0.0, p.weight()), epsilon = 1e-12);
        }
    }

    #[test]
    fn integrators_respect_limits_under_saturation() {
        let p = params();
        let gains = ControllerGains::default();
        let mut c = Controller::new(ControlMode::Conventional, gains.clone());
        let state = VehicleState {
            attitude: EulerAngles::new(0.5, -0.4, 1.0),
            ..VehicleState::at_rest(Vec3::zeros())
        };
        let sp = Setpoint::at(Vec3::new(50.0, -50.0, 20.0));
        for _ in 0..10_000 {
            c.update(&sp, &state, &p, DT).unwrap();
            let pi = c.position.integral_output(&gains);
            let ai = c.attitude.integral_output(&gains);
            for k in 0..3 {
                assert!(pi[k].abs() <= gains.vel[k].integral_limit + 1e-12);
                assert!(ai[k].abs() <= gains.rate[k].integral_limit + 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn omni_setpoint_always_level(x in -60.0f64..60.0, y in -60.0f64..60.0, z in -60.0f64..60.0, yaw in -3.0f64..3.0) {
            let e = attitude_setpoint(ControlMode::Omnidirectional, &Vec3::new(x, y, z), yaw, &params()).unwrap();
            prop_assert_eq!(e, EulerAngles::ZERO);
        }

        #[test]
        fn compose_preserves_magnitude(
            f in prop::array::uniform3(-30.0f64..30.0),
            r in -3.0f64..3.0, pch in -1.4f64..1.4, yw in -3.0f64..3.0,
        ) {
            let force = Vec3::from(f);
            let state = VehicleState { attitude: EulerAngles::new(r, pch, yw), ..VehicleState::default() };
            for mode in [ControlMode::Omnidirectional, ControlMode::Conventional] {
                let w = compose_wrench(mode, &force, &Vec3::zeros(), &state);
                prop_assert!((w.force.norm() - force.norm()).abs() <= 1e-12);
            }
        }
    }
}
