//! Rotor model, propulsive wrench and rigid-body dynamics.

use std::f64::consts::FRAC_1_SQRT_2;
use std::ops::{Add, Mul, Sub};

use nalgebra::Vector6;

use crate::error::{Error, Result};
use crate::geometry::{self, EulerAngles, Mat3, Vec3};

/// Rotor spin direction: rotors 1 and 2 spin positive, 3 and 4 negative.
pub const ROTOR_SPIN_SIGN: [f64; 4] = [1.0, 1.0, -1.0, -1.0];

// Torque sign of each rotor's vertical force about body x, y and z.
pub(crate) const ROLL_SIGN: [f64; 4] = [-1.0, 1.0, 1.0, -1.0];
pub(crate) const PITCH_SIGN: [f64; 4] = [-1.0, 1.0, -1.0, 1.0];
pub(crate) const YAW_SIGN: [f64; 4] = [-1.0, -1.0, 1.0, 1.0];

/// Largest physics step accepted by [`step`].
pub const MAX_STEP: f64 = 0.010;

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleParams {
    /// kg
    pub mass: f64,
    /// kg·m², body frame
    pub inertia: Mat3,
    /// m, centre of mass to rotor hub
    pub arm_length: f64,
    /// N·s²/rad²
    pub k_thrust: f64,
    /// Reaction-torque to thrust ratio, m.
    pub k_torque: f64,
    /// N·s/m
    pub drag_translational: Mat3,
    /// N·m·s/rad
    pub drag_rotational: Mat3,
    /// Apply translational drag in the body frame instead of the world frame.
    pub body_frame_drag: bool,
    /// rad
    pub beta_max: f64,
    /// N per rotor
    pub thrust_max: f64,
    /// rad/s
    pub omega_rotor_max: f64,
    /// rad/s
    pub servo_rate_max: f64,
    /// Constant additive servo trim, rad, applied to normalised outputs only.
    pub servo_trim: [f64; 4],
}

impl Default for VehicleParams {
    fn default() -> Self {
        let k_thrust = 1.0e-5;
        let thrust_max = 13.0;
        Self {
            mass: 2.045,
            inertia: Mat3::from_diagonal(&Vec3::new(0.02, 0.02, 0.04)),
            arm_length: 0.25,
            k_thrust,
            k_torque: 0.016,
            drag_translational: Mat3::identity() * 0.10,
            drag_rotational: Mat3::identity() * 0.01,
            body_frame_drag: false,
            beta_max: 40f64.to_radians(),
            thrust_max,
            omega_rotor_max: (thrust_max / k_thrust).sqrt(),
            servo_rate_max: 20.94,
            servo_trim: [0.0; 4],
        }
    }
}

impl VehicleParams {
    pub fn weight(&self) -> f64 {
        self.mass * geometry::GRAVITY
    }

    /// Same vehicle with drag removed.
    pub fn without_drag(&self) -> Self {
        Self {
            drag_translational: Mat3::zeros(),
            drag_rotational: Mat3::zeros(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return bad("mass must be positive");
        }
        if (self.inertia - self.inertia.transpose()).abs().max() > 1e-12
            || self.inertia.cholesky().is_none()
        {
            return bad("inertia must be symmetric positive definite");
        }
        if !(self.arm_length > 0.0) {
            return bad("arm_length must be positive");
        }
        if !(self.k_thrust > 0.0) {
            return bad("k_thrust must be positive");
        }
        if !(self.k_torque >= 0.0) {
            return bad("k_torque must be non-negative");
        }
        for d in [&self.drag_translational, &self.drag_rotational] {
            if (0..3).any(|i| !(d[(i, i)] >= 0.0)) || d.iter().any(|x| !x.is_finite()) {
                return bad("drag diagonals must be non-negative");
            }
        }
        // beta_max = 0 is accepted so that envelope sweeps can start from a locked gimbal.
        if !(self.beta_max >= 0.0 && self.beta_max <= 40f64.to_radians() + 1e-12) {
            return bad("beta_max must lie in [0, 40] degrees");
        }
        if !(self.thrust_max > 0.0) {
            return bad("thrust_max must be positive");
        }
        if !(self.omega_rotor_max > 0.0) {
            return bad("omega_rotor_max must be positive");
        }
        if !(self.servo_rate_max > 0.0) {
            return bad("servo_rate_max must be positive");
        }
        if self.servo_trim.iter().any(|t| !t.is_finite()) {
            return bad("servo_trim must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleState {
    /// World-frame position, m.
    pub position: Vec3,
    pub attitude: EulerAngles,
    /// World-frame velocity, m/s.
    pub velocity: Vec3,
    /// Body-frame angular velocity, rad/s.
    pub body_rate: Vec3,
}

impl VehicleState {
    pub fn at_rest(position: Vec3) -> Self {
        Self {
            position,
            ..Self::default()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|x| x.is_finite())
            && self.attitude.is_finite()
            && self.velocity.iter().all(|x| x.is_finite())
            && self.body_rate.iter().all(|x| x.is_finite())
    }

    /// World-frame angular momentum for the given inertia.
    pub fn angular_momentum(&self, inertia: &Mat3) -> Vec3 {
        self.attitude.to_rotation() * inertia * self.body_rate
    }
}

/// Rotor speeds (signed, rad/s) and tilt angles (rad).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActuatorCommands {
    pub omega: [f64; 4],
    pub beta: [f64; 4],
}

impl ActuatorCommands {
    /// Equal untilted thrust balancing the vehicle weight.
    pub fn hover(params: &VehicleParams) -> Self {
        let speed = (params.weight() / 4.0 / params.k_thrust).sqrt();
        Self {
            omega: ROTOR_SPIN_SIGN.map(|s| s * speed),
            beta: [0.0; 4],
        }
    }

    pub fn thrusts(&self, params: &VehicleParams) -> [f64; 4] {
        self.omega.map(|w| rotor_thrust_torque(w, params).0)
    }
}

/// Body-frame torque and force, ordered `(τx, τy, τz, fx, fy, fz)` when flattened.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Wrench {
    pub torque: Vec3,
    pub force: Vec3,
}

impl Wrench {
    pub fn new(torque: Vec3, force: Vec3) -> Self {
        Self { torque, force }
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self::new(Vec3::new(v[0], v[1], v[2]), Vec3::new(v[3], v[4], v[5]))
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self::from_vector(&Vector6::from(v))
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.torque.x,
            self.torque.y,
            self.torque.z,
            self.force.x,
            self.force.y,
            self.force.z,
        )
    }

    /// Infinity norm of the flattened wrench.
    pub fn max_abs(&self) -> f64 {
        self.to_vector().amax()
    }
}

impl Add for Wrench {
    type Output = Wrench;
    fn add(self, rhs: Wrench) -> Wrench {
        Wrench::new(self.torque + rhs.torque, self.force + rhs.force)
    }
}

impl Sub for Wrench {
    type Output = Wrench;
    fn sub(self, rhs: Wrench) -> Wrench {
        Wrench::new(self.torque - rhs.torque, self.force - rhs.force)
    }
}

/// External force (world frame) and torque (body frame).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Disturbance {
    pub force: Vec3,
    pub torque: Vec3,
}

/// Thrust `k_T Ω²` and reaction torque `k_Q T` of one rotor.
pub fn rotor_thrust_torque(omega: f64, params: &VehicleParams) -> (f64, f64) {
    let thrust = params.k_thrust * omega * omega;
    (thrust, params.k_torque * thrust)
}

/// Rotor-frame force `(lon, lat, ver)` of a rotor tilted by `beta`.
pub fn rotor_force_rotor_frame(thrust: f64, beta: f64) -> Vec3 {
    let (s, c) = beta.sin_cos();
    Vec3::new(0.0, thrust * s, thrust * c)
}

/// Body wrench produced by per-rotor forces given in their rotor frames.
///
/// Vertical components produce roll/pitch moments through the arm geometry
/// and yaw moments through rotor drag; every lateral component contributes
/// `-l * f_lat` about body z, the same convention as the effectiveness matrix.
pub fn wrench_from_rotor_forces(forces: &[Vec3; 4], params: &VehicleParams) -> Wrench {
    let frames = geometry::rotor_frames();
    let kl = FRAC_1_SQRT_2 * params.arm_length;
    let mut force = Vec3::zeros();
    let mut torque = Vec3::zeros();
    for i in 0..4 {
        let f = forces[i];
        force += frames[i] * f;
        torque.x += kl * ROLL_SIGN[i] * f.z;
        torque.y += kl * PITCH_SIGN[i] * f.z;
        torque.z += params.k_torque * YAW_SIGN[i] * f.z - params.arm_length * f.y;
    }
    Wrench { torque, force }
}

pub fn propulsive_wrench(cmds: &ActuatorCommands, params: &VehicleParams) -> Wrench {
    let forces: [Vec3; 4] = std::array::from_fn(|i| {
        let (thrust, _) = rotor_thrust_torque(cmds.omega[i], params);
        rotor_force_rotor_frame(thrust, cmds.beta[i])
    });
    wrench_from_rotor_forces(&forces, params)
}

/// Time derivative of [`VehicleState`]. Attitude rates are Euler-angle rates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateDerivative {
    pub position: Vec3,
    pub attitude: Vec3,
    pub velocity: Vec3,
    pub body_rate: Vec3,
}

impl Mul<f64> for StateDerivative {
    type Output = StateDerivative;
    fn mul(self, k: f64) -> StateDerivative {
        StateDerivative {
            position: self.position * k,
            attitude: self.attitude * k,
            velocity: self.velocity * k,
            body_rate: self.body_rate * k,
        }
    }
}

impl Add for StateDerivative {
    type Output = StateDerivative;
    fn add(self, o: StateDerivative) -> StateDerivative {
        StateDerivative {
            position: self.position + o.position,
            attitude: self.attitude + o.attitude,
            velocity: self.velocity + o.velocity,
            body_rate: self.body_rate + o.body_rate,
        }
    }
}

fn advance(state: &VehicleState, d: &StateDerivative, h: f64) -> VehicleState {
    VehicleState {
        position: state.position + d.position * h,
        attitude: EulerAngles::from_vector(&(state.attitude.to_vector() + d.attitude * h)),
        velocity: state.velocity + d.velocity * h,
        body_rate: state.body_rate + d.body_rate * h,
    }
}

pub fn state_derivative(
    state: &VehicleState,
    wrench: &Wrench,
    dist: &Disturbance,
    params: &VehicleParams,
) -> Result<StateDerivative> {
    let rotation = state.attitude.to_rotation();
    let drag = if params.body_frame_drag {
        rotation * params.drag_translational * rotation.transpose() * state.velocity
    } else {
        params.drag_translational * state.velocity
    };
    let accel =
        geometry::gravity() + (rotation * wrench.force - drag + dist.force) / params.mass;

    let h = geometry::euler_rate_matrix(state.attitude)?;
    let w = state.body_rate;
    let j = &params.inertia;
    let j_inv = j
        .try_inverse()
        .ok_or_else(|| Error::InvalidParameter("inertia is singular".into()))?;
    let rate_dot =
        j_inv * (-w.cross(&(j * w)) + wrench.torque - params.drag_rotational * w + dist.torque);

    Ok(StateDerivative {
        position: state.velocity,
        attitude: h * w,
        velocity: accel,
        body_rate: rate_dot,
    })
}

/// One classical RK4 step with the wrench held constant.
pub fn step_with_wrench(
    state: &VehicleState,
    wrench: &Wrench,
    dist: &Disturbance,
    params: &VehicleParams,
    dt: f64,
) -> Result<VehicleState> {
    if !(dt > 0.0 && dt <= MAX_STEP) {
        return Err(Error::InvalidParameter(format!(
            "step size {dt} outside (0, {MAX_STEP}]"
        )));
    }
    let f = |s: &VehicleState| state_derivative(s, wrench, dist, params);
    let k1 = f(state)?;
    let k2 = f(&advance(state, &k1, dt / 2.0))?;
    let k3 = f(&advance(state, &k2, dt / 2.0))?;
    let k4 = f(&advance(state, &k3, dt))?;
    let slope = (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (1.0 / 6.0);
    let mut next = advance(state, &slope, dt);
    next.attitude = next.attitude.normalized();
    if !next.is_finite() {
        return Err(Error::Divergence { time: dt });
    }
    Ok(next)
}

pub fn step(
    state: &VehicleState,
    cmds: &ActuatorCommands,
    dist: &Disturbance,
    params: &VehicleParams,
    dt: f64,
) -> Result<VehicleState> {
    step_with_wrench(state, &propulsive_wrench(cmds, params), dist, params, dt)
}

/// Servo response model.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ServoModel {
    /// Tilt follows the command immediately.
    #[default]
    Instantaneous,
    /// Tilt slews toward the command at most `rate` rad/s.
    RateLimited { rate: f64 },
}

pub fn servo_filter(cmd: [f64; 4], prev: [f64; 4], dt: f64, model: ServoModel) -> [f64; 4] {
    match model {
        ServoModel::Instantaneous => cmd,
        ServoModel::RateLimited { rate } => {
            let max_step = rate * dt;
            std::array::from_fn(|i| prev[i] + (cmd[i] - prev[i]).clamp(-max_step, max_step))
        }
    }
}
