//! Control allocation: effectiveness matrix, minimal-norm pseudo-inverse
//! allocation, and conversion of the allocated rotor-frame forces into rotor
//! speeds, tilt angles and normalised actuator outputs.
//!
//! The actuator vector holds, for each rotor in order 1..4, its rotor-frame
//! force `(f_lon, f_lat, f_ver)`. The wrench vector is `(τx, τy, τz, fx, fy, fz)`
//! in the body frame.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector, SMatrix, SVector};

use crate::error::{Error, Result};
use crate::geometry::{self, Vec3};
use crate::linalg;
use crate::vehicle::{
    ActuatorCommands, VehicleParams, Wrench, PITCH_SIGN, ROLL_SIGN, ROTOR_SPIN_SIGN, YAW_SIGN,
};

/// Projection of rotor forces on the body principal axes in X configuration.
pub const K_X: f64 = FRAC_1_SQRT_2;

/// Relative singular-value cutoff for the pseudo-inverse.
pub const PINV_RELATIVE_TOLERANCE: f64 = 1e-10;

pub type BMatrix = SMatrix<f64, 6, 12>;
pub type BPseudoInverse = SMatrix<f64, 12, 6>;

/// Allocated per-rotor forces in rotor frames.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActuatorForces(pub SVector<f64, 12>);

impl ActuatorForces {
    pub fn from_rotor_forces(forces: &[Vec3; 4]) -> Self {
        let mut u = SVector::<f64, 12>::zeros();
        for (i, f) in forces.iter().enumerate() {
            u.fixed_rows_mut::<3>(3 * i).copy_from(f);
        }
        Self(u)
    }

    /// `(lon, lat, ver)` of rotor `i` (0-based).
    pub fn rotor(&self, i: usize) -> Vec3 {
        self.0.fixed_rows::<3>(3 * i).into_owned()
    }

    pub fn rotor_forces(&self) -> [Vec3; 4] {
        std::array::from_fn(|i| self.rotor(i))
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

/// Raw effectiveness matrix `B` with `v = B u`.
pub fn effectiveness_matrix(params: &VehicleParams) -> BMatrix {
    let frames = geometry::rotor_frames();
    let l = params.arm_length;
    let mut b = BMatrix::zeros();
    for i in 0..4 {
        let lateral_axis = frames[i].column(1);
        let lat = 3 * i + 1;
        b[(2, lat)] = -l;
        b[(3, lat)] = lateral_axis.x;
        b[(4, lat)] = lateral_axis.y;
        let ver = 3 * i + 2;
        b[(0, ver)] = ROLL_SIGN[i] * K_X * l;
        b[(1, ver)] = PITCH_SIGN[i] * K_X * l;
        b[(2, ver)] = YAW_SIGN[i] * params.k_torque;
        b[(5, ver)] = 1.0;
    }
    // Rotor frames are exact multiples of 45°, so snap round-off in the lateral
    // projections onto ±K_X and 0.
    for v in b.iter_mut() {
        if v.abs() < 1e-15 {
            *v = 0.0;
        } else if (v.abs() - K_X).abs() < 1e-15 {
            *v = K_X.copysign(*v);
        }
    }
    b
}

/// Result of a Moore-Penrose pseudo-inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoInverse {
    pub matrix: DMatrix<f64>,
    pub rank: usize,
    /// Absolute singular-value cutoff that was applied.
    pub tolerance: f64,
}

/// Moore-Penrose pseudo-inverse through the SVD, discarding singular values
/// below `1e-10 * σ_max`.
pub fn pseudo_inverse(m: &DMatrix<f64>) -> Result<PseudoInverse> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::DegenerateMatrix("non-finite entry".into()));
    }
    // Wide inputs are decomposed through their transpose; nalgebra's SVD is
    // unreliable on some wide matrices.
    if m.nrows() < m.ncols() {
        let t = pseudo_inverse(&m.transpose())?;
        return Ok(PseudoInverse {
            matrix: t.matrix.transpose(),
            ..t
        });
    }
    let svd = m.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    if sigma_max == 0.0 {
        return Err(Error::DegenerateMatrix("all-zero matrix".into()));
    }
    let tolerance = PINV_RELATIVE_TOLERANCE * sigma_max;
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut inv = DMatrix::zeros(m.ncols(), m.nrows());
    let mut rank = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > tolerance {
            rank += 1;
            inv += (v_t.row(k).transpose() / s) * u.column(k).transpose();
        }
    }
    Ok(PseudoInverse {
        matrix: inv,
        rank,
        tolerance,
    })
}

/// Effectiveness matrix together with its cached pseudo-inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectivenessMatrix {
    matrix: BMatrix,
    pinv: BPseudoInverse,
    rank: usize,
    tolerance: f64,
}

/// Builds the full tilt-rotor effectiveness matrix for `params`.
pub fn build_effectiveness(params: &VehicleParams) -> EffectivenessMatrix {
    EffectivenessMatrix::from_matrix(effectiveness_matrix(params))
        .expect("effectiveness matrix has non-zero entries")
}

impl EffectivenessMatrix {
    pub fn new(params: &VehicleParams) -> Self {
        build_effectiveness(params)
    }

    /// Effectiveness with the lateral columns removed, as for a vehicle whose
    /// gimbals are locked at zero tilt. Rank 4: it only reaches wrenches with
    /// zero horizontal force.
    pub fn fixed_tilt(params: &VehicleParams) -> Self {
        let mut b = effectiveness_matrix(params);
        for i in 0..4 {
            b.column_mut(3 * i + 1).fill(0.0);
        }
        Self::from_matrix(b).expect("vertical columns are non-zero")
    }

    pub fn from_matrix(matrix: BMatrix) -> Result<Self> {
        let dynamic = DMatrix::from_iterator(6, 12, matrix.iter().copied());
        let p = pseudo_inverse(&dynamic)?;
        let mut pinv = BPseudoInverse::from_iterator(p.matrix.iter().copied());
        // an actuator with no effect gets exactly zero allocation
        for c in 0..12 {
            if matrix.column(c).iter().all(|&x| x == 0.0) {
                pinv.row_mut(c).fill(0.0);
            }
        }
        Ok(Self {
            matrix,
            pinv,
            rank: p.rank,
            tolerance: p.tolerance,
        })
    }

    pub fn matrix(&self) -> &BMatrix {
        &self.matrix
    }

    pub fn pseudo_inverse(&self) -> &BPseudoInverse {
        &self.pinv
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Minimal-norm actuator forces `u = B† v`.
    pub fn allocate(&self, v: &Wrench) -> ActuatorForces {
        ActuatorForces(self.pinv * v.to_vector())
    }

    /// Wrench `B u` produced by actuator forces.
    pub fn apply(&self, u: &ActuatorForces) -> Wrench {
        Wrench::from_vector(&(self.matrix * u.0))
    }
}

/// Per-channel saturation flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Saturation {
    pub motor: [bool; 4],
    pub servo: [bool; 4],
}

impl Saturation {
    pub fn any(&self) -> bool {
        self.motor.iter().chain(self.servo.iter()).any(|&s| s)
    }

    pub fn merge(&self, other: &Saturation) -> Saturation {
        Saturation {
            motor: std::array::from_fn(|i| self.motor[i] || other.motor[i]),
            servo: std::array::from_fn(|i| self.servo[i] || other.servo[i]),
        }
    }
}

/// Actuator commands derived from allocated forces, with the thrust actually
/// commanded and which channels were clipped.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Extraction {
    pub commands: ActuatorCommands,
    pub thrust: [f64; 4],
    pub saturation: Saturation,
}

/// Converts allocated forces into signed rotor speeds and tilt angles.
///
/// Thrust is the rotor force magnitude, clipped at `thrust_max` and at the
/// rotor speed limit. Tilt is `atan2(f_lat, f_ver)` clipped at `±beta_max`;
/// a downward vertical demand therefore saturates the servo instead of
/// producing negative thrust.
pub fn extract_commands(u: &ActuatorForces, params: &VehicleParams) -> Extraction {
    let mut out = Extraction::default();
    let thrust_cap = params
        .thrust_max
        .min(params.k_thrust * params.omega_rotor_max * params.omega_rotor_max);
    for i in 0..4 {
        let f = u.rotor(i);
        let mut thrust = f.norm();
        if thrust > thrust_cap {
            thrust = thrust_cap;
            out.saturation.motor[i] = true;
        }
        let raw_tilt = if f.y == 0.0 && f.z >= 0.0 {
            0.0
        } else {
            f.y.atan2(f.z)
        };
        let tilt = raw_tilt.clamp(-params.beta_max, params.beta_max);
        out.saturation.servo[i] = tilt != raw_tilt;
        out.thrust[i] = thrust;
        out.commands.omega[i] = ROTOR_SPIN_SIGN[i] * (thrust / params.k_thrust).sqrt();
        out.commands.beta[i] = tilt;
    }
    out
}

/// Extraction with the gimbals locked at zero tilt. Only the vertical
/// component is realised and a downward demand clips thrust at zero.
pub fn extract_commands_locked(u: &ActuatorForces, params: &VehicleParams) -> Extraction {
    let mut vertical = *u;
    for i in 0..4 {
        vertical.0[3 * i] = 0.0;
        vertical.0[3 * i + 1] = 0.0;
        vertical.0[3 * i + 2] = u.0[3 * i + 2].max(0.0);
    }
    let mut out = extract_commands(&vertical, params);
    for i in 0..4 {
        out.commands.beta[i] = 0.0;
        out.saturation.servo[i] = false;
        if u.0[3 * i + 2] < 0.0 {
            out.saturation.motor[i] = true;
        }
    }
    out
}

/// Actuator outputs scaled for the output driver: motors in [0, 1] as a
/// fraction of maximum thrust, servos in [-1, 1] as a fraction of maximum tilt.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NormalizedOutputs {
    pub motor: [f64; 4],
    pub servo: [f64; 4],
    pub saturated: Saturation,
}

pub fn normalize(cmds: &ActuatorCommands, params: &VehicleParams) -> NormalizedOutputs {
    let mut out = NormalizedOutputs::default();
    let thrusts = cmds.thrusts(params);
    for i in 0..4 {
        let motor = thrusts[i] / params.thrust_max;
        out.motor[i] = motor.clamp(0.0, 1.0);
        out.saturated.motor[i] = out.motor[i] != motor;

        let tilt = cmds.beta[i] + params.servo_trim[i];
        let servo = if params.beta_max > 0.0 {
            tilt / params.beta_max
        } else if tilt == 0.0 {
            0.0
        } else {
            tilt.signum() * f64::INFINITY
        };
        out.servo[i] = servo.clamp(-1.0, 1.0);
        out.saturated.servo[i] = out.servo[i] != servo;
    }
    out
}

/// Inverse of [`normalize`] for in-range outputs.
pub fn denormalize(outputs: &NormalizedOutputs, params: &VehicleParams) -> ActuatorCommands {
    ActuatorCommands {
        omega: std::array::from_fn(|i| {
            let thrust = outputs.motor[i] * params.thrust_max;
            ROTOR_SPIN_SIGN[i] * (thrust / params.k_thrust).sqrt()
        }),
        beta: std::array::from_fn(|i| outputs.servo[i] * params.beta_max - params.servo_trim[i]),
    }
}

/// Largest steady horizontal acceleration at level attitude, and an actuator
/// set achieving it.
#[derive(Debug, Clone, PartialEq)]
pub struct LateralEnvelope {
    /// Direction of the acceleration in the body x-y plane, rad from body x.
    pub heading: f64,
    /// m/s²
    pub accel: f64,
    pub forces: ActuatorForces,
    pub commands: ActuatorCommands,
}

/// Search resolution for [`feasible_lateral_accel_along`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeSearch {
    /// Grid points per null-space axis; odd so the centre is sampled.
    pub grid_points: usize,
    /// Zoom passes around the best cell.
    pub refinements: usize,
}

impl Default for EnvelopeSearch {
    fn default() -> Self {
        Self {
            grid_points: 81,
            refinements: 4,
        }
    }
}

/// Lateral envelope along body x with the default search resolution.
pub fn feasible_lateral_accel(params: &VehicleParams) -> Result<LateralEnvelope> {
    feasible_lateral_accel_along(params, 0.0, EnvelopeSearch::default())
}

/// Brute-force search for the largest level-attitude horizontal force along
/// `heading`, subject to weight support, zero net torque, `|β| ≤ beta_max`
/// and `T ≤ thrust_max`.
///
/// Only lateral and vertical rotor components are free (the longitudinal
/// component is zero by construction). For a fixed demanded force `F` the
/// exact solutions form an affine family `u0(F) + a n1 + b n2`, with `n1, n2`
/// spanning the null space of the reduced effectiveness matrix. Every grid
/// point `(a, b)` fixes one family of tilt and thrust assignments; its
/// largest feasible `F` is found by bisection, and the grid is refined around
/// the best point.
pub fn feasible_lateral_accel_along(
    params: &VehicleParams,
    heading: f64,
    search: EnvelopeSearch,
) -> Result<LateralEnvelope> {
    params.validate()?;
    let weight = params.weight();
    let available = 4.0 * params.thrust_max;
    if weight > available {
        return Err(Error::InfeasibleHover { weight, available });
    }

    let full = effectiveness_matrix(params);
    // reduced columns: (lat_i, ver_i) for i in 0..4
    let reduced = DMatrix::from_fn(6, 8, |r, c| full[(r, 3 * (c / 2) + 1 + c % 2)]);
    let lift = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0, 0.0, weight]);
    let push = DVector::from_vec(vec![0.0, 0.0, 0.0, heading.cos(), heading.sin(), 0.0]);
    let tol = 1e-12;
    let (u_lift, _) = linalg::min_norm_solve(&reduced, &lift, tol)
        .ok_or_else(|| Error::DegenerateMatrix("reduced effectiveness".into()))?;
    let (u_push, _) = linalg::min_norm_solve(&reduced, &push, tol)
        .ok_or_else(|| Error::DegenerateMatrix("reduced effectiveness".into()))?;
    let null = linalg::null_space(&reduced, tol);
    let to_array = |v: &DVector<f64>| -> [f64; 8] { std::array::from_fn(|k| v[k]) };
    let (u_lift, u_push) = (to_array(&u_lift), to_array(&u_push));
    let n1 = null.first().map(to_array).unwrap_or([0.0; 8]);
    let n2 = null.get(1).map(to_array).unwrap_or([0.0; 8]);

    let tan_max = params.beta_max.tan();
    let feasible = |u: &[f64; 8]| {
        (0..4).all(|i| {
            let (lat, ver) = (u[2 * i], u[2 * i + 1]);
            lat.abs() <= tan_max * ver + 1e-12 && lat.hypot(ver) <= params.thrust_max + 1e-12
        })
    };
    let family = |a: f64, b: f64, force: f64| -> [f64; 8] {
        std::array::from_fn(|k| u_lift[k] + force * u_push[k] + a * n1[k] + b * n2[k])
    };
    let max_force = |a: f64, b: f64| -> Option<f64> {
        if !feasible(&family(a, b, 0.0)) {
            return None;
        }
        let (mut lo, mut hi) = (0.0, available);
        if feasible(&family(a, b, hi)) {
            return Some(hi);
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if feasible(&family(a, b, mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(lo)
    };

    let n = search.grid_points.max(3) | 1;
    let mut half_width = 2.0 * available;
    let mut centre = (0.0, 0.0);
    let mut best: Option<(f64, f64, f64)> = None;
    for _ in 0..=search.refinements {
        let step = 2.0 * half_width / (n - 1) as f64;
        for ia in 0..n {
            let a = centre.0 - half_width + ia as f64 * step;
            for ib in 0..n {
                let b = centre.1 - half_width + ib as f64 * step;
                if let Some(f) = max_force(a, b) {
                    if best.is_none_or(|(_, _, bf)| f > bf) {
                        best = Some((a, b, f));
                    }
                }
            }
        }
        if let Some((a, b, _)) = best {
            centre = (a, b);
        }
        half_width = 2.0 * step;
    }

    let (a, b, force) = best.ok_or(Error::InfeasibleHover { weight, available })?;
    let u = family(a, b, force);
    let rotor: [Vec3; 4] = std::array::from_fn(|i| Vec3::new(0.0, u[2 * i], u[2 * i + 1]));
    let forces = ActuatorForces::from_rotor_forces(&rotor);
    Ok(LateralEnvelope {
        heading,
        accel: force / params.mass,
        commands: extract_commands(&forces, params).commands,
        forces,
    })
}
