//! Frame conventions and rotation kinematics.
//!
//! The world frame is z-up; gravity points along -z. Body attitude is given
//! as yaw-pitch-roll Euler angles, composed as `R = Rz(yaw) * Ry(pitch) * Rx(roll)`
//! mapping body-frame vectors into the world frame.
//!
//! Each rotor frame is a pure rotation about body z. Its x-axis points along
//! the arm, its y-axis is tangential (the direction of the tilt force) and its
//! z-axis is the untilted thrust axis.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Standard gravity magnitude, m/s².
pub const GRAVITY: f64 = 9.81;

/// Rotor-frame yaw offsets in degrees, rotors 1 through 4.
pub const ROTOR_FRAME_ANGLES_DEG: [f64; 4] = [315.0, 135.0, 45.0, 225.0];

/// Default bound on |cos(pitch)| below which the Euler-rate map is singular.
pub const SINGULARITY_TOLERANCE: f64 = 1e-6;

/// Gravity acceleration in the z-up world frame.
pub fn gravity() -> Vec3 {
    Vec3::new(0.0, 0.0, -GRAVITY)
}

/// Wraps an angle into (-π, π].
pub fn wrap_angle(angle: f64) -> f64 {
    let w = angle.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

pub fn rot_x(alpha: f64) -> Mat3 {
    let (s, c) = alpha.sin_cos();
    Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(alpha: f64) -> Mat3 {
    let (s, c) = alpha.sin_cos();
    Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Right-handed rotation about z by `alpha` radians.
pub fn rot_z(alpha: f64) -> Mat3 {
    let (s, c) = alpha.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Orientation of rotor `index` (1-based) relative to the body frame.
pub fn rotor_frame(index: usize) -> Result<Mat3> {
    if !(1..=4).contains(&index) {
        return Err(Error::InvalidRotorIndex(index));
    }
    Ok(rot_z(ROTOR_FRAME_ANGLES_DEG[index - 1].to_radians()))
}

/// All four rotor frames, indexed from zero.
pub fn rotor_frames() -> [Mat3; 4] {
    ROTOR_FRAME_ANGLES_DEG.map(|deg| rot_z(deg.to_radians()))
}

/// Roll, pitch, yaw in radians (yaw-pitch-roll sequence).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerAngles {
    pub const ZERO: EulerAngles = EulerAngles {
        roll: 0.0,
        pitch: 0.0,
        yaw: 0.0,
    };

    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }

    pub fn from_vector(v: &Vec3) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn to_vector(self) -> Vec3 {
        Vec3::new(self.roll, self.pitch, self.yaw)
    }

    /// Maps the angles onto the canonical ranges: roll and yaw in (-π, π],
    /// pitch in [-π/2, π/2]. The rotation they describe is unchanged.
    pub fn normalized(self) -> Self {
        let mut roll = self.roll;
        let mut pitch = wrap_angle(self.pitch);
        let mut yaw = self.yaw;
        if pitch > FRAC_PI_2 {
            pitch = PI - pitch;
            roll += PI;
            yaw += PI;
        } else if pitch < -FRAC_PI_2 {
            pitch = -PI - pitch;
            roll += PI;
            yaw += PI;
        }
        Self::new(wrap_angle(roll), pitch, wrap_angle(yaw))
    }

    pub fn is_finite(&self) -> bool {
        self.roll.is_finite() && self.pitch.is_finite() && self.yaw.is_finite()
    }

    pub fn to_rotation(self) -> Mat3 {
        euler_to_rotation(self)
    }
}

/// Body-to-world rotation `Rz(yaw) * Ry(pitch) * Rx(roll)`.
pub fn euler_to_rotation(eta: EulerAngles) -> Mat3 {
    rot_z(eta.yaw) * rot_y(eta.pitch) * rot_x(eta.roll)
}

/// Inverse of [`euler_to_rotation`] for a proper rotation matrix.
pub fn rotation_to_euler(r: &Mat3) -> EulerAngles {
    let pitch = (-r[(2, 0)]).clamp(-1.0, 1.0).asin();
    let roll = r[(2, 1)].atan2(r[(2, 2)]);
    let yaw = r[(1, 0)].atan2(r[(0, 0)]);
    EulerAngles::new(roll, pitch, yaw).normalized()
}

/// Euler-rate matrix `H(eta)` with `eta_dot = H(eta) * omega_body`.
pub fn euler_rate_matrix(eta: EulerAngles) -> Result<Mat3> {
    euler_rate_matrix_with_tolerance(eta, SINGULARITY_TOLERANCE)
}

pub fn euler_rate_matrix_with_tolerance(eta: EulerAngles, tolerance: f64) -> Result<Mat3> {
    let (sp, cp) = eta.roll.sin_cos();
    let ct = eta.pitch.cos();
    if ct.abs() <= tolerance {
        return Err(Error::GimbalSingularity {
            cos_pitch: ct.abs(),
            tolerance,
        });
    }
    let tt = eta.pitch.tan();
    Ok(Mat3::new(
        1.0,
        sp * tt,
        cp * tt,
        0.0,
        cp,
        -sp,
        0.0,
        sp / ct,
        cp / ct,
    ))
}

/// Inverse of the Euler-rate matrix, `omega_body = W(eta) * eta_dot`.
/// Defined everywhere, including at the gimbal singularity.
pub fn euler_rate_matrix_inverse(eta: EulerAngles) -> Mat3 {
    let (sp, cp) = eta.roll.sin_cos();
    let (st, ct) = eta.pitch.sin_cos();
    Mat3::new(1.0, 0.0, -st, 0.0, cp, sp * ct, 0.0, -sp, cp * ct)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn assert_rotation(r: &Mat3) {
        let err = (r.transpose() * r - Mat3::identity()).abs().max();
        assert!(err <= 1e-12, "not orthonormal: {err:e}");
        assert!((r.determinant() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn rot_z_examples() {
        assert_eq!(rot_z(0.0), Mat3::identity());
        let r = rot_z(PI);
        assert_abs_diff_eq!(r, Mat3::new(-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0), epsilon = 1e-15);
        let r = rot_z(315f64.to_radians());
        assert_abs_diff_eq!(r, Mat3::new(H, H, 0.0, -H, H, 0.0, 0.0, 0.0, 1.0), epsilon = 1e-15);
    }

    #[test]
    fn rotor_frames_match_layout() {
        assert_eq!(rotor_frame(3).unwrap(), rot_z(45f64.to_radians()));
        let y1 = rotor_frame(1).unwrap().column(1).into_owned();
        assert_abs_diff_eq!(y1, Vec3::new(H, H, 0.0), epsilon = 1e-15);
        let y2 = rotor_frame(2).unwrap().column(1).into_owned();
        assert_abs_diff_eq!(y2, Vec3::new(-H, -H, 0.0), epsilon = 1e-15);
        assert_eq!(rotor_frame(0), Err(Error::InvalidRotorIndex(0)));
        assert_eq!(rotor_frame(5), Err(Error::InvalidRotorIndex(5)));
        for i in 1..=4 {
            let r = rotor_frame(i).unwrap();
            assert_rotation(&r);
            assert!(r.column(0).dot(&r.column(1)).abs() <= 1e-12);
            assert_eq!(r, rotor_frames()[i - 1]);
        }
    }

    #[test]
    fn euler_identity_and_single_axis() {
        assert_eq!(euler_to_rotation(EulerAngles::ZERO), Mat3::identity());
        let r = euler_to_rotation(EulerAngles::new(0.0, 0.0, 0.7));
        assert_abs_diff_eq!(r, rot_z(0.7), epsilon = 1e-15);
    }

    #[test]
    fn euler_rate_examples() {
        assert_eq!(euler_rate_matrix(EulerAngles::ZERO).unwrap(), Mat3::identity());
        let h = euler_rate_matrix(EulerAngles::new(FRAC_PI_2, 0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(h, Mat3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0), epsilon = 1e-15);
        assert!(matches!(
            euler_rate_matrix(EulerAngles::new(0.0, FRAC_PI_2, 0.0)),
            Err(Error::GimbalSingularity { .. })
        ));
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI / 2.0), -FRAC_PI_2, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_angle(2f64.to_radians() - 2.0 * PI), 2f64.to_radians(), epsilon = 1e-15);
    }

    #[test]
    fn normalized_preserves_rotation() {
        let eta = EulerAngles::new(0.3, 2.0, -0.4);
        let n = eta.normalized();
        assert!(n.pitch.abs() <= FRAC_PI_2);
        assert_abs_diff_eq!(n.to_rotation(), eta.to_rotation(), epsilon = 1e-12);
    }

    #[test]
    fn euler_round_trip_batch() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let eta = EulerAngles::new(
                rng.random_range(-PI + 1e-6..PI),
                rng.random_range(-1.5..1.5),
                rng.random_range(-PI + 1e-6..PI),
            );
            let back = rotation_to_euler(&euler_to_rotation(eta));
            let d = (back.to_vector() - eta.to_vector()).abs().max();
            worst = worst.max(d);
        }
        assert!(worst <= 1e-9, "round trip error {worst:e}");
    }

    proptest! {
        #[test]
        fn rotations_are_proper(a in -10.0f64..10.0, r in -PI..PI, p in -1.5f64..1.5, y in -PI..PI) {
            assert_rotation(&rot_z(a));
            assert_rotation(&euler_to_rotation(EulerAngles::new(r, p, y)));
        }

        #[test]
        fn rot_z_composes(a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let d = (rot_z(a) * rot_z(b) - rot_z(a + b)).abs().max();
            prop_assert!(d <= 1e-12);
        }

        #[test]
        fn euler_rate_inverse(r in -PI..PI, p in -80f64.to_radians()..80f64.to_radians(), y in -PI..PI) {
            let eta = EulerAngles::new(r, p, y);
            let h = euler_rate_matrix(eta).unwrap();
            let d = (h * euler_rate_matrix_inverse(eta) - Mat3::identity()).abs().max();
            prop_assert!(d <= 1e-9);
        }
    }
}
