//! Flat `key = value` configuration.
//!
//! One setting per line, `#` starts a comment, unknown keys are rejected.
//! [`CONFIG_KEYS`] lists every key with its unit; [`SimConfig::to_config_text`]
//! renders a complete file.

use std::fmt::Write as _;
use std::path::Path;

use crate::control::{ControlMode, ControllerGains};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::vehicle::{Disturbance, ServoModel, VehicleParams, MAX_STEP};

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub params: VehicleParams,
    pub gains: ControllerGains,
    pub mode: ControlMode,
    /// s
    pub physics_dt: f64,
    /// s, an integer multiple of `physics_dt`
    pub control_dt: f64,
    /// s
    pub duration: f64,
    /// Length of the vertical climb that precedes the mission, s.
    pub takeoff_duration: f64,
    pub servo_model: ServoModel,
    /// Constant disturbance applied for the whole run.
    pub disturbance: Disturbance,
    pub initial_position: Vec3,
    /// Seed for randomised checks. Simulation runs themselves draw no random numbers.
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            params: VehicleParams::default(),
            gains: ControllerGains::default(),
            mode: ControlMode::Omnidirectional,
            physics_dt: 0.001,
            control_dt: 0.004,
            duration: 40.0,
            takeoff_duration: 5.0,
            servo_model: ServoModel::Instantaneous,
            disturbance: Disturbance::default(),
            initial_position: Vec3::zeros(),
            seed: 0,
        }
    }
}

/// Every accepted key and its unit.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("mode", "omni or conventional"),
    ("physics_dt", "s"),
    ("control_dt", "s, integer multiple of physics_dt"),
    ("duration", "s"),
    ("takeoff_duration", "s"),
    ("servo_rate_limit", "bool, slew tilt at servo_rate_max"),
    ("seed", "integer"),
    ("initial_x", "m"),
    ("initial_y", "m"),
    ("initial_z", "m"),
    ("disturbance_force_x", "N, world frame"),
    ("disturbance_force_y", "N, world frame"),
    ("disturbance_force_z", "N, world frame"),
    ("disturbance_torque_x", "N·m, body frame"),
    ("disturbance_torque_y", "N·m, body frame"),
    ("disturbance_torque_z", "N·m, body frame"),
    ("mass", "kg"),
    ("inertia_xx", "kg·m²"),
    ("inertia_yy", "kg·m²"),
    ("inertia_zz", "kg·m²"),
    ("arm_length", "m"),
    ("k_thrust", "N·s²/rad²"),
    ("k_torque", "m, reaction torque per newton of thrust"),
    ("drag_translational_x", "N·s/m"),
    ("drag_translational_y", "N·s/m"),
    ("drag_translational_z", "N·s/m"),
    ("drag_rotational_x", "N·m·s/rad"),
    ("drag_rotational_y", "N·m·s/rad"),
    ("drag_rotational_z", "N·m·s/rad"),
    ("body_frame_drag", "bool"),
    ("beta_max_deg", "deg"),
    ("thrust_max", "N per rotor"),
    ("omega_rotor_max", "rad/s"),
    ("servo_rate_max", "rad/s"),
    ("servo_trim_1", "rad"),
    ("servo_trim_2", "rad"),
    ("servo_trim_3", "rad"),
    ("servo_trim_4", "rad"),
    ("pos_p_x", "1/s"),
    ("pos_p_y", "1/s"),
    ("pos_p_z", "1/s"),
    ("vel_p_x", "1/s"),
    ("vel_i_x", "1/s²"),
    ("vel_d_x", "-"),
    ("vel_ilim_x", "m/s²"),
    ("vel_p_y", "1/s"),
    ("vel_i_y", "1/s²"),
    ("vel_d_y", "-"),
    ("vel_ilim_y", "m/s²"),
    ("vel_p_z", "1/s"),
    ("vel_i_z", "1/s²"),
    ("vel_d_z", "-"),
    ("vel_ilim_z", "m/s²"),
    ("att_p_roll", "1/s"),
    ("att_p_pitch", "1/s"),
    ("att_p_yaw", "1/s"),
    ("rate_p_roll", "1/s"),
    ("rate_i_roll", "1/s²"),
    ("rate_d_roll", "-"),
    ("rate_ilim_roll", "rad/s²"),
    ("rate_p_pitch", "1/s"),
    ("rate_i_pitch", "1/s²"),
    ("rate_d_pitch", "-"),
    ("rate_ilim_pitch", "rad/s²"),
    ("rate_p_yaw", "1/s"),
    ("rate_i_yaw", "1/s²"),
    ("rate_d_yaw", "-"),
    ("rate_ilim_yaw", "rad/s²"),
    ("max_velocity_xy", "m/s"),
    ("max_velocity_z", "m/s"),
    ("max_accel_xy", "m/s²"),
    ("max_accel_z", "m/s²"),
    ("max_rate", "rad/s"),
    ("torque_limit_x", "N·m"),
    ("torque_limit_y", "N·m"),
    ("torque_limit_z", "N·m"),
];

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(format!("`{v}` is not a boolean")),
    }
}

fn parse_real(v: &str) -> std::result::Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("`{v}` is not a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("`{v}` is not finite"))
    }
}

const AXES: [&str; 3] = ["x", "y", "z"];
const ATT_AXES: [&str; 3] = ["roll", "pitch", "yaw"];

impl SimConfig {
    pub fn substeps(&self) -> usize {
        (self.control_dt / self.physics_dt).round() as usize
    }

    /// Number of telemetry rows a full run produces.
    pub fn control_steps(&self) -> usize {
        (self.duration / self.control_dt + 1e-9).floor() as usize + 1
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        self.params.validate()?;
        self.gains.validate()?;
        if !(self.physics_dt > 0.0 && self.physics_dt <= MAX_STEP) {
            return bad(format!("physics_dt must lie in (0, {MAX_STEP}]"));
        }
        let n = self.substeps();
        if n == 0 || (n as f64 * self.physics_dt - self.control_dt).abs() > 1e-9 * self.control_dt.max(1.0) {
            return bad("control_dt must be an integer multiple of physics_dt".into());
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad("duration must be positive".into());
        }
        if !(self.takeoff_duration >= 0.0 && self.takeoff_duration.is_finite()) {
            return bad("takeoff_duration must be non-negative".into());
        }
        if let ServoModel::RateLimited { rate } = self.servo_model {
            if !(rate > 0.0) {
                return bad("servo rate must be positive".into());
            }
        }
        Ok(())
    }

    pub fn rate_limited_servos(&self) -> bool {
        matches!(self.servo_model, ServoModel::RateLimited { .. })
    }

    pub fn set_servo_rate_limit(&mut self, enabled: bool) {
        self.servo_model = if enabled {
            ServoModel::RateLimited {
                rate: self.params.servo_rate_max,
            }
        } else {
            ServoModel::Instantaneous
        };
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let p = &mut self.params;
        let g = &mut self.gains;
        let axis = |prefix: &str| AXES.iter().position(|a| key == format!("{prefix}{a}"));
        let att_axis = |prefix: &str| ATT_AXES.iter().position(|a| key == format!("{prefix}{a}"));

        match key {
            "mode" => self.mode = value.parse().map_err(|e: Error| e.to_string())?,
            "physics_dt" => self.physics_dt = parse_real(value)?,
            "control_dt" => self.control_dt = parse_real(value)?,
            "duration" => self.duration = parse_real(value)?,
            "takeoff_duration" => self.takeoff_duration = parse_real(value)?,
            "servo_rate_limit" => {
                let on = parse_bool(value)?;
                self.set_servo_rate_limit(on);
            }
            "seed" => self.seed = value.parse().map_err(|_| format!("`{value}` is not an integer"))?,
            "mass" => p.mass = parse_real(value)?,
            "inertia_xx" => p.inertia[(0, 0)] = parse_real(value)?,
            "inertia_yy" => p.inertia[(1, 1)] = parse_real(value)?,
            "inertia_zz" => p.inertia[(2, 2)] = parse_real(value)?,
            "arm_length" => p.arm_length = parse_real(value)?,
            "k_thrust" => p.k_thrust = parse_real(value)?,
            "k_torque" => p.k_torque = parse_real(value)?,
            "body_frame_drag" => p.body_frame_drag = parse_bool(value)?,
            "beta_max_deg" => p.beta_max = parse_real(value)?.to_radians(),
            "thrust_max" => p.thrust_max = parse_real(value)?,
            "omega_rotor_max" => p.omega_rotor_max = parse_real(value)?,
            "servo_rate_max" => {
                p.servo_rate_max = parse_real(value)?;
                if let ServoModel::RateLimited { rate } = &mut self.servo_model {
                    *rate = p.servo_rate_max;
                }
            }
            "max_velocity_xy" => g.max_velocity_xy = parse_real(value)?,
            "max_velocity_z" => g.max_velocity_z = parse_real(value)?,
            "max_accel_xy" => g.max_accel_xy = parse_real(value)?,
            "max_accel_z" => g.max_accel_z = parse_real(value)?,
            "max_rate" => g.max_rate = parse_real(value)?,
            _ => {
                let x = parse_real(value);
                if let Some(k) = axis("initial_") {
                    self.initial_position[k] = x?;
                } else if let Some(k) = axis("disturbance_force_") {
                    self.disturbance.force[k] = x?;
                } else if let Some(k) = axis("disturbance_torque_") {
                    self.disturbance.torque[k] = x?;
                } else if let Some(k) = axis("drag_translational_") {
                    p.drag_translational[(k, k)] = x?;
                } else if let Some(k) = axis("drag_rotational_") {
                    p.drag_rotational[(k, k)] = x?;
                } else if let Some(k) = axis("pos_p_") {
                    g.pos_p[k] = x?;
                } else if let Some(k) = axis("vel_p_") {
                    g.vel[k].p = x?;
                } else if let Some(k) = axis("vel_i_") {
                    g.vel[k].i = x?;
                } else if let Some(k) = axis("vel_d_") {
                    g.vel[k].d = x?;
                } else if let Some(k) = axis("vel_ilim_") {
                    g.vel[k].integral_limit = x?;
                } else if let Some(k) = axis("torque_limit_") {
                    g.torque_limit[k] = x?;
                } else if let Some(k) = att_axis("att_p_") {
                    g.att_p[k] = x?;
                } else if let Some(k) = att_axis("rate_p_") {
                    g.rate[k].p = x?;
                } else if let Some(k) = att_axis("rate_i_") {
                    g.rate[k].i = x?;
                } else if let Some(k) = att_axis("rate_d_") {
                    g.rate[k].d = x?;
                } else if let Some(k) = att_axis("rate_ilim_") {
                    g.rate[k].integral_limit = x?;
                } else if let Some(k) = ["servo_trim_1", "servo_trim_2", "servo_trim_3", "servo_trim_4"]
                    .iter()
                    .position(|n| *n == key)
                {
                    p.servo_trim[k] = x?;
                } else {
                    return Err(format!("unknown key `{key}`"));
                }
            }
        }
        Ok(())
    }

    /// Renders every key with its current value.
    pub fn to_config_text(&self) -> String {
        let p = &self.params;
        let g = &self.gains;
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let unit = CONFIG_KEYS.iter().find(|(n, _)| *n == k).map(|(_, u)| *u).unwrap_or("");
            let _ = writeln!(out, "{k} = {v}  # {unit}");
        };
        put("mode", self.mode.to_string());
        put("physics_dt", self.physics_dt.to_string());
        put("control_dt", self.control_dt.to_string());
        put("duration", self.duration.to_string());
        put("takeoff_duration", self.takeoff_duration.to_string());
        put("servo_rate_limit", self.rate_limited_servos().to_string());
        put("seed", self.seed.to_string());
        for k in 0..3 {
            put(&format!("initial_{}", AXES[k]), self.initial_position[k].to_string());
        }
        for k in 0..3 {
            put(&format!("disturbance_force_{}", AXES[k]), self.disturbance.force[k].to_string());
        }
        for k in 0..3 {
            put(&format!("disturbance_torque_{}", AXES[k]), self.disturbance.torque[k].to_string());
        }
        put("mass", p.mass.to_string());
        put("inertia_xx", p.inertia[(0, 0)].to_string());
        put("inertia_yy", p.inertia[(1, 1)].to_string());
        put("inertia_zz", p.inertia[(2, 2)].to_string());
        put("arm_length", p.arm_length.to_string());
        put("k_thrust", p.k_thrust.to_string());
        put("k_torque", p.k_torque.to_string());
        for k in 0..3 {
            put(&format!("drag_translational_{}", AXES[k]), p.drag_translational[(k, k)].to_string());
        }
        for k in 0..3 {
            put(&format!("drag_rotational_{}", AXES[k]), p.drag_rotational[(k, k)].to_string());
        }
        put("body_frame_drag", p.body_frame_drag.to_string());
        put("beta_max_deg", p.beta_max.to_degrees().to_string());
        put("thrust_max", p.thrust_max.to_string());
        put("omega_rotor_max", p.omega_rotor_max.to_string());
        put("servo_rate_max", p.servo_rate_max.to_string());
        for k in 0..4 {
            put(&format!("servo_trim_{}", k + 1), p.servo_trim[k].to_string());
        }
        for k in 0..3 {
            put(&format!("pos_p_{}", AXES[k]), g.pos_p[k].to_string());
        }
        for k in 0..3 {
            let a = AXES[k];
            put(&format!("vel_p_{a}"), g.vel[k].p.to_string());
            put(&format!("vel_i_{a}"), g.vel[k].i.to_string());
            put(&format!("vel_d_{a}"), g.vel[k].d.to_string());
            put(&format!("vel_ilim_{a}"), g.vel[k].integral_limit.to_string());
        }
        for k in 0..3 {
            put(&format!("att_p_{}", ATT_AXES[k]), g.att_p[k].to_string());
        }
        for k in 0..3 {
            let a = ATT_AXES[k];
            put(&format!("rate_p_{a}"), g.rate[k].p.to_string());
            put(&format!("rate_i_{a}"), g.rate[k].i.to_string());
            put(&format!("rate_d_{a}"), g.rate[k].d.to_string());
            put(&format!("rate_ilim_{a}"), g.rate[k].integral_limit.to_string());
        }
        put("max_velocity_xy", g.max_velocity_xy.to_string());
        put("max_velocity_z", g.max_velocity_z.to_string());
        put("max_accel_xy", g.max_accel_xy.to_string());
        put("max_accel_z", g.max_accel_z.to_string());
        put("max_rate", g.max_rate.to_string());
        for k in 0..3 {
            put(&format!("torque_limit_{}", AXES[k]), g.torque_limit[k].to_string());
        }
        out
    }
}

/// Parses configuration text on top of the defaults and validates the result.
pub fn parse_config(text: &str) -> Result<SimConfig> {
    let mut config = SimConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
            line: line_no,
            message: format!("expected `key = value`, found `{line}`"),
        })?;
        config
            .set(key.trim(), value.trim())
            .map_err(|message| Error::Config { line: line_no, message })?;
    }
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<SimConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(parse_config("# nothing\n\n").unwrap(), SimConfig::default());
    }

    #[test]
    fn rendered_defaults_parse_back() {
        let mut c = SimConfig {
            mode: ControlMode::Conventional,
            ..SimConfig::default()
        };
        c.set_servo_rate_limit(true);
        c.params.servo_trim = [0.01, 0.0, -0.02, 0.0];
        c.disturbance.force.x = 0.5;
        let text = c.to_config_text();
        let back = parse_config(&text).unwrap();
        // only beta_max goes through a degree conversion
        assert!((back.params.beta_max - c.params.beta_max).abs() < 1e-15);
        let mut back = back;
        back.params.beta_max = c.params.beta_max;
        assert_eq!(back, c);
    }

    #[test]
    fn every_documented_key_is_accepted() {
        let text = SimConfig::default().to_config_text();
        let rendered: Vec<&str> = text.lines().map(|l| l.split('=').next().unwrap().trim()).collect();
        for (key, _) in CONFIG_KEYS {
            assert!(rendered.contains(key), "{key} not rendered");
        }
        assert_eq!(rendered.len(), CONFIG_KEYS.len());
    }

    #[test]
    fn unknown_key_is_an_error() {
        let e = parse_config("mass = 2.0\nmas = 2.0\n").unwrap_err();
        assert_eq!(
            e,
            Error::Config {
                line: 2,
                message: "unknown key `mas`".into()
            }
        );
    }

    #[test]
    fn malformed_lines() {
        assert!(matches!(parse_config("mass 2.0"), Err(Error::Config { line: 1, .. })));
        assert!(matches!(parse_config("mass = heavy"), Err(Error::Config { line: 1, .. })));
        assert!(matches!(parse_config("mode = hexa"), Err(Error::Config { line: 1, .. })));
        assert!(matches!(parse_config("duration = nan"), Err(Error::Config { line: 1, .. })));
    }

    #[test]
    fn step_sizes_must_nest() {
        assert!(parse_config("control_dt = 0.0035").is_err());
        assert!(parse_config("physics_dt = 0.02").is_err());
        assert!(parse_config("duration = 0").is_err());
        let c = parse_config("control_dt = 0.002\nphysics_dt = 0.0005").unwrap();
        assert_eq!(c.substeps(), 4);
    }

    #[test]
    fn row_count_formula() {
        let mut c = SimConfig {
            duration: 30.0,
            ..SimConfig::default()
        };
        assert_eq!(c.control_steps(), 7501);
        c.duration = 1.001;
        assert_eq!(c.control_steps(), 251);
    }

    #[test]
    fn servo_rate_follows_parameter() {
        let c = parse_config("servo_rate_limit = true\nservo_rate_max = 10").unwrap();
        assert_eq!(c.servo_model, ServoModel::RateLimited { rate: 10.0 });
    }
}
