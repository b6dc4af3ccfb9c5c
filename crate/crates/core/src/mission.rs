//! Waypoint missions and setpoint scheduling.
//!
//! Mission files are plain comma-separated text, one waypoint per row:
//!
//! ```text
//! # x, y, z, hold_time, acceptance_radius
//! 1.0, 1.0, 1.5, 2.0, 0.15
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::path::Path;

use crate::control::Setpoint;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::vehicle::VehicleState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub position: Vec3,
    /// s
    pub hold_time: f64,
    /// m
    pub acceptance_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mission {
    pub waypoints: Vec<Waypoint>,
    /// Altitude reached by the takeoff climb before the first waypoint.
    pub takeoff_altitude: f64,
    /// Restart from the first waypoint after the last one instead of completing.
    pub looping: bool,
}

impl Mission {
    /// Mission from waypoints; the takeoff altitude is the first waypoint's.
    pub fn new(waypoints: Vec<Waypoint>) -> Result<Self> {
        let first = waypoints
            .first()
            .ok_or_else(|| Error::Mission("no waypoints".into()))?;
        let mission = Self {
            takeoff_altitude: first.position.z,
            waypoints,
            looping: false,
        };
        mission.validate()?;
        Ok(mission)
    }

    /// A single waypoint held indefinitely.
    pub fn hover(position: Vec3) -> Self {
        Self {
            waypoints: vec![Waypoint {
                position,
                hold_time: f64::MAX,
                acceptance_radius: 0.15,
            }],
            takeoff_altitude: position.z,
            looping: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.waypoints.is_empty() {
            return Err(Error::Mission("no waypoints".into()));
        }
        for (i, w) in self.waypoints.iter().enumerate() {
            if w.position.iter().any(|x| !x.is_finite()) {
                return Err(Error::Mission(format!("waypoint {}: non-finite position", i + 1)));
            }
            if !(w.acceptance_radius > 0.0) {
                return Err(Error::Mission(format!(
                    "waypoint {}: acceptance radius must be positive",
                    i + 1
                )));
            }
            if !(w.hold_time >= 0.0) {
                return Err(Error::Mission(format!(
                    "waypoint {}: hold time must be non-negative",
                    i + 1
                )));
            }
        }
        if !self.takeoff_altitude.is_finite() {
            return Err(Error::Mission("non-finite takeoff altitude".into()));
        }
        Ok(())
    }
}

/// Parses mission text. Errors carry the 1-based line and column.
pub fn parse_mission(text: &str) -> Result<Mission> {
    let mut waypoints = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line_no = line_no + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut values = [0.0f64; 5];
        let mut count = 0;
        let mut column = 1;
        for field in line.split(',') {
            let lead = field.len() - field.trim_start().len();
            let token = field.trim();
            if count < 5 {
                let value: f64 = token.parse().map_err(|_| {
                    Error::Mission(format!(
                        "line {line_no}, column {}: `{token}` is not a number",
                        column + lead
                    ))
                })?;
                if !value.is_finite() {
                    return Err(Error::Mission(format!(
                        "line {line_no}, column {}: non-finite value `{token}`",
                        column + lead
                    )));
                }
                values[count] = value;
            }
            count += 1;
            column += field.len() + 1;
        }
        if count != 5 {
            return Err(Error::Mission(format!(
                "line {line_no}: expected 5 fields (x,y,z,hold_time,acceptance_radius), found {count}"
            )));
        }
        let wp = Waypoint {
            position: Vec3::new(values[0], values[1], values[2]),
            hold_time: values[3],
            acceptance_radius: values[4],
        };
        if !(wp.hold_time >= 0.0) {
            return Err(Error::Mission(format!("line {line_no}: hold_time must be >= 0")));
        }
        if !(wp.acceptance_radius > 0.0) {
            return Err(Error::Mission(format!(
                "line {line_no}: acceptance_radius must be > 0"
            )));
        }
        waypoints.push(wp);
    }
    Mission::new(waypoints)
}

pub fn load_mission(path: impl AsRef<Path>) -> Result<Mission> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_mission(&text)
}

/// Mission progress owned by the simulation loop.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MissionProgress {
    /// Active waypoint, 0-based.
    pub index: usize,
    /// Time the vehicle entered the active waypoint's acceptance sphere.
    pub entered_at: Option<f64>,
    pub complete: bool,
    /// Time the last waypoint's hold finished.
    pub completed_at: Option<f64>,
}

impl MissionProgress {
    pub fn new() -> Self {
        Self::default()
    }

    /// Advances through the mission and returns the active setpoint.
    ///
    /// A waypoint is satisfied once the vehicle has stayed inside its
    /// acceptance radius for `hold_time` without leaving.
    pub fn current_setpoint(&mut self, mission: &Mission, state: &VehicleState, t: f64) -> Setpoint {
        if !self.complete {
            let wp = &mission.waypoints[self.index];
            if (state.position - wp.position).norm() <= wp.acceptance_radius {
                let entered = *self.entered_at.get_or_insert(t);
                if t - entered >= wp.hold_time - 1e-9 {
                    self.entered_at = None;
                    if self.index + 1 < mission.waypoints.len() {
                        self.index += 1;
                    } else if mission.looping {
                        self.index = 0;
                    } else {
                        self.complete = true;
                        self.completed_at = Some(t);
                    }
                }
            } else {
                self.entered_at = None;
            }
        }
        Setpoint::at(mission.waypoints[self.index].position)
    }
}
