//! Per-control-step telemetry and its CSV form.

use std::io::{self, Write};

use crate::allocation::Saturation;
use crate::error::{Error, Result};
use crate::geometry::{EulerAngles, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TelemetryRecord {
    /// s
    pub t: f64,
    pub position: Vec3,
    pub attitude: EulerAngles,
    pub velocity: Vec3,
    pub body_rate: Vec3,
    /// Position setpoint, m.
    pub setpoint: Vec3,
    /// Signed rotor speeds, rad/s.
    pub omega: [f64; 4],
    /// Applied tilt angles, rad.
    pub beta: [f64; 4],
    pub motor: [f64; 4],
    pub servo: [f64; 4],
    pub saturation: Saturation,
    /// Active waypoint, 0-based.
    pub waypoint: usize,
    pub complete: bool,
}

impl TelemetryRecord {
    /// Largest of |roll| and |pitch|, rad.
    pub fn tilt(&self) -> f64 {
        self.attitude.roll.abs().max(self.attitude.pitch.abs())
    }
}

/// Column names in file order.
pub fn columns() -> Vec<String> {
    let mut c: Vec<String> = ["t", "x", "y", "z", "roll", "pitch", "yaw", "vx", "vy", "vz", "p", "q", "r", "sp_x", "sp_y", "sp_z"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for prefix in ["omega", "beta", "motor", "servo", "sat_motor", "sat_servo"] {
        c.extend((1..=4).map(|i| format!("{prefix}{i}")));
    }
    c.push("waypoint".into());
    c.push("complete".into());
    c
}

pub fn header() -> String {
    columns().join(",")
}

fn push_real(line: &mut String, x: f64) {
    use std::fmt::Write as _;
    let _ = write!(line, ",{x:.5e}");
}

/// One CSV row, without the trailing newline.
pub fn format_record(r: &TelemetryRecord) -> String {
    use std::fmt::Write as _;
    let mut line = format!("{:.5e}", r.t);
    for v in [r.position, r.attitude.to_vector(), r.velocity, r.body_rate, r.setpoint] {
        for x in v.iter() {
            push_real(&mut line, *x);
        }
    }
    for arr in [r.omega, r.beta, r.motor, r.servo] {
        for x in arr {
            push_real(&mut line, x);
        }
    }
    for flags in [r.saturation.motor, r.saturation.servo] {
        for f in flags {
            let _ = write!(line, ",{}", u8::from(f));
        }
    }
    let _ = write!(line, ",{},{}", r.waypoint, u8::from(r.complete));
    line
}

/// Streams telemetry rows to a writer, header first.
pub struct TelemetryWriter<W: Write> {
    out: W,
}

impl<W: Write> TelemetryWriter<W> {
    pub fn new(mut out: W) -> io::Result<Self> {
        writeln!(out, "{}", header())?;
        Ok(Self { out })
    }

    pub fn write(&mut self, r: &TelemetryRecord) -> io::Result<()> {
        writeln!(self.out, "{}", format_record(r))
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn write_telemetry<W: Write>(out: W, records: &[TelemetryRecord]) -> io::Result<()> {
    let mut w = TelemetryWriter::new(out)?;
    for r in records {
        w.write(r)?;
    }
    w.finish().map(|_| ())
}

/// Reads telemetry written by [`write_telemetry`]. Values carry the six
/// significant digits of the file format.
pub fn parse_telemetry(text: &str) -> Result<Vec<TelemetryRecord>> {
    let mut lines = text.lines();
    let expected = header();
    match lines.next() {
        Some(h) if h.trim() == expected => {}
        _ => return Err(Error::Config { line: 1, message: "missing telemetry header".into() }),
    }
    let n = columns().len();
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n {
            return Err(Error::Config {
                line: line_no,
                message: format!("expected {n} fields, found {}", fields.len()),
            });
        }
        let bad = |k: usize| Error::Config {
            line: line_no,
            message: format!("bad value `{}` in column {}", fields[k], k + 1),
        };
        let real = |k: usize| fields[k].trim().parse::<f64>().map_err(|_| bad(k));
        let flag = |k: usize| match fields[k].trim() {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(bad(k)),
        };
        let v3 = |k: usize| -> Result<Vec3> { Ok(Vec3::new(real(k)?, real(k + 1)?, real(k + 2)?)) };
        let a4 = |k: usize| -> Result<[f64; 4]> { Ok([real(k)?, real(k + 1)?, real(k + 2)?, real(k + 3)?]) };
        let f4 = |k: usize| -> Result<[bool; 4]> { Ok([flag(k)?, flag(k + 1)?, flag(k + 2)?, flag(k + 3)?]) };
        out.push(TelemetryRecord {
            t: real(0)?,
            position: v3(1)?,
            attitude: EulerAngles::from_vector(&v3(4)?),
            velocity: v3(7)?,
            body_rate: v3(10)?,
            setpoint: v3(13)?,
            omega: a4(16)?,
            beta: a4(20)?,
            motor: a4(24)?,
            servo: a4(28)?,
            saturation: Saturation {
                motor: f4(32)?,
                servo: f4(36)?,
            },
            waypoint: fields[40].trim().parse().map_err(|_| bad(40))?,
            complete: flag(41)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TelemetryRecord {
        TelemetryRecord {
            t: 1.004,
            position: Vec3::new(0.5, -0.25, 1.5),
            attitude: EulerAngles::new(0.01, -0.02, 0.003),
            velocity: Vec3::new(0.1, 0.0, -0.1),
            body_rate: Vec3::new(0.0, 0.2, 0.0),
            setpoint: Vec3::new(1.0, 1.0, 1.5),
            omega: [700.0, 701.0, -702.0, -703.0],
            beta: [0.1, -0.1, 0.2, -0.2],
            motor: [0.38, 0.39, 0.4, 0.41],
            servo: [0.14, -0.14, 0.28, -0.28],
            saturation: Saturation {
                motor: [false, true, false, false],
                servo: [false, false, false, true],
            },
            waypoint: 2,
            complete: false,
        }
    }

    #[test]
    fn header_has_every_column_once() {
        let c = columns();
        assert_eq!(c.len(), 42);
        assert_eq!(c[0], "t");
        assert_eq!(c[16], "omega1");
        assert_eq!(c[41], "complete");
        let mut sorted = c.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), c.len());
    }

    #[test]
    fn row_format() {
        let line = format_record(&sample());
        assert!(line.starts_with("1.00400e0,5.00000e-1,-2.50000e-1,1.50000e0,"), "{line}");
        assert!(line.ends_with(",0,1,0,0,0,0,0,1,2,0"), "{line}");
        assert_eq!(line.split(',').count(), 42);
    }

    #[test]
    fn csv_round_trip() {
        let mut buf = Vec::new();
        write_telemetry(&mut buf, &[sample(), sample()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let back = parse_telemetry(&text).unwrap();
        assert_eq!(back.len(), 2);
        let r = sample();
        assert!((back[0].t - r.t).abs() < 1e-12);
        assert!((back[0].omega[3] - r.omega[3]).abs() < 1e-9);
        assert_eq!(back[0].saturation, r.saturation);
        assert_eq!(back[0].waypoint, 2);
    }

    #[test]
    fn rejects_foreign_csv() {
        assert!(parse_telemetry("a,b\n1,2\n").is_err());
        let bad = format!("{}\n1,2,3\n", header());
        assert!(matches!(parse_telemetry(&bad), Err(Error::Config { line: 2, .. })));
    }
}
