//! `sim`: run missions, inspect allocations and run the self-checks.
//!
//! Exit status: 0 on success, 1 when a run or a check fails, 2 on usage or
//! configuration errors. `SIM_LOG_LEVEL` sets the log filter (default `warn`).

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tiltquad::allocation::{extract_commands, normalize, EffectivenessMatrix};
use tiltquad::mission::load_mission;
use tiltquad::sim::{load_config, run, write_telemetry};
use tiltquad::{ControlMode, SimConfig, Wrench};

#[derive(Parser)]
#[command(name = "sim", version, about = "Tilt-rotor quadrotor simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fly a mission and write telemetry.
    Run {
        /// Configuration file (`key = value` lines); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Mission file, one `x,y,z,hold_time,acceptance_radius` row per waypoint.
        #[arg(long)]
        mission: PathBuf,
        /// Overrides the configured control mode.
        #[arg(long)]
        mode: Option<ControlMode>,
        /// Telemetry CSV output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the configured duration, s.
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Slew tilt commands at the configured servo rate.
        #[arg(long)]
        servo_rate_limit: bool,
    },
    /// Allocate one body wrench and print the actuator commands.
    Allocate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// `tau_x,tau_y,tau_z,f_x,f_y,f_z` in N·m and N.
        #[arg(long, allow_hyphen_values = true)]
        wrench: String,
    },
    /// Run the numerical self-checks.
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

enum Failure {
    Usage(String),
    Run(String),
}

fn with_path(path: &Path, e: tiltquad::Error) -> Failure {
    match e {
        tiltquad::Error::Io(_) => Failure::Usage(e.to_string()),
        _ => Failure::Usage(format!("{}: {e}", path.display())),
    }
}

fn config_from(path: Option<&Path>) -> Result<SimConfig, Failure> {
    match path {
        Some(p) => load_config(p).map_err(|e| with_path(p, e)),
        None => Ok(SimConfig::default()),
    }
}

fn parse_wrench(text: &str) -> Result<Wrench, Failure> {
    let values: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::Usage(format!("wrench `{text}` is not a list of numbers")))?;
    let arr: [f64; 6] = values
        .try_into()
        .map_err(|v: Vec<f64>| Failure::Usage(format!("wrench needs 6 components, got {}", v.len())))?;
    if arr.iter().any(|x| !x.is_finite()) {
        return Err(Failure::Usage("wrench components must be finite".into()));
    }
    Ok(Wrench::from_array(arr))
}

fn save_telemetry(path: &Path, rows: &[tiltquad::TelemetryRecord]) -> Result<(), Failure> {
    let file = File::create(path).map_err(|e| Failure::Run(format!("{}: {e}", path.display())))?;
    let mut out = BufWriter::new(file);
    write_telemetry(&mut out, rows)
        .and_then(|_| out.flush())
        .map_err(|e| Failure::Run(format!("{}: {e}", path.display())))
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    config: Option<PathBuf>,
    mission: PathBuf,
    mode: Option<ControlMode>,
    out: Option<PathBuf>,
    duration: Option<f64>,
    seed: Option<u64>,
    servo_rate_limit: bool,
) -> Result<(), Failure> {
    let mut cfg = config_from(config.as_deref())?;
    if let Some(m) = mode {
        cfg.mode = m;
    }
    if let Some(d) = duration {
        cfg.duration = d;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if servo_rate_limit {
        cfg.set_servo_rate_limit(true);
    }
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let mission = load_mission(&mission).map_err(|e| with_path(&mission, e))?;

    match run(&cfg, &mission) {
        Ok(result) => {
            if let Some(path) = &out {
                save_telemetry(path, &result.telemetry)?;
            }
            let stdout = io::stdout();
            let mut w = stdout.lock();
            let _ = writeln!(w, "mode = {}", cfg.mode);
            let _ = writeln!(w, "rows = {}", result.telemetry.len());
            let _ = writeln!(w, "{}", result.metrics);
            Ok(())
        }
        Err(failure) => {
            if let Some(path) = &out {
                save_telemetry(path, &failure.telemetry)?;
            }
            Err(Failure::Run(format!(
                "run stopped after {} rows: {}",
                failure.telemetry.len(),
                failure.error
            )))
        }
    }
}

fn cmd_allocate(config: Option<PathBuf>, wrench: &str) -> Result<(), Failure> {
    let cfg = config_from(config.as_deref())?;
    let v = parse_wrench(wrench)?;
    let params = &cfg.params;
    let b = match cfg.mode {
        ControlMode::Omnidirectional => EffectivenessMatrix::new(params),
        ControlMode::Conventional => EffectivenessMatrix::fixed_tilt(params),
    };
    let u = b.allocate(&v);
    let e = extract_commands(&u, params);
    let n = normalize(&e.commands, params);
    let residual = (b.apply(&u) - v).max_abs();

    println!("rotor,f_lon,f_lat,f_ver,thrust_N,omega_rad_s,beta_deg,motor,servo,sat_motor,sat_servo");
    for i in 0..4 {
        let f = u.rotor(i);
        println!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.3},{:.4},{:.5},{:.5},{},{}",
            i + 1,
            f.x,
            f.y,
            f.z,
            e.thrust[i],
            e.commands.omega[i],
            e.commands.beta[i].to_degrees(),
            n.motor[i],
            n.servo[i],
            u8::from(e.saturation.motor[i] || n.saturated.motor[i]),
            u8::from(e.saturation.servo[i] || n.saturated.servo[i]),
        );
    }
    println!("residual_inf = {residual:.3e}");
    Ok(())
}

fn cmd_verify(config: Option<PathBuf>, seed: Option<u64>) -> Result<(), Failure> {
    let cfg = config_from(config.as_deref())?;
    let reports = tiltquad::verify::run_all(&cfg.params, seed.unwrap_or(cfg.seed));
    println!("name,status,error,tolerance,detail");
    for r in &reports {
        println!("{r}");
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(Failure::Run(format!("{failed} of {} checks failed", reports.len())));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("SIM_LOG_LEVEL", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            mission,
            mode,
            out,
            duration,
            seed,
            servo_rate_limit,
        } => cmd_run(config, mission, mode, out, duration, seed, servo_rate_limit),
        Command::Allocate { config, wrench } => cmd_allocate(config, &wrench),
        Command::Verify { config, seed } => cmd_verify(config, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
