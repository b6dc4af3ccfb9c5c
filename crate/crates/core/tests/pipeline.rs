use tiltquad::allocation::{extract_commands, EffectivenessMatrix};
use tiltquad::mission::parse_mission;
use tiltquad::sim::{compute_metrics, parse_config, parse_telemetry, run, write_telemetry, Simulation};
use tiltquad::{ControlMode, EulerAngles, Mission, SimConfig, TelemetryRecord, Vec3, VehicleParams, Wrench};

const SQUARE: &str = "1,1,1.5,2,0.15\n-1,1,1.5,2,0.15\n-1,-1,1.5,2,0.15\n1,-1,1.5,2,0.15\n";

fn hover_row(t: f64) -> TelemetryRecord {
    let p = Vec3::new(0.0, 0.0, 1.5);
    TelemetryRecord {
        t,
        position: p,
        setpoint: p,
        motor: [0.3858; 4],
        ..TelemetryRecord::default()
    }
}

#[test]
fn constant_hover_telemetry_has_zero_error_and_tilt() {
    let rows: Vec<_> = (0..100).map(|k| hover_row(k as f64 * 0.1)).collect();
    let m = compute_metrics(&rows, 5.0).unwrap();
    assert_eq!(m.rms_position_error, 0.0);
    assert_eq!(m.max_tilt(), 0.0);
}

#[test]
fn single_pitch_sample_sets_max_pitch() {
    let mut rows: Vec<_> = (0..100).map(|k| hover_row(k as f64 * 0.1)).collect();
    rows[70].attitude = EulerAngles::new(0.0, 10f64.to_radians(), 0.0);
    let m = compute_metrics(&rows, 5.0).unwrap();
    assert!((m.max_abs_pitch.to_degrees() - 10.0).abs() < 1e-12);
    // the takeoff window is excluded
    rows[70].attitude = EulerAngles::ZERO;
    rows[10].attitude = EulerAngles::new(0.0, 10f64.to_radians(), 0.0);
    assert_eq!(compute_metrics(&rows, 5.0).unwrap().max_abs_pitch, 0.0);
}

#[test]
fn repeated_runs_are_bit_identical() {
    let cfg = SimConfig {
        mode: ControlMode::Conventional,
        duration: 12.0,
        ..SimConfig::default()
    };
    let mission = parse_mission(SQUARE).unwrap();
    let a = run(&cfg, &mission).unwrap();
    let b = run(&cfg, &mission).unwrap();
    assert_eq!(a.telemetry, b.telemetry);
    assert_eq!(a.metrics, b.metrics);
}

#[test]
fn telemetry_file_round_trip_keeps_shape() {
    let cfg = SimConfig {
        duration: 2.0,
        ..SimConfig::default()
    };
    let out = run(&cfg, &Mission::hover(Vec3::new(0.0, 0.0, 1.0))).unwrap();
    let mut buf = Vec::new();
    write_telemetry(&mut buf, &out.telemetry).unwrap();
    let back = parse_telemetry(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(back.len(), 501);
    assert!(back.windows(2).all(|w| w[1].t > w[0].t));
    let last = out.telemetry.last().unwrap();
    assert!((back.last().unwrap().position.z - last.position.z).abs() <= 1e-5 * last.position.z.abs().max(1.0));
}

#[test]
fn config_text_drives_the_run() {
    let cfg = parse_config("mode = conventional\nduration = 1\nservo_rate_limit = true\n").unwrap();
    assert_eq!(cfg.mode, ControlMode::Conventional);
    let out = run(&cfg, &Mission::hover(Vec3::new(0.0, 0.0, 1.0))).unwrap();
    assert_eq!(out.telemetry.len(), 251);
}

#[test]
fn stepwise_simulation_matches_run() {
    let cfg = SimConfig {
        duration: 1.0,
        ..SimConfig::default()
    };
    let mission = parse_mission(SQUARE).unwrap();
    let whole = run(&cfg, &mission).unwrap();
    let mut sim = Simulation::new(cfg, mission).unwrap();
    for expected in &whole.telemetry {
        let out = sim.control().unwrap();
        assert_eq!(&out.record, expected);
        sim.advance(&out.applied).unwrap();
    }
}

#[test]
fn hover_wrench_allocates_equal_vertical_thrust() {
    let p = VehicleParams::default();
    let b = EffectivenessMatrix::new(&p);
    let e = extract_commands(&b.allocate(&Wrench::from_array([0.0, 0.0, 0.0, 0.0, 0.0, p.weight()])), &p);
    for i in 0..4 {
        assert!((e.thrust[i] - 5.0153625).abs() < 1e-9);
        assert!(e.commands.beta[i].abs() < 1e-12);
    }
}

#[test]
fn displaced_start_converges_to_waypoint() {
    let cfg = SimConfig {
        duration: 20.0,
        initial_position: Vec3::new(0.5, -0.5, 0.0),
        ..SimConfig::default()
    };
    let target = Vec3::new(0.0, 0.0, 1.0);
    let out = run(&cfg, &Mission::hover(target)).unwrap();
    let end = out.telemetry.last().unwrap();
    assert!((end.position - target).norm() < 0.02, "{}", end.position);
}
