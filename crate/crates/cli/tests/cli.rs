use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sim")).args(args).output().expect("sim runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_writes_telemetry_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tele.csv");
    let o = sim(&[
        "run",
        "--config",
        data("default.cfg").to_str().unwrap(),
        "--mission",
        data("square.csv").to_str().unwrap(),
        "--mode",
        "omni",
        "--duration",
        "6",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("rows = 1501"), "{text}");
    assert!(text.contains("rms_position_error_m"));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 1502);
    assert!(csv.starts_with("t,x,y,z,roll,pitch,yaw,"));
    assert_eq!(tiltquad::sim::parse_telemetry(&csv).unwrap().len(), 1501);
}

#[test]
fn servo_rate_limit_flag_is_accepted() {
    let o = sim(&["run", "--mission", data("hover.csv").to_str().unwrap(), "--duration", "1", "--servo-rate-limit"]);
    assert!(o.status.success());
}

#[test]
fn allocate_prints_hover_commands() {
    let o = sim(&["allocate", "--config", data("default.cfg").to_str().unwrap(), "--wrench", "0,0,0,0,0,20.06"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().filter(|l| l.starts_with(char::is_numeric)).collect();
    assert_eq!(rows.len(), 4);
    for r in rows {
        let f: Vec<&str> = r.split(',').collect();
        assert_eq!(f[4], "5.015000");
        assert_eq!(f[7], "0.38577");
    }
}

#[test]
fn allocate_accepts_negative_components() {
    let o = sim(&["allocate", "--wrench", "-0.1,0,0,-2,0,20"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(sim(&["allocate", "--wrench", "1,2"]).status.code(), Some(2));
    assert_eq!(sim(&["run", "--mission", "/nonexistent.csv"]).status.code(), Some(2));
    assert_eq!(sim(&["bogus"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "mass = 2\nwingspan = 3\n").unwrap();
    let o = sim(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn verify_passes_on_default_vehicle() {
    let o = sim(&["verify", "--config", data("default.cfg").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.lines().skip(1).all(|l| l.split(',').nth(1) == Some("PASS")), "{text}");
    assert!(text.contains("envelope_crosscheck,PASS"));
}

#[test]
fn failed_checks_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("locked.cfg");
    // with no tilt range every sampled wrench with a horizontal force saturates
    std::fs::write(&cfg, "beta_max_deg = 0\n").unwrap();
    let o = sim(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
}
