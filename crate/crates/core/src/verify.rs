//! Numerical self-checks: allocation against an independent solver, wrench
//! round trips through the plant, conservation laws of the integrator, and
//! a cross-check of the lateral envelope.

use std::fmt;

use nalgebra::{DMatrix, DVector, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::allocation::{
    extract_commands, feasible_lateral_accel_along, ActuatorForces, BMatrix, EffectivenessMatrix, EnvelopeSearch,
};
use crate::error::Result;
use crate::geometry::Vec3;
use crate::linalg;
use crate::vehicle::{propulsive_wrench, step, ActuatorCommands, Disturbance, VehicleParams, VehicleState, Wrench};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    /// Worst observed error, in the check's own unit.
    pub error: f64,
    pub tolerance: f64,
    /// Input that produced the worst error.
    pub witness: Option<String>,
    pub detail: String,
}

impl CheckReport {
    fn bound(name: &str, error: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: error <= tolerance,
            error,
            tolerance,
            witness: None,
            detail: String::new(),
        }
    }

    fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    fn with_witness(mut self, witness: Option<String>) -> Self {
        self.witness = witness;
        self
    }
}

impl fmt::Display for CheckReport {
    /// `name,status,error,tolerance,detail`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let mut detail = self.detail.clone();
        if let (false, Some(w)) = (self.passed, &self.witness) {
            if !detail.is_empty() {
                detail.push(' ');
            }
            detail.push_str(&format!("witness={w}"));
        }
        write!(f, "{},{},{:.3e},{:.3e},{}", self.name, status, self.error, self.tolerance, detail)
    }
}

/// Minimal-norm least-squares allocation computed without the SVD.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub forces: ActuatorForces,
    pub rank: usize,
}

impl OracleSolution {
    pub fn rank_deficient(&self) -> bool {
        self.rank < 6
    }
}

/// Solves `min ‖u‖` subject to `B u` closest to `v` by projecting onto an
/// explicitly orthonormalised row space of `B`. A rank-deficient `B` is
/// reported through [`OracleSolution::rank`]; the solution is then the
/// least-squares one.
pub fn oracle_least_squares(b: &BMatrix, v: &Wrench) -> Option<OracleSolution> {
    let a = DMatrix::from_fn(6, 12, |r, c| b[(r, c)]);
    let rhs = DVector::from_iterator(6, v.to_vector().iter().copied());
    let (x, rank) = linalg::min_norm_solve(&a, &rhs, 1e-10)?;
    Some(OracleSolution {
        forces: ActuatorForces(nalgebra::SVector::<f64, 12>::from_iterator(x.iter().copied())),
        rank,
    })
}

/// Limits of the random wrench population: `|τx|, |τy| ≤ torque_xy`,
/// `|τz| ≤ torque_z`, `|fx|, |fy| ≤ force_xy`, `fz` in `[0, force_z_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WrenchSampler {
    pub torque_xy: f64,
    pub torque_z: f64,
    pub force_xy: f64,
    pub force_z_max: f64,
}

impl Default for WrenchSampler {
    fn default() -> Self {
        Self {
            torque_xy: 2.0,
            torque_z: 0.5,
            force_xy: 10.0,
            force_z_max: 40.0,
        }
    }
}

impl WrenchSampler {
    pub fn sample(&self, rng: &mut impl Rng) -> Wrench {
        Wrench::from_array([
            rng.random_range(-self.torque_xy..=self.torque_xy),
            rng.random_range(-self.torque_xy..=self.torque_xy),
            rng.random_range(-self.torque_z..=self.torque_z),
            rng.random_range(-self.force_xy..=self.force_xy),
            rng.random_range(-self.force_xy..=self.force_xy),
            rng.random_range(0.0..=self.force_z_max),
        ])
    }

    pub fn samples(&self, n: usize, seed: u64) -> Vec<Wrench> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.sample(&mut rng)).collect()
    }
}

fn fmt_wrench(v: &Wrench) -> String {
    let a = v.to_vector();
    format!("[{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}]", a[0], a[1], a[2], a[3], a[4], a[5])
}

/// `‖B B⁺ v − v‖∞` over random wrenches.
pub fn allocation_exactness_check(b: &EffectivenessMatrix, n: usize, seed: u64) -> CheckReport {
    let mut worst = 0.0;
    let mut witness = None;
    for v in WrenchSampler::default().samples(n, seed) {
        let err = (b.apply(&b.allocate(&v)) - v).max_abs();
        if err > worst || witness.is_none() {
            worst = f64::max(worst, err);
            witness = Some(fmt_wrench(&v));
        }
    }
    CheckReport::bound("allocation_exactness", worst, 1e-9)
        .with_witness(witness)
        .with_detail(format!("samples={n}"))
}

/// Agreement of the allocator with [`oracle_least_squares`], and the
/// longitudinal components of the allocation.
pub fn oracle_agreement_checks(b: &EffectivenessMatrix, n: usize, seed: u64) -> Vec<CheckReport> {
    let mut worst = 0.0f64;
    let mut worst_lon = 0.0f64;
    let mut witness = None;
    let mut deficient = 0;
    for v in WrenchSampler::default().samples(n, seed) {
        let u = b.allocate(&v);
        let (err, rank_low) = match oracle_least_squares(b.matrix(), &v) {
            Some(o) => ((u.0 - o.forces.0).amax(), o.rank_deficient()),
            None => (f64::INFINITY, true),
        };
        if rank_low {
            deficient += 1;
        }
        if err > worst {
            worst = err;
            witness = Some(fmt_wrench(&v));
        }
        for i in 0..4 {
            worst_lon = worst_lon.max(u.0[3 * i].abs());
        }
    }
    vec![
        CheckReport::bound("oracle_agreement", worst, 1e-8)
            .with_witness(witness)
            .with_detail(format!("samples={n} rank_deficient={deficient}")),
        CheckReport::bound("longitudinal_zero", worst_lon, 1e-12),
    ]
}

/// Allocate, extract actuator commands, evaluate the plant's propulsive
/// wrench through `physics`, and compare with the request. Wrenches whose
/// extraction saturates are skipped.
pub fn wrench_roundtrip_with<F>(
    b: &EffectivenessMatrix,
    params: &VehicleParams,
    n: usize,
    seed: u64,
    physics: F,
) -> CheckReport
where
    F: Fn(&ActuatorCommands, &VehicleParams) -> Wrench,
{
    let mut worst = 0.0f64;
    let mut witness = None;
    let mut used = 0;
    for v in WrenchSampler::default().samples(n, seed) {
        let e = extract_commands(&b.allocate(&v), params);
        if e.saturation.any() {
            continue;
        }
        used += 1;
        let err = (physics(&e.commands, params) - v).max_abs();
        if err > worst {
            worst = err;
            witness = Some(fmt_wrench(&v));
        }
    }
    let mut report = CheckReport::bound("wrench_roundtrip", worst, 1e-6)
        .with_witness(witness)
        .with_detail(format!("unsaturated={used}/{n}"));
    if used == 0 {
        report.passed = false;
    }
    report
}

pub fn wrench_roundtrip_check(params: &VehicleParams, n: usize, seed: u64) -> CheckReport {
    wrench_roundtrip_with(&EffectivenessMatrix::new(params), params, n, seed, propulsive_wrench)
}

/// Flips the sign of each non-zero entry of `B` in turn and confirms the
/// round trip against the unmodified plant fails for every mutant.
pub fn roundtrip_mutation_check(params: &VehicleParams, n: usize, seed: u64) -> CheckReport {
    let base = EffectivenessMatrix::new(params);
    let mut mutants = 0;
    let mut survivors = Vec::new();
    let mut weakest = f64::INFINITY;
    let mut unrealisable = 0;
    for idx in 0..72 {
        let (r, c) = (idx / 12, idx % 12);
        if base.matrix()[(r, c)] == 0.0 {
            continue;
        }
        let mut m = *base.matrix();
        m[(r, c)] = -m[(r, c)];
        mutants += 1;
        let Ok(mutant) = EffectivenessMatrix::from_matrix(m) else {
            continue;
        };
        let report = wrench_roundtrip_with(&mutant, params, n, seed, propulsive_wrench);
        if report.passed {
            survivors.push(format!("B[{r}][{c}]"));
        } else if report.error > 0.0 {
            weakest = weakest.min(report.error);
        } else {
            // every sample saturates: the mutant cannot realise any request
            unrealisable += 1;
        }
    }
    CheckReport {
        name: "roundtrip_mutation".into(),
        passed: survivors.is_empty() && mutants > 0,
        error: survivors.len() as f64,
        tolerance: 0.0,
        witness: survivors.first().cloned(),
        detail: format!("mutants={mutants} smallest_detected_error={weakest:.3e} fully_saturated={unrealisable}"),
    }
}

fn free_motion(
    state: VehicleState,
    params: &VehicleParams,
    duration: f64,
    dt: f64,
) -> Result<VehicleState> {
    let idle = ActuatorCommands::default();
    let steps = (duration / dt).round() as usize;
    let mut s = state;
    for _ in 0..steps {
        s = step(&s, &idle, &Disturbance::default(), params, dt)?;
    }
    Ok(s)
}

fn state_vector(s: &VehicleState) -> Vector6<f64> {
    let a = s.attitude.to_vector();
    Vector6::new(a.x, a.y, a.z, s.body_rate.x, s.body_rate.y, s.body_rate.z)
}

/// Torque-free tumbling conserves world-frame angular momentum; free fall
/// matches the closed form; spin about a principal axis stays constant; the
/// integrator error shrinks by about 16x when the step halves.
pub fn conservation_checks(params: &VehicleParams) -> Vec<CheckReport> {
    let p = params.without_drag();
    let mut out = Vec::new();
    let failed = |name: &str, e: crate::error::Error| CheckReport {
        name: name.into(),
        passed: false,
        error: f64::INFINITY,
        tolerance: 0.0,
        witness: None,
        detail: e.to_string(),
    };

    let tumble = VehicleState {
        body_rate: Vec3::new(1.0, 2.0, 3.0),
        ..VehicleState::at_rest(Vec3::zeros())
    };
    let h0 = tumble.angular_momentum(&p.inertia);
    out.push(match free_motion(tumble, &p, TUMBLE_DURATION, 1e-3) {
        Ok(s) => {
            let drift = (s.angular_momentum(&p.inertia) - h0).norm() / h0.norm();
            CheckReport::bound("angular_momentum", drift, 1e-6)
                .with_detail(format!("omega0=(1,2,3) duration={TUMBLE_DURATION}s"))
        }
        Err(e) => failed("angular_momentum", e),
    });

    out.push(match free_motion(VehicleState::at_rest(Vec3::zeros()), &p, 1.0, 1e-3) {
        Ok(s) => CheckReport::bound("free_fall", (s.position.z + 0.5 * crate::geometry::GRAVITY).abs(), 1e-6)
            .with_detail(format!("z(1s)={:.9}", s.position.z)),
        Err(e) => failed("free_fall", e),
    });

    let spin = VehicleState {
        body_rate: Vec3::new(0.0, 0.0, 3.0),
        ..VehicleState::at_rest(Vec3::zeros())
    };
    out.push(match free_motion(spin, &p, 1.0, 1e-3) {
        Ok(s) => CheckReport::bound("principal_axis_spin", (s.body_rate - spin.body_rate).amax(), 1e-12),
        Err(e) => failed("principal_axis_spin", e),
    });

    let coarse = 4e-3;
    let order = free_motion(tumble, &p, TUMBLE_DURATION, coarse).and_then(|c| {
        let h = free_motion(tumble, &p, TUMBLE_DURATION, coarse / 2.0)?;
        let r = free_motion(tumble, &p, TUMBLE_DURATION, coarse / 32.0)?;
        let e1 = (state_vector(&c) - state_vector(&r)).amax();
        let e2 = (state_vector(&h) - state_vector(&r)).amax();
        Ok((e1, e2))
    });
    out.push(match order {
        Ok((e1, e2)) => {
            let ratio = e1 / e2;
            CheckReport {
                name: "rk4_order".into(),
                passed: (12.0..=20.0).contains(&ratio),
                error: ratio,
                tolerance: 16.0,
                witness: None,
                detail: format!("err(dt)={e1:.3e} err(dt/2)={e2:.3e} accepted=[12,20]"),
            }
        }
        Err(e) => failed("rk4_order", e),
    });
    out
}

const TUMBLE_DURATION: f64 = 1.0;

/// Smallest horizontal force along `heading` whose allocation saturates a
/// rotor, as an acceleration in m/s². Level attitude, weight supported.
pub fn saturation_onset_accel(params: &VehicleParams, heading: f64) -> f64 {
    let b = EffectivenessMatrix::new(params);
    let weight = params.weight();
    let saturates = |f: f64| {
        let v = Wrench::from_array([0.0, 0.0, 0.0, f * heading.cos(), f * heading.sin(), weight]);
        extract_commands(&b.allocate(&v), params).saturation.any()
    };
    let (mut lo, mut hi) = (0.0, 4.0 * params.thrust_max);
    if saturates(lo) {
        return 0.0;
    }
    if !saturates(hi) {
        return hi / params.mass;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if saturates(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo / params.mass
}

fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Envelope from the grid search compared with the allocator's onset of
/// saturation along body x, the diagonal value, and monotonicity in the
/// tilt limit.
pub fn envelope_checks(params: &VehicleParams) -> Vec<CheckReport> {
    let search = EnvelopeSearch::default();
    let mut out = Vec::new();
    let grid = match feasible_lateral_accel_along(params, 0.0, search) {
        Ok(e) => e.accel,
        Err(e) => {
            return vec![CheckReport {
                name: "envelope_crosscheck".into(),
                passed: false,
                error: f64::INFINITY,
                tolerance: 0.01,
                witness: None,
                detail: e.to_string(),
            }]
        }
    };
    let onset = saturation_onset_accel(params, 0.0);
    let diagonal = feasible_lateral_accel_along(params, std::f64::consts::FRAC_PI_4, search)
        .map(|e| e.accel)
        .unwrap_or(f64::NAN);
    out.push(CheckReport::bound("envelope_crosscheck", relative_gap(grid, onset), 0.01).with_detail(format!(
        "grid_x={grid:.4}m/s2 allocator_x={onset:.4}m/s2 grid_diagonal={diagonal:.4}m/s2"
    )));

    let mut last = -1.0;
    let mut worst_drop = 0.0f64;
    let mut trace = Vec::new();
    for deg in [0.0, 10.0, 20.0, 30.0, 40.0] {
        let mut q = params.clone();
        q.beta_max = f64::to_radians(deg);
        let a = feasible_lateral_accel_along(&q, 0.0, EnvelopeSearch { grid_points: 41, refinements: 3 })
            .map(|e| e.accel)
            .unwrap_or(f64::NAN);
        trace.push(format!("{deg:.0}:{a:.3}"));
        if last >= 0.0 {
            worst_drop = worst_drop.max(last - a);
        }
        if a.is_nan() {
            worst_drop = f64::INFINITY;
        }
        last = a;
    }
    out.push(CheckReport::bound("envelope_monotone_in_tilt", worst_drop, 1e-9).with_detail(trace.join(" ")));
    out
}

/// Every check, in report order.
pub fn run_all(params: &VehicleParams, seed: u64) -> Vec<CheckReport> {
    let b = EffectivenessMatrix::new(params);
    let mut out = vec![allocation_exactness_check(&b, 1000, seed)];
    out.extend(oracle_agreement_checks(&b, 1000, seed.wrapping_add(1)));
    out.push(wrench_roundtrip_check(params, 1000, seed.wrapping_add(2)));
    out.push(roundtrip_mutation_check(params, 200, seed.wrapping_add(3)));
    out.extend(conservation_checks(params));
    out.extend(envelope_checks(params));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> VehicleParams {
        VehicleParams::default()
    }

    #[test]
    fn oracle_reports_rank() {
        let p = params();
        let full = oracle_least_squares(EffectivenessMatrix::new(&p).matrix(), &Wrench::default()).unwrap();
        assert_eq!(full.rank, 6);
        let fixed = oracle_least_squares(EffectivenessMatrix::fixed_tilt(&p).matrix(), &Wrench::default()).unwrap();
        assert_eq!(fixed.rank, 4);
        assert!(fixed.rank_deficient());
    }

    #[test]
    fn rank_deficient_oracle_matches_pinv() {
        let b = EffectivenessMatrix::fixed_tilt(&params());
        let v = Wrench::from_array([0.3, -0.2, 0.05, 4.0, -1.0, 20.0]);
        let o = oracle_least_squares(b.matrix(), &v).unwrap();
        assert!((o.forces.0 - b.allocate(&v).0).amax() < 1e-10);
    }

    #[test]
    fn sampler_respects_bounds() {
        for v in WrenchSampler::default().samples(500, 3) {
            assert!(v.torque.x.abs() <= 2.0 && v.torque.y.abs() <= 2.0 && v.torque.z.abs() <= 0.5);
            assert!(v.force.x.abs() <= 10.0 && v.force.y.abs() <= 10.0);
            assert!((0.0..=40.0).contains(&v.force.z));
        }
    }

    #[test]
    fn mutated_plant_breaks_roundtrip() {
        let p = params();
        let b = EffectivenessMatrix::new(&p);
        let flipped_yaw = |c: &ActuatorCommands, p: &VehicleParams| {
            let mut w = propulsive_wrench(c, p);
            let lateral: f64 = (0..4)
                .map(|i| (p.k_thrust * c.omega[i] * c.omega[i]) * c.beta[i].sin())
                .sum();
            w.torque.z += 2.0 * p.arm_length * lateral;
            w
        };
        assert!(wrench_roundtrip_with(&b, &p, 300, 9, propulsive_wrench).passed);
        assert!(!wrench_roundtrip_with(&b, &p, 300, 9, flipped_yaw).passed);
    }

    #[test]
    fn report_line_format() {
        let r = CheckReport::bound("x", 1e-12, 1e-9).with_detail("n=3");
        assert_eq!(r.to_string(), "x,PASS,1.000e-12,1.000e-9,n=3");
    }

    #[test]
    fn zero_tilt_has_zero_onset() {
        let mut p = params();
        p.beta_max = 0.0;
        assert_eq!(saturation_onset_accel(&p, 0.0), 0.0);
    }
}
