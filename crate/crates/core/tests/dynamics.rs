//! Trajectory and shuttle dynamics against closed forms and an independent integrator.

mod common;

use common::shuttle_ode;
use planar_trap::dynamics::{integrate_trajectory, shuttle_time, GasModel, RunConfig, ShuttleModel, TrapFields, Waveform};
use planar_trap::fieldsolver::{BasisPotential, BasisSet};
use planar_trap::geometry::IonSpecies;
use planar_trap::grid::{GridSpec, ScalarGrid};
use planar_trap::pseudopotential::DriveConfig;
use proptest::prelude::*;

fn unit_ion() -> IonSpecies {
    IonSpecies::new(1.0, 1.0, 0.0).unwrap()
}

/// Box [-1, 1] × [0, 2] holding one conductor whose potential is `f`.
fn single_basis(id: &str, rf: bool, f: impl Fn(f64, f64) -> f64) -> BasisSet {
    let grid = GridSpec::new(200, 200, -1.0, 0.0, 0.01).unwrap();
    BasisSet {
        layout_hash: String::new(),
        grid,
        rf_ids: if rf { vec![id.to_string()] } else { vec![] },
        bases: vec![BasisPotential { electrode_id: id.to_string(), values: ScalarGrid::from_fn(grid, f) }],
    }
}

#[test]
fn static_harmonic_well_conserves_energy() {
    let basis = single_basis("well", false, |x, y| 0.5 * (x * x + (y - 1.0) * (y - 1.0)));
    let fields = TrapFields::new(&basis);
    let drive = DriveConfig::new(0.0, 100.0).unwrap().with_dc("well", 1.0);
    let cfg = RunConfig { dt: 1e-3, t_end: 20.0, record_every: 1 };
    let tr = integrate_trajectory(&fields, &Waveform::default(), &drive, &unit_ion(), None, [0.3, 1.0, 0.0, 0.2], cfg).unwrap();
    assert!(!tr.escaped);
    let energy = |s: &planar_trap::dynamics::Sample| 0.5 * (s.vx * s.vx + s.vy * s.vy) + 0.5 * (s.x * s.x + (s.y - 1.0).powi(2));
    let e0 = energy(&tr.samples[0]);
    let drift = tr.samples.iter().map(|s| (energy(s) / e0 - 1.0).abs()).fold(0.0, f64::max);
    assert!(drift < 1e-8, "relative energy drift {drift:e}");
    // unit angular frequency: x = 0.3 cos t
    let last = tr.samples.last().unwrap();
    assert!((last.x - 0.3 * last.t.cos()).abs() < 1e-6, "x({}) = {}", last.t, last.x);
}

/// RF quadrupole of unit radius centred at (0, 1); with Q = m = 1 the Mathieu q is 2V/Ω².
fn quadrupole_run(q: f64, periods: usize) -> planar_trap::dynamics::Trajectory {
    let omega = 100.0;
    let basis = single_basis("rf", true, |x, y| 0.5 * (x * x - (y - 1.0) * (y - 1.0)));
    let fields = TrapFields::new(&basis);
    let drive = DriveConfig::new(0.5 * q * omega * omega, omega).unwrap();
    let cfg = RunConfig::per_period(omega, 200, periods);
    integrate_trajectory(&fields, &Waveform::default(), &drive, &unit_ion(), None, [0.02, 1.02, 0.0, 0.0], cfg).unwrap()
}

#[test]
fn quadrupole_is_bounded_below_the_stability_edge() {
    let tr = quadrupole_run(0.8, 150);
    assert!(!tr.escaped);
    let reach = tr.samples.iter().map(|s| s.x.abs().max((s.y - 1.0).abs())).fold(0.0, f64::max);
    assert!(reach < 0.2, "max excursion {reach}");
}

#[test]
fn quadrupole_escapes_above_the_stability_edge() {
    let tr = quadrupole_run(1.0, 150);
    assert!(tr.escaped);
    assert!(tr.escape_time.is_some());
}

#[test]
fn drag_damps_secular_motion() {
    let basis = single_basis("well", false, |x, y| 0.5 * (x * x + (y - 1.0) * (y - 1.0)));
    let fields = TrapFields::new(&basis);
    let drive = DriveConfig::new(0.0, 100.0).unwrap().with_dc("well", 1.0);
    // γ = 6πμR/(Cm) with a tiny mean free path so C ≈ 1
    let gas = GasModel::new(1e5, 1.0 / (6.0 * std::f64::consts::PI), 1e-12, 1.0).unwrap();
    let ion = IonSpecies::new(1.0, 1.0, 0.5).unwrap();
    let gamma = gas.gamma(&ion);
    assert!((gamma - 0.5).abs() < 1e-9);
    let cfg = RunConfig { dt: 1e-3, t_end: 20.0, record_every: 1 };
    let tr = integrate_trajectory(&fields, &Waveform::default(), &drive, &ion, Some(&gas), [0.3, 1.0, 0.0, 0.0], cfg).unwrap();
    // underdamped: amplitude envelope e^{-γt/2}
    let last = tr.samples.last().unwrap();
    let energy = 0.5 * (last.vx * last.vx + last.vy * last.vy) + 0.5 * (last.x * last.x + (last.y - 1.0).powi(2));
    let e0 = 0.5 * 0.3 * 0.3;
    let ratio = energy / e0;
    let expect = (-gamma * last.t).exp();
    assert!(ratio / expect > 0.7 && ratio / expect < 1.3, "energy ratio {ratio} vs envelope {expect}");
}

#[test]
fn shuttle_root_matches_integration_over_drag_range() {
    let ion = IonSpecies::microsphere();
    let (e, d) = (1e3, 1e-3);
    let acc = ion.charge_to_mass() * e;
    for k in 0..=10 {
        let x = 10f64.powf(-3.0 + 0.5 * k as f64);
        let gamma = ((x + (-x).exp_m1()) * acc / d).sqrt();
        let sol = shuttle_time(&ShuttleModel::new(e, d, gamma).unwrap(), &ion).unwrap();
        let (t, v) = shuttle_ode(acc, gamma, d, 20_000);
        assert!((sol.t_d / t - 1.0).abs() < 1e-6, "c = {x}: {} vs {t}", sol.t_d);
        assert!((sol.exit_velocity / v - 1.0).abs() < 1e-6, "c = {x}: v {} vs {v}", sol.exit_velocity);
        assert!((sol.c / x - 1.0).abs() < 1e-9);
    }
}

#[test]
fn exit_velocity_scales_inversely_with_pressure() {
    let ion = IonSpecies::microsphere();
    let exit = |p: f64| {
        let gas = GasModel::air(p).unwrap();
        shuttle_time(&ShuttleModel::from_gas(1e3, 1e-3, &gas, &ion).unwrap(), &ion).unwrap()
    };
    let (lo, hi) = (exit(200.0), exit(2000.0));
    assert!(lo.c > 10.0 && hi.c > 10.0);
    let ratio = lo.exit_velocity / hi.exit_velocity;
    assert!((ratio / 10.0 - 1.0).abs() < 0.05, "v(200 Pa)/v(2000 Pa) = {ratio}");
}

#[test]
fn drag_free_trajectory_matches_ballistic_shuttle() {
    // uniform field E = 1 along +y from a conductor whose potential is −y
    let basis = single_basis("ramp", false, |_, y| -y);
    let fields = TrapFields::new(&basis);
    let drive = DriveConfig::new(0.0, 1000.0).unwrap().with_dc("ramp", 1.0);
    let cfg = RunConfig { dt: 1e-4, t_end: 1.2, record_every: 1 };
    let tr = integrate_trajectory(&fields, &Waveform::default(), &drive, &unit_ion(), None, [0.0, 0.5, 0.0, 0.0], cfg).unwrap();
    let sol = shuttle_time(&ShuttleModel::new(1.0, 0.5, 0.0).unwrap(), &unit_ion()).unwrap();
    let hit = tr.samples.iter().find(|s| s.y >= 1.0).unwrap();
    assert!((hit.t - sol.t_d).abs() <= cfg.dt, "{} vs {}", hit.t, sol.t_d);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn shuttle_root_matches_integration(log_e in 1.0f64..5.0, log_d in -5.0f64..-1.0, log_c in -3.0f64..2.0) {
        let ion = IonSpecies::microsphere();
        let (e, d, x) = (10f64.powf(log_e), 10f64.powf(log_d), 10f64.powf(log_c));
        let acc = ion.charge_to_mass() * e;
        let gamma = ((x + (-x).exp_m1()) * acc / d).sqrt();
        let sol = shuttle_time(&ShuttleModel::new(e, d, gamma).unwrap(), &ion).unwrap();
        let (t, _) = shuttle_ode(acc, gamma, d, 20_000);
        prop_assert!((sol.t_d / t - 1.0).abs() < 1e-6);
    }
}
