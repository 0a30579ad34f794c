//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//! Reference values are computed here by independent means where possible.

mod common;

use std::f64::consts::{PI, SQRT_2, TAU};
use std::time::Instant;

use common::*;
use planar_trap::analysis::{
    design_example, ejection_omega, qm_from_ejection, sweep_top_plate, DesignReport, DesignSpec, EjectionRecord,
    TopPlateSweepSpec,
};
use planar_trap::dynamics::{shuttle_time, GasModel, ShuttleModel};
use planar_trap::fieldsolver::{compose, solve_basis, PotentialField, DEFAULT_TOL};
use planar_trap::geometry::{
    five_electrode_layout, Domain, Electrode, FiveElectrodeDims, IonSpecies, Role, TopPlate, TrapLayout,
    DEFAULT_OUTER_WIDTH_R1, TOP_PLATE,
};
use planar_trap::grid::{GridSpec, ScalarGrid};
use planar_trap::pseudopotential::{analyze, normalize, AnalysisOptions, DriveConfig, EscapeDirection, NormScale};
use planar_trap::stability::{drag_b, monodromy, qmax};
use planar_trap::units::C_PER_KG_TO_E_PER_AMU;
use planar_trap::ode::Tolerances;

fn num(x: f64) -> String {
    if x != 0.0 && (x.abs() < 1e-3 || x.abs() >= 1e4) { format!("{x:.6e}") } else { format!("{x:.6}") }
}

fn pct(rel: f64) -> String {
    if rel >= 0.01 { format!("{:.0}%", rel * 100.0) } else { format!("{rel:.0e} rel") }
}

/// Sub-checks of one criterion.
struct Criterion {
    id: u32,
    title: &'static str,
    lines: Vec<(bool, String)>,
}

impl Criterion {
    fn new(id: u32, title: &'static str) -> Self {
        Self { id, title, lines: Vec::new() }
    }

    fn check(&mut self, ok: bool, detail: String) {
        self.lines.push((ok, detail));
    }

    /// `|got/want − 1| ≤ rel`.
    fn rel(&mut self, name: &str, got: f64, want: f64, rel: f64) {
        let err = (got / want - 1.0).abs();
        self.check(err <= rel, format!("{name} = {} (target {} ± {}, off {err:.2e} rel)", num(got), num(want), pct(rel)));
    }

    /// `|got − want| ≤ abs`.
    fn abs(&mut self, name: &str, got: f64, want: f64, abs: f64) {
        self.check((got - want).abs() <= abs, format!("{name} = {} (target {want} ± {abs})", num(got)));
    }

    fn fail(&mut self, detail: String) {
        self.check(false, detail);
    }

    fn report(self) -> bool {
        let pass = !self.lines.is_empty() && self.lines.iter().all(|(ok, _)| *ok);
        println!("{} criterion {}: {}", if pass { "PASS" } else { "FAIL" }, self.id, self.title);
        for (ok, d) in &self.lines {
            println!("    [{}] {d}", if *ok { "ok" } else { "miss" });
        }
        pass
    }
}

fn design_example_and_plate(design: &Result<(DesignReport, f64), String>) -> (Criterion, Criterion) {
    let mut c1 = Criterion::new(1, "worked design example without a top plate");
    let mut c3 = Criterion::new(3, "micromotion and depth with a biased top plate");
    let (rep, secs) = match design {
        Ok(v) => v,
        Err(e) => {
            c1.fail(format!("design example failed: {e}"));
            c3.fail(format!("design example failed: {e}"));
            return (c1, c3);
        }
    };
    let n = &rep.no_plate;
    c1.rel("r0 (um)", n.r0 * 1e6, 500.0, 0.05);
    c1.rel("d0", n.d0, 0.0065, 0.15);
    c1.rel("f_x", n.f_x, 0.28, 0.10);
    c1.rel("f_y", n.f_y, 0.28, 0.10);
    c1.rel("depth (eV)", n.depth_ev, 0.47, 0.15);
    c1.rel("omega_x/2pi (MHz)", n.freq_x_hz * 1e-6, 1.1, 0.10);
    c1.rel("omega_y/2pi (MHz)", n.freq_y_hz * 1e-6, 1.1, 0.10);
    c1.check(*secs <= 60.0, format!("both configurations and the trajectory took {secs:.1} s (limit 60 s each)"));

    let p = &rep.with_plate;
    // q from the unbiased secular frequency, Δy from the reported heights
    let q = 2.0 * SQRT_2 * TAU * n.freq_y_hz / rep.spec.omega;
    let dy = p.y_rf_null - p.y_min;
    let expect = 0.5 * q * dy.abs();
    c3.rel("analytic micromotion vs q*dy/2", p.micromotion_analytic, expect, 0.01);
    c3.check(true, format!("analytic amplitude {:.2} um (q = {q:.4}, dy = {:.2} um; quoted ~15 um)", p.micromotion_analytic * 1e6, dy * 1e6));
    c3.rel("trajectory micromotion (um)", p.micromotion_trajectory * 1e6, 20.0, 0.25);
    c3.rel("with-plate depth (eV)", p.depth_ev, 4.6, 0.20);
    (c1, c3)
}

fn top_plate() -> Criterion {
    let mut c = Criterion::new(2, "top-plate depth enhancement at w_c/r1 = w_r/r1 = 0.6");
    let spec = TopPlateSweepSpec::default();
    let sweep = match sweep_top_plate(&spec) {
        Ok(s) => s,
        Err(e) => {
            c.fail(format!("sweep failed: {e}"));
            return c;
        }
    };
    for curve in &sweep.curves {
        let h = curve.h_r1;
        match curve.peak {
            Some(pk) => {
                c.rel(&format!("h/r1 = {h}: peak d1"), pk.d1, 0.29, 0.10);
                c.abs(&format!("h/r1 = {h}: peak u"), pk.u, 1.0, 0.2);
            }
            None => c.fail(format!("h/r1 = {h}: no peak")),
        }
        let dirs: Vec<_> = curve.transitions.iter().map(|t| (t.from, t.to)).collect();
        let order = [(EscapeDirection::Up, EscapeDirection::Side), (EscapeDirection::Side, EscapeDirection::Down)];
        c.check(dirs == order, format!("h/r1 = {h}: transitions {dirs:?}"));
        if dirs == order {
            c.abs(&format!("h/r1 = {h}: UP->SIDE at u"), curve.transitions[0].u, 0.2, 0.1);
            c.abs(&format!("h/r1 = {h}: SIDE->DOWN at u"), curve.transitions[1].u, 1.0, 0.1);
        }
        match curve.enhancement {
            Some(e) => c.check((20.0..=60.0).contains(&e), format!("h/r1 = {h}: enhancement {e:.1} (target [20, 60])")),
            None => c.fail(format!("h/r1 = {h}: no enhancement")),
        }
    }
    c
}

fn stability_boundary() -> Criterion {
    let mut c = Criterion::new(4, "damped Mathieu stability boundary");
    for (b, want, tol) in [(0.0, 0.908, 0.001), (0.45, 1.05, 0.02)] {
        let t = Instant::now();
        match qmax(0.0, b) {
            Ok(q) => {
                let secs = t.elapsed().as_secs_f64();
                c.abs(&format!("qmax(0, {b})"), q, want, tol);
                c.check(secs <= 5.0, format!("qmax(0, {b}) took {secs:.2} s (limit 5 s)"));
                let oracle = mathieu_qmax(0.0, b, 0.5, 2.0);
                c.check((q - oracle).abs() < 1e-3, format!("qmax(0, {b}) vs fixed-step oracle {oracle:.6}"));
            }
            Err(e) => c.fail(format!("qmax(0, {b}) failed: {e}")),
        }
    }
    c
}

/// Particle and drive of the ejection and shuttle data.
fn microsphere() -> IonSpecies {
    IonSpecies::new(5.3e-17, 4.7e-17, 0.22e-6).unwrap()
}

fn drag_parameters() -> Criterion {
    let mut c = Criterion::new(5, "drag parameters at 70 Pa");
    let ion = microsphere();
    let (p, omega) = (70.0, TAU * 5e3);
    let gas = GasModel::air(p).unwrap();
    let b = drag_b(&gas, &ion, omega).unwrap();
    // b = 12πμR/(C m Ω) with λ = 67.3 nm · (10⁵ Pa / p)
    let kn = 67.3e-9 * 1e5 / p / ion.radius;
    let b_hand = 12.0 * PI * 1.83e-5 * ion.radius / (cunningham(kn) * ion.mass * omega);
    c.rel("b vs hand formula", b, b_hand, 1e-12);
    c.rel("b", b, 0.45, 0.05);

    let model = ShuttleModel::from_gas(1e3, 1e-3, &gas, &ion).unwrap();
    let sol = shuttle_time(&model, &ion).unwrap();
    let (t_ode, _) = shuttle_ode(ion.charge_to_mass() * 1e3, model.gamma, 1e-3, 20_000);
    c.rel("c vs ODE oracle", sol.c, model.gamma * t_ode, 1e-6);
    c.rel("c", sol.c, 4.9, 0.10);
    c
}

fn shuttle_oracle() -> Criterion {
    let mut c = Criterion::new(6, "shuttle transit time and exit velocity");
    let ion = microsphere();
    let (e, d) = (1e3, 1e-3);
    let acc = ion.charge_to_mass() * e;
    let mut worst: f64 = 0.0;
    for k in 0..=20 {
        // target γ·t_d, log-spaced; γ follows in closed form from d = (a/γ²)(x + e^{−x} − 1)
        let x = 10f64.powf(-3.0 + 5.0 * k as f64 / 20.0);
        let kappa = x + (-x).exp_m1();
        let gamma = (kappa * acc / d).sqrt();
        let sol = shuttle_time(&ShuttleModel::new(e, d, gamma).unwrap(), &ion).unwrap();
        let (t_ode, _) = shuttle_ode(acc, gamma, d, 20_000);
        worst = worst.max((sol.t_d / t_ode - 1.0).abs());
    }
    c.check(worst <= 1e-6, format!("max relative t_d difference {worst:.2e} over gamma*t_d in [1e-3, 1e2] (limit 1e-6)"));

    let mut vp = Vec::new();
    for p in [200.0, 350.0, 500.0, 700.0, 1000.0, 1400.0, 2000.0] {
        let gas = GasModel::air(p).unwrap();
        let sol = shuttle_time(&ShuttleModel::from_gas(e, d, &gas, &ion).unwrap(), &ion).unwrap();
        c.check(sol.c > 10.0, format!("p = {p} Pa: c = {:.1}", sol.c));
        vp.push(sol.exit_velocity * p);
    }
    let mean = vp.iter().sum::<f64>() / vp.len() as f64;
    let spread = vp.iter().map(|v| (v / mean - 1.0).abs()).fold(0.0, f64::max);
    c.check(spread <= 0.05, format!("exit velocity * p varies by {:.2}% over 200-2000 Pa (limit 5%)", spread * 100.0));
    c
}

fn charge_to_mass() -> Criterion {
    let mut c = Criterion::new(7, "charge-to-mass from ejection frequency");
    let mut worst: f64 = 0.0;
    for i in 0..12 {
        for j in 0..6 {
            let qm = 10f64.powf(-6.0 + i as f64);
            let (v, r0) = (10.0 * (1 + j) as f64, 1e-4 * (1 + 2 * j) as f64);
            let q_max = 0.8 + 0.05 * j as f64;
            let rec = EjectionRecord::new(ejection_omega(qm, v, r0, q_max), v, r0).unwrap();
            worst = worst.max((qm_from_ejection(&rec, q_max) / qm - 1.0).abs());
        }
    }
    c.check(worst <= 1e-12, format!("round-trip max relative error {worst:.2e} (limit 1e-12)"));

    let ion = microsphere();
    let (v, r0) = (250.0, 1e-3);
    let rec = EjectionRecord::new(ejection_omega(ion.charge_to_mass(), v, r0, 0.908), v, r0).unwrap();
    let e_amu = qm_from_ejection(&rec, 0.908) * C_PER_KG_TO_E_PER_AMU;
    let by_hand = 5.3e-17 / 4.7e-17 * 1.660_539_066_60e-27 / 1.602_176_634e-19;
    c.rel("ion Q/m vs hand conversion", e_amu, by_hand, 1e-12);
    c.rel("ion Q/m (1e-8 e/amu)", e_amu * 1e8, 1.17, 0.01);
    c
}

fn field_solver() -> Criterion {
    let mut c = Criterion::new(8, "field-solver analytic oracles");
    let dom = Domain { x_min: -2.0, x_max: 2.0, y_max: 1.0 };
    let l = TrapLayout::new(
        vec![Electrode::new("floor", Role::Ground, -1.0, 1.0)],
        Some(TopPlate { height: 1.0, is_dc: true }),
        dom,
    )
    .unwrap();
    let g = GridSpec::for_layout(&l, 0.01).unwrap();
    let set = solve_basis(&l, g, DEFAULT_TOL).unwrap();
    let plate = &set.get(TOP_PLATE).unwrap().values;
    let err = (0..g.rows())
        .flat_map(|j| (0..g.cols()).map(move |i| (i, j)))
        .map(|(i, j)| (plate.at(i, j) - g.y(j)).abs())
        .fold(0.0f64, f64::max);
    c.check(err < 1e-4, format!("parallel plates max error {err:.2e} (limit 1e-4)"));

    let w = 1.0;
    let strip = solve_strip(w, 3.0, 3.0, w / 16.0, 1e-10);
    let rel = strip_max_rel_error(&strip, w, 2.0);
    c.check(rel < 0.01, format!("biased strip max relative error {:.3}% above 2 cells (limit 1%)", rel * 100.0));

    let err_at = |h: f64| {
        let g = solve_strip(w, 2.0, 2.0, h, 1e-12);
        (g.value_at(0.0, 0.5).unwrap() - strip_potential(w, 0.0, 0.5)).abs()
    };
    let ratio = err_at(w / 8.0) / err_at(w / 16.0);
    c.check((3.5..=4.5).contains(&ratio), format!("error ratio on halving h: {ratio:.3} (target 3.5-4.5)"));
    c
}

/// d, f_x, f_y, and u with the plate biased, for the design trap at `scale`.
fn normalized_at(scale: f64) -> Result<[f64; 5], String> {
    let (w_c, w_r, g) = (290e-6 * scale, 500e-6 * scale, 250e-6 * scale);
    let r1 = 0.5 * (w_c + w_r) + g;
    let dims = FiveElectrodeDims { w_c, w_r, w_o: DEFAULT_OUTER_WIDTH_R1 * r1, g, g_prime: g };
    let ion = IonSpecies::sr88_plus();
    let run = |h: Option<f64>, u_plate: f64| -> Result<(f64, [f64; 2], Option<f64>), String> {
        let layout = five_electrode_layout(dims, h).map_err(|e| e.to_string())?;
        let grid = GridSpec::default_for(&layout).map_err(|e| e.to_string())?;
        let basis = solve_basis(&layout, grid, DEFAULT_TOL).map_err(|e| e.to_string())?;
        let drive = DriveConfig::new(500.0, TAU * 1e7).unwrap().with_plate(u_plate);
        let field = compose(&basis, &drive.voltages()).map_err(|e| e.to_string())?;
        let map = analyze(&field, &ion, &drive, &AnalysisOptions::for_layout(&layout)).map_err(|e| e.to_string())?;
        let (sc, plate) = match h {
            Some(h) => (NormScale::R1(r1), Some((h, r1))),
            None => (NormScale::R0(map.r0), None),
        };
        let n = normalize(map.depth.depth, map.omega.as_array(), &ion, &drive, sc, plate).map_err(|e| e.to_string())?;
        Ok((n.d, n.f, n.u))
    };
    let (d0, f, _) = run(None, 0.0)?;
    // pseudopotential energy falls as 1/scale², so the plate bias must too
    let (d1, _, u) = run(Some(1e-2 * scale), 100.0 / (scale * scale))?;
    Ok([d0, f[0], f[1], d1, u.unwrap_or(f64::NAN)])
}

fn properties() -> Criterion {
    let mut c = Criterion::new(9, "quadrupole normalization, Liouville determinant, scale invariance");
    let (r0, v, omega) = (1e-3, 100.0, TAU * 1e6);
    let spec = GridSpec::new(128, 128, -r0, 0.0, 2.0 * r0 / 128.0).unwrap();
    let quad = quadrupole(r0, r0);
    let phi_rf = ScalarGrid::from_fn(spec, |x, y| v * quad(x, y));
    let field = PotentialField { phi_rf, phi_dc: ScalarGrid::zeros(spec) };
    let ion = IonSpecies::sr88_plus();
    let drive = DriveConfig::new(v, omega).unwrap();
    match analyze(&field, &ion, &drive, &AnalysisOptions::default()) {
        Ok(map) => {
            let n = normalize(map.depth.depth, map.omega.as_array(), &ion, &drive, NormScale::R0(r0), None).unwrap();
            c.rel("ideal quadrupole d", n.d, 1.0, 0.01);
            c.rel("ideal quadrupole f_x", n.f[0], 1.0, 0.01);
            c.rel("ideal quadrupole f_y", n.f[1], 1.0, 0.01);
        }
        Err(e) => c.fail(format!("quadrupole analysis failed: {e}")),
    }

    let mut worst: f64 = 0.0;
    for &(a, q, b) in &[(0.0, 0.3, 0.0), (0.1, 0.6, 0.3), (-0.05, 0.9, 0.45), (0.2, 0.2, 1.0), (0.0, 1.2, 2.0)] {
        let m = monodromy(&planar_trap::stability::MathieuParams::new(a, q, b), Tolerances::default()).unwrap();
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let want = (-b * PI).exp();
        worst = worst.max(((det - want) / want).abs());
    }
    c.check(worst <= 1e-8, format!("monodromy determinant vs exp(-b*pi): max relative error {worst:.2e} (limit 1e-8)"));

    match (normalized_at(1.0), normalized_at(10.0)) {
        (Ok(a), Ok(b)) => {
            for (k, name) in ["d0", "f_x", "f_y", "d1", "u"].iter().enumerate() {
                let diff = (a[k] / b[k] - 1.0).abs();
                c.check(diff <= 1e-6, format!("{name} at scales 1 and 10: {:.6} vs {:.6} (rel diff {diff:.1e})", a[k], b[k]));
            }
        }
        (Err(e), _) | (_, Err(e)) => c.fail(format!("scaled design trap failed: {e}")),
    }
    c
}

fn main() {
    let t = Instant::now();
    let design = design_example(&DesignSpec::default()).map(|r| (r, t.elapsed().as_secs_f64())).map_err(|e| e.to_string());
    let (c1, c3) = design_example_and_plate(&design);
    let results = [
        c1.report(),
        top_plate().report(),
        c3.report(),
        stability_boundary().report(),
        drag_parameters().report(),
        shuttle_oracle().report(),
        charge_to_mass().report(),
        field_solver().report(),
        properties().report(),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
