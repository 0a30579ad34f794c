//! Secular-potential analysis of the Sr+ design-example trap on the full solver.

use std::f64::consts::PI;
use std::time::Instant;

use planar_trap::fieldsolver::{compose, solve_basis, DEFAULT_TOL};
use planar_trap::geometry::{five_electrode_layout, FiveElectrodeDims, IonSpecies, DEFAULT_OUTER_WIDTH_R1};
use planar_trap::grid::GridSpec;
use planar_trap::pseudopotential::{analyze, normalize, AnalysisOptions, DriveConfig, NormScale};
use planar_trap::units::joules_to_ev;

fn dims() -> FiveElectrodeDims {
    let (w_c, w_r, g) = (290e-6, 500e-6, 250e-6);
    let r1 = 0.5 * (w_c + w_r) + g;
    FiveElectrodeDims { w_c, w_r, w_o: DEFAULT_OUTER_WIDTH_R1 * r1, g, g_prime: g }
}

#[test]
fn design_example_without_plate() {
    let t = Instant::now();
    let layout = five_electrode_layout(dims(), None).unwrap();
    let grid = GridSpec::default_for(&layout).unwrap();
    let basis = solve_basis(&layout, grid, DEFAULT_TOL).unwrap();
    let ion = IonSpecies::sr88_plus();
    let drive = DriveConfig::new(500.0, 2.0 * PI * 1e7).unwrap();
    let field = compose(&basis, &drive.voltages()).unwrap();
    let map = analyze(&field, &ion, &drive, &AnalysisOptions::for_layout(&layout)).unwrap();
    let n = normalize(map.depth.depth, map.omega.as_array(), &ion, &drive, NormScale::R0(map.r0), None).unwrap();
    println!(
        "r0 = {:.1} um, depth = {:.3} eV, d0 = {:.5}, f = {:.4}/{:.4}, wx/2pi = {:.3} MHz, escape {}, {:.1}s",
        map.r0 * 1e6,
        joules_to_ev(map.depth.depth),
        n.d,
        n.f[0],
        n.f[1],
        map.omega.omega_x / 2.0 / PI / 1e6,
        map.depth.escape,
        t.elapsed().as_secs_f64()
    );
    assert!(map.minimum.x.abs() < 0.5 * grid.spacing);
    assert!((map.r0 - 500e-6).abs() < 25e-6);
}
