mod common;

use common::*;
use planar_trap::fieldsolver::{self, solve_basis, DEFAULT_TOL};
use planar_trap::geometry::{Domain, Electrode, Role, TopPlate, TrapLayout, TOP_PLATE};
use planar_trap::grid::GridSpec;

#[test]
fn parallel_planes_give_linear_ramp() {
    // one grounded strip in the plane, plate at 1 V on top
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
    assert!(err < 1e-4, "err {err}");
}

#[test]
fn biased_strip_matches_conformal_map() {
    let w = 1.0;
    let g = solve_strip(w, 3.0, 3.0, w / 16.0, 1e-10);
    let rel = strip_max_rel_error(&g, w, 2.0);
    assert!(rel < 0.01, "max relative error {rel}");
}

#[test]
fn strip_error_is_second_order_in_spacing() {
    let w = 1.0;
    let err_at = |h: f64| {
        let g = solve_strip(w, 2.0, 2.0, h, 1e-12);
        (g.value_at(0.0, 0.5).unwrap() - strip_potential(w, 0.0, 0.5)).abs()
    };
    let (e1, e2) = (err_at(w / 8.0), err_at(w / 16.0));
    let ratio = e1 / e2;
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn strip_gradient_matches_analytic() {
    let w = 1.0;
    let g = solve_strip(w, 3.0, 3.0, w / 32.0, 1e-11);
    for &(x, y) in &[(0.0, 0.3), (0.2, 0.5), (-0.7, 0.4), (1.1, 1.0)] {
        let num = fieldsolver::gradient(&g, x, y).unwrap();
        let ex = strip_gradient(w, x, y);
        let norm = (ex[0].powi(2) + ex[1].powi(2)).sqrt();
        let err = ((num[0] - ex[0]).powi(2) + (num[1] - ex[1]).powi(2)).sqrt();
        assert!(err / norm < 0.01, "({x},{y}) rel {}", err / norm);
    }
    assert!(fieldsolver::gradient(&g, 0.0, 0.0).is_err());
}
