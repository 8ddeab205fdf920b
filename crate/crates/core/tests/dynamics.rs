mod common;

use seqir::grid::{integrate, Profile};
use seqir::lyapunov::{compute_weights, evaluate_v};
use seqir::steady::{r0_closed_form, r0_quadrature, r0_reversed_order, solve_endemic};
use seqir::transient::{simulate, step};
use seqir::{EpiParams, EpiState, Error};

fn sup_gap(a: &Profile, b: &Profile) -> f64 {
    a.values().iter().zip(b.values()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn subcritical_epidemic_dies_out() {
    let fx = common::gompertz(401);
    let params = fx.at_r0(0.7);
    let x0 = EpiState::seeded_exposed(&fx.u, 1e-2, 20.0, 5.0).unwrap();
    let traj = simulate(&x0, &params, &fx.u, 400.0, 50).unwrap();
    let peak = traj.states.iter().map(|st| st.prevalence(&fx.u)).fold(0.0, f64::max);
    let end = traj.last().unwrap().prevalence(&fx.u);
    assert!(peak > 0.0 && end < 1e-3 * peak, "peak {peak}, final {end}");
    assert!(assert_positive(&traj.states));
}

fn assert_positive(states: &[EpiState]) -> bool {
    states.iter().all(|st| st.compartments().iter().all(|p| p.min() >= 0.0))
}

#[test]
fn supercritical_epidemic_settles_on_the_endemic_state() {
    let fx = common::gompertz(401);
    let params = fx.at_r0(1.6);
    let ss = solve_endemic(&params, &fx.u).unwrap().unwrap();
    let x0 = EpiState::seeded_exposed(&fx.u, 1e-3, 20.0, 5.0).unwrap();
    let traj = simulate(&x0, &params, &fx.u, 600.0, 100).unwrap();
    let last = traj.last().unwrap();
    for (got, want) in [(&last.s, &ss.s), (&last.i, &ss.i), (&last.r, &ss.r)] {
        assert!(sup_gap(got, want) < 1e-3, "gap {}", sup_gap(got, want));
    }
    assert!(assert_positive(&traj.states));
}

#[test]
fn disease_free_state_is_a_fixed_point() {
    let fx = common::gompertz(201);
    let x0 = EpiState::disease_free(fx.grid);
    let x1 = step(&x0, &fx.at_r0(5.0), &fx.u, fx.grid.spacing()).unwrap();
    assert_eq!(x1.s.values(), x0.s.values());
    assert!(x1.i.values().iter().all(|&v| v == 0.0));
}

#[test]
fn coarse_grid_is_rejected() {
    let grid = seqir::AgeGrid::new(100.0, 11).unwrap();
    // dx = 10 with exit rate μ₁ + q₁ = 0.3 gives rate·dx = 3 > 2
    let k = Profile::constant(grid, 1.0);
    let err = EpiParams::new(0.2, 0.1, 0.05, 0.1, 0.1, k.clone(), k).unwrap_err();
    assert!(matches!(err, Error::GridTooCoarse { .. }), "{err:?}");
}

#[test]
fn lyapunov_function_is_zero_only_at_the_disease_free_state() {
    let fx = common::gompertz(401);
    let params = fx.at_r0(0.9);
    let w = compute_weights(&params, &fx.u);
    assert_eq!(evaluate_v(&EpiState::disease_free(fx.grid), &w), 0.0);
    let x0 = EpiState::seeded_exposed(&fx.u, 1e-3, 30.0, 5.0).unwrap();
    assert!(evaluate_v(&x0, &w) > 0.0);
}

#[test]
fn reproduction_number_converges_under_refinement() {
    // constant mortality: the quadrature approaches the closed form at second order
    let exact = r0_closed_form(0.02, 0.1, 0.2, 0.1, 0.05, 0.1, 1.0).unwrap().r0;
    let mut errs = Vec::new();
    for n in [501, 1001, 2001] {
        let (grid, _, u) = common::constant_mortality(0.02, 400.0, n);
        let p = EpiParams::new(0.2, 0.1, 0.05, 0.1, 0.1, Profile::constant(grid, 1.0), Profile::constant(grid, 1.0))
            .unwrap();
        let q = r0_quadrature(&p, &u);
        assert!((q - r0_reversed_order(&p, &u)).abs() <= 1e-10 * q);
        errs.push((q - exact).abs());
    }
    assert!(errs[1] <= errs[0] && errs[2] <= errs[1], "{errs:?}");
}

#[test]
fn endemic_profiles_conserve_and_match_the_force() {
    let fx = common::gompertz(801);
    let params = fx.at_r0(3.0);
    let ss = solve_endemic(&params, &fx.u).unwrap().unwrap();
    for k in 0..fx.grid.len() {
        let total = ss.s.get(k) + ss.e.get(k) + ss.q.get(k) + ss.i.get(k) + ss.r.get(k);
        assert!((total - 1.0).abs() <= 1e-12, "age node {k}: {total}");
    }
    let h = integrate(&(&(&params.k2 * &fx.u) * &ss.i));
    assert!((h - ss.h).abs() <= 1e-9 * ss.h);
}
