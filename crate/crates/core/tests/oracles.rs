//! Reference values computed independently (30-digit quadrature and root
//! finding on the characteristic map `a + T sin(2 pi a) = x`) and frozen here.

use std::f64::consts::PI;

use burgers_duality::duality::{burgers_k, conjugate_k, BurgersSystem, IsothermalEulerSystem};
use burgers_duality::godunov::FvState;
use burgers_duality::hopf_lax;
use burgers_duality::periodic::{antiderivative_zero_mean, PeriodicGrid, SampledFn};
use burgers_duality::shock_free::{optimal_value_contact, optimal_value_hj, substitute};
use nalgebra::DVector;

const TSTAR: f64 = 1.0 / (2.0 * PI);

/// Optimal value for `u0 = sin 2 pi x` at `T / T* = 0.5, 2, 5`.
const J_SINE: [(f64, f64); 3] = [
    (0.5, 0.019894367886486917),
    (2.0, 0.07380228967569626),
    (5.0, 0.11562657935134647),
];

/// `u(2 T*, i / 4096)` for sine data.
const U_SINE_2TSTAR: [(usize, f64); 3] = [
    (512, 0.26078266543445283),
    (1024, 0.5149332646611294),
    (1536, 0.7523137152508952),
];

/// Left foot of the chord at `2 T*`.
const CHORD_FOOT_2TSTAR: f64 = 0.1983227177991929;

fn sine_potential(n: usize) -> (SampledFn, SampledFn) {
    let u0 = SampledFn::from_fn(PeriodicGrid::new(n).unwrap(), |x| (2.0 * PI * x).sin());
    let phi0 = antiderivative_zero_mean(&u0).unwrap();
    (u0, phi0)
}

#[test]
fn sine_shock_time() {
    let (_, phi0) = sine_potential(4096);
    assert!((hopf_lax::shock_time(&phi0) - TSTAR).abs() <= 1e-6);
}

#[test]
fn sine_optimal_values() {
    let (_, phi0) = sine_potential(4096);
    for (mult, exact) in J_SINE {
        let t = mult * TSTAR;
        let hj = optimal_value_hj(&phi0, t).unwrap();
        let contact = optimal_value_contact(&substitute(&phi0, t).unwrap());
        assert!((hj - exact).abs() <= 1e-6 * exact, "{mult}: {hj} vs {exact}");
        assert!((contact - exact).abs() <= 1e-8 * exact, "{mult}: {contact} vs {exact}");
    }
}

#[test]
fn smooth_value_is_time_times_energy() {
    // before the shock nothing is dissipated: J = T int u0^2 / 2
    let (exact_mult, exact) = J_SINE[0];
    assert!((exact - 0.25 * exact_mult * TSTAR).abs() <= 1e-17);
}

#[test]
fn sine_solution_after_the_shock() {
    let n = 4096;
    let (u0, phi0) = sine_potential(n);
    let t = 2.0 * TSTAR;
    let hl = hopf_lax::solve(&phi0, t).unwrap();
    let fv = FvState::new(&u0, 0.9).advance(t).to_sampled();
    for (i, exact) in U_SINE_2TSTAR {
        assert!((hl.u.values()[i] - exact).abs() <= 1e-7, "node {i}: {}", hl.u.values()[i]);
        assert!((fv.values()[i] - exact).abs() <= 5e-3, "node {i}: {}", fv.values()[i]);
    }
}

#[test]
fn sine_chord_foot() {
    let n = 4096;
    let (_, phi0) = sine_potential(n);
    let sub = substitute(&phi0, 2.0 * TSTAR).unwrap();
    assert_eq!(sub.gaps.len(), 1);
    let h = 1.0 / n as f64;
    let gap = sub.gaps[0];
    assert!((gap.left as f64 * h - CHORD_FOOT_2TSTAR).abs() <= h);
    assert!((gap.right as f64 * h - (1.0 - CHORD_FOOT_2TSTAR)).abs() <= h);
}

#[test]
fn burgers_conjugate_values() {
    let cases = [
        ((1.0, 0.0), 0.5),
        ((2.0, -1.0), 1.0),
        ((-3.0, 0.5), 9.0),
        ((0.0, 1.0), 0.0),
        ((1.0, 1.0), f64::INFINITY),
        ((0.0, 1.5), f64::INFINITY),
    ];
    for ((a, b), k) in cases {
        assert_eq!(burgers_k(a, b), k);
        let num = conjugate_k(&BurgersSystem, &DVector::from_element(1, a), &DVector::from_element(1, b)).unwrap();
        assert!(num == k || (num - k).abs() <= 1e-10, "({a}, {b}): {num}");
    }
}

#[test]
fn isothermal_euler_conjugate_closed_form() {
    // sup over (rho, q) is attained at q = rho (a2 + b1) / (1 - 2 b2) and
    // rho = exp(c - 1), giving K = exp(c - 1) with
    // c = a1 + b2 + (a2 + b1)^2 / (2 (1 - 2 b2)) whenever b2 < 1/2
    let exact = |a: [f64; 2], b: [f64; 2]| {
        let c = a[0] + b[1] + (a[1] + b[0]).powi(2) / (2.0 * (1.0 - 2.0 * b[1]));
        (c - 1.0).exp()
    };
    let sys = IsothermalEulerSystem;
    for (a, b) in [
        ([1.0, 0.0], [0.0, 0.0]),
        ([0.5, 1.0], [0.0, 0.0]),
        ([2.0, 1.0], [0.0, 0.0]),
        ([0.3, -0.4], [0.2, 0.1]),
        ([-1.0, 0.7], [-0.5, 0.3]),
        ([0.0, 0.0], [1.0, -2.0]),
    ] {
        let k = conjugate_k(&sys, &DVector::from_row_slice(&a), &DVector::from_row_slice(&b)).unwrap();
        let e = exact(a, b);
        assert!((k - e).abs() <= 1e-8 * e.max(1.0), "{a:?} {b:?}: {k} vs {e}");
    }
    let k = conjugate_k(&sys, &DVector::from_row_slice(&[0.0, 0.0]), &DVector::from_row_slice(&[0.0, 0.6])).unwrap();
    assert_eq!(k, f64::INFINITY);
}
