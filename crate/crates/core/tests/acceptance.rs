//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line to
//! stderr (uncaptured), and the test fails if any line is FAIL.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use burgers_duality::data::InitialData;
use burgers_duality::duality::{
    burgers_k, conjugate_k, criterion_check, objective, symmetry_residual, recovery_potential, BurgersSystem,
    IsothermalEulerSystem, StateField,
};
use burgers_duality::godunov::FvState;
use burgers_duality::hopf_lax;
use burgers_duality::par;
use burgers_duality::periodic::{antiderivative_zero_mean, derivative, PeriodicGrid, SampledFn};
use burgers_duality::primal::{extract_velocity, PrimalSolver, SolverOptions, SpaceTimeGrid};
use burgers_duality::shock_free::{optimal_value_contact, optimal_value_hj, pushforward, substitute};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Data {
    u0: SampledFn,
    phi0: SampledFn,
    tstar: f64,
}

fn prepare(data: &InitialData, n: usize) -> Data {
    let u0 = data.sample(PeriodicGrid::new(n).unwrap()).unwrap();
    let phi0 = antiderivative_zero_mean(&u0).unwrap();
    let tstar = hopf_lax::shock_time(&phi0);
    Data { u0, phi0, tstar }
}

fn sine(n: usize) -> Data {
    prepare(&InitialData::Sine { k: 1 }, n)
}

fn random(seed: u64, n: usize) -> Data {
    prepare(&InitialData::RandomTrig { seed, degree: 5 }, n)
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: usize, name: &str, o: &Outcome) {
    let status = if o.pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "{status} [{id}] {name}: {}", o.detail);
}

fn duality_identity() -> Outcome {
    let d = sine(4096);
    let mut worst = 0.0_f64;
    let mut slowest = 0.0_f64;
    for mult in [0.5, 2.0, 5.0] {
        let start = Instant::now();
        let horizon = mult * d.tstar;
        let j_hj = optimal_value_hj(&d.phi0, horizon).unwrap();
        let j_contact = optimal_value_contact(&substitute(&d.phi0, horizon).unwrap());
        slowest = slowest.max(start.elapsed().as_secs_f64());
        worst = worst.max((j_hj - j_contact).abs() / j_hj.abs());
    }
    Outcome {
        pass: worst <= 1e-5 && slowest <= 5.0,
        detail: format!("max relative difference {worst:.2e}, slowest case {slowest:.2}s"),
    }
}

fn shock_time() -> Outcome {
    let err = (sine(4096).tstar - 1.0 / (2.0 * PI)).abs();
    let mut misclassified = 0;
    for seed in 0..20 {
        let d = random(seed, 1024);
        let before = hopf_lax::solve(&d.phi0, 0.95 * d.tstar).unwrap();
        let after = hopf_lax::solve(&d.phi0, 1.05 * d.tstar).unwrap();
        if !before.smooth_characteristics(&d.phi0) || after.smooth_characteristics(&d.phi0) {
            misclassified += 1;
        }
    }
    Outcome {
        pass: err <= 1e-4 && misclassified == 0,
        detail: format!("|T* - 1/(2 pi)| = {err:.2e}, {misclassified}/20 random cases misclassified"),
    }
}

fn substitute_property() -> Outcome {
    let mut cases = vec![(sine(4096), 2.0)];
    cases.extend((0..10).map(|s| (random(100 + s, 4096), 1.5)));
    let mut worst_l1 = 0.0_f64;
    let mut worst_factor = f64::INFINITY;
    for (d, mult) in &cases {
        let horizon = mult * d.tstar;
        let sub = substitute(&d.phi0, horizon).unwrap();
        let a = hopf_lax::solve(&sub.phi0_t, horizon).unwrap().u;
        let b = hopf_lax::solve(&d.phi0, horizon).unwrap().u;
        worst_l1 = worst_l1.max(a.l1_distance(&b));
        let slope = derivative(&sub.u0_t).values().iter().cloned().fold(f64::INFINITY, f64::min);
        worst_factor = worst_factor.min(1.0 + horizon * slope.min(0.0));
    }
    Outcome {
        pass: worst_l1 <= 5e-3 && worst_factor >= -1e-6,
        detail: format!("max L1 {worst_l1:.2e}, min 1 + t (u0^T)' = {worst_factor:.2e}"),
    }
}

fn pushforward_endpoint() -> Outcome {
    let mut cases: Vec<(Data, f64)> = [0.5, 2.0, 5.0].into_iter().map(|m| (sine(1024), m)).collect();
    cases.extend((0..10).map(|s| (random(200 + s, 1024), 1.5)));
    let mut worst = 0.0_f64;
    for (d, mult) in &cases {
        let horizon = mult * d.tstar;
        let sub = substitute(&d.phi0, horizon).unwrap();
        let w1 = pushforward(&sub, horizon).unwrap().w1_to_uniform();
        worst = worst.max(w1 * d.u0.n() as f64);
    }
    Outcome {
        pass: worst <= 2.0,
        detail: format!("max n W1(rho(T), uniform) = {worst:.3}"),
    }
}

fn smooth_recovery() -> Outcome {
    let (n, nt) = (1024, 1024);
    let d = sine(n);
    let horizon = 0.5 * d.tstar;
    let rows: Vec<SampledFn> = (0..=nt)
        .map(|k| {
            if k == 0 {
                d.u0.clone()
            } else {
                hopf_lax::solve(&d.phi0, horizon * k as f64 / nt as f64).unwrap().u
            }
        })
        .collect();
    let field = StateField::from_rows(&rows, horizon);
    let crit = criterion_check(&BurgersSystem, &field, &[]).unwrap();
    let w = recovery_potential(&BurgersSystem, &field).unwrap().remove(0);
    let value = objective(&w, &d.u0).unwrap();
    // energy is conserved before the shock: int u^2/2 = 1/4
    let exact = 0.25 * horizon;
    let rel = (value - exact).abs() / exact;

    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut decreased = 0;
    for _ in 0..10 {
        let modes: Vec<(f64, f64, f64)> = (1..=3)
            .map(|k| (k as f64, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..1.0)))
            .collect();
        let eps = rng.gen_range(0.005..0.02);
        let mut p = w.clone();
        for k in 0..=nt {
            let t = horizon * k as f64 / nt as f64;
            let envelope = (1.0 - t / horizon) * (1.0 + 0.5 * (PI * t / horizon).sin());
            for i in 0..n {
                let x = i as f64 / n as f64;
                let bump: f64 = modes.iter().map(|(m, a, s)| a * (2.0 * PI * (m * x + s)).sin() / m).sum();
                p.w[k * n + i] += eps * envelope * bump;
            }
        }
        if let Ok(v) = objective(&p, &d.u0) {
            if v < value {
                decreased += 1;
            }
        }
    }
    Outcome {
        pass: crit.pass && rel <= 1e-4 && decreased == 10,
        detail: format!(
            "criterion min eigenvalue {:.3e}, objective relative error {rel:.2e}, {decreased}/10 perturbations decrease",
            crit.min_eigenvalue
        ),
    }
}

fn primal_gap() -> Outcome {
    let d = sine(128);
    let mut pass = true;
    let mut parts = Vec::new();
    for mult in [0.5, 2.0] {
        let horizon = mult * d.tstar;
        let grid = SpaceTimeGrid::new(128, 128, horizon).unwrap();
        let start = Instant::now();
        let mut solver = PrimalSolver::new(&d.u0, grid, SolverOptions::default()).unwrap();
        let finished = solver.run().is_ok();
        let seconds = start.elapsed().as_secs_f64();
        let gap = solver.report.final_gap().abs();
        let vel = extract_velocity(&solver.iterate, SolverOptions::default().rho_floor);
        let u_t = hopf_lax::solve(&d.phi0, horizon).unwrap().u;
        let last = (grid.nt - 1) * grid.n;
        let l1 = (0..grid.n).map(|i| (vel.v[last + i] - u_t.values()[i]).abs()).sum::<f64>() / grid.n as f64;
        pass &= finished && solver.report.iterations <= 2000 && gap <= 2e-2 && l1 <= 5e-2 && seconds <= 120.0;
        parts.push(format!(
            "{mult}T*: gap {gap:.2e} after {} iterations in {seconds:.1}s, L1 {l1:.2e}",
            solver.report.iterations
        ));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn value_bounds() -> Outcome {
    let mut violations = 0;
    let mut checked = 0;
    for seed in 0..20 {
        let d = random(300 + seed, 1024);
        let sup = d.u0.max_abs();
        for horizon in [0.5 * d.tstar, 2.0 * d.tstar, 1.0] {
            let j = optimal_value_hj(&d.phi0, horizon).unwrap();
            checked += 1;
            if !(j >= 0.0 && j <= horizon * sup * sup / 2.0) {
                violations += 1;
            }
        }
    }
    Outcome {
        pass: violations == 0,
        detail: format!("{violations}/{checked} cases outside [0, T sup|u0|^2 / 2]"),
    }
}

fn godunov_error(n: usize) -> f64 {
    let d = sine(n);
    let horizon = 2.0 / (2.0 * PI);
    let fv = FvState::new(&d.u0, 0.9).advance(horizon).to_sampled();
    fv.l1_distance(&hopf_lax::solve(&d.phi0, horizon).unwrap().u)
}

fn godunov_oracle() -> Outcome {
    let errors: Vec<f64> = [512, 1024, 2048, 4096].into_iter().map(godunov_error).collect();
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let finest = *errors.last().unwrap();
    Outcome {
        pass: finest <= 5e-3 && ratios.iter().all(|r| (1.5..=3.0).contains(r)),
        detail: format!("L1 at 4096 {finest:.2e}, ratios {ratios:.2?}"),
    }
}

fn conjugate_consistency() -> Outcome {
    let mut worst = 0.0_f64;
    let mut class_mismatch = 0;
    for i in 0..41 {
        for j in 0..41 {
            let a = -2.0 + 4.0 * i as f64 / 40.0;
            let b = -2.0 + 2.9 * j as f64 / 40.0;
            let exact = burgers_k(a, b);
            let num = conjugate_k(&BurgersSystem, &DVector::from_element(1, a), &DVector::from_element(1, b)).unwrap();
            if exact.is_finite() != num.is_finite() {
                class_mismatch += 1;
            } else if exact.is_finite() {
                worst = worst.max((exact - num).abs());
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let sym = (0..100)
        .map(|_| {
            let v = DVector::from_vec(vec![rng.gen_range(0.1..10.0), rng.gen_range(-10.0..10.0)]);
            symmetry_residual(&IsothermalEulerSystem, &v)
        })
        .fold(0.0_f64, f64::max);
    Outcome {
        pass: worst <= 1e-8 && class_mismatch == 0 && sym <= 1e-8,
        detail: format!(
            "max |K - K_burgers| {worst:.2e}, {class_mismatch} finiteness mismatches, max symmetry residual {sym:.2e}"
        ),
    }
}

#[test]
fn acceptance() {
    // the primal criterion is timed single-threaded
    par::init_threads(1);
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("duality identity", duality_identity),
        ("shock time", shock_time),
        ("substitute", substitute_property),
        ("pushforward endpoint", pushforward_endpoint),
        ("smooth recovery", smooth_recovery),
        ("primal duality gap", primal_gap),
        ("value bounds", value_bounds),
        ("godunov cross-check", godunov_oracle),
        ("conjugate consistency", conjugate_consistency),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = check();
        report(i + 1, name, &outcome);
        if !outcome.pass {
            failed.push(*name);
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
