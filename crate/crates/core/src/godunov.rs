//! First-order Godunov finite volumes for periodic Burgers. Kept deliberately
//! plain: it is an independent reference for the Hopf-Lax solver, not a
//! production scheme.

use crate::par;
use crate::periodic::{PeriodicGrid, SampledFn};

#[inline]
fn burgers_flux(u: f64) -> f64 {
    0.5 * u * u
}

/// Exact Riemann flux for `f(u) = u^2 / 2`.
pub fn godunov_flux(ul: f64, ur: f64) -> f64 {
    burgers_flux(ul.max(0.0)).max(burgers_flux(ur.min(0.0)))
}

/// Cell averages on cells centred at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct FvState {
    pub grid: PeriodicGrid,
    pub u: Vec<f64>,
    pub t: f64,
    pub cfl: f64,
}

pub const DEFAULT_CFL: f64 = 0.9;

impl FvState {
    pub fn new(u0: &SampledFn, cfl: f64) -> Self {
        assert!(cfl > 0.0 && cfl <= 1.0, "cfl must lie in (0, 1]");
        Self {
            grid: u0.grid(),
            u: u0.values().to_vec(),
            t: 0.0,
            cfl,
        }
    }

    pub fn to_sampled(&self) -> SampledFn {
        SampledFn::new(self.grid, self.u.clone()).expect("grid length")
    }

    /// Stable step for the current state.
    pub fn stable_dt(&self) -> f64 {
        let umax = self.u.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        self.cfl * self.grid.spacing() / umax.max(1e-12)
    }

    /// One conservative forward-Euler update of length `dt`.
    pub fn step(&mut self, dt: f64) {
        let n = self.u.len();
        let u = &self.u;
        // face i sits between cells i - 1 and i
        let faces: Vec<f64> = par::map_range(n, |i| {
            let left = u[(i + n - 1) % n];
            godunov_flux(left, u[i])
        });
        let ratio = dt / self.grid.spacing();
        for i in 0..n {
            let right = faces[(i + 1) % n];
            self.u[i] -= ratio * (right - faces[i]);
        }
        self.t += dt;
    }

    /// Steps until `t_end`, shortening the final step to land exactly.
    pub fn advance(mut self, t_end: f64) -> FvState {
        self.advance_with(t_end, |_| {});
        self
    }

    /// Like [`FvState::advance`] but calls `observe` after every step.
    pub fn advance_with(&mut self, t_end: f64, mut observe: impl FnMut(&FvState)) {
        assert!(t_end >= self.t, "cannot advance backwards in time");
        while self.t < t_end {
            let dt = self.stable_dt().min(t_end - self.t);
            if dt <= 0.0 {
                break;
            }
            let before = self.t;
            self.step(dt);
            if self.t == before || t_end - self.t <= 1e-15 * t_end.max(1.0) {
                self.t = t_end;
            }
            observe(self);
        }
    }
}
