//! Exact entropy solution of the periodic Burgers equation through the
//! Hopf-Lax (Hopf-Cole) minimisation
//!
//! ```text
//! phi(t, x) = min_{a in R} phi0(a) + |a - x|^2 / (2t),   u = d_x phi
//! ```
//!
//! The minimisation runs over the grid nodes of `phi0` replicated over a
//! finite number of periods. The leftmost minimiser is nondecreasing in `x`
//! (the quadratic cost is strictly Monge), so all nodes are resolved by
//! divide and conquer in `O((n + M) log n)` for `M` candidates. A parabola
//! through the discrete minimiser and its two neighbours gives a sub-grid
//! estimate, polished by Newton's method on a local quintic interpolant.

use crate::error::{Error, Result};
use crate::par;
use crate::periodic::{derivative, quadrature, SampledFn};

#[derive(Debug, Clone, PartialEq)]
pub struct HopfLaxSolution {
    pub t: f64,
    /// Potential `phi(t, .)`.
    pub phi: SampledFn,
    /// Entropy solution `u(t, .)`.
    pub u: SampledFn,
    /// Refined minimiser for each node, unwrapped (integer shift included).
    pub argmin: Vec<f64>,
    /// Discrete leftmost minimiser, as an unwrapped node index.
    pub argmin_index: Vec<i64>,
}

/// Number of periods `K` on either side that can contain a minimiser.
pub fn candidate_shift(phi0: &SampledFn, t: f64) -> i64 {
    let slope = derivative(phi0).max_abs();
    (t * slope).ceil() as i64 + 1
}

/// Cost of candidate node `m` (unwrapped) for target node `j`.
#[inline]
fn cost(phi0: &[f64], n: i64, coef: f64, m: i64, j: i64) -> f64 {
    let d = (m - j) as f64;
    phi0[m.rem_euclid(n) as usize] + d * d * coef
}

struct Problem<'a> {
    phi0: &'a [f64],
    n: i64,
    coef: f64,
}

impl Problem<'_> {
    fn leftmost_argmin(&self, j: i64, lo: i64, hi: i64) -> i64 {
        let mut best = lo;
        let mut best_cost = cost(self.phi0, self.n, self.coef, lo, j);
        for m in lo + 1..=hi {
            let c = cost(self.phi0, self.n, self.coef, m, j);
            if c < best_cost {
                best_cost = c;
                best = m;
            }
        }
        best
    }

    /// Fills `out[k]` with the leftmost argmin for target `j0 + k`, knowing
    /// all of them lie in `lo..=hi`.
    fn fill(&self, j0: i64, out: &mut [i64], lo: i64, hi: i64) {
        if out.is_empty() {
            return;
        }
        let mid = out.len() / 2;
        let best = self.leftmost_argmin(j0 + mid as i64, lo, hi);
        out[mid] = best;
        let (left, rest) = out.split_at_mut(mid);
        let right = &mut rest[1..];
        let work = (hi - lo) as usize + left.len() + right.len();
        if work > 4096 {
            par::join(
                || self.fill(j0, left, lo, best),
                || self.fill(j0 + mid as i64 + 1, right, best, hi),
            );
        } else {
            self.fill(j0, left, lo, best);
            self.fill(j0 + mid as i64 + 1, right, best, hi);
        }
    }
}

/// Discrete leftmost minimisers, one per node, by divide and conquer.
fn discrete_argmin(phi0: &SampledFn, t: f64) -> Vec<i64> {
    let n = phi0.n() as i64;
    let h = phi0.spacing();
    let k = candidate_shift(phi0, t);
    let problem = Problem {
        phi0: phi0.values(),
        n,
        coef: h * h / (2.0 * t),
    };
    let mut out = vec![0i64; n as usize];
    problem.fill(0, &mut out, -k * n, (k + 1) * n - 1);
    out
}

/// Exhaustive version of [`discrete_argmin`]; `O(n^2 K)`.
#[doc(hidden)]
pub fn discrete_argmin_exhaustive(phi0: &SampledFn, t: f64) -> Vec<i64> {
    let n = phi0.n() as i64;
    let h = phi0.spacing();
    let k = candidate_shift(phi0, t);
    let problem = Problem {
        phi0: phi0.values(),
        n,
        coef: h * h / (2.0 * t),
    };
    (0..n)
        .map(|j| problem.leftmost_argmin(j, -k * n, (k + 1) * n - 1))
        .collect()
}

/// Builds the solution from discrete minimisers: sub-grid refinement of
/// value and position, then `u` as the centered slope of `phi`. Away from
/// shocks this agrees with `(x - a) / t` to second order; unlike the pointwise
/// formula it telescopes, so `u` has zero mean even with a shock on a node.
fn assemble(phi0: &SampledFn, t: f64, index: Vec<i64>) -> HopfLaxSolution {
    let n = phi0.n() as i64;
    let h = phi0.spacing();
    let coef = h * h / (2.0 * t);
    let vals = phi0.values();
    let refined: Vec<(f64, f64)> = par::map_range(n as usize, |j| {
        let jj = j as i64;
        let m = index[j];
        let fm = cost(vals, n, coef, m, jj);
        let fl = cost(vals, n, coef, m - 1, jj);
        let fr = cost(vals, n, coef, m + 1, jj);
        let curv = fl - 2.0 * fm + fr;
        let s = if curv > 0.0 {
            (0.5 * (fl - fr) / curv).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        let value = fm + 0.5 * s * (fr - fl) + 0.5 * s * s * curv;
        let a = (m as f64 + s) * h;
        polish(phi0, t, jj as f64 * h, a, m).unwrap_or((value, a))
    });
    let grid = phi0.grid();
    let phi: Vec<f64> = refined.iter().map(|r| r.0).collect();
    let argmin: Vec<f64> = refined.iter().map(|r| r.1).collect();
    let phi = SampledFn::new(grid, phi).expect("grid length");
    let u = derivative(&phi);
    HopfLaxSolution {
        t,
        phi,
        u,
        argmin,
        argmin_index: index,
    }
}

/// Newton's method for the stationarity condition `phi0'(a) + (a - x) / t = 0`
/// on the local quintic interpolant, started from the parabolic estimate.
/// Gives up if the iterate leaves the two cells around `m` or the cost is
/// not locally convex.
fn polish(phi0: &SampledFn, t: f64, x: f64, start: f64, m: i64) -> Option<(f64, f64)> {
    let h = phi0.spacing();
    let (lo, hi) = ((m - 1) as f64 * h, (m + 1) as f64 * h);
    let mut a = start;
    for _ in 0..20 {
        let (_, d1, d2) = phi0.jet(a);
        let slope = d2 + 1.0 / t;
        if !(slope > 0.0) {
            return None;
        }
        let step = (d1 + (a - x) / t) / slope;
        a -= step;
        if !(lo..=hi).contains(&a) {
            return None;
        }
        if step.abs() <= 1e-15 * h.max(a.abs()) {
            break;
        }
    }
    let (v, _, _) = phi0.jet(a);
    Some((v + (a - x) * (a - x) / (2.0 * t), a))
}

/// Entropy solution at time `t > 0` from the initial potential `phi0`.
pub fn solve(phi0: &SampledFn, t: f64) -> Result<HopfLaxSolution> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidTime(t));
    }
    let index = discrete_argmin(phi0, t);
    Ok(assemble(phi0, t, index))
}

/// Same result as [`solve`], computed by exhaustive search. Test oracle.
#[doc(hidden)]
pub fn solve_exhaustive(phi0: &SampledFn, t: f64) -> Result<HopfLaxSolution> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidTime(t));
    }
    let index = discrete_argmin_exhaustive(phi0, t);
    Ok(assemble(phi0, t, index))
}

/// First shock time `1 / max(-phi0'')`, `+inf` if `phi0'' >= 0` everywhere.
pub fn shock_time(phi0: &SampledFn) -> f64 {
    let worst = phi0
        .second_difference()
        .values()
        .iter()
        .fold(0.0_f64, |m, &v| m.max(-v));
    if worst > 0.0 {
        1.0 / worst
    } else {
        f64::INFINITY
    }
}

/// Total entropy `int u^2 / 2`.
pub fn entropy_total(sol: &HopfLaxSolution) -> f64 {
    quadrature(&sol.u.map(|v| 0.5 * v * v))
}

impl HopfLaxSolution {
    /// Largest discrete one-sided slope `max (u[i+1] - u[i]) / h`, wrap included.
    pub fn max_upward_slope(&self) -> f64 {
        let h = self.u.spacing();
        let n = self.u.n() as i64;
        (0..n)
            .map(|i| (self.u.at(i + 1) - self.u.at(i)) / h)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Whether the solution is still given by non-crossing characteristics.
    ///
    /// Every initial node between two consecutive minimisers must satisfy
    /// `1 + t phi0'' > 0`; nodes where the cost loses convexity are only ever
    /// skipped over, which happens exactly when a shock has formed.
    pub fn smooth_characteristics(&self, phi0: &SampledFn) -> bool {
        let curv = phi0.second_difference();
        let n = self.argmin_index.len();
        (0..n).all(|j| {
            let lo = self.argmin_index[j];
            let hi = if j + 1 < n {
                self.argmin_index[j + 1]
            } else {
                self.argmin_index[0] + n as i64
            };
            (lo..=hi).all(|m| 1.0 + self.t * curv.at(m) > 0.0)
        })
    }
}
