//! The shock-free substitute on `[0, T]` and the transport picture behind
//! the optimal value of the space-time problem.
//!
//! With `g(a) = 2T phi0(a) + a^2`, the substitute potential is defined by
//! `2T phi0^T(a) + a^2 = conv g(a)`. The contact set `Omega` (where `g`
//! touches its hull) carries the weight `rho0 = 1 + T phi0''`; pushing
//! `rho0 da` along `a -> a + t phi0'(a)` gives the optimal density, and the
//! same particles weighted by their velocity give the optimal flux.

use crate::error::{Error, Result};
use crate::hopf_lax::{self, candidate_shift};
use crate::par;
use crate::periodic::{derivative, lower_convex_envelope, quadrature, SampledFn};
use crate::transport::w1_circle_to_uniform;

/// A chord of the hull: the hull vertices on either side of a run of
/// non-contact nodes. `right` is unwrapped, so `right > left + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gap {
    pub left: i64,
    pub right: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubstituteResult {
    /// Horizon `T`.
    pub horizon: f64,
    pub phi0: SampledFn,
    pub phi0_t: SampledFn,
    pub u0_t: SampledFn,
    /// Contact set `Omega` on the nodes of `[0, 1)`.
    pub omega: Vec<bool>,
    pub rho0: SampledFn,
    /// `phi0'` at every node (centered differences of the original data).
    pub velocity: SampledFn,
    pub gaps: Vec<Gap>,
}

/// Builds the substitute for horizon `T`.
pub fn substitute(phi0: &SampledFn, horizon: f64) -> Result<SubstituteResult> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidTime(horizon));
    }
    let n = phi0.n() as i64;
    let h = phi0.spacing();
    let k = candidate_shift(phi0, horizon);
    let offset = k * n;
    let g: Vec<f64> = (-offset..=(k + 1) * n)
        .map(|m| {
            let a = m as f64 * h;
            2.0 * horizon * phi0.at(m) + a * a
        })
        .collect();
    let env = lower_convex_envelope(&g, h);
    let hull = |m: i64| env.hull_values[(m + offset) as usize];

    let grid = phi0.grid();
    let omega: Vec<bool> = (0..n)
        .map(|i| {
            [-1i64, 0, 1]
                .iter()
                .any(|r| env.contact_mask[(i + offset + r * n) as usize])
        })
        .collect();

    let two_t = 2.0 * horizon;
    let phi0_t: Vec<f64> = (0..n)
        .map(|i| {
            let a = i as f64 * h;
            (hull(i) - a * a) / two_t
        })
        .collect();
    // centered difference of phi0^T computed on the unwrapped window
    let u0_t: Vec<f64> = (0..n)
        .map(|i| (hull(i + 1) - hull(i - 1)) / (2.0 * h * two_t) - i as f64 * h / horizon)
        .collect();

    let curv = phi0.second_difference();
    let rho0: Vec<f64> = (0..n)
        .map(|i| {
            let iu = i as usize;
            if !omega[iu] {
                return 0.0;
            }
            let prev = omega[grid.wrap(i - 1)];
            let next = omega[grid.wrap(i + 1)];
            if prev && next {
                1.0 + horizon * curv.at(i)
            } else {
                // one-sided contact: use the hull, whose curvature includes the chord
                (hull(i + 1) - 2.0 * hull(i) + hull(i - 1)) / (2.0 * h * h)
            }
        })
        .collect();

    Ok(SubstituteResult {
        horizon,
        phi0: phi0.clone(),
        phi0_t: SampledFn::new(grid, phi0_t)?,
        u0_t: SampledFn::new(grid, u0_t)?,
        gaps: chords(&env.vertices, offset, n),
        omega,
        rho0: SampledFn::new(grid, rho0)?,
        velocity: derivative(phi0),
    })
}

/// Hull edges spanning more than one cell whose left vertex lies in
/// `[0, n)`. Vertices are window indices; `offset` maps them to nodes.
fn chords(vertices: &[usize], offset: i64, n: i64) -> Vec<Gap> {
    vertices
        .windows(2)
        .map(|w| (w[0] as i64 - offset, w[1] as i64 - offset))
        .filter(|&(l, r)| (0..n).contains(&l) && r - l > 1)
        .map(|(left, right)| Gap { left, right })
        .collect()
}

impl SubstituteResult {
    pub fn omega_fraction(&self) -> f64 {
        self.omega.iter().filter(|&&c| c).count() as f64 / self.omega.len() as f64
    }

    /// `sum_Omega rho0 h`.
    pub fn total_mass(&self) -> f64 {
        quadrature(&self.rho0)
    }

    /// Largest violation of `1 + t (u0^T)' >= 0` over `t in [0, T)`; the
    /// worst case is `t -> T` when the slope is negative.
    pub fn min_compression_factor(&self) -> f64 {
        let du = derivative(&self.u0_t);
        du.values()
            .iter()
            .map(|&s| 1.0 + self.horizon * s.min(0.0))
            .fold(f64::INFINITY, f64::min)
    }
}

/// One particle of the pushforward measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    /// Initial node `a`.
    pub a: f64,
    /// `a + t v`, not reduced.
    pub unwrapped: f64,
    /// Torus coordinate of the particle.
    pub position: f64,
    pub weight: f64,
    pub velocity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleMeasure {
    pub t: f64,
    pub particles: Vec<Particle>,
}

impl ParticleMeasure {
    pub fn total_mass(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }

    /// `int f d rho(t)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.particles.iter().map(|p| p.weight * f(p.position)).sum()
    }

    /// `int f d q(t)`.
    pub fn integrate_flux(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.particles
            .iter()
            .map(|p| p.weight * p.velocity * f(p.position))
            .sum()
    }

    /// Circle `W1` distance to the Lebesgue measure (weights normalised).
    pub fn w1_to_uniform(&self) -> f64 {
        let pos: Vec<f64> = self.particles.iter().map(|p| p.position).collect();
        let w: Vec<f64> = self.particles.iter().map(|p| p.weight).collect();
        w1_circle_to_uniform(&pos, &w)
    }
}

/// Density and flux at time `t` as weighted particles, one per Omega node.
pub fn pushforward(sub: &SubstituteResult, t: f64) -> Result<ParticleMeasure> {
    if !(0.0..=sub.horizon).contains(&t) {
        return Err(Error::TimeOutOfRange {
            t,
            horizon: sub.horizon,
        });
    }
    let grid = sub.phi0.grid();
    let h = grid.spacing();
    let particles = par::map_range(grid.n(), |i| {
        if !sub.omega[i] {
            return None;
        }
        let a = grid.node(i);
        let v = sub.velocity.values()[i];
        let x = a + t * v;
        Some(Particle {
            a,
            unwrapped: x,
            position: x.rem_euclid(1.0),
            weight: sub.rho0.values()[i] * h,
            velocity: v,
        })
    })
    .into_iter()
    .flatten()
    .collect();
    Ok(ParticleMeasure { t, particles })
}

/// Optimal value as `-int phi(T, x) dx` with `phi` the Hopf-Lax potential.
pub fn optimal_value_hj(phi0: &SampledFn, horizon: f64) -> Result<f64> {
    let sol = hopf_lax::solve(phi0, horizon)?;
    Ok(-quadrature(&sol.phi))
}

/// Endpoints of the bitangent of `g = 2T phi0 + a^2` spanning `gap`,
/// refined below grid resolution by Newton's method. Falls back to the
/// half-cell positions if the iteration does not settle.
fn bitangent(phi0: &SampledFn, horizon: f64, gap: Gap) -> (f64, f64) {
    let h = phi0.spacing();
    let g = |a: f64| {
        let (v, d1, d2) = phi0.jet(a);
        (
            2.0 * horizon * v + a * a,
            2.0 * horizon * d1 + 2.0 * a,
            2.0 * horizon * d2 + 2.0,
        )
    };
    let (a0, b0) = (gap.left as f64 * h, gap.right as f64 * h);
    let (mut a, mut b) = (a0, b0);
    for _ in 0..60 {
        let (ga, ga1, ga2) = g(a);
        let (gb, gb1, gb2) = g(b);
        let f1 = ga1 - gb1;
        let f2 = ga1 * (b - a) - (gb - ga);
        let (j11, j12) = (ga2, -gb2);
        let (j21, j22) = (ga2 * (b - a), ga1 - gb1);
        let det = j11 * j22 - j12 * j21;
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let da = (f1 * j22 - f2 * j12) / det;
        let db = (j11 * f2 - j21 * f1) / det;
        a -= da;
        b -= db;
        if (a - a0).abs() > 2.0 * h || (b - b0).abs() > 2.0 * h || !a.is_finite() || !b.is_finite() {
            break;
        }
        if da.abs().max(db.abs()) <= 1e-10 * h {
            return (a, b);
        }
    }
    log::debug!("bitangent Newton did not settle for {gap:?}; using half-cell endpoints");
    (a0 + 0.5 * h, b0 - 0.5 * h)
}

const GAUSS4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

/// `int_lo^hi G` split at grid nodes, four-point Gauss on each piece.
fn integrate_pieces(lo: f64, hi: f64, h: f64, integrand: &(impl Fn(f64) -> f64 + Sync)) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let first = (lo / h).floor() as i64 + 1;
    let last = (hi / h).ceil() as i64 - 1;
    let mut cuts = vec![lo];
    cuts.extend((first..=last).map(|k| k as f64 * h).filter(|&x| x > lo && x < hi));
    cuts.push(hi);
    let parts = par::map_range(cuts.len() - 1, |k| {
        let (l, r) = (cuts[k], cuts[k + 1]);
        let mid = 0.5 * (l + r);
        let half = 0.5 * (r - l);
        GAUSS4
            .iter()
            .map(|&(x, w)| w * integrand(mid + half * x))
            .sum::<f64>()
            * half
    });
    parts.iter().sum()
}

/// Optimal value as `-int_Omega (phi0 + T phi0'^2 / 2)(1 + T phi0'') da`.
///
/// The integrand jumps at the ends of each hull chord, so node sums are only
/// first-order accurate there. Instead the chord endpoints are located by a
/// bitangent solve on a local degree-5 interpolant of `phi0`, and each
/// contact interval is integrated piecewise with Gauss quadrature.
pub fn optimal_value_contact(sub: &SubstituteResult) -> f64 {
    let phi0 = &sub.phi0;
    let horizon = sub.horizon;
    let h = phi0.spacing();
    let integrand = |a: f64| {
        let (v, d1, d2) = phi0.jet(a.rem_euclid(1.0));
        (v + 0.5 * horizon * d1 * d1) * (1.0 + horizon * d2)
    };
    if sub.gaps.is_empty() {
        return -integrate_pieces(0.0, 1.0, h, &integrand);
    }
    let ends: Vec<(f64, f64)> = sub
        .gaps
        .iter()
        .map(|&gap| bitangent(phi0, horizon, gap))
        .collect();
    let mut total = 0.0;
    for k in 0..ends.len() {
        let start = ends[k].1;
        let mut stop = ends[(k + 1) % ends.len()].0;
        while stop < start {
            stop += 1.0;
        }
        total += integrate_pieces(start, stop, h, &integrand);
    }
    -total
}
