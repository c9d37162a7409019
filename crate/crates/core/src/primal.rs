//! Augmented-Lagrangian solver for the discrete density/flux problem
//!
//! ```text
//! max  sum h dt [ -q^2 / (2 rho) + q u0 ]
//! s.t. (rho, q) = (1 - D0 W[k+1], (W[k+1] - W[k]) / dt),  W[nt] = 0
//! ```
//!
//! Parametrising `(rho, q)` by the potential `W` makes the discrete
//! continuity equation `(rho[k] - rho[k-1]) / dt + D0 q[k] = 0` and the final
//! condition `rho[nt-1] = 1` hold identically. The split variable
//! `y = (rho, q)` is decoupled from `W` and the three alternating steps are a
//! space-time Poisson solve for `W` (FFT in x, tridiagonal in t), a pointwise
//! projection onto `{a + b^2 / 2 <= 0}`, and a multiplier update.
//!
//! All fields are colocated at the spatial nodes; slab `k` covers
//! `[t_k, t_{k+1})` and `W` lives on the `nt + 1` slab boundaries.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use log::warn;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::periodic::{antiderivative_zero_mean, SampledFn};
use crate::shock_free::{optimal_value_hj, ParticleMeasure};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimeGrid {
    pub n: usize,
    pub nt: usize,
    pub horizon: f64,
}

impl SpaceTimeGrid {
    pub fn new(n: usize, nt: usize, horizon: f64) -> Result<Self> {
        if n < 4 {
            return Err(Error::GridTooSmall { min: 4, got: n });
        }
        if nt < 4 {
            return Err(Error::GridTooSmall { min: 4, got: nt });
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidTime(horizon));
        }
        Ok(Self { n, nt, horizon })
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.nt as f64
    }

    /// `dt n sup|u0|`; values above 4 only trigger a warning.
    pub fn courant(&self, u0: &SampledFn) -> f64 {
        self.dt() * self.n as f64 * u0.max_abs()
    }

    fn cells(&self) -> usize {
        self.n * self.nt
    }
}

/// Solver state: the split variable `(rho, q)` on `nt x n` slabs, the
/// potential `W` on `(nt + 1) x n` nodes and the multiplier `(a, b)` paired
/// with `(rho, q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalIterate {
    pub grid: SpaceTimeGrid,
    pub rho: Vec<f64>,
    pub q: Vec<f64>,
    pub w: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub r: f64,
}

impl PrimalIterate {
    /// `rho = 1`, `q = u0` on every slab, `W = 0`, zero multiplier.
    pub fn initial(grid: SpaceTimeGrid, u0: &SampledFn, r: f64) -> Self {
        let cells = grid.cells();
        let q = (0..cells).map(|c| u0.values()[c % grid.n]).collect();
        Self {
            grid,
            rho: vec![1.0; cells],
            q,
            w: vec![0.0; cells + grid.n],
            a: vec![0.0; cells],
            b: vec![0.0; cells],
            r,
        }
    }

    /// Exact discrete density and flux of a particle measure: each particle
    /// is spread by a kernel whose centered derivative matches the time
    /// integral of the flux kernel along its straight path, so the binned
    /// pair satisfies the discrete continuity equation to rounding. The flux
    /// kernel is a hat of half-width `width` cells; widths above one suppress
    /// the aliasing between particle and grid spacing.
    pub fn from_particles(grid: SpaceTimeGrid, particles: &ParticleMeasure, width: usize) -> Self {
        let (n, nt) = (grid.n, grid.nt);
        let h = grid.h();
        let s = width.max(1) as f64 * h;
        let dt = grid.dt();
        let ps = &particles.particles;
        let rows = par::map_range(nt, |k| {
            let t0 = k as f64 * dt;
            let t1 = (k + 1) as f64 * dt;
            let mut rho = vec![0.0; n];
            let mut q = vec![0.0; n];
            for p in ps {
                let x0 = p.a + t0 * p.velocity;
                let x1 = p.a + t1 * p.velocity;
                let lo = ((x0.min(x1) - s - h) / h).floor() as i64;
                let hi = ((x0.max(x1) + s + h) / h).ceil() as i64;
                for j in lo..=hi {
                    let x = j as f64 * h;
                    let idx = j.rem_euclid(n as i64) as usize;
                    rho[idx] += p.weight * (hat_cdf(x + h - x1, s) - hat_cdf(x - h - x1, s)) / (2.0 * h);
                    q[idx] += p.weight * (hat_cdf(x - x0, s) - hat_cdf(x - x1, s)) / dt;
                }
            }
            (rho, q)
        });
        let mut it = Self {
            grid,
            rho: Vec::with_capacity(grid.cells()),
            q: Vec::with_capacity(grid.cells()),
            w: vec![0.0; grid.cells() + n],
            a: vec![0.0; grid.cells()],
            b: vec![0.0; grid.cells()],
            r: 1.0,
        };
        for (rho, q) in rows {
            it.rho.extend(rho);
            it.q.extend(q);
        }
        it
    }

    /// `(rho, q)` implied by the potential: `(1 - D0 W[k+1], D_t W[k])`.
    pub fn potential_pair(&self, k: usize, i: usize) -> (f64, f64) {
        potential_pair(&self.grid, &self.w, k, i)
    }
}

fn potential_pair(grid: &SpaceTimeGrid, w: &[f64], k: usize, i: usize) -> (f64, f64) {
    let n = grid.n;
    let up = (k + 1) * n;
    let dx = (w[up + (i + 1) % n] - w[up + (i + n - 1) % n]) / (2.0 * grid.h());
    let dtw = (w[up + i] - w[k * n + i]) / grid.dt();
    (1.0 - dx, dtw)
}

/// Cumulative distribution of the hat of half-width `h` centred at 0.
fn hat_cdf(y: f64, h: f64) -> f64 {
    let s = y / h;
    if s <= -1.0 {
        0.0
    } else if s <= 0.0 {
        0.5 * (1.0 + s) * (1.0 + s)
    } else if s < 1.0 {
        1.0 - 0.5 * (1.0 - s) * (1.0 - s)
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Target relative gap; the continuity residual must also fall below
    /// `10 tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial penalty.
    pub r: f64,
    /// Double or halve `r` when the primal/dual residual ratio leaves
    /// `[0.1, 10]`.
    pub adaptive: bool,
    pub rho_floor: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_iter: 2000,
            r: 1.0,
            adaptive: true,
            rho_floor: 1e-8,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.r > 0.0) || !self.r.is_finite() {
            bad.push(format!("penalty r must be positive, got {}", self.r));
        }
        if !(self.tol > 0.0) {
            bad.push(format!("tol must be positive, got {}", self.tol));
        }
        if !(self.rho_floor > 0.0) {
            bad.push(format!("rho_floor must be positive, got {}", self.rho_floor));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::BadOptions(bad.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverReport {
    pub j_analytic: f64,
    pub objective_history: Vec<f64>,
    /// `(J - objective) / |J|` (absolute when `J = 0`).
    pub gap_history: Vec<f64>,
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl SolverReport {
    pub fn final_gap(&self) -> f64 {
        self.gap_history.last().copied().unwrap_or(f64::NAN)
    }

    pub fn final_objective(&self) -> f64 {
        self.objective_history.last().copied().unwrap_or(f64::NAN)
    }
}

/// Nearest point of `{a + b^2 / 2 <= 0}` to `(alpha, beta)`, returned as
/// the boundary parameter `b` (the point is `(-b^2 / 2, b)`), or `None`
/// when `(alpha, beta)` already lies in the set.
///
/// `b` solves `b (1 + alpha + b^2 / 2) = beta`; on the side of `beta` the
/// cubic is convex, so Newton from `b = beta` decreases monotonically onto
/// the root. Bisection takes over if an iterate ever leaves `(0, |beta|]`.
pub fn project_parabola(alpha: f64, beta: f64) -> Option<f64> {
    if alpha + 0.5 * beta * beta <= 0.0 {
        return None;
    }
    if beta == 0.0 {
        return Some(0.0);
    }
    let target = beta.abs();
    let g = |b: f64| b * (1.0 + alpha + 0.5 * b * b) - target;
    let mut b = target;
    let mut ok = true;
    for _ in 0..100 {
        let gb = g(b);
        if gb <= 0.0 {
            break;
        }
        let next = b - gb / (1.0 + alpha + 1.5 * b * b);
        if !(next > 0.0 && next <= b) {
            ok = false;
            break;
        }
        if next == b {
            break;
        }
        b = next;
    }
    if !ok || g(b) < -1e-12 * target.max(1.0) {
        let (mut lo, mut hi) = (0.0, target);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        b = hi;
    }
    Some(b.copysign(beta))
}

/// Proximal map of `(rho, q) -> q^2 / (2 rho)` at `d / r`: returns
/// `(d - P(d)) / r` with `P` the projection above. `rho >= 0` holds exactly
/// and `q / rho` equals the boundary parameter.
pub fn prox_cost(alpha: f64, beta: f64, r: f64) -> (f64, f64) {
    match project_parabola(alpha, beta) {
        None => (0.0, 0.0),
        Some(b) if b == 0.0 => (alpha / r, 0.0),
        Some(b) => {
            let excess = beta - b;
            (excess / b / r, excess / r)
        }
    }
}

/// `sum h dt (-q^2 / (2 rho) + q u0)`, with `0 / 0 = 0`; `-inf` if some cell
/// carries flux without mass.
pub fn objective(it: &PrimalIterate, u0: &SampledFn) -> f64 {
    let g = it.grid;
    let n = g.n;
    let rows = par::map_range(g.nt, |k| {
        let mut acc = 0.0;
        for i in 0..n {
            let c = k * n + i;
            let (rho, q) = (it.rho[c], it.q[c]);
            if q == 0.0 {
                continue;
            }
            if !(rho > 0.0) {
                return f64::NEG_INFINITY;
            }
            acc += -q * q / (2.0 * rho) + q * u0.values()[i];
        }
        acc
    });
    rows.iter().sum::<f64>() * g.h() * g.dt()
}

/// L2 norm of `(rho[k] - rho[k-1]) / dt + D0 q[k]` over the interior slab
/// boundaries, plus the L2 defect of `rho[nt-1] - 1`.
pub fn continuity_residual(it: &PrimalIterate) -> f64 {
    let (interior, defect) = continuity_parts(it);
    interior + defect
}

/// The two terms of [`continuity_residual`] separately.
pub fn continuity_parts(it: &PrimalIterate) -> (f64, f64) {
    let g = it.grid;
    let (n, nt) = (g.n, g.nt);
    let (h, dt) = (g.h(), g.dt());
    let interior: f64 = par::map_range(nt - 1, |km| {
        let k = km + 1;
        let mut acc = 0.0;
        for i in 0..n {
            let qr = it.q[k * n + (i + 1) % n];
            let ql = it.q[k * n + (i + n - 1) % n];
            let div = (it.rho[k * n + i] - it.rho[(k - 1) * n + i]) / dt + (qr - ql) / (2.0 * h);
            acc += div * div;
        }
        acc
    })
    .iter()
    .sum();
    let last = &it.rho[(nt - 1) * n..];
    let defect: f64 = last.iter().map(|r| (r - 1.0) * (r - 1.0)).sum();
    ((interior * h * dt).sqrt(), (defect * h).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub v: Vec<f64>,
    /// Cells with `rho < rho_floor`; their velocity is not meaningful.
    pub vacuum: Vec<bool>,
}

/// `v = q / max(rho, rho_floor)` cellwise.
pub fn extract_velocity(it: &PrimalIterate, rho_floor: f64) -> VelocityField {
    let v = it
        .rho
        .iter()
        .zip(&it.q)
        .map(|(&rho, &q)| q / rho.max(rho_floor))
        .collect();
    let vacuum = it.rho.iter().map(|&rho| rho < rho_floor).collect();
    VelocityField { v, vacuum }
}

/// Solver for `L* L W = L* g` with `L W = (-D0 W[k+1], (W[k+1] - W[k]) / dt)`,
/// `W[nt] = 0`. Diagonal in the Fourier modes of x; a tridiagonal system in
/// t per mode, factorised once.
struct PoissonSolver {
    n: usize,
    nt: usize,
    h: f64,
    dt: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Per mode: Thomas multipliers `c'` and reciprocal pivots.
    factors: Vec<(Vec<f64>, Vec<f64>)>,
}

impl PoissonSolver {
    fn new(grid: SpaceTimeGrid) -> Self {
        let (n, nt) = (grid.n, grid.nt);
        let (h, dt) = (grid.h(), grid.dt());
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let inv_dt2 = 1.0 / (dt * dt);
        let factors = (0..n)
            .map(|kappa| {
                let s = (2.0 * std::f64::consts::PI * kappa as f64 / n as f64).sin();
                let spatial = s * s / (h * h);
                let mut cp = vec![0.0; nt];
                let mut inv = vec![0.0; nt];
                let off = -inv_dt2;
                for j in 0..nt {
                    let diag = if j == 0 { inv_dt2 } else { spatial + 2.0 * inv_dt2 };
                    let denom = if j == 0 { diag } else { diag - off * cp[j - 1] };
                    inv[j] = 1.0 / denom;
                    cp[j] = off * inv[j];
                }
                (cp, inv)
            })
            .collect();
        Self { n, nt, h, dt, forward, inverse, factors }
    }

    /// `g1`, `g2` are `nt x n`; returns `W` as `(nt + 1) x n` with a zero
    /// last row.
    fn solve(&self, g1: &[f64], g2: &[f64]) -> Vec<f64> {
        let (n, nt) = (self.n, self.nt);
        let (h, dt) = (self.h, self.dt);
        let rhs_rows: Vec<Vec<Complex<f64>>> = par::map_range(nt, |j| {
            let mut row: Vec<Complex<f64>> = (0..n)
                .map(|i| {
                    let mut v = -g2[j * n + i] / dt;
                    if j >= 1 {
                        let p = (j - 1) * n;
                        v += g2[p + i] / dt;
                        v += (g1[p + (i + 1) % n] - g1[p + (i + n - 1) % n]) / (2.0 * h);
                    }
                    Complex::new(v, 0.0)
                })
                .collect();
            self.forward.process(&mut row);
            row
        });
        let off = -1.0 / (dt * dt);
        let columns: Vec<Vec<Complex<f64>>> = par::map_range(n, |kappa| {
            let (cp, inv) = &self.factors[kappa];
            let mut x = vec![Complex::new(0.0, 0.0); nt];
            for j in 0..nt {
                let prev = if j == 0 { Complex::new(0.0, 0.0) } else { x[j - 1] };
                x[j] = (rhs_rows[j][kappa] - prev * off) * inv[j];
            }
            for j in (0..nt - 1).rev() {
                let next = x[j + 1];
                x[j] -= next * cp[j];
            }
            x
        });
        let scale = 1.0 / n as f64;
        let rows: Vec<Vec<f64>> = par::map_range(nt, |j| {
            let mut row: Vec<Complex<f64>> = (0..n).map(|kappa| columns[kappa][j]).collect();
            self.inverse.process(&mut row);
            row.iter().map(|c| c.re * scale).collect()
        });
        let mut w = Vec::with_capacity((nt + 1) * n);
        for r in rows {
            w.extend(r);
        }
        w.extend(std::iter::repeat_n(0.0, n));
        w
    }
}

/// Iteration driver; owns the iterate and the report.
pub struct PrimalSolver {
    u0: SampledFn,
    opts: SolverOptions,
    poisson: PoissonSolver,
    pub iterate: PrimalIterate,
    pub report: SolverReport,
    declining: usize,
    last_objective: Option<f64>,
}

const BURN_IN: usize = 10;
const DIVERGENCE_RUN: usize = 50;

impl PrimalSolver {
    pub fn new(u0: &SampledFn, grid: SpaceTimeGrid, opts: SolverOptions) -> Result<Self> {
        opts.validate()?;
        if u0.n() != grid.n {
            return Err(Error::LengthMismatch { expected: grid.n, got: u0.n() });
        }
        let phi0 = antiderivative_zero_mean(u0)?;
        let j_analytic = optimal_value_hj(&phi0, grid.horizon)?;
        let mut warnings = Vec::new();
        let courant = grid.courant(u0);
        if courant > 4.0 {
            let msg = format!("dt * n * sup|u0| = {courant:.3} exceeds 4; time resolution is coarse");
            warn!("{msg}");
            warnings.push(msg);
        }
        Ok(Self {
            u0: u0.clone(),
            opts,
            poisson: PoissonSolver::new(grid),
            iterate: PrimalIterate::initial(grid, u0, opts.r),
            report: SolverReport {
                j_analytic,
                objective_history: Vec::new(),
                gap_history: Vec::new(),
                residual_history: Vec::new(),
                iterations: 0,
                converged: false,
                warnings,
            },
            declining: 0,
            last_objective: None,
        })
    }

    fn gap(&self, obj: f64) -> f64 {
        let j = self.report.j_analytic;
        let scale = if j == 0.0 { 1.0 } else { j.abs() };
        (j - obj) / scale
    }

    /// One W-step, proximal step and multiplier update.
    pub fn step(&mut self) {
        let it = &mut self.iterate;
        let g = it.grid;
        let n = g.n;
        let r = it.r;
        let g1: Vec<f64> = (0..g.cells()).map(|c| it.rho[c] - 1.0 - it.a[c] / r).collect();
        let g2: Vec<f64> = (0..g.cells()).map(|c| it.q[c] - it.b[c] / r).collect();
        let w_prev = std::mem::replace(&mut it.w, self.poisson.solve(&g1, &g2));

        let it_ref = &*it;
        let lam: Vec<(f64, f64)> = par::map_range(g.cells(), |c| it_ref.potential_pair(c / n, c % n));
        let u0 = self.u0.values();
        let next: Vec<(f64, f64)> = par::map_range(g.cells(), |c| {
            let (lr, lq) = lam[c];
            let alpha = r * lr + it_ref.a[c];
            let beta = r * lq + it_ref.b[c] + u0[c % n];
            prox_cost(alpha, beta, r)
        });
        let mut primal = 0.0;
        for (c, &(rho, q)) in next.iter().enumerate() {
            let (lr, lq) = lam[c];
            let (dr, dq) = (lr - rho, lq - q);
            it.a[c] += r * dr;
            it.b[c] += r * dq;
            it.rho[c] = rho;
            it.q[c] = q;
            primal += dr * dr + dq * dq;
        }
        if self.opts.adaptive {
            let mut dual = 0.0;
            for c in 0..g.cells() {
                let (pr, pq) = potential_pair(&g, &w_prev, c / n, c % n);
                let (lr, lq) = lam[c];
                dual += (lr - pr).powi(2) + (lq - pq).powi(2);
            }
            let (p, d) = (primal.sqrt(), r * dual.sqrt());
            if p > 10.0 * d {
                it.r *= 2.0;
            } else if d > 10.0 * p {
                it.r *= 0.5;
            }
        }

        let obj = objective(&self.iterate, &self.u0);
        let gap = self.gap(obj);
        let res = continuity_residual(&self.iterate);
        if let Some(last) = self.last_objective {
            if last - obj > 1e-6 && obj < self.report.j_analytic {
                self.declining += 1;
            } else {
                self.declining = 0;
            }
        }
        self.last_objective = Some(obj);
        self.report.objective_history.push(obj);
        self.report.gap_history.push(gap);
        self.report.residual_history.push(res);
        self.report.iterations += 1;
        self.report.converged = gap.abs() <= self.opts.tol && res <= 10.0 * self.opts.tol;
    }

    /// Iterates until converged or the cap is hit.
    pub fn run(&mut self) -> Result<()> {
        while !self.report.converged && self.report.iterations < self.opts.max_iter {
            self.step();
            if self.report.iterations > BURN_IN && self.declining >= DIVERGENCE_RUN {
                return Err(Error::Diverged {
                    iterations: self.report.iterations,
                });
            }
        }
        Ok(())
    }

    /// Writes the solver state: one JSON header line, then `rho, q, W, a, b`
    /// as little-endian `f64`.
    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let io = |e: std::io::Error| Error::Checkpoint(e.to_string());
        let it = &self.iterate;
        let header = CheckpointHeader {
            n: it.grid.n,
            nt: it.grid.nt,
            T: it.grid.horizon,
            iteration: self.report.iterations,
            r: it.r,
            declining: self.declining,
            last_objective: self.last_objective,
            converged: self.report.converged,
        };
        let mut out = BufWriter::new(File::create(path).map_err(io)?);
        let line = serde_json::to_string(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
        writeln!(out, "{line}").map_err(io)?;
        for field in [&it.rho, &it.q, &it.w, &it.a, &it.b] {
            for v in field.iter() {
                out.write_all(&v.to_le_bytes()).map_err(io)?;
            }
        }
        out.flush().map_err(io)
    }

    /// Rebuilds a solver from a checkpoint. Histories restart empty;
    /// subsequent iterates are bitwise those of an uninterrupted run.
    pub fn resume(path: &Path, u0: &SampledFn, opts: SolverOptions) -> Result<Self> {
        let io = |e: std::io::Error| Error::Checkpoint(e.to_string());
        let mut reader = BufReader::new(File::open(path).map_err(io)?);
        let mut line = String::new();
        reader.read_line(&mut line).map_err(io)?;
        let header: CheckpointHeader =
            serde_json::from_str(line.trim_end()).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let grid = SpaceTimeGrid::new(header.n, header.nt, header.T)?;
        let mut solver = Self::new(u0, grid, opts)?;
        let cells = grid.cells();
        let mut read_field = |len: usize| -> Result<Vec<f64>> {
            let mut bytes = vec![0u8; len * 8];
            reader.read_exact(&mut bytes).map_err(io)?;
            Ok(bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect())
        };
        let it = &mut solver.iterate;
        it.rho = read_field(cells)?;
        it.q = read_field(cells)?;
        it.w = read_field(cells + grid.n)?;
        it.a = read_field(cells)?;
        it.b = read_field(cells)?;
        it.r = header.r;
        solver.report.iterations = header.iteration;
        solver.report.converged = header.converged;
        solver.declining = header.declining;
        solver.last_objective = header.last_objective;
        Ok(solver)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[allow(non_snake_case)]
struct CheckpointHeader {
    n: usize,
    nt: usize,
    T: f64,
    iteration: usize,
    r: f64,
    declining: usize,
    last_objective: Option<f64>,
    converged: bool,
}

/// Runs the solver from the default initial iterate.
pub fn solve_primal(
    u0: &SampledFn,
    grid: SpaceTimeGrid,
    opts: SolverOptions,
) -> Result<(PrimalIterate, SolverReport)> {
    let mut solver = PrimalSolver::new(u0, grid, opts)?;
    solver.run()?;
    Ok((solver.iterate, solver.report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::periodic::PeriodicGrid;
    use crate::shock_free::{pushforward, substitute};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn sine(n: usize) -> SampledFn {
        SampledFn::from_fn(PeriodicGrid::new(n).unwrap(), |x| (2.0 * PI * x).sin())
    }

    #[test]
    fn grid_validation() {
        assert!(matches!(SpaceTimeGrid::new(3, 8, 1.0), Err(Error::GridTooSmall { .. })));
        assert!(matches!(SpaceTimeGrid::new(8, 2, 1.0), Err(Error::GridTooSmall { .. })));
        assert!(matches!(SpaceTimeGrid::new(8, 8, 0.0), Err(Error::InvalidTime(_))));
    }

    #[test]
    fn rejects_nonpositive_penalty() {
        let g = SpaceTimeGrid::new(8, 8, 0.1).unwrap();
        let opts = SolverOptions { r: 0.0, ..Default::default() };
        assert!(matches!(solve_primal(&sine(8), g, opts), Err(Error::BadOptions(_))));
    }

    #[test]
    fn zero_data_is_stationary() {
        let g = SpaceTimeGrid::new(16, 16, 0.3).unwrap();
        let u0 = SampledFn::zeros(PeriodicGrid::new(16).unwrap());
        let (it, rep) = solve_primal(&u0, g, SolverOptions::default()).unwrap();
        assert!(rep.converged);
        assert!(rep.iterations <= 5);
        assert!(rep.final_gap().abs() <= 1e-10);
        assert!(it.rho.iter().all(|&r| r == 1.0));
        assert!(it.q.iter().all(|&q| q == 0.0));
        assert_eq!(continuity_residual(&it), 0.0);
    }

    #[test]
    fn vacuum_cells_are_flagged_and_free() {
        let g = SpaceTimeGrid::new(4, 4, 1.0).unwrap();
        let u0 = sine(4);
        let mut it = PrimalIterate::initial(g, &u0, 1.0);
        it.q.iter_mut().for_each(|q| *q = 0.0);
        it.rho[5] = 0.0;
        let vel = extract_velocity(&it, 1e-8);
        assert!(vel.vacuum[5] && !vel.vacuum[4]);
        assert!(vel.v.iter().all(|&v| v == 0.0));
        assert_eq!(objective(&it, &u0), 0.0);
        it.q[5] = 1.0;
        assert_eq!(objective(&it, &u0), f64::NEG_INFINITY);
    }

    fn brute_projection(alpha: f64, beta: f64) -> f64 {
        let span = beta.abs() + 1.0;
        (0..=400_000)
            .map(|j| -span + 2.0 * span * j as f64 / 400_000.0)
            .min_by(|x, y| {
                let d = |b: f64| (-0.5 * b * b - alpha).powi(2) + (b - beta).powi(2);
                d(*x).total_cmp(&d(*y))
            })
            .unwrap()
    }

    #[test]
    fn projection_matches_brute_force() {
        for &(alpha, beta) in &[(1.0, 0.5), (0.1, -2.0), (-3.0, 4.0), (-1.5, -2.5), (5.0, 0.0), (0.0, 1e-3)] {
            let b = project_parabola(alpha, beta).unwrap();
            assert!((b - brute_projection(alpha, beta)).abs() <= 2e-5, "({alpha}, {beta})");
        }
        assert_eq!(project_parabola(-1.0, 0.5), None);
    }

    proptest! {
        #[test]
        fn prox_is_nonnegative_and_consistent(alpha in -50.0f64..50.0, beta in -50.0f64..50.0, r in 0.01f64..100.0) {
            let (rho, q) = prox_cost(alpha, beta, r);
            prop_assert!(rho >= 0.0);
            if rho == 0.0 {
                prop_assert_eq!(q, 0.0);
            }
            if let Some(b) = project_parabola(alpha, beta) {
                let resid = b * (1.0 + alpha + 0.5 * b * b) - beta;
                prop_assert!(resid.abs() <= 1e-12 * (1.0 + beta.abs() + alpha.abs() * b.abs()));
                if rho > 0.0 && b != 0.0 {
                    prop_assert!(((q / rho) - b).abs() <= 1e-9 * (1.0 + b.abs()));
                }
            }
        }
    }

    /// Applies `L* L` directly.
    fn normal_operator(g: &SpaceTimeGrid, w: &[f64]) -> Vec<f64> {
        let (n, nt) = (g.n, g.nt);
        let (h, dt) = (g.h(), g.dt());
        let at = |k: usize, i: i64| w[k * n + i.rem_euclid(n as i64) as usize];
        let mut out = vec![0.0; nt * n];
        for j in 0..nt {
            for i in 0..n as i64 {
                let mut v = 0.0;
                if j >= 1 {
                    v -= (at(j, i + 2) - 2.0 * at(j, i) + at(j, i - 2)) / (4.0 * h * h);
                    v += (2.0 * at(j, i) - at(j - 1, i) - at(j + 1, i)) / (dt * dt);
                } else {
                    v += (at(0, i) - at(1, i)) / (dt * dt);
                }
                out[j * n + i as usize] = v;
            }
        }
        out
    }

    #[test]
    fn poisson_solve_inverts_the_normal_operator() {
        let g = SpaceTimeGrid::new(12, 7, 0.4).unwrap();
        let cells = g.cells();
        let g1: Vec<f64> = (0..cells).map(|c| ((c * 37 % 11) as f64 - 5.0) * 0.1).collect();
        let g2: Vec<f64> = (0..cells).map(|c| ((c * 13 % 7) as f64 - 3.0) * 0.2).collect();
        let w = PoissonSolver::new(g).solve(&g1, &g2);
        assert!(w[cells..].iter().all(|&v| v == 0.0));
        let lhs = normal_operator(&g, &w);
        // L* g assembled independently
        let (n, h, dt) = (g.n, g.h(), g.dt());
        let mut scale = 0.0_f64;
        for j in 0..g.nt {
            for i in 0..n {
                let mut rhs = -g2[j * n + i] / dt;
                if j >= 1 {
                    let p = (j - 1) * n;
                    rhs += g2[p + i] / dt + (g1[p + (i + 1) % n] - g1[p + (i + n - 1) % n]) / (2.0 * h);
                }
                scale = scale.max(rhs.abs());
                assert!((lhs[j * n + i] - rhs).abs() <= 1e-9 * (1.0 + scale), "{j} {i}");
            }
        }
    }

    #[test]
    fn binned_particles_satisfy_discrete_continuity() {
        let n = 64;
        let u0 = sine(n);
        let phi0 = antiderivative_zero_mean(&u0).unwrap();
        let horizon = 1.0 / PI;
        let sub = substitute(&phi0, horizon).unwrap();
        let g = SpaceTimeGrid::new(n, 32, horizon).unwrap();
        let it = PrimalIterate::from_particles(g, &pushforward(&sub, 0.0).unwrap(), 6);
        let (interior, defect) = continuity_parts(&it);
        assert!(interior <= 1e-10, "{interior}");
        assert!(defect <= 10.0 * (g.h() + g.dt()));
        assert!(it.rho.iter().all(|&r| r >= 0.0));
    }

    #[test]
    fn checkpoint_resume_is_bit_exact() {
        let n = 16;
        let u0 = sine(n);
        let g = SpaceTimeGrid::new(n, 16, 0.2).unwrap();
        let opts = SolverOptions { tol: 1e-14, ..Default::default() };
        let mut a = PrimalSolver::new(&u0, g, opts).unwrap();
        for _ in 0..25 {
            a.step();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.ckpt");
        a.save_checkpoint(&path).unwrap();
        for _ in 0..15 {
            a.step();
        }
        let mut b = PrimalSolver::resume(&path, &u0, opts).unwrap();
        assert_eq!(b.report.iterations, 25);
        for _ in 0..15 {
            b.step();
        }
        assert_eq!(a.iterate, b.iterate);
        assert_eq!(a.report.objective_history.last(), b.report.objective_history.last());
    }

    #[test]
    fn corrupt_checkpoint_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, "{\"n\": 8}\n").unwrap();
        assert!(matches!(PrimalSolver::resume(&path, &sine(8), SolverOptions::default()), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn coarse_time_step_warns() {
        let g = SpaceTimeGrid::new(64, 4, 1.0).unwrap();
        let s = PrimalSolver::new(&sine(64), g, SolverOptions::default()).unwrap();
        assert_eq!(s.report.warnings.len(), 1);
    }

    #[test]
    fn repeated_runs_are_identical() {
        let g = SpaceTimeGrid::new(16, 8, 0.1).unwrap();
        let opts = SolverOptions { max_iter: 30, tol: 1e-14, ..Default::default() };
        let a = solve_primal(&sine(16), g, opts).unwrap();
        let b = solve_primal(&sine(16), g, opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn objective_settles_onto_the_value_from_above() {
        let n = 64;
        let horizon = 2.0 / (2.0 * PI);
        let g = SpaceTimeGrid::new(n, n, horizon).unwrap();
        let opts = SolverOptions { max_iter: 600, tol: 1e-12, ..Default::default() };
        let (_, rep) = solve_primal(&sine(n), g, opts).unwrap();
        let hist = &rep.objective_history;
        let worst_drop = hist[10..]
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0_f64, f64::max);
        assert!(worst_drop <= 1e-5, "{worst_drop}");
        assert!(hist.iter().skip(10).all(|&o| o >= rep.j_analytic * (1.0 - 1e-2)));
        assert!(rep.final_gap() <= 0.0 && rep.final_gap() >= -2e-2);
    }
}
