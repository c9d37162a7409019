//! Entropy systems, the conjugate `K(A, B) = sup_V A.V + B.F(V) - E(V)`, the
//! candidate maximiser `W = (t - T) grad E(U)` built from a smooth solution,
//! the positivity criterion that certifies it, and the discrete maximisation
//! objective for Burgers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::par;
use crate::periodic::SampledFn;

/// A one-dimensional system `d_t V + d_x F(V) = 0` with a strictly convex
/// entropy `E`.
pub trait EntropySystem: Sync {
    fn dim(&self) -> usize;
    fn contains(&self, v: &DVector<f64>) -> bool;
    fn interior_point(&self) -> DVector<f64>;
    fn entropy(&self, v: &DVector<f64>) -> f64;
    fn entropy_gradient(&self, v: &DVector<f64>) -> DVector<f64>;
    fn entropy_hessian(&self, v: &DVector<f64>) -> DMatrix<f64>;
    fn flux(&self, v: &DVector<f64>) -> DVector<f64>;
    /// `J[(a, j)] = d F_a / d V_j`.
    fn flux_jacobian(&self, v: &DVector<f64>) -> DMatrix<f64>;
    /// Hessian of each flux component.
    fn flux_hessians(&self, v: &DVector<f64>) -> Vec<DMatrix<f64>>;
}

/// `E(u) = F(u) = u^2 / 2` on the whole line.
#[derive(Debug, Clone, Copy, Default)]
pub struct BurgersSystem;

impl EntropySystem for BurgersSystem {
    fn dim(&self) -> usize {
        1
    }
    fn contains(&self, v: &DVector<f64>) -> bool {
        v[0].is_finite()
    }
    fn interior_point(&self) -> DVector<f64> {
        DVector::from_element(1, 0.0)
    }
    fn entropy(&self, v: &DVector<f64>) -> f64 {
        0.5 * v[0] * v[0]
    }
    fn entropy_gradient(&self, v: &DVector<f64>) -> DVector<f64> {
        v.clone()
    }
    fn entropy_hessian(&self, _: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(1, 1)
    }
    fn flux(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, 0.5 * v[0] * v[0])
    }
    fn flux_jacobian(&self, v: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v[0])
    }
    fn flux_hessians(&self, _: &DVector<f64>) -> Vec<DMatrix<f64>> {
        vec![DMatrix::identity(1, 1)]
    }
}

/// Isothermal gas with state `(rho, q)`, `rho > 0`:
/// `E = q^2 / (2 rho) + rho log rho`, `F = (q, q^2 / rho + rho)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct IsothermalEulerSystem;

impl EntropySystem for IsothermalEulerSystem {
    fn dim(&self) -> usize {
        2
    }
    fn contains(&self, v: &DVector<f64>) -> bool {
        v[0] > 0.0 && v[0].is_finite() && v[1].is_finite()
    }
    fn interior_point(&self) -> DVector<f64> {
        DVector::from_vec(vec![1.0, 0.0])
    }
    fn entropy(&self, v: &DVector<f64>) -> f64 {
        let (r, q) = (v[0], v[1]);
        0.5 * q * q / r + r * r.ln()
    }
    fn entropy_gradient(&self, v: &DVector<f64>) -> DVector<f64> {
        let (r, q) = (v[0], v[1]);
        DVector::from_vec(vec![-0.5 * q * q / (r * r) + r.ln() + 1.0, q / r])
    }
    fn entropy_hessian(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let (r, q) = (v[0], v[1]);
        let off = -q / (r * r);
        DMatrix::from_row_slice(2, 2, &[q * q / (r * r * r) + 1.0 / r, off, off, 1.0 / r])
    }
    fn flux(&self, v: &DVector<f64>) -> DVector<f64> {
        let (r, q) = (v[0], v[1]);
        DVector::from_vec(vec![q, q * q / r + r])
    }
    fn flux_jacobian(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let (r, q) = (v[0], v[1]);
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0 - q * q / (r * r), 2.0 * q / r])
    }
    fn flux_hessians(&self, v: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let (r, q) = (v[0], v[1]);
        let off = -2.0 * q / (r * r);
        vec![
            DMatrix::zeros(2, 2),
            DMatrix::from_row_slice(2, 2, &[2.0 * q * q / (r * r * r), off, off, 2.0 / r]),
        ]
    }
}

/// Whether the entropy Hessian admits a Cholesky factorisation at `v`.
pub fn hessian_is_positive_definite<S: EntropySystem + ?Sized>(sys: &S, v: &DVector<f64>) -> bool {
    sys.entropy_hessian(v).cholesky().is_some()
}

fn fd_steps(v: &DVector<f64>) -> Vec<f64> {
    let scale = v.amax();
    v.iter().map(|x| 6e-6 * x.abs().max(1e-2 * scale).max(1e-300)).collect()
}

/// Central-difference Jacobian of a vector map.
fn fd_jacobian(v: &DVector<f64>, f: impl Fn(&DVector<f64>) -> DVector<f64>) -> DMatrix<f64> {
    let m = v.len();
    let steps = fd_steps(v);
    let mut jac = DMatrix::zeros(f(v).len(), m);
    for j in 0..m {
        let mut plus = v.clone();
        let mut minus = v.clone();
        plus[j] += steps[j];
        minus[j] -= steps[j];
        let col = (f(&plus) - f(&minus)) / (2.0 * steps[j]);
        jac.set_column(j, &col);
    }
    jac
}

/// Relative asymmetry `|S - S^T| / |S|` (Frobenius) of `S = E'' F'`, with
/// both factors taken by central differences of `grad E` and `F`.
pub fn symmetry_residual<S: EntropySystem + ?Sized>(sys: &S, v: &DVector<f64>) -> f64 {
    let hess = fd_jacobian(v, |x| sys.entropy_gradient(x));
    let jac = fd_jacobian(v, |x| sys.flux(x));
    let s = &hess * &jac;
    let norm = s.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (&s - s.transpose()).norm() / norm
}

/// Same residual with the analytic derivatives.
pub fn symmetry_residual_exact<S: EntropySystem + ?Sized>(sys: &S, v: &DVector<f64>) -> f64 {
    let s = sys.entropy_hessian(v) * sys.flux_jacobian(v);
    let norm = s.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (&s - s.transpose()).norm() / norm
}

/// Smallest eigenvalue of a small symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    match m.nrows() {
        1 => m[(0, 0)],
        2 => {
            let (a, b, d) = (m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)]);
            let mid = 0.5 * (a + d);
            let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
            mid - rad
        }
        _ => m.clone().symmetric_eigen().eigenvalues.min(),
    }
}

/// `K(A, B)` for Burgers: `A^2 / (2 (1 - B))` if `B < 1`, `0` at `(0, 1)`,
/// `+inf` otherwise.
pub fn burgers_k(a: f64, b: f64) -> f64 {
    if b < 1.0 {
        a * a / (2.0 * (1.0 - b))
    } else if a == 0.0 && b == 1.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

const MAX_NEWTON: usize = 200;
const MULTISTART: usize = 16;

struct Inner<'a, S: ?Sized> {
    sys: &'a S,
    a: &'a DVector<f64>,
    b: &'a DVector<f64>,
}

impl<S: EntropySystem + ?Sized> Inner<'_, S> {
    fn value(&self, v: &DVector<f64>) -> f64 {
        self.a.dot(v) + self.b.dot(&self.sys.flux(v)) - self.sys.entropy(v)
    }

    fn gradient(&self, v: &DVector<f64>) -> DVector<f64> {
        self.a + self.sys.flux_jacobian(v).transpose() * self.b - self.sys.entropy_gradient(v)
    }

    fn hessian(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let mut h = -self.sys.entropy_hessian(v);
        for (bk, hk) in self.b.iter().zip(self.sys.flux_hessians(v)) {
            h += hk * *bk;
        }
        h
    }

    /// Growth along each coordinate ray from the interior point.
    fn unbounded(&self) -> bool {
        let v0 = self.sys.interior_point();
        let base = self.value(&v0);
        for j in 0..v0.len() {
            for sign in [1.0, -1.0] {
                let mut prev = base;
                let mut grows = true;
                for s in [1e2, 1e3, 1e4] {
                    let mut v = v0.clone();
                    v[j] += sign * s;
                    if !self.sys.contains(&v) {
                        grows = false;
                        break;
                    }
                    let f = self.value(&v);
                    if !(f > prev) {
                        grows = false;
                        break;
                    }
                    prev = f;
                }
                if grows {
                    return true;
                }
            }
        }
        false
    }

    /// Damped Newton ascent; gradient steps where the Hessian is not
    /// negative definite. Returns the final value and whether every
    /// iterate saw a concave model.
    fn ascend(&self, start: DVector<f64>) -> (f64, bool) {
        let mut v = start;
        let mut f = self.value(&v);
        let mut concave = true;
        for _ in 0..MAX_NEWTON {
            let g = self.gradient(&v);
            let gnorm = g.amax();
            if gnorm <= 1e-13 * (1.0 + f.abs()) {
                break;
            }
            let h = self.hessian(&v);
            let dir = match (-&h).cholesky() {
                Some(chol) => chol.solve(&g),
                None => {
                    concave = false;
                    g.clone()
                }
            };
            let mut step = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let trial = &v + &dir * step;
                if self.sys.contains(&trial) {
                    let ft = self.value(&trial);
                    if ft >= f {
                        let gain = ft - f;
                        v = trial;
                        f = ft;
                        moved = gain > 0.0 || step == 1.0;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        (f, concave)
    }
}

/// `K(A, B) = sup_V A.V + B.F(V) - E(V)`; `+inf` when the supremum is
/// unbounded.
pub fn conjugate_k<S: EntropySystem + ?Sized>(sys: &S, a: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
    let inner = Inner { sys, a, b };
    if inner.unbounded() {
        return Ok(f64::INFINITY);
    }
    let v0 = sys.interior_point();
    let (f, concave) = inner.ascend(v0.clone());
    if concave {
        return Ok(f);
    }
    let m = v0.len();
    let values: Vec<f64> = (0..MULTISTART)
        .map(|k| {
            let mut v = v0.clone();
            let radius = 0.25 * (1 + k / (2 * m)) as f64;
            let sign = if (k / m).is_multiple_of(2) { 1.0 } else { -1.0 };
            v[k % m] += sign * radius;
            while !sys.contains(&v) {
                v = (&v + &v0) * 0.5;
            }
            inner.ascend(v).0
        })
        .chain(std::iter::once(f))
        .collect();
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if hi - lo > 1e-6 {
        return Err(Error::NonConcaveInner { spread: hi - lo });
    }
    Ok(hi)
}

/// States sampled on a space-time grid: rows `k = 0..=nt` at `t_k = k T / nt`,
/// `n` periodic nodes per row, `m` components per state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    pub m: usize,
    pub n: usize,
    pub nt: usize,
    pub horizon: f64,
    values: Vec<f64>,
}

impl StateField {
    pub fn from_fn(m: usize, n: usize, nt: usize, horizon: f64, f: impl Fn(usize, usize) -> Vec<f64> + Sync) -> Self {
        let rows = par::map_range((nt + 1) * n, |idx| f(idx / n, idx % n));
        let mut values = Vec::with_capacity(rows.len() * m);
        for r in rows {
            assert_eq!(r.len(), m, "state dimension");
            values.extend(r);
        }
        Self { m, n, nt, horizon, values }
    }

    /// Scalar field from one sampled function per time row.
    pub fn from_rows(rows: &[SampledFn], horizon: f64) -> Self {
        let n = rows[0].n();
        let mut values = Vec::with_capacity(rows.len() * n);
        for r in rows {
            values.extend_from_slice(r.values());
        }
        Self { m: 1, n, nt: rows.len() - 1, horizon, values }
    }

    pub fn time(&self, k: usize) -> f64 {
        self.horizon * k as f64 / self.nt as f64
    }

    pub fn state(&self, k: usize, i: usize) -> DVector<f64> {
        let start = (k * self.n + i) * self.m;
        DVector::from_column_slice(&self.values[start..start + self.m])
    }

    fn wrap(&self, i: i64) -> usize {
        i.rem_euclid(self.n as i64) as usize
    }

    fn check<S: EntropySystem + ?Sized>(&self, sys: &S) -> Result<()> {
        assert_eq!(sys.dim(), self.m, "state dimension");
        for k in 0..=self.nt {
            for i in 0..self.n {
                let v = self.state(k, i);
                if !sys.contains(&v) {
                    return Err(Error::StateOutOfDomain(v.iter().cloned().collect()));
                }
            }
        }
        Ok(())
    }
}

/// Dual potential on the same grid as a scalar [`StateField`]; the row at
/// `t = T` is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DualField {
    pub n: usize,
    pub nt: usize,
    pub horizon: f64,
    /// Row-major, `(nt + 1) * n`.
    pub w: Vec<f64>,
}

impl DualField {
    pub fn zeros(n: usize, nt: usize, horizon: f64) -> Self {
        Self { n, nt, horizon, w: vec![0.0; (nt + 1) * n] }
    }

    pub fn at(&self, k: usize, i: i64) -> f64 {
        self.w[k * self.n + i.rem_euclid(self.n as i64) as usize]
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.nt as f64
    }

    /// `(d_t W, d_x W)` on slab `k`: backward difference in time, centered
    /// difference in space taken on the upper row.
    pub fn slab_derivatives(&self, k: usize, i: usize) -> (f64, f64) {
        let h = 1.0 / self.n as f64;
        let ii = i as i64;
        let a = (self.at(k + 1, ii) - self.at(k, ii)) / self.dt();
        let b = (self.at(k + 1, ii + 1) - self.at(k + 1, ii - 1)) / (2.0 * h);
        (a, b)
    }
}

/// `W(t, x) = (t - T) grad E(U(t, x))`, one dual field per component.
pub fn recovery_potential<S: EntropySystem + ?Sized>(sys: &S, u: &StateField) -> Result<Vec<DualField>> {
    u.check(sys)?;
    let (n, nt, horizon) = (u.n, u.nt, u.horizon);
    let grads = par::map_range((nt + 1) * n, |idx| {
        let k = idx / n;
        let g = sys.entropy_gradient(&u.state(k, idx % n));
        if k == nt {
            vec![0.0; u.m]
        } else {
            (g * (u.time(k) - horizon)).iter().cloned().collect()
        }
    });
    Ok((0..u.m)
        .map(|c| DualField {
            n,
            nt,
            horizon,
            w: grads.iter().map(|g| g[c]).collect(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    /// Smallest eigenvalue over every node and probe.
    pub min_eigenvalue: f64,
    pub pass: bool,
    /// `(t, x, smallest eigenvalue over probes)` per grid node.
    pub samples: Vec<(f64, f64, f64)>,
}

/// Probe states spanning the range of `u`, inflated by half its width.
fn range_probes<S: EntropySystem + ?Sized>(sys: &S, u: &StateField) -> Vec<DVector<f64>> {
    let m = u.m;
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for chunk in u.values.chunks(m) {
        for c in 0..m {
            lo[c] = lo[c].min(chunk[c]);
            hi[c] = hi[c].max(chunk[c]);
        }
    }
    let per_axis = 5usize;
    let total = per_axis.pow(m as u32);
    (0..total)
        .filter_map(|idx| {
            let mut rem = idx;
            let v: Vec<f64> = (0..m)
                .map(|c| {
                    let s = (rem % per_axis) as f64 / (per_axis - 1) as f64;
                    rem /= per_axis;
                    let width = hi[c] - lo[c];
                    lo[c] - 0.25 * width + s * 1.5 * width
                })
                .collect();
            let v = DVector::from_vec(v);
            sys.contains(&v).then_some(v)
        })
        .collect()
}

/// Smallest eigenvalue of `E''(V) + (T - t) sum_a d_x(d_a E(U)) F_a''(V)`
/// over the grid and the probes (caller's plus the inflated field range).
pub fn criterion_check<S: EntropySystem + ?Sized>(
    sys: &S,
    u: &StateField,
    probes: &[DVector<f64>],
) -> Result<CriterionReport> {
    u.check(sys)?;
    for p in probes {
        if !sys.contains(p) {
            return Err(Error::StateOutOfDomain(p.iter().cloned().collect()));
        }
    }
    let mut all = probes.to_vec();
    all.extend(range_probes(sys, u));
    let fixed: Vec<(DMatrix<f64>, Vec<DMatrix<f64>>)> = all
        .iter()
        .map(|v| (sys.entropy_hessian(v), sys.flux_hessians(v)))
        .collect();
    let (n, nt) = (u.n, u.nt);
    let h = 1.0 / n as f64;
    let grads: Vec<DVector<f64>> = par::map_range((nt + 1) * n, |idx| {
        sys.entropy_gradient(&u.state(idx / n, idx % n))
    });
    let samples = par::map_range((nt + 1) * n, |idx| {
        let (k, i) = (idx / n, idx % n);
        let ii = i as i64;
        let right = &grads[k * n + u.wrap(ii + 1)];
        let left = &grads[k * n + u.wrap(ii - 1)];
        let slope = (right - left) / (2.0 * h);
        let t = u.time(k);
        let lever = u.horizon - t;
        let worst = fixed
            .iter()
            .map(|(he, hf)| {
                let mut mat = he.clone();
                for (g, hfa) in slope.iter().zip(hf) {
                    mat += hfa * (lever * g);
                }
                min_eigenvalue(&mat)
            })
            .fold(f64::INFINITY, f64::min);
        (t, i as f64 * h, worst)
    });
    let min_eigenvalue = samples.iter().map(|s| s.2).fold(f64::INFINITY, f64::min);
    Ok(CriterionReport {
        min_eigenvalue,
        pass: min_eigenvalue > 0.0,
        samples,
    })
}

/// Discrete Burgers objective
/// `sum_slabs h dt [ -(d_t W)^2 / (2 (1 - d_x W)) + d_t W u0 ]`.
pub fn objective(w: &DualField, u0: &SampledFn) -> Result<f64> {
    if w.n != u0.n() {
        return Err(Error::LengthMismatch { expected: w.n, got: u0.n() });
    }
    let n = w.n;
    let h = 1.0 / n as f64;
    let rows = par::map_range(w.nt, |k| {
        let mut acc = 0.0;
        for i in 0..n {
            let (a, b) = w.slab_derivatives(k, i);
            if b > 1.0 - 1e-12 {
                if a != 0.0 {
                    return Err(Error::Infeasible { row: k, col: i, dxw: b });
                }
                continue;
            }
            acc += -a * a / (2.0 * (1.0 - b)) + a * u0.values()[i];
        }
        Ok(acc)
    });
    let mut total = 0.0;
    for r in rows {
        total += r?;
    }
    Ok(total * h * w.dt())
}
