//! Sampled functions on the unit torus and the elementary operations the
//! solvers share: quadrature, difference stencils, the zero-mean
//! antiderivative and the lower convex envelope of a sampled graph.

use crate::error::{Error, Result};

/// Uniform grid of `n` nodes `x_i = i / n` on the torus `R/Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodicGrid {
    n: usize,
}

impl PeriodicGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::GridTooSmall { min: 2, got: n });
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.node(i))
    }

    /// Reduces a possibly negative or out-of-range index onto `0..n`.
    #[inline]
    pub fn wrap(&self, i: i64) -> usize {
        i.rem_euclid(self.n as i64) as usize
    }
}

/// Samples of a periodic function at the nodes of a [`PeriodicGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFn {
    grid: PeriodicGrid,
    values: Vec<f64>,
}

impl SampledFn {
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::LengthMismatch {
                expected: grid.n(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let grid = PeriodicGrid::new(values.len())?;
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().map(f).collect();
        Self { grid, values }
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n()],
        }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn spacing(&self) -> f64 {
        self.grid.spacing()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Periodic access: `at(i) == at(i + n)`.
    #[inline]
    pub fn at(&self, i: i64) -> f64 {
        self.values[self.grid.wrap(i)]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.n() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> SampledFn {
        SampledFn {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Returns the function minus its mean.
    pub fn centered(&self) -> SampledFn {
        let m = self.mean();
        self.map(|v| v - m)
    }

    /// Discrete second difference `(f[i+1] - 2 f[i] + f[i-1]) / h^2`.
    pub fn second_difference(&self) -> SampledFn {
        let h2 = self.spacing() * self.spacing();
        let values = (0..self.n() as i64)
            .map(|i| (self.at(i + 1) - 2.0 * self.at(i) + self.at(i - 1)) / h2)
            .collect();
        SampledFn {
            grid: self.grid,
            values,
        }
    }

    /// `h * sum |f - g|`.
    pub fn l1_distance(&self, other: &SampledFn) -> f64 {
        debug_assert_eq!(self.n(), other.n());
        self.spacing()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
    }

    pub fn max_distance(&self, other: &SampledFn) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Value, first and second derivative at `x` of the degree-5 Lagrange
    /// interpolant through the six nodes surrounding the cell of `x`.
    pub fn jet(&self, x: f64) -> (f64, f64, f64) {
        const NODES: [f64; 6] = [-2.0, -1.0, 0.0, 1.0, 2.0, 3.0];
        // prod_{j != k} (k - j) for the nodes above
        const DENOM: [f64; 6] = [-120.0, 24.0, -12.0, 12.0, -24.0, 120.0];
        let n = self.n() as f64;
        let scaled = x * n;
        let cell = scaled.floor();
        let s = scaled - cell;
        let base = cell as i64;
        let d: [f64; 6] = std::array::from_fn(|j| s - NODES[j]);
        let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
        for k in 0..6 {
            let mut l0 = 1.0;
            let mut l1 = 0.0;
            let mut l2 = 0.0;
            // running elementary products over the factors d[j], j != k
            for (j, &dj) in d.iter().enumerate() {
                if j == k {
                    continue;
                }
                l2 = l2 * dj + 2.0 * l1;
                l1 = l1 * dj + l0;
                l0 *= dj;
            }
            let fk = self.at(base + NODES[k] as i64) / DENOM[k];
            v += fk * l0;
            d1 += fk * l1;
            d2 += fk * l2;
        }
        (v, d1 * n, d2 * n * n)
    }

    /// Linear interpolation at an arbitrary torus coordinate.
    pub fn interpolate(&self, x: f64) -> f64 {
        let s = x * self.n() as f64;
        let i = s.floor();
        let frac = s - i;
        let i = i as i64;
        (1.0 - frac) * self.at(i) + frac * self.at(i + 1)
    }
}

/// Midpoint rule `h * sum f_i`; exact for trigonometric polynomials of
/// degree below `n`.
pub fn quadrature(f: &SampledFn) -> f64 {
    f.spacing() * f.values.iter().sum::<f64>()
}

/// Centered difference `(f[i+1] - f[i-1]) / 2h` with periodic wrap.
pub fn derivative(f: &SampledFn) -> SampledFn {
    let inv = 0.5 / f.spacing();
    let values = (0..f.n() as i64)
        .map(|i| (f.at(i + 1) - f.at(i - 1)) * inv)
        .collect();
    SampledFn {
        grid: f.grid,
        values,
    }
}

/// Largest admissible `|mean(u0)|` for [`antiderivative_zero_mean`].
pub fn mean_tolerance(u0: &SampledFn) -> f64 {
    1e-10 * u0.max_abs().max(1.0)
}

/// The periodic antiderivative of `u0` with zero mean.
///
/// Increments over each cell use the four-point cubic rule
/// `h (-u[i-1] + 13 u[i] + 13 u[i+1] - u[i+2]) / 24`, which sums to
/// `h * sum u` over a period; the residual drift left by a tiny nonzero mean
/// is removed linearly so the result closes up exactly.
pub fn antiderivative_zero_mean(u0: &SampledFn) -> Result<SampledFn> {
    let mean = u0.mean();
    let tol = mean_tolerance(u0);
    if mean.abs() > tol {
        return Err(Error::NonZeroMean { mean, tol });
    }
    let n = u0.n();
    let h = u0.spacing();
    let mut phi = vec![0.0; n];
    let mut acc = 0.0;
    for i in 0..n {
        phi[i] = acc;
        let j = i as i64;
        acc += h * (-u0.at(j - 1) + 13.0 * u0.at(j) + 13.0 * u0.at(j + 1) - u0.at(j + 2)) / 24.0;
    }
    let drift = acc;
    for (i, p) in phi.iter_mut().enumerate() {
        *p -= drift * i as f64 / n as f64;
    }
    let m = phi.iter().sum::<f64>() / n as f64;
    phi.iter_mut().for_each(|p| *p -= m);
    SampledFn::new(u0.grid(), phi)
}

/// Lower convex envelope of a sampled graph.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeResult {
    pub hull_values: Vec<f64>,
    pub contact_mask: Vec<bool>,
    /// Indices of hull vertices, increasing.
    pub vertices: Vec<usize>,
}

/// Contact tolerance used by [`lower_convex_envelope`].
pub fn contact_tolerance(values: &[f64]) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    1e-9 * (hi - lo)
}

/// Greatest convex minorant of the points `(i * spacing, values[i])`,
/// sampled back on every index by linear interpolation between hull
/// vertices (Andrew's monotone chain, lower half).
pub fn lower_convex_envelope(values: &[f64], spacing: f64) -> EnvelopeResult {
    let m = values.len();
    assert!(m >= 2, "envelope needs at least two samples");
    debug_assert!(spacing > 0.0);
    // Orientation is scale-invariant in x, so indices stand in for abscissae.
    let mut hull: Vec<usize> = Vec::with_capacity(m);
    for i in 0..m {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (b - a) as f64 * (values[i] - values[a])
                - (i - a) as f64 * (values[b] - values[a]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }

    let mut hull_values = vec![0.0; m];
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (va, vb) = (values[a], values[b]);
        let len = (b - a) as f64;
        for (k, hv) in hull_values[a..=b].iter_mut().enumerate() {
            let s = k as f64 / len;
            *hv = va + (vb - va) * s;
        }
        hull_values[a] = va;
        hull_values[b] = vb;
    }
    if hull.len() == 1 {
        hull_values[0] = values[0];
    }

    let tol = contact_tolerance(values);
    let mut contact_mask: Vec<bool> = values
        .iter()
        .zip(&hull_values)
        .map(|(v, h)| (v - h).abs() <= tol)
        .collect();
    for &v in &hull {
        contact_mask[v] = true;
    }
    EnvelopeResult {
        hull_values,
        contact_mask,
        vertices: hull,
    }
}
