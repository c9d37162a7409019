//! Exact one-dimensional Wasserstein-1 distance between a weighted point
//! cloud on the circle `R/Z` and the uniform (Lebesgue) measure.
//!
//! On the circle `W1(mu, nu) = min_c int_0^1 |F_mu(x) - F_nu(x) - c| dx`.
//! Against the uniform measure `F_mu(x) - x` is piecewise linear with slope
//! -1 between atoms, so both the optimal shift (a weighted median) and the
//! integral are available in closed form up to a bisection on `c`.

/// `W1` on the circle between the normalised atoms and the uniform measure.
/// Positions are reduced mod 1; weights must be nonnegative with positive sum.
pub fn w1_circle_to_uniform(positions: &[f64], weights: &[f64]) -> f64 {
    assert_eq!(positions.len(), weights.len());
    let total: f64 = weights.iter().sum();
    assert!(total > 0.0, "empty measure");
    let mut atoms: Vec<(f64, f64)> = positions
        .iter()
        .zip(weights)
        .map(|(&p, &w)| (p.rem_euclid(1.0), w / total))
        .collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Intervals [l, r) on which F_mu is the constant `level`.
    let mut pieces: Vec<(f64, f64, f64)> = Vec::with_capacity(atoms.len() + 1);
    let mut left = 0.0;
    let mut level = 0.0;
    for &(p, w) in &atoms {
        if p > left {
            pieces.push((left, p, level));
        }
        level += w;
        left = p;
    }
    if left < 1.0 {
        pieces.push((left, 1.0, level));
    }

    // G(x) = level - x; measure of {G <= c} on [l, r) is the overlap with
    // [level - c, r).
    let below = |c: f64| -> f64 {
        pieces
            .iter()
            .map(|&(l, r, lv)| (r - (lv - c).max(l)).clamp(0.0, r - l))
            .sum()
    };
    let (mut lo, mut hi) = pieces.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(l, r, lv)| {
        (lo.min(lv - r), hi.max(lv - l))
    });
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if below(mid) < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-17 {
            break;
        }
    }
    let c = 0.5 * (lo + hi);

    pieces
        .iter()
        .map(|&(l, r, lv)| {
            let y1 = lv - c - l;
            let y2 = lv - c - r;
            if y1 * y2 >= 0.0 {
                0.5 * (y1 + y2).abs() * (r - l)
            } else {
                0.5 * (y1 * y1 + y2 * y2)
            }
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Samples G on a fine grid, takes the sample median and averages the
    /// absolute deviation.
    fn sampled_w1(positions: &[f64], weights: &[f64]) -> f64 {
        let total: f64 = weights.iter().sum();
        let m = 200_000;
        let mut g: Vec<f64> = (0..m)
            .map(|k| {
                let x = (k as f64 + 0.5) / m as f64;
                let f: f64 = positions
                    .iter()
                    .zip(weights)
                    .filter(|(p, _)| p.rem_euclid(1.0) <= x)
                    .map(|(_, w)| w / total)
                    .sum();
                f - x
            })
            .collect();
        let mut sorted = g.clone();
        sorted.sort_by(f64::total_cmp);
        let med = sorted[m / 2];
        g.iter_mut().map(|v| (*v - med).abs()).sum::<f64>() / m as f64
    }

    #[test]
    fn uniform_lattice_is_close_to_lebesgue() {
        let n = 100;
        let pos: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let w = vec![1.0; n];
        let d = w1_circle_to_uniform(&pos, &w);
        // each atom carries 1/n spread over a cell of width 1/n: 1/(4n)
        assert!((d - 0.25 / n as f64).abs() <= 1e-12, "{d}");
    }

    #[test]
    fn single_atom() {
        // distance from a Dirac mass to the uniform law on the circle is 1/4
        let d = w1_circle_to_uniform(&[0.3], &[2.0]);
        assert!((d - 0.25).abs() <= 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn matches_sampled_oracle(
            atoms in prop::collection::vec((0.0f64..1.0, 0.01f64..1.0), 1..12)
        ) {
            let pos: Vec<f64> = atoms.iter().map(|a| a.0).collect();
            let w: Vec<f64> = atoms.iter().map(|a| a.1).collect();
            let exact = w1_circle_to_uniform(&pos, &w);
            let approx = sampled_w1(&pos, &w);
            prop_assert!((exact - approx).abs() <= 2e-5, "{} vs {}", exact, approx);
        }
    }
}
