//! Initial data presets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::periodic::{PeriodicGrid, SampledFn};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialData {
    Zero,
    /// `sin(2 pi k x)`.
    Sine { k: u32 },
    /// `sum_{k <= degree} a_k sin(2 pi k x) + b_k cos(2 pi k x)` with
    /// coefficients uniform in `[-1, 1]` drawn from a seeded ChaCha8 stream.
    RandomTrig { seed: u64, degree: u32 },
    /// Samples at the nodes `i / n`; the grid size is taken from the list.
    Samples { values: Vec<f64> },
}

impl InitialData {
    /// Zero-mean samples on `grid`. Sample lists must already match the grid
    /// and have (near) zero mean.
    pub fn sample(&self, grid: PeriodicGrid) -> Result<SampledFn> {
        let tau = 2.0 * std::f64::consts::PI;
        let f = match self {
            InitialData::Zero => SampledFn::zeros(grid),
            InitialData::Sine { k } => {
                let k = *k as f64;
                SampledFn::from_fn(grid, |x| (tau * k * x).sin())
            }
            InitialData::RandomTrig { seed, degree } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let coeffs: Vec<(f64, f64)> = (0..*degree)
                    .map(|_| (rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)))
                    .collect();
                SampledFn::from_fn(grid, |x| {
                    coeffs
                        .iter()
                        .enumerate()
                        .map(|(j, (a, b))| {
                            let arg = tau * (j + 1) as f64 * x;
                            a * arg.sin() + b * arg.cos()
                        })
                        .sum()
                })
                .centered()
            }
            InitialData::Samples { values } => {
                if values.len() != grid.n() {
                    return Err(Error::LengthMismatch {
                        expected: grid.n(),
                        got: values.len(),
                    });
                }
                SampledFn::new(grid, values.clone())?
            }
        };
        Ok(f)
    }

    /// Short label used in outputs.
    pub fn label(&self) -> String {
        match self {
            InitialData::Zero => "zero".into(),
            InitialData::Sine { k } => format!("sine {k}"),
            InitialData::RandomTrig { seed, degree } => format!("random-trig {seed}/{degree}"),
            InitialData::Samples { values } => format!("samples ({})", values.len()),
        }
    }

    /// Parses `zero`, `sine K` and `random-trig SEED/DEGREE`.
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let words: Vec<&str> = text.split_whitespace().collect();
        match words.as_slice() {
            ["zero"] => Ok(InitialData::Zero),
            ["sine"] => Ok(InitialData::Sine { k: 1 }),
            ["sine", k] => k
                .parse()
                .map(|k| InitialData::Sine { k })
                .map_err(|_| format!("bad wave number in {text:?}")),
            ["random-trig", spec] => {
                let (seed, degree) = spec
                    .split_once('/')
                    .ok_or_else(|| format!("expected random-trig SEED/DEGREE, got {text:?}"))?;
                let seed = seed.parse().map_err(|_| format!("bad seed in {text:?}"))?;
                let degree = degree.parse().map_err(|_| format!("bad degree in {text:?}"))?;
                Ok(InitialData::RandomTrig { seed, degree })
            }
            _ => Err(format!(
                "unknown initial data {text:?}; expected zero, sine K or random-trig SEED/DEGREE"
            )),
        }
    }
}
