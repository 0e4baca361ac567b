//! Reproducible initial perturbations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fields::{Grid, MapField};
use crate::linalg::{Mat2, Vec2};

/// Shape of the periodic perturbation `p` added to the linear map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Perturbation {
    Zero,
    /// `p = (a sin(m κ x1), 0)` with `κ = 2π/L`.
    Sine {
        amplitude: f64,
        mode: u32,
    },
    /// Odd pair of smooth compactly supported bumps,
    /// `p = a (φ(x - c) - φ(x + c)) (0.6, 0.8)` with `c = (L/4, L/4)` in the
    /// cell centered at the origin and `φ(r) = exp(1 - 1/(1 - r²/R²))` for
    /// `r < R`. The pair is odd under `x -> -x`, so `p` has zero mean.
    Bump {
        amplitude: f64,
        radius: f64,
    },
    /// Random trigonometric polynomial with all wave numbers up to `modes`,
    /// coefficients damped by `1/(1 + |m|²)` and scaled so that each
    /// component is bounded by `amplitude`.
    RandomSmooth {
        amplitude: f64,
        modes: u32,
    },
}

const BUMP_DIRECTION: Vec2 = [0.6, 0.8];

impl Perturbation {
    /// Samples the perturbation on `grid`. `seed` only affects
    /// [`Perturbation::RandomSmooth`].
    pub fn field(&self, grid: Grid, linear: Mat2, seed: u64) -> MapField {
        let kappa = 2.0 * std::f64::consts::PI / grid.period();
        match *self {
            Perturbation::Zero => MapField::linear_map(grid, linear),
            Perturbation::Sine { amplitude, mode } => MapField::from_fn(grid, linear, |x| {
                [amplitude * (mode as f64 * kappa * x[0]).sin(), 0.0]
            }),
            Perturbation::Bump { amplitude, radius } => {
                let period = grid.period();
                let c = [0.25 * period, 0.25 * period];
                let bump = |x: Vec2, center: Vec2| {
                    let d = [
                        min_image(x[0] - center[0], period),
                        min_image(x[1] - center[1], period),
                    ];
                    let r2 = (d[0] * d[0] + d[1] * d[1]) / (radius * radius);
                    if r2 < 1.0 {
                        (1.0 - 1.0 / (1.0 - r2)).exp()
                    } else {
                        0.0
                    }
                };
                MapField::from_fn(grid, linear, |x| {
                    let s = amplitude * (bump(x, c) - bump(x, [-c[0], -c[1]]));
                    [s * BUMP_DIRECTION[0], s * BUMP_DIRECTION[1]]
                })
            }
            Perturbation::RandomSmooth { amplitude, modes } => {
                let terms = random_terms(modes, seed);
                MapField::from_fn(grid, linear, |x| {
                    let mut out = [0.0; 2];
                    for (k, comp) in terms.iter().enumerate() {
                        let norm: f64 = comp.iter().map(|t| t.cos.abs() + t.sin.abs()).sum();
                        let mut acc = 0.0;
                        for t in comp {
                            let phase = kappa * (t.wave[0] * x[0] + t.wave[1] * x[1]);
                            acc += t.cos * phase.cos() + t.sin * phase.sin();
                        }
                        out[k] = if norm > 0.0 {
                            amplitude * acc / norm
                        } else {
                            0.0
                        };
                    }
                    out
                })
            }
        }
    }

    pub fn amplitude(&self) -> f64 {
        match *self {
            Perturbation::Zero => 0.0,
            Perturbation::Sine { amplitude, .. }
            | Perturbation::Bump { amplitude, .. }
            | Perturbation::RandomSmooth { amplitude, .. } => amplitude,
        }
    }
}

/// Wraps a coordinate difference into `[-L/2, L/2)`.
fn min_image(d: f64, period: f64) -> f64 {
    d - period * (d / period).round()
}

struct Term {
    wave: [f64; 2],
    cos: f64,
    sin: f64,
}

fn random_terms(modes: u32, seed: u64) -> [Vec<Term>; 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = modes as i64;
    let mut waves = Vec::new();
    for m1 in -m..=m {
        for m2 in 0..=m {
            // half plane: skip the origin and the duplicate of (m1, 0) for m1 < 0
            if m2 == 0 && m1 <= 0 {
                continue;
            }
            waves.push([m1 as f64, m2 as f64]);
        }
    }
    std::array::from_fn(|_| {
        waves
            .iter()
            .map(|&wave| {
                let damp = 1.0 / (1.0 + wave[0] * wave[0] + wave[1] * wave[1]);
                Term {
                    wave,
                    cos: damp * rng.gen_range(-1.0..1.0),
                    sin: damp * rng.gen_range(-1.0..1.0),
                }
            })
            .collect()
    })
}
