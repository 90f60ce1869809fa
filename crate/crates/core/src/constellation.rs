//! PSK constellations in coherent-state phase space and symbol-error statistics.
//!
//! Quadratures follow `⟨x⟩ + j⟨p⟩ = α` with a per-quadrature standard
//! deviation of 1/2, so `|α|² = n_ph` and the relative spread is `1/(2√n_ph)`.
//! Detection is minimum Euclidean distance to the symbol means.
//!
//! Monte Carlo draws come from ChaCha8 streams: shard `i` of a run seeded
//! with `seed` uses `ChaCha8Rng::seed_from_u64(seed)` on stream `i`, and
//! each shard holds a fixed number of trials. Gaussian pairs use the
//! Box-Muller transform on `(1 - u1, u2)` with `u` uniform in `[0, 1)`.
//! Results therefore do not depend on how many threads run the shards.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_finite, Error, Result};
use crate::physics::{wrap_to_pi, ConverterDesign};
use crate::qstate::{encode_coherent_symbol, EncodedSymbol};
use crate::special::gaussian_q;

/// Per-quadrature standard deviation of a coherent state.
pub const QUADRATURE_SIGMA: f64 = 0.5;

/// Trials per Monte Carlo shard.
pub const SHARD_TRIALS: u64 = 1 << 16;

pub const MIN_SER_TRIALS: u64 = 1000;

/// Symbols closer than this in encoded phase are reported as degenerate.
pub const DEGENERATE_PHASE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    phases: Vec<f64>,
}

impl Constellation {
    /// Symbol phases `b_i` in radians, distinct modulo 2π.
    pub fn new(phases: Vec<f64>) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::TooFewSymbols { required: 1, got: 0 });
        }
        for &b in &phases {
            check_finite("b_i", b)?;
        }
        for i in 0..phases.len() {
            for j in 0..i {
                if wrap_to_pi(phases[i] - phases[j]).abs() < 1e-12 {
                    return Err(Error::InvalidParameter {
                        name: "constellation",
                        constraint: format!("phases {i} and {j} coincide modulo 2π"),
                    });
                }
            }
        }
        Ok(Self { phases })
    }

    pub fn from_degrees(degrees: &[f64]) -> Result<Self> {
        Self::new(degrees.iter().map(|d| d.to_radians()).collect())
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhasePoint {
    pub x: f64,
    pub p: f64,
}

impl PhasePoint {
    pub fn new(x: f64, p: f64) -> Self {
        Self { x, p }
    }

    pub fn distance_sqr(&self, other: &PhasePoint) -> f64 {
        let dx = self.x - other.x;
        let dp = self.p - other.p;
        dx * dx + dp * dp
    }

    pub fn distance(&self, other: &PhasePoint) -> f64 {
        self.distance_sqr(other).sqrt()
    }
}

impl From<&EncodedSymbol> for PhasePoint {
    fn from(s: &EncodedSymbol) -> Self {
        Self::new(s.mean_x, s.mean_p)
    }
}

/// Encoded constellation plus the pairs that landed on the same phase.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoding {
    pub symbols: Vec<EncodedSymbol>,
    pub degenerate: Vec<(usize, usize)>,
}

impl Encoding {
    pub fn means(&self) -> Vec<PhasePoint> {
        self.symbols.iter().map(PhasePoint::from).collect()
    }
}

/// Maps every symbol phase to its coherent-state location, preserving order.
///
/// Since `θ_i ∝ cos b_i`, phases `b` and `2π - b` collide; such pairs are
/// returned in [`Encoding::degenerate`] and logged.
pub fn encode_constellation(constellation: &Constellation, alpha: Complex64, design: &ConverterDesign) -> Encoding {
    let symbols: Vec<EncodedSymbol> = constellation
        .phases()
        .iter()
        .map(|&b| encode_coherent_symbol(alpha, design, b))
        .collect();
    let mut degenerate = Vec::new();
    for i in 0..symbols.len() {
        for j in i + 1..symbols.len() {
            if (symbols[i].theta - symbols[j].theta).abs() < DEGENERATE_PHASE {
                log::warn!("symbols {i} and {j} encode to the same optical phase");
                degenerate.push((i, j));
            }
        }
    }
    Encoding { symbols, degenerate }
}

/// Seeded source of standard normal deviates.
#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.rng.random::<f64>();
        let u2 = self.rng.random::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    pub fn next_index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolCloud {
    pub symbol: EncodedSymbol,
    pub sigma: f64,
    pub samples: Vec<PhasePoint>,
    pub seed: u64,
}

/// Draws `n_samples` quadrature measurements around a symbol mean.
pub fn sample_cloud(symbol: &EncodedSymbol, n_samples: usize, seed: u64) -> Result<SymbolCloud> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter {
            name: "n_samples",
            constraint: "must be >= 1".into(),
        });
    }
    let mut g = GaussianStream::new(seed, 0);
    let samples = (0..n_samples)
        .map(|_| {
            let x = symbol.mean_x + QUADRATURE_SIGMA * g.next_gaussian();
            let p = symbol.mean_p + QUADRATURE_SIGMA * g.next_gaussian();
            PhasePoint::new(x, p)
        })
        .collect();
    Ok(SymbolCloud {
        symbol: *symbol,
        sigma: QUADRATURE_SIGMA,
        samples,
        seed,
    })
}

/// Index of the nearest symbol mean; ties go to the lowest index.
pub fn classify(point: &PhasePoint, means: &[PhasePoint]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, m) in means.iter().enumerate() {
        let d = point.distance_sqr(m);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SerEstimate {
    pub ser: f64,
    /// 95% binomial half-width, `1.96 sqrt(ser (1 - ser) / n_trials)`.
    pub ci95: f64,
    pub n_trials: u64,
    pub per_symbol_errors: Vec<u64>,
    pub per_symbol_trials: Vec<u64>,
}

impl SerEstimate {
    /// Binomial standard error `sqrt(ser (1 - ser) / n_trials)`.
    pub fn std_error(&self) -> f64 {
        (self.ser * (1.0 - self.ser) / self.n_trials as f64).sqrt()
    }
}

/// Monte Carlo SER for arbitrary symbol means with circular Gaussian noise.
pub fn estimate_ser_for_means(means: &[PhasePoint], sigma: f64, n_trials: u64, seed: u64) -> Result<SerEstimate> {
    if means.is_empty() {
        return Err(Error::TooFewSymbols { required: 1, got: 0 });
    }
    if n_trials < MIN_SER_TRIALS {
        return Err(Error::InvalidParameter {
            name: "n_trials",
            constraint: format!("must be >= {MIN_SER_TRIALS}, got {n_trials}"),
        });
    }
    let m = means.len();
    let shards = n_trials.div_ceil(SHARD_TRIALS);
    let (errors, trials) = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let count = SHARD_TRIALS.min(n_trials - shard * SHARD_TRIALS);
            let mut g = GaussianStream::new(seed, shard);
            let mut errors = vec![0u64; m];
            let mut trials = vec![0u64; m];
            for _ in 0..count {
                let i = g.next_index(m);
                let point = PhasePoint::new(
                    means[i].x + sigma * g.next_gaussian(),
                    means[i].p + sigma * g.next_gaussian(),
                );
                trials[i] += 1;
                if classify(&point, means) != i {
                    errors[i] += 1;
                }
            }
            (errors, trials)
        })
        .reduce(
            || (vec![0u64; m], vec![0u64; m]),
            |(mut ea, mut ta), (eb, tb)| {
                ea.iter_mut().zip(eb).for_each(|(a, b)| *a += b);
                ta.iter_mut().zip(tb).for_each(|(a, b)| *a += b);
                (ea, ta)
            },
        );
    let total_errors: u64 = errors.iter().sum();
    let ser = total_errors as f64 / n_trials as f64;
    Ok(SerEstimate {
        ser,
        ci95: 1.96 * (ser * (1.0 - ser) / n_trials as f64).sqrt(),
        n_trials,
        per_symbol_errors: errors,
        per_symbol_trials: trials,
    })
}

/// Monte Carlo SER of a PSK constellation encoded onto `|α⟩`, symbols drawn uniformly.
pub fn estimate_ser(
    constellation: &Constellation,
    alpha: Complex64,
    design: &ConverterDesign,
    n_trials: u64,
    seed: u64,
) -> Result<SerEstimate> {
    let means = encode_constellation(constellation, alpha, design).means();
    estimate_ser_for_means(&means, QUADRATURE_SIGMA, n_trials, seed)
}

/// Probability that noise carries a sample across the bisector of two means
/// `d` apart: `Q(d / 2σ)`.
pub fn pairwise_error(d: f64, sigma: f64) -> f64 {
    if d.is_nan() || d < 0.0 || sigma.is_nan() || sigma <= 0.0 {
        return f64::NAN;
    }
    gaussian_q(d / (2.0 * sigma))
}

/// Smallest pairwise distance and the pair achieving it.
pub fn min_distance(points: &[PhasePoint]) -> Result<(f64, (usize, usize))> {
    if points.len() < 2 {
        return Err(Error::TooFewSymbols {
            required: 2,
            got: points.len(),
        });
    }
    let mut best = (f64::INFINITY, (0, 1));
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = points[i].distance(&points[j]);
            if d < best.0 {
                best = (d, (i, j));
            }
        }
    }
    Ok(best)
}

/// Union bound on the uniform-prior SER: `(1/M) Σ_i Σ_{j≠i} Q(d_ij / 2σ)`.
pub fn union_bound(means: &[PhasePoint], sigma: f64) -> f64 {
    let m = means.len();
    if m < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                total += pairwise_error(means[i].distance(&means[j]), sigma);
            }
        }
    }
    (total / m as f64).min(1.0)
}

/// Symbol means on the circle of radius `|α|` rotated by `-θ_i`.
pub fn phase_points_on_circle(radius: f64, thetas: &[f64]) -> Vec<PhasePoint> {
    thetas
        .iter()
        .map(|&t| {
            let c = Complex64::from_polar(radius, -t);
            PhasePoint::new(c.re, c.im)
        })
        .collect()
}
