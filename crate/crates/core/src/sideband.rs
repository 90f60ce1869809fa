//! Truncated sideband network model.
//!
//! A modulated element maps the amplitude on sideband `p` (frequency
//! `ω_op + p ω_w`) onto sideband `s` with the matrix entry
//!
//! ```text
//! T_sp = e^{-j k_op W} J_{s-p}(δθ) e^{-j (s-p)(ω_w t + φ_n + b)}
//! ```
//!
//! which is the Jacobi-Anger expansion `e^{-j z sin u} = Σ_s J_s(z) e^{-j s u}`
//! of the scalar element phase. The per-entry phase convention is fixed by
//! requiring that summing all output sidebands of a unit `s = 0` input gives
//! back `e^{-j(χ + θ(t))}` exactly (see [`reconstruct_phase`]); an extra
//! `j^{s-p}` factor would instead reproduce a cosine-form phase.
//!
//! Sideband indices run over `[-S, S]`. Matrices are dense and small.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{check_finite, Error, Result};
use crate::physics::ConverterDesign;
use crate::special::{bessel_j_orders, bessel_j_symmetric};

/// Sidebands kept beyond the largest depth by the default truncation rule.
pub const TRUNCATION_MARGIN: usize = 15;

/// Extra rows/columns excluded from the edge when checking identities on a truncated matrix.
pub const INNER_PAD: usize = 10;

/// Minimum headroom between `S` and `|δθ|` before truncation is refused.
pub const MIN_HEADROOM: f64 = 5.0;

/// Default truncation `S = ceil(|δθ_total|) + 15`.
pub fn truncation_for_depth(total_depth: f64) -> usize {
    total_depth.abs().ceil() as usize + TRUNCATION_MARGIN
}

/// Half-width of the inner block on which truncation edge effects are negligible.
pub fn inner_half_width(half_width: usize, depth: f64) -> usize {
    half_width.saturating_sub(depth.abs().ceil() as usize + INNER_PAD)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SidebandVector {
    half_width: usize,
    amps: Vec<Complex64>,
}

impl SidebandVector {
    pub fn zeros(half_width: usize) -> Self {
        Self {
            half_width,
            amps: vec![Complex64::new(0.0, 0.0); 2 * half_width + 1],
        }
    }

    /// All amplitude on the carrier, `C^0 = 1`.
    pub fn unit(half_width: usize) -> Self {
        let mut v = Self::zeros(half_width);
        v.amps[half_width] = Complex64::new(1.0, 0.0);
        v
    }

    /// Amplitudes ordered from `s = -S` to `s = S`.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        if amps.len().is_multiple_of(2) {
            return Err(Error::InvalidParameter {
                name: "amps",
                constraint: format!("length must be odd (2S+1), got {}", amps.len()),
            });
        }
        Ok(Self {
            half_width: amps.len() / 2,
            amps,
        })
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn get(&self, s: i64) -> Complex64 {
        let idx = s + self.half_width as i64;
        if idx < 0 || idx as usize >= self.amps.len() {
            Complex64::new(0.0, 0.0)
        } else {
            self.amps[idx as usize]
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SidebandMatrix {
    half_width: usize,
    entries: Vec<Complex64>,
    /// Reference time the drive phase is evaluated at (s).
    pub time: f64,
    /// Microwave symbol phase b (rad).
    pub symbol_phase: f64,
    pub label: String,
}

impl SidebandMatrix {
    pub fn identity(half_width: usize) -> Self {
        Self::scaled_identity(half_width, Complex64::new(1.0, 0.0))
    }

    pub fn scaled_identity(half_width: usize, scale: Complex64) -> Self {
        let dim = 2 * half_width + 1;
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = scale;
        }
        Self {
            half_width,
            entries,
            time: 0.0,
            symbol_phase: 0.0,
            label: "identity".into(),
        }
    }

    /// Toeplitz matrix with `T_sp = scale * band[s - p]`.
    fn toeplitz(half_width: usize, band: impl Fn(i64) -> Complex64) -> Self {
        let dim = 2 * half_width + 1;
        let mut entries = Vec::with_capacity(dim * dim);
        for row in 0..dim {
            for col in 0..dim {
                entries.push(band(row as i64 - col as i64));
            }
        }
        Self {
            half_width,
            entries,
            time: 0.0,
            symbol_phase: 0.0,
            label: String::new(),
        }
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn dim(&self) -> usize {
        2 * self.half_width + 1
    }

    /// Entry at sideband row `s`, column `p`.
    pub fn get(&self, s: i64, p: i64) -> Complex64 {
        let h = self.half_width as i64;
        assert!(s.abs() <= h && p.abs() <= h, "sideband index outside [-{h}, {h}]");
        self.entries[(s + h) as usize * self.dim() + (p + h) as usize]
    }

    fn at(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim() + col]
    }

    /// `self * rhs`: `rhs` is traversed first.
    pub fn matmul(&self, rhs: &SidebandMatrix) -> Result<SidebandMatrix> {
        check_same(self.half_width, rhs.half_width)?;
        let dim = self.dim();
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            for k in 0..dim {
                let a = self.at(i, k);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let row = &rhs.entries[k * dim..(k + 1) * dim];
                for (out, &b) in entries[i * dim..(i + 1) * dim].iter_mut().zip(row) {
                    *out += a * b;
                }
            }
        }
        Ok(SidebandMatrix {
            half_width: self.half_width,
            entries,
            time: rhs.time,
            symbol_phase: rhs.symbol_phase,
            label: format!("{} * {}", self.label, rhs.label),
        })
    }

    pub fn adjoint(&self) -> SidebandMatrix {
        let dim = self.dim();
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                entries[j * dim + i] = self.at(i, j).conj();
            }
        }
        SidebandMatrix {
            entries,
            label: format!("({})^H", self.label),
            ..self.clone()
        }
    }

    pub fn scale(&self, factor: Complex64) -> SidebandMatrix {
        SidebandMatrix {
            entries: self.entries.iter().map(|&e| e * factor).collect(),
            ..self.clone()
        }
    }

    /// Gauss-Jordan inverse with partial pivoting; `None` if singular.
    pub fn inverse(&self) -> Option<SidebandMatrix> {
        let dim = self.dim();
        let mut a = self.entries.clone();
        let mut inv = SidebandMatrix::identity(self.half_width).entries;
        for col in 0..dim {
            let pivot = (col..dim).max_by(|&x, &y| a[x * dim + col].norm().total_cmp(&a[y * dim + col].norm()))?;
            if a[pivot * dim + col].norm() < 1e-300 {
                return None;
            }
            if pivot != col {
                for j in 0..dim {
                    a.swap(pivot * dim + j, col * dim + j);
                    inv.swap(pivot * dim + j, col * dim + j);
                }
            }
            let d = a[col * dim + col].inv();
            for j in 0..dim {
                a[col * dim + j] *= d;
                inv[col * dim + j] *= d;
            }
            for row in 0..dim {
                if row == col {
                    continue;
                }
                let f = a[row * dim + col];
                if f == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..dim {
                    let (pa, pi) = (a[col * dim + j], inv[col * dim + j]);
                    a[row * dim + j] -= f * pa;
                    inv[row * dim + j] -= f * pi;
                }
            }
        }
        Some(SidebandMatrix {
            entries: inv,
            label: format!("({})^-1", self.label),
            ..self.clone()
        })
    }

    /// Largest `|self_sp - other_sp|` over `|s|, |p| <= inner`.
    pub fn max_deviation(&self, other: &SidebandMatrix, inner: usize) -> Result<f64> {
        check_same(self.half_width, other.half_width)?;
        let h = inner.min(self.half_width) as i64;
        let mut worst = 0.0f64;
        for s in -h..=h {
            for p in -h..=h {
                worst = worst.max((self.get(s, p) - other.get(s, p)).norm());
            }
        }
        Ok(worst)
    }

    /// `max |(T^H T - I)_sp|` over `|s|, |p| <= inner`.
    pub fn unitarity_defect(&self, inner: usize) -> f64 {
        let gram = self.adjoint().matmul(self).expect("same truncation");
        gram.max_deviation(&SidebandMatrix::identity(self.half_width), inner)
            .expect("same truncation")
    }
}

fn check_same(left: usize, right: usize) -> Result<()> {
    if left == right {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { left, right })
    }
}

fn check_truncation(half_width: usize, depth: f64) -> Result<()> {
    if half_width < 1 || (depth != 0.0 && depth.abs() > half_width as f64 - MIN_HEADROOM) {
        Err(Error::Truncation { half_width, depth })
    } else {
        Ok(())
    }
}

/// Matrix of a modulated waveguide section spanning `[start, start + width]`
/// (metres from the array entrance), for a photon entering the array at `t`.
pub fn section_matrix(
    design: &ConverterDesign,
    start: f64,
    width: f64,
    t: f64,
    b: f64,
    half_width: usize,
) -> Result<SidebandMatrix> {
    check_finite("start", start)?;
    check_finite("width", width)?;
    if width < 0.0 {
        return Err(Error::InvalidParameter {
            name: "width",
            constraint: format!("must be >= 0, got {width}"),
        });
    }
    let depth = design.section_depth(width);
    check_truncation(half_width, depth)?;
    let phase = design.carriers.omega_w() * t + design.section_offset(start, width) + b;
    let propagation = Complex64::cis(-design.k_op() * width);
    let bessel = bessel_j_symmetric(2 * half_width, depth);
    let mut m = SidebandMatrix::toeplitz(half_width, |d| {
        let j = bessel[(d + 2 * half_width as i64) as usize];
        propagation * j * Complex64::cis(-(d as f64) * phase)
    });
    m.time = t;
    m.symbol_phase = b;
    m.label = format!("section[{start:.3e}+{width:.3e}]");
    Ok(m)
}

/// Transmission matrix of element `n` (1-based) of the array.
pub fn element_matrix(design: &ConverterDesign, n: usize, t: f64, b: f64, half_width: usize) -> Result<SidebandMatrix> {
    let geo = &design.geometry;
    if n == 0 || n > geo.count() {
        return Err(Error::IndexOutOfRange {
            index: n,
            count: geo.count(),
        });
    }
    let start = (n - 1) as f64 * geo.period();
    let mut m = section_matrix(design, start, geo.width(), t, b, half_width)?;
    m.label = format!("T{n}");
    Ok(m)
}

/// Unmodulated waveguide of length `gap`: `e^{-j k_op G} I`.
pub fn gap_matrix(design: &ConverterDesign, gap: f64, half_width: usize) -> Result<SidebandMatrix> {
    check_finite("G", gap)?;
    if gap < 0.0 {
        return Err(Error::InvalidParameter {
            name: "G",
            constraint: format!("must be >= 0, got {gap}"),
        });
    }
    let mut m = SidebandMatrix::scaled_identity(half_width, Complex64::cis(-design.k_op() * gap));
    m.label = "gap".into();
    Ok(m)
}

/// Overall matrix of sections listed in traversal order (first traversed is rightmost).
pub fn cascade(matrices: &[SidebandMatrix], half_width: usize) -> Result<SidebandMatrix> {
    let mut total = SidebandMatrix::identity(half_width);
    for (i, m) in matrices.iter().enumerate() {
        check_same(half_width, m.half_width)?;
        total = if i == 0 { m.clone() } else { m.matmul(&total)? };
    }
    Ok(total)
}

/// `[T^N][I^{N-1}][T^{N-1}] ... [I^1][T^1]` for the whole array.
///
/// The truncation rule is applied to the array depth `δθ_N`, not just to each element.
pub fn array_matrix(design: &ConverterDesign, t: f64, b: f64, half_width: usize) -> Result<SidebandMatrix> {
    check_truncation(half_width, design.depth().delta_theta_n)?;
    let geo = &design.geometry;
    let mut chain = Vec::with_capacity(2 * geo.count());
    for n in 1..=geo.count() {
        if n > 1 {
            chain.push(gap_matrix(design, geo.gap(), half_width)?);
        }
        chain.push(element_matrix(design, n, t, b, half_width)?);
    }
    let mut m = cascade(&chain, half_width)?;
    m.label = format!("array[N={}]", geo.count());
    Ok(m)
}

// Smallest order above |z| whose Bessel value is below 1e-17.
fn bessel_cutoff(z: f64) -> usize {
    if z == 0.0 {
        return 0;
    }
    let lo = z.abs().ceil() as usize;
    let j = bessel_j_orders(lo + 80, z);
    (lo..j.len()).find(|&x| j[x].abs() < 1e-17).unwrap_or(j.len() - 1)
}

/// Closed-form array entry `T_sp` as a sum over integer compositions
/// `x_1 + ... + x_N = s - p` of `Π_n J_{x_n}(δθ) e^{-j x_n (ω_w t + φ_n + b)}`.
///
/// Per-element orders are limited to `|x_n| <= x_max`, where `|J_x(δθ)| < 1e-17`
/// beyond `x_max`. Cost grows like `(2 x_max + 1)^(N-1)`; intended for small arrays.
pub fn array_matrix_element(design: &ConverterDesign, s: i64, p: i64, t: f64, b: f64) -> Complex64 {
    let depth = design.delta_theta();
    let x_max = bessel_cutoff(depth);
    let bessel = bessel_j_symmetric(x_max, depth);
    let omega_w = design.carriers.omega_w();
    let factors: Vec<Vec<Complex64>> = (1..=design.geometry.count())
        .map(|n| {
            let u = omega_w * t + design.element_offset(n).expect("index in range") + b;
            (-(x_max as i64)..=x_max as i64)
                .zip(&bessel)
                .map(|(x, &j)| j * Complex64::cis(-(x as f64) * u))
                .collect()
        })
        .collect();
    let sum = compose(&factors, s - p, x_max as i64);
    Complex64::cis(-design.chi()) * sum
}

fn compose(factors: &[Vec<Complex64>], remaining: i64, x_max: i64) -> Complex64 {
    let (first, rest) = factors.split_first().expect("at least one element");
    if rest.is_empty() {
        return if remaining.abs() <= x_max {
            first[(remaining + x_max) as usize]
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
    let reach = rest.len() as i64 * x_max;
    let mut acc = Complex64::new(0.0, 0.0);
    for x in -x_max..=x_max {
        let left = remaining - x;
        if left.abs() > reach {
            continue;
        }
        let f = first[(x + x_max) as usize];
        if f == Complex64::new(0.0, 0.0) {
            continue;
        }
        acc += f * compose(rest, left, x_max);
    }
    acc
}

/// Output sideband amplitudes `C̃^s = Σ_p T_sp C^p`.
pub fn apply(matrix: &SidebandMatrix, vector: &SidebandVector) -> Result<SidebandVector> {
    check_same(matrix.half_width, vector.half_width)?;
    let dim = matrix.dim();
    let amps = (0..dim)
        .map(|row| {
            matrix.entries[row * dim..(row + 1) * dim]
                .iter()
                .zip(&vector.amps)
                .map(|(&t, &c)| t * c)
                .sum()
        })
        .collect();
    Ok(SidebandVector {
        half_width: vector.half_width,
        amps,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SidebandProbabilities {
    half_width: usize,
    probs: Vec<f64>,
    /// Σ_s P(s) over the truncated range.
    pub total: f64,
    /// `1 - total`: probability lost to truncation (or gained, if negative).
    pub tail: f64,
}

impl SidebandProbabilities {
    pub fn get(&self, s: i64) -> f64 {
        let idx = s + self.half_width as i64;
        if idx < 0 || idx as usize >= self.probs.len() {
            0.0
        } else {
            self.probs[idx as usize]
        }
    }

    /// Probabilities ordered from `s = -S` to `s = S`.
    pub fn values(&self) -> &[f64] {
        &self.probs
    }

    /// Combined probability of sidebands `+s` and `-s` (just `P(0)` for `s = 0`).
    pub fn order(&self, s: u32) -> f64 {
        let s = s as i64;
        if s == 0 {
            self.get(0)
        } else {
            self.get(s) + self.get(-s)
        }
    }
}

pub fn sideband_probabilities(vector: &SidebandVector) -> SidebandProbabilities {
    let probs: Vec<f64> = vector.amps.iter().map(|c| c.norm_sqr()).collect();
    let total: f64 = probs.iter().sum();
    SidebandProbabilities {
        half_width: vector.half_width,
        probs,
        total,
        tail: 1.0 - total,
    }
}

/// One row of a width sweep. `p1`/`p2` combine the `+s` and `-s` sidebands;
/// `tail = 1 - p0 - p1 - p2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub w_m: f64,
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
    pub tail: f64,
}

/// Sideband splitting of a unit carrier input versus element width.
///
/// Widths up to `W_o` are a single section. Wider elements are modelled as a
/// `W_o` section followed by the remainder, so the split amplitudes visibly
/// recombine as the width approaches `2 W_o`.
pub fn width_sweep(design: &ConverterDesign, w_grid: &[f64], half_width: usize) -> Result<Vec<SweepRow>> {
    let w_o = design.optimum_width();
    let t = 0.0;
    let b = design.drive.symbol_phase();
    w_grid
        .iter()
        .map(|&w| {
            check_finite("w", w)?;
            let matrix = if w <= w_o {
                section_matrix(design, 0.0, w, t, b, half_width)?
            } else {
                let first = section_matrix(design, 0.0, w_o, t, b, half_width)?;
                let second = section_matrix(design, w_o, w - w_o, t, b, half_width)?;
                cascade(&[first, second], half_width)?
            };
            let out = apply(&matrix, &SidebandVector::unit(half_width))?;
            let probs = sideband_probabilities(&out);
            let (p0, p1, p2) = (probs.order(0), probs.order(1), probs.order(2));
            Ok(SweepRow {
                w_m: w,
                p0,
                p1,
                p2,
                tail: 1.0 - p0 - p1 - p2,
            })
        })
        .collect()
}

/// Coherent sum of all output sidebands, `Σ_s C̃^s`.
///
/// The matrices already carry the `e^{-j s ω_w t}` carrier offsets at their
/// reference time, so for a unit carrier input this equals
/// `e^{-j(χ + θ(t))}` up to truncation.
pub fn reconstruct_phase(vector: &SidebandVector) -> Complex64 {
    vector.amps.iter().sum()
}

/// `Σ_{|s|<=S} J_s(z) e^{-j s u}`, the truncated expansion of `e^{-j z sin u}`.
pub fn jacobi_anger_sine(z: f64, u: f64, half_width: usize) -> Complex64 {
    let j = bessel_j_symmetric(half_width, z);
    (-(half_width as i64)..=half_width as i64)
        .zip(&j)
        .map(|(s, &v)| v * Complex64::cis(-(s as f64) * u))
        .sum()
}

/// `Σ_{|s|<=S} (-j)^s J_s(z) e^{-j s b}`, the truncated expansion of `e^{-j z cos b}`.
pub fn jacobi_anger_cosine(z: f64, b: f64, half_width: usize) -> Complex64 {
    jacobi_anger_sine(z, b + PI / 2.0, half_width)
}
