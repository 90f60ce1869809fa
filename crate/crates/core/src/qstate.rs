//! Quantum optical states passing through the converter.
//!
//! Every Fock component picks up a pure phase: `C̃_k = C_k e^{-jk(ω_op t + χ + θ(t))}`.
//! A coherent state therefore stays coherent with its mean amplitude rotated,
//! `α → α e^{-j(ω_op t + χ + θ(t))}`. In phase space the symbol sits at
//! `α_i = α e^{-jθ_i}` with `θ_i` taken at the microwave zero-phase instant
//! `ω_w t ≡ 0 (mod 2π)`; global phases `ω_op t` and `χ` are left out there.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::physics::ConverterDesign;

/// Tail probabilities above this make [`FockState::truncation_warning`] fire.
pub const FOCK_TAIL_WARNING: f64 = 1e-6;

/// Step-halving tolerance of [`integrate_amplitude_ode`] (rad).
pub const ODE_TOLERANCE: f64 = 1e-6;

/// Minimum steps per microwave period accepted by the ODE integrator.
pub const MIN_STEPS_PER_PERIOD: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    amps: Vec<Complex64>,
}

impl FockState {
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::InvalidParameter {
                name: "amps",
                constraint: "need at least the vacuum component".into(),
            });
        }
        if amps.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "amps",
                constraint: "amplitudes must be finite".into(),
            });
        }
        Ok(Self { amps })
    }

    /// Highest Fock index kept.
    pub fn cutoff(&self) -> usize {
        self.amps.len() - 1
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Probability missing from the truncated basis.
    pub fn tail(&self) -> f64 {
        (1.0 - self.norm_sqr()).max(0.0)
    }

    pub fn truncation_warning(&self) -> Option<String> {
        let tail = self.tail();
        (tail > FOCK_TAIL_WARNING)
            .then(|| format!("Fock cutoff K = {} leaves tail probability {tail:.3e}", self.cutoff()))
    }

    /// Largest component-wise difference to another state of the same cutoff.
    pub fn max_deviation(&self, other: &FockState) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentState {
    pub alpha: Complex64,
}

impl CoherentState {
    pub fn new(alpha: Complex64) -> Self {
        Self { alpha }
    }

    /// Real `α = √n_ph`.
    pub fn with_photon_number(n_ph: f64) -> Result<Self> {
        if !n_ph.is_finite() || n_ph < 0.0 {
            return Err(Error::InvalidParameter {
                name: "n_ph",
                constraint: format!("must be finite and >= 0, got {n_ph}"),
            });
        }
        Ok(Self::new(Complex64::new(n_ph.sqrt(), 0.0)))
    }

    /// Mean photon number `|α|²`.
    pub fn n_ph(&self) -> f64 {
        self.alpha.norm_sqr()
    }
}

/// Default Fock cutoff `ceil(n + 10√n + 10)`.
pub fn default_fock_cutoff(n_ph: f64) -> usize {
    (n_ph + 10.0 * n_ph.sqrt() + 10.0).ceil() as usize
}

/// Poissonian amplitudes `C_k = e^{-|α|²/2} α^k / √k!` for `k = 0..=cutoff`.
pub fn coherent_fock_amplitudes(alpha: Complex64, cutoff: usize) -> FockState {
    let mut amps = Vec::with_capacity(cutoff + 1);
    let mut c = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    amps.push(c);
    for k in 1..=cutoff {
        c = c * alpha / (k as f64).sqrt();
        amps.push(c);
    }
    let state = FockState { amps };
    if let Some(w) = state.truncation_warning() {
        log::warn!("{w}");
    }
    state
}

/// Total phase `ω_op t + χ + θ(t)` acquired by one photon entering at `t`.
pub fn single_photon_phase(design: &ConverterDesign, t: f64, b: f64) -> f64 {
    design.carriers.omega_op() * t + design.chi() + design.depth().modulated_phase(t, b)
}

/// Applies `C̃_k = C_k e^{-jk(ω_op t + χ + θ(t))}`.
///
/// The total phase is ~1e5 rad, so `e^{-jkΦ}` is built as powers of
/// `e^{-jΦ}` (reduced exactly by `cis`) rather than from `k Φ` or `Φ mod 2π`,
/// both of which lose about `k` ulps of Φ.
pub fn modulate_fock_state(state: &FockState, design: &ConverterDesign, t: f64, b: f64) -> FockState {
    let step = Complex64::cis(-single_photon_phase(design, t, b));
    let mut rotation = Complex64::new(1.0, 0.0);
    let amps = state
        .amps
        .iter()
        .map(|&c| {
            let out = c * rotation;
            rotation *= step;
            out
        })
        .collect();
    FockState { amps }
}

/// Rotated coherent amplitude `α e^{-j(ω_op t + χ + θ(t))}`.
pub fn modulated_alpha(alpha: Complex64, design: &ConverterDesign, t: f64, b: f64) -> Complex64 {
    alpha * Complex64::cis(-single_photon_phase(design, t, b))
}

/// Result of integrating the Fock amplitude equation through the array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdePhase {
    /// Accumulated phase Φ with `C_k(out) = C_k(0) e^{-jΦ}` (rad, unwrapped).
    pub total_phase: f64,
    /// Part of Φ due to the microwave drive, `-ψ` in `c̃ = e^{jψ}` (rad).
    pub interaction_phase: f64,
    /// `e^{-jΦ}`.
    pub factor: Complex64,
    /// Steps per microwave period of the accepted (finer) run.
    pub steps_per_period: usize,
    /// Phase change between the coarse and fine runs (rad).
    pub refinement_change: f64,
}

/// Closed form of the phase the ODE integrator should produce, `k(ω_op t0 + χ + θ(t0))`.
pub fn closed_form_phase(design: &ConverterDesign, t0: f64, b: f64, k: u32) -> f64 {
    k as f64 * single_photon_phase(design, t0, b)
}

/// Integrates `dC_k/dt = -j k ω_op (1 - (ε_op r33/2) γ E_w(t)) C_k` for a
/// photon entering the array at `t0`, with `E_w(t) = |E_w| sin(ω_w t + b)`
/// inside each element and zero in the gaps.
///
/// The free `ω_op` rotation is removed analytically; the slow interaction
/// term is integrated with classical RK4 at `steps_per_period` and again at
/// twice that, and the finer result is returned.
pub fn integrate_amplitude_ode(
    design: &ConverterDesign,
    t0: f64,
    b: f64,
    k: u32,
    steps_per_period: usize,
) -> Result<OdePhase> {
    if steps_per_period < MIN_STEPS_PER_PERIOD {
        return Err(Error::InvalidParameter {
            name: "steps_per_period",
            constraint: format!("must be >= {MIN_STEPS_PER_PERIOD}, got {steps_per_period}"),
        });
    }
    let coarse = interaction_phase(design, t0, b, k, steps_per_period);
    let fine = interaction_phase(design, t0, b, k, 2 * steps_per_period);
    let change = (fine - coarse).abs();
    if change > ODE_TOLERANCE {
        return Err(Error::Refinement {
            change,
            tolerance: ODE_TOLERANCE,
        });
    }
    let kf = k as f64;
    let free = kf * (design.carriers.omega_op() * t0 + design.chi());
    let total_phase = free - fine;
    Ok(OdePhase {
        total_phase,
        interaction_phase: -fine,
        factor: Complex64::cis(fine - free),
        steps_per_period: 2 * steps_per_period,
        refinement_change: change,
    })
}

// Unwrapped ψ of the interaction-picture amplitude c̃ = e^{jψ}.
fn interaction_phase(design: &ConverterDesign, t0: f64, b: f64, k: u32, steps_per_period: usize) -> f64 {
    let mat = &design.material;
    let geo = &design.geometry;
    let omega_w = design.carriers.omega_w();
    let coupling =
        k as f64 * design.carriers.omega_op() * 0.5 * mat.eps_op() * mat.r33() * geo.gamma() * design.drive.field();
    let rate = |t: f64| coupling * (omega_w * t + b).sin();

    let period = design.carriers.microwave_period();
    let t_w = crate::physics::transit_time(mat, geo.width());
    let t_d = crate::physics::transit_time(mat, geo.period());
    let n_steps = ((t_w / period) * steps_per_period as f64).ceil().max(1.0) as usize;
    let h = t_w / n_steps as f64;

    let j = Complex64::new(0.0, 1.0);
    let mut psi = 0.0;
    for n in 0..geo.count() {
        let start = t0 + n as f64 * t_d;
        let mut c = Complex64::new(1.0, 0.0);
        for i in 0..n_steps {
            let t = start + i as f64 * h;
            let f = |t: f64, c: Complex64| j * rate(t) * c;
            let k1 = f(t, c);
            let k2 = f(t + 0.5 * h, c + 0.5 * h * k1);
            let k3 = f(t + 0.5 * h, c + 0.5 * h * k2);
            let k4 = f(t + h, c + h * k3);
            let next = c + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            psi += (next / c).arg();
            c = next;
        }
    }
    psi
}

/// A PSK symbol encoded onto a coherent state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodedSymbol {
    /// Microwave symbol phase b (rad).
    pub b: f64,
    /// Encoded optical phase θ_i (rad).
    pub theta: f64,
    /// `α e^{-jθ_i}`.
    pub alpha_i: Complex64,
    pub mean_x: f64,
    pub mean_p: f64,
}

/// Encodes symbol phase `b` at the microwave zero-phase instant.
///
/// For an optimum array `θ_i = N δθ cos b`; for other geometries this is
/// `θ(0) = δθ_N sin(φ_N + b)`.
pub fn encode_coherent_symbol(alpha: Complex64, design: &ConverterDesign, b: f64) -> EncodedSymbol {
    let theta = symbol_phase(design, b);
    let alpha_i = alpha * Complex64::cis(-theta);
    EncodedSymbol {
        b,
        theta,
        alpha_i,
        mean_x: alpha_i.re,
        mean_p: alpha_i.im,
    }
}

fn symbol_phase(design: &ConverterDesign, b: f64) -> f64 {
    let depth = design.depth();
    if design.is_optimum(1e-12) {
        design.geometry.count() as f64 * depth.delta_theta * b.cos()
    } else {
        depth.modulated_phase(0.0, b)
    }
}

/// Phase-space rotation taking `(x, p)` to the quadratures of `(x + jp) e^{-jθ}`.
pub fn rotation_matrix(theta: f64) -> [[f64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    [[c, s], [-s, c]]
}

pub fn apply_rotation(theta: f64, x: f64, p: f64) -> (f64, f64) {
    let r = rotation_matrix(theta);
    (r[0][0] * x + r[0][1] * p, r[1][0] * x + r[1][1] * p)
}

/// Largest `|α e^{-jθ(t)} - α e^{-jθ_i}| / |α|` over `t_grid`: how far the
/// symbol wanders within a microwave period from its sampled position.
pub fn narrowband_residual(design: &ConverterDesign, b: f64, t_grid: &[f64]) -> f64 {
    let depth = design.depth();
    let theta_0 = depth.modulated_phase(0.0, b);
    let sampled = Complex64::cis(-theta_0);
    t_grid
        .iter()
        .map(|&t| (Complex64::cis(-depth.modulated_phase(t, b)) - sampled).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::MicrowaveDrive;
    use std::f64::consts::PI;

    fn poisson_pmf(k: usize, mean: f64) -> f64 {
        let ln = -mean + k as f64 * mean.ln() - (1..=k).map(|i| (i as f64).ln()).sum::<f64>();
        ln.exp()
    }

    #[test]
    fn vacuum_coherent_state() {
        let s = coherent_fock_amplitudes(Complex64::new(0.0, 0.0), 5);
        assert_eq!(s.amplitudes()[0], Complex64::new(1.0, 0.0));
        assert!(s.amplitudes()[1..].iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn coherent_amplitudes_are_poissonian() {
        let alpha = Complex64::from_polar(10f64.sqrt(), 0.7);
        let s = coherent_fock_amplitudes(alpha, 60);
        assert!(s.norm_sqr() >= 1.0 - 1e-12);
        for (k, c) in s.amplitudes().iter().enumerate() {
            let want = poisson_pmf(k, 10.0);
            assert!((c.norm_sqr() - want).abs() < 1e-14, "k = {k}");
        }
        assert!(s.truncation_warning().is_none());
        assert!(coherent_fock_amplitudes(alpha, 5).truncation_warning().is_some());
    }

    #[test]
    fn default_cutoff_tail() {
        for &n in &[1.0, 10.0, 100.0] {
            let s = coherent_fock_amplitudes(Complex64::new(f64::sqrt(n), 0.0), default_fock_cutoff(n));
            assert!(s.tail() < 1e-12, "n = {n}: {}", s.tail());
        }
    }

    #[test]
    fn zero_phase_modulation_is_identity() {
        let d = ConverterDesign::reference(1).with_drive(MicrowaveDrive::new(0.0, 0.0).unwrap());
        // χ is fixed by geometry; only check magnitudes and the zero-drive phase here
        let s = coherent_fock_amplitudes(Complex64::new(1.2, -0.4), 30);
        let out = modulate_fock_state(&s, &d, 0.0, 0.0);
        let chi = d.chi();
        for (k, (a, b)) in s.amplitudes().iter().zip(out.amplitudes()).enumerate() {
            assert!((a.norm() - b.norm()).abs() < 1e-15);
            let want = a * Complex64::cis(-chi).powi(k as i32);
            assert!((b - want).norm() < 1e-13);
        }
    }

    #[test]
    fn modulated_coherent_state_stays_coherent() {
        let d = ConverterDesign::reference(10);
        let alpha = Complex64::new(10f64.sqrt(), 0.0);
        let k = default_fock_cutoff(10.0);
        let s = coherent_fock_amplitudes(alpha, k);
        for &t in &[0.0, 4e-12] {
            let out = modulate_fock_state(&s, &d, t, 1.1);
            let want = coherent_fock_amplitudes(modulated_alpha(alpha, &d, t, 1.1), k);
            assert!(out.max_deviation(&want) < 1e-12);
            assert!((out.norm_sqr() - s.norm_sqr()).abs() < 1e-12);
        }
    }

    #[test]
    fn ode_without_drive_is_free_phase() {
        let d = ConverterDesign::reference(3).with_drive(MicrowaveDrive::new(0.0, 0.0).unwrap());
        let t0 = 7e-12;
        let r = integrate_amplitude_ode(&d, t0, 0.0, 2, 1000).unwrap();
        assert_eq!(r.interaction_phase, 0.0);
        assert_eq!(r.total_phase, 2.0 * (d.carriers.omega_op() * t0 + d.chi()));
    }

    #[test]
    fn ode_single_element_matches_closed_form() {
        let d = ConverterDesign::reference(1);
        for &t0 in &[0.0, 1e-11] {
            let r = integrate_amplitude_ode(&d, t0, 0.5, 1, 1000).unwrap();
            let want = closed_form_phase(&d, t0, 0.5, 1);
            assert!((r.total_phase - want).abs() < 1e-6);
        }
    }

    #[test]
    fn ode_phase_linear_in_photon_number() {
        let d = ConverterDesign::reference(10);
        let one = integrate_amplitude_ode(&d, 0.0, 0.0, 1, 1000).unwrap();
        let two = integrate_amplitude_ode(&d, 0.0, 0.0, 2, 1000).unwrap();
        assert!((two.interaction_phase - 2.0 * one.interaction_phase).abs() < 1e-9);
    }

    #[test]
    fn ode_rejects_coarse_grid() {
        let d = ConverterDesign::reference(1);
        assert!(integrate_amplitude_ode(&d, 0.0, 0.0, 1, 999).is_err());
    }

    #[test]
    fn encoding_examples() {
        let d = ConverterDesign::reference(10);
        let alpha = Complex64::new(10f64.sqrt(), 0.0);
        let s = encode_coherent_symbol(alpha, &d, PI / 2.0);
        assert!(s.theta.abs() < 1e-15);
        assert!((s.alpha_i - alpha).norm() < 1e-14);
        let s0 = encode_coherent_symbol(alpha, &d, 0.0);
        assert!((s0.theta - 10.0 * d.delta_theta()).abs() < 1e-15);
        assert!((s0.theta.abs() - 1.934).abs() < 2e-3);
        assert!((s0.alpha_i.norm() - alpha.norm()).abs() < 1e-14);
        assert_eq!(s0.mean_x, s0.alpha_i.re);
        assert_eq!(s0.mean_p, s0.alpha_i.im);
    }

    #[test]
    fn rotation_examples() {
        assert_eq!(rotation_matrix(0.0), [[1.0, 0.0], [-0.0, 1.0]]);
        let (x, p) = apply_rotation(PI / 2.0, 0.3, 0.8);
        assert!((x - 0.8).abs() < 1e-15 && (p + 0.3).abs() < 1e-15);
        let r = rotation_matrix(0.77);
        assert!((r[0][0] * r[1][1] - r[0][1] * r[1][0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn residual_examples() {
        let d = ConverterDesign::reference(10);
        assert_eq!(narrowband_residual(&d, 1.3, &[0.0]), 0.0);
        let off = d.with_drive(MicrowaveDrive::new(0.0, 0.0).unwrap());
        assert_eq!(narrowband_residual(&off, 0.0, &[0.0, 1e-11, 2e-11]), 0.0);

        let tw = d.carriers.microwave_period();
        let grid: Vec<f64> = (0..=400).map(|i| tw * i as f64 / 400.0).collect();
        let got = narrowband_residual(&d, 0.0, &grid);
        let amp = 10.0 * d.delta_theta();
        let want = grid
            .iter()
            .map(|&t| {
                let u = d.carriers.omega_w() * t;
                (Complex64::cis(-amp * u.cos()) - Complex64::cis(-amp)).norm()
            })
            .fold(0.0, f64::max);
        assert!((got - want).abs() < 1e-12);
    }
}
