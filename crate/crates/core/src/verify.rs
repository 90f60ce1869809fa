//! Self-consistency checks between the sideband, closed-form and ODE models.

use serde::Serialize;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::physics::{wrap_to_pi, ConverterDesign};
use crate::qstate::{
    closed_form_phase, coherent_fock_amplitudes, default_fock_cutoff, integrate_amplitude_ode, modulate_fock_state,
    modulated_alpha, CoherentState,
};
use crate::sideband::{
    apply, array_matrix, array_matrix_element, cascade, inner_half_width, reconstruct_phase, section_matrix,
    sideband_probabilities, truncation_for_depth, SidebandMatrix, SidebandVector,
};
use crate::Complex64;

/// Largest array for which the closed-form composition sum is evaluated.
pub const CLOSED_FORM_MAX_COUNT: usize = 3;
/// Sideband orders compared against the closed form.
pub const CLOSED_FORM_ORDERS: i64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub count: usize,
    pub t_s: f64,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &str, design: &ConverterDesign, t: f64, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            count: design.geometry.count(),
            t_s: t,
            value,
            tolerance,
            pass: value.is_finite() && value <= tolerance,
        }
    }
}

/// Entry instants used by every check: `0`, `T_w/8`, `T_w/3`.
pub fn sample_times(design: &ConverterDesign) -> [f64; 3] {
    let tw = design.carriers.microwave_period();
    [0.0, tw / 8.0, tw / 3.0]
}

/// Truncation for a design: explicit, or the default for its array depth.
pub fn half_width_for(design: &ConverterDesign, explicit: Option<usize>) -> usize {
    explicit.unwrap_or_else(|| truncation_for_depth(design.depth().delta_theta_n))
}

/// Matrix-level checks at every sample time:
///
/// * two consecutive `W_o` sections cascade to `e^{-2j k_op W_o} I`;
/// * the array matrix is unitary on the inner block;
/// * a unit carrier input keeps total probability 1;
/// * the coherent sideband sum reproduces `e^{-j(χ + θ(t))}`;
/// * for `N <= 3`, entries `|s|,|p| <= 4` match the closed-form sum.
pub fn matrix_checks(design: &ConverterDesign, half_width: usize, tol: &Tolerances) -> Result<Vec<Check>> {
    let b = design.drive.symbol_phase();
    let depth = design.depth();
    let w_o = design.optimum_width();
    let mut checks = Vec::new();
    for t in sample_times(design) {
        let first = section_matrix(design, 0.0, w_o, t, b, half_width)?;
        let second = section_matrix(design, w_o, w_o, t, b, half_width)?;
        let pair = cascade(&[first, second], half_width)?;
        let want = SidebandMatrix::scaled_identity(half_width, Complex64::cis(-2.0 * design.k_op() * w_o));
        let inner = inner_half_width(half_width, depth.delta_theta);
        checks.push(Check::new(
            "two_section_identity",
            design,
            t,
            pair.max_deviation(&want, inner)?,
            tol.matrix,
        ));

        let m = array_matrix(design, t, b, half_width)?;
        let inner = inner_half_width(half_width, depth.delta_theta_n);
        checks.push(Check::new(
            "unitarity",
            design,
            t,
            m.unitarity_defect(inner),
            tol.unitarity,
        ));

        let out = apply(&m, &SidebandVector::unit(half_width))?;
        let probs = sideband_probabilities(&out);
        checks.push(Check::new(
            "probability_conservation",
            design,
            t,
            (probs.total - 1.0).abs(),
            tol.probability,
        ));

        let expected = Complex64::cis(-(design.chi() + depth.modulated_phase(t, b)));
        let recon = reconstruct_phase(&out);
        checks.push(Check::new(
            "reconstruct_phase",
            design,
            t,
            (recon - expected).norm(),
            tol.phase_rad,
        ));

        if design.geometry.count() <= CLOSED_FORM_MAX_COUNT {
            let reach = CLOSED_FORM_ORDERS.min(half_width as i64);
            let mut worst: f64 = 0.0;
            for s in -reach..=reach {
                for p in -reach..=reach {
                    let e = array_matrix_element(design, s, p, t, b);
                    worst = worst.max((e - m.get(s, p)).norm());
                }
            }
            checks.push(Check::new("closed_form_entries", design, t, worst, tol.matrix));
        }
    }
    Ok(checks)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdeCheck {
    pub count: usize,
    pub t0_s: f64,
    pub photon_number: u32,
    pub ode_phase_rad: f64,
    pub closed_form_rad: f64,
    pub difference_rad: f64,
    pub refinement_change_rad: f64,
    pub steps_per_period: usize,
    pub tolerance: f64,
    pub pass: bool,
}

/// ODE versus closed-form phase for Fock levels `k = 1, 2` at every sample time.
///
/// A run whose step halving does not converge is reported as a failed
/// check rather than an error.
pub fn ode_checks(design: &ConverterDesign, steps_per_period: usize, tol: &Tolerances) -> Result<Vec<OdeCheck>> {
    let b = design.drive.symbol_phase();
    let mut out = Vec::new();
    for t0 in sample_times(design) {
        for k in 1..=2u32 {
            let closed = closed_form_phase(design, t0, b, k);
            let (phase, change, steps) = match integrate_amplitude_ode(design, t0, b, k, steps_per_period) {
                Ok(r) => (r.total_phase, r.refinement_change, r.steps_per_period),
                Err(Error::Refinement { change, .. }) => (f64::NAN, change, 2 * steps_per_period),
                Err(e) => return Err(e),
            };
            let diff = wrap_to_pi(phase - closed).abs();
            out.push(OdeCheck {
                count: design.geometry.count(),
                t0_s: t0,
                photon_number: k,
                ode_phase_rad: phase,
                closed_form_rad: closed,
                difference_rad: diff,
                refinement_change_rad: change,
                steps_per_period: steps,
                tolerance: tol.ode_rad,
                pass: diff.is_finite() && diff <= tol.ode_rad,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoherenceCheck {
    pub count: usize,
    pub n_ph: f64,
    pub t_s: f64,
    pub cutoff: usize,
    pub fock_tail: f64,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Modulating the Fock expansion of `|α⟩` level by level must give the Fock
/// expansion of `|α e^{-jΦ(t)}⟩`.
pub fn coherence_checks(
    design: &ConverterDesign,
    n_ph: f64,
    cutoff: Option<usize>,
    tol: &Tolerances,
) -> Result<Vec<CoherenceCheck>> {
    let alpha = CoherentState::with_photon_number(n_ph)?.alpha;
    let cutoff = cutoff.unwrap_or_else(|| default_fock_cutoff(n_ph));
    let b = design.drive.symbol_phase();
    let input = coherent_fock_amplitudes(alpha, cutoff);
    if let Some(w) = input.truncation_warning() {
        log::warn!("{w}");
    }
    Ok(sample_times(design)
        .into_iter()
        .map(|t| {
            let modulated = modulate_fock_state(&input, design, t, b);
            let expected = coherent_fock_amplitudes(modulated_alpha(alpha, design, t, b), cutoff);
            let dev = modulated.max_deviation(&expected);
            CoherenceCheck {
                count: design.geometry.count(),
                n_ph,
                t_s: t,
                cutoff,
                fock_tail: input.tail(),
                max_deviation: dev,
                tolerance: tol.coherence,
                pass: dev.is_finite() && dev <= tol.coherence,
            }
        })
        .collect())
}
