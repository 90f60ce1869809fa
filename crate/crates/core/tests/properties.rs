use std::f64::consts::PI;

use proptest::prelude::*;
use qeosim::constellation::{
    classify, estimate_ser_for_means, min_distance, phase_points_on_circle, sample_cloud, union_bound, PhasePoint,
    QUADRATURE_SIGMA,
};
use qeosim::physics::{ConverterDesign, Geometry, MicrowaveDrive, SPEED_OF_LIGHT};
use qeosim::qstate::{apply_rotation, encode_coherent_symbol};
use qeosim::sideband::{
    apply, array_matrix, inner_half_width, reconstruct_phase, sideband_probabilities, truncation_for_depth,
    SidebandVector,
};
use qeosim::Complex64;

fn reference() -> ConverterDesign {
    ConverterDesign::reference(1)
}

fn design(width_ratio: f64, extra_gap_ratio: f64, count: usize, field: f64) -> ConverterDesign {
    let base = reference();
    let w_o = base.optimum_width();
    let width = width_ratio * w_o;
    let geo = Geometry::new(width, width + extra_gap_ratio * w_o, count, 6500.0).unwrap();
    base.with_geometry(geo)
        .with_drive(MicrowaveDrive::new(field, 0.0).unwrap())
}

// θ(t) as a direct sum of per-element sinusoids.
fn brute_force_theta(d: &ConverterDesign, t: f64, b: f64) -> f64 {
    let omega = d.carriers.omega_w();
    let n_op = d.material.n_op();
    let geo = &d.geometry;
    (0..geo.count())
        .map(|i| {
            let mid = i as f64 * geo.period() + 0.5 * geo.width();
            d.delta_theta() * (omega * t + omega * n_op * mid / SPEED_OF_LIGHT + b).sin()
        })
        .sum()
}

fn rotate(theta: f64, p: &PhasePoint) -> PhasePoint {
    let (x, y) = apply_rotation(theta, p.x, p.p);
    PhasePoint::new(x, y)
}

fn point() -> impl Strategy<Value = PhasePoint> {
    (-5.0..5.0f64, -5.0..5.0f64).prop_map(|(x, p)| PhasePoint::new(x, p))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rotations_compose(a in -7.0..7.0f64, b in -7.0..7.0f64, x in -10.0..10.0f64, p in -10.0..10.0f64) {
        let (x1, p1) = apply_rotation(a, x, p);
        let (x2, p2) = apply_rotation(b, x1, p1);
        let (x3, p3) = apply_rotation(a + b, x, p);
        prop_assert!((x2 - x3).abs() < 1e-12 && (p2 - p3).abs() < 1e-12);
        // rotation by θ is multiplication by e^{-jθ}
        let z = Complex64::new(x, p) * Complex64::cis(-a);
        prop_assert!((z.re - x1).abs() < 1e-12 && (z.im - p1).abs() < 1e-12);
    }

    #[test]
    fn classifier_is_rotation_equivariant(
        means in prop::collection::vec(point(), 1..7),
        sample in point(),
        theta in -PI..PI,
    ) {
        let mut d: Vec<f64> = means.iter().map(|m| m.distance(&sample)).collect();
        d.sort_by(f64::total_cmp);
        // skip near-ties, where rounding may legitimately flip the winner
        prop_assume!(d.len() < 2 || d[1] - d[0] > 1e-9);
        let rotated: Vec<PhasePoint> = means.iter().map(|m| rotate(theta, m)).collect();
        prop_assert_eq!(classify(&sample, &means), classify(&rotate(theta, &sample), &rotated));
    }

    #[test]
    fn optimum_width_is_a_symmetric_maximum(x in 0.0..1.0f64) {
        let d = reference();
        let w_o = d.optimum_width();
        let at = |w: f64| d.section_depth(w);
        let (lo, hi) = (at(w_o * (1.0 - x)), at(w_o * (1.0 + x)));
        prop_assert!((lo - hi).abs() <= 1e-12 * d.delta_theta().abs());
        prop_assert!(lo.abs() <= d.delta_theta().abs() * (1.0 + 1e-15));
    }

    #[test]
    fn depth_scaling_is_flat_near_optimum_period(count in 1usize..=12, sign in prop::bool::ANY) {
        let base = reference();
        let d_o = base.optimum_period();
        let period = d_o * if sign { 1.0 + 1e-9 } else { 1.0 - 1e-9 };
        let geo = Geometry::new(base.optimum_width(), period, count, 6500.0).unwrap();
        let depth = base.with_geometry(geo).depth();
        prop_assert!((depth.delta_theta_n.abs() / depth.delta_theta.abs() - count as f64).abs() <= 1e-6);
    }

    #[test]
    fn sinusoid_sum_refits_to_array_depth(
        width_ratio in 0.05..1.95f64,
        extra in 0.0..3.0f64,
        count in 1usize..=10,
        b in -PI..PI,
    ) {
        let d = design(width_ratio, extra, count, 50.0);
        let depth = d.depth();
        let omega = d.carriers.omega_w();
        let m = 64;
        let tw = d.carriers.microwave_period();
        let (mut s, mut c) = (0.0, 0.0);
        for i in 0..m {
            let t = tw * i as f64 / m as f64;
            let v = brute_force_theta(&d, t, b);
            s += v * (omega * t).sin();
            c += v * (omega * t).cos();
        }
        let amp = 2.0 / m as f64 * s.hypot(c);
        prop_assert!((amp - depth.delta_theta_n.abs()).abs() <= 1e-10, "{} vs {}", amp, depth.delta_theta_n);
        // and pointwise, including the offset φ_N
        for i in 0..8 {
            let t = tw * i as f64 / 8.0;
            prop_assert!((depth.modulated_phase(t, b) - brute_force_theta(&d, t, b)).abs() <= 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reconstructed_phase_matches_scalar_form(
        width_ratio in 0.1..1.9f64,
        extra in 0.0..2.0f64,
        count in 1usize..=6,
        t_frac in 0.0..1.0f64,
        b in -PI..PI,
    ) {
        let d = design(width_ratio, extra, count, 50.0);
        let t = t_frac * d.carriers.microwave_period();
        let s = truncation_for_depth(d.depth().delta_theta_n);
        let out = apply(&array_matrix(&d, t, b, s).unwrap(), &SidebandVector::unit(s)).unwrap();
        let expected = Complex64::cis(-(d.chi() + brute_force_theta(&d, t, b)));
        let recon = reconstruct_phase(&out);
        prop_assert!((recon / expected).arg().abs() <= 1e-10);
        prop_assert!((recon.norm() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn array_matrix_is_unitary_and_conserves_probability(
        width_ratio in 0.1..1.9f64,
        extra in 0.0..2.0f64,
        count in 1usize..=8,
        field in 0.0..75.0f64,
        t_frac in 0.0..1.0f64,
        phases in prop::collection::vec(-PI..PI, 5),
    ) {
        let d = design(width_ratio, extra, count, field);
        let total = d.depth().delta_theta_n.abs();
        prop_assume!(total <= 3.0);
        let s = truncation_for_depth(total);
        let t = t_frac * d.carriers.microwave_period();
        let m = array_matrix(&d, t, 0.0, s).unwrap();
        prop_assert!(m.unitarity_defect(inner_half_width(s, total)) < 1e-10);

        let amps: Vec<Complex64> = (-(s as i64)..=s as i64)
            .map(|p| {
                if p.abs() <= 2 {
                    Complex64::from_polar(1.0 / 5f64.sqrt(), phases[(p + 2) as usize])
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        let out = apply(&m, &SidebandVector::from_amplitudes(amps).unwrap()).unwrap();
        prop_assert!((sideband_probabilities(&out).total - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn ser_respects_union_bound(
        radius in 0.5..4.0f64,
        thetas in prop::collection::vec(-PI..PI, 2..6),
        seed in any::<u64>(),
    ) {
        let means = phase_points_on_circle(radius, &thetas);
        let est = estimate_ser_for_means(&means, QUADRATURE_SIGMA, 20_000, seed).unwrap();
        prop_assert!(est.ser <= union_bound(&means, QUADRATURE_SIGMA) + 3.0 * est.ci95 + 1e-12);
        let again = estimate_ser_for_means(&means, QUADRATURE_SIGMA, 20_000, seed).unwrap();
        prop_assert_eq!(est, again);
    }

    #[test]
    fn sample_clouds_have_the_quadrature_spread(b in -PI..PI, n_ph in 0.0..200.0f64, seed in any::<u64>()) {
        let d = ConverterDesign::reference(10);
        let sym = encode_coherent_symbol(Complex64::new(n_ph.sqrt(), 0.0), &d, b);
        let n = 4000;
        let cloud = sample_cloud(&sym, n, seed).unwrap();
        let nf = n as f64;
        let mx = cloud.samples.iter().map(|p| p.x).sum::<f64>() / nf;
        let mp = cloud.samples.iter().map(|p| p.p).sum::<f64>() / nf;
        let vx = cloud.samples.iter().map(|p| (p.x - mx).powi(2)).sum::<f64>() / (nf - 1.0);
        let vp = cloud.samples.iter().map(|p| (p.p - mp).powi(2)).sum::<f64>() / (nf - 1.0);
        // 6σ bounds on the sample mean and on the sample standard deviation
        let mean_tol = 6.0 * 0.5 / nf.sqrt();
        let std_tol = 6.0 * 0.5 / (2.0 * (nf - 1.0)).sqrt();
        prop_assert!((mx - sym.mean_x).abs() < mean_tol && (mp - sym.mean_p).abs() < mean_tol);
        prop_assert!((vx.sqrt() - 0.5).abs() < std_tol && (vp.sqrt() - 0.5).abs() < std_tol);
    }

    #[test]
    fn min_distance_scales_with_amplitude(n_ph in 0.5..200.0f64, scale in 1.0..10.0f64) {
        let d = ConverterDesign::reference(5);
        let at = |n: f64| {
            let means: Vec<PhasePoint> = [0.0, PI / 3.0, 2.0 * PI / 3.0, PI]
                .iter()
                .map(|&b| PhasePoint::from(&encode_coherent_symbol(Complex64::new(n.sqrt(), 0.0), &d, b)))
                .collect();
            min_distance(&means).unwrap().0
        };
        let ratio = at(n_ph * scale * scale) / at(n_ph);
        prop_assert!((ratio - scale).abs() <= 1e-12 * scale);
    }
}
