use std::f64::consts::TAU;

use omk::model::NoiseParams;
use omk::noisebudget::*;
use omk::presets;
use proptest::prelude::*;

/// `det [[1/2 + C_qq, C_qp], [C_qp, 1/2 + C_pp]] − 1/4`, written out independently.
fn excess_det(c_qq: f64, c_pp: f64, c_qp: f64) -> f64 {
    let (a, d) = (0.5 + c_qq, 0.5 + c_pp);
    a * d - c_qp * c_qp - 0.25
}

fn noise(c_qq: f64, c_pp: f64, c_qp: f64) -> NoiseParams {
    NoiseParams { c_qq, c_pp, c_qp, alpha: 1.0, beta: 1.0 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn cqp_bound_is_the_determinant_zero_set(c_qq in 0.0f64..100.0, c_pp in 0.0f64..100.0) {
        let b = cqp_bound(c_qq, c_pp);
        let scale = (0.5 + c_qq) * (0.5 + c_pp);
        prop_assert!(excess_det(c_qq, c_pp, b).abs() <= 1e-12 * scale);
        if b > 0.0 {
            prop_assert!(covariance_valid(&noise(c_qq, c_pp, b * (1.0 - 1e-6))).valid);
            prop_assert!(!covariance_valid(&noise(c_qq, c_pp, b * (1.0 + 1e-6))).valid);
            prop_assert!(excess_det(c_qq, c_pp, b * (1.0 + 1e-6)) < 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn rin_round_trip(c_qq in 0.0f64..1e3, power in 1e-7f64..1e-1, wavelength in 4e-7f64..2e-6) {
        let m = RinMeasurement::synthesize(power, wavelength, c_qq);
        let back = cqq_from_rin(&m, DEFAULT_RIN_TOLERANCE).unwrap();
        prop_assert!((back - c_qq).abs() <= 1e-12 * c_qq.max(1.0), "{} vs {}", back, c_qq);
    }

    #[test]
    fn n_phi_is_bilinear(a in -0.1f64..0.1, b in -0.1f64..0.1, c in 0.0f64..100.0, d in 0.0f64..100.0, k in 0.1f64..10.0) {
        let p = presets::fig2().system;
        let f = |x: f64, y: f64| n_phi(&p, y, x);
        let tol = 1e-12 * (a.abs() + b.abs()) * (c + d) * p.omega_m / p.kappa * 10.0 + 1e-300;
        prop_assert!((f(a + b, c) - f(a, c) - f(b, c)).abs() <= tol);
        prop_assert!((f(a, c + d) - f(a, c) - f(a, d)).abs() <= tol);
        prop_assert!((f(k * a, c) - k * f(a, c)).abs() <= tol * k);
        prop_assert!((f(a, k * c) - k * f(a, c)).abs() <= tol * k);
    }
}

#[test]
fn chebyshev_bound_from_detuning_variance() {
    let p = presets::fig2().system;
    let (c_pp, frac, var) = (30.0, 0.01, (TAU * 1e4).powi(2));
    let mean = n_phi(&p, c_pp, frac);
    // n_phi fluctuates linearly with the detuning: δn = (4Ωm C_pp/κ²) δΔ
    let var_n = (4.0 * p.omega_m * c_pp / (p.kappa * p.kappa)).powi(2) * var;
    let bound = excursion_probability_bound(&p, c_pp, mean, var);
    assert!((bound - var_n / (mean * mean)).abs() <= 1e-12 * bound);
    assert_eq!(excursion_probability_bound(&p, c_pp, mean, 0.0), 0.0);
}

#[test]
fn measured_laser_numbers() {
    let p = presets::fig2().system;
    let v = n_phi(&p, 30.0, 0.01);
    assert!((v - 0.0052).abs() <= 1e-4, "n_phi = {v}");
    let b = excursion_probability_bound(&p, 30.0, v, (TAU * 1e4).powi(2));
    assert!(b > 1e-7 && b < 1e-5, "excursion bound {b}");
}

#[test]
fn zero_noise_budget() {
    let p = presets::fig2().system;
    let rin = RinMeasurement::synthesize(1e-4, 774e-9, 0.0);
    let freq = FrequencyNoiseMeasurement {
        s_omega_excess_at_omega_m: 0.0,
        signal_photon_flux: 1e12,
        mean_detuning_fraction: 0.01,
        detuning_variance: 1e8,
    };
    let b = budget(&p, &rin, &freq, 0.0, &Thresholds::default()).unwrap();
    assert!(b.c_qq.abs() < 1e-12);
    assert_eq!((b.c_pp, b.n_phi, b.excursion_probability_bound), (0.0, 0.0, 0.0));
    assert!(b.covariance.valid);
    assert_eq!(b.verdict, "classical noise negligible");
}

#[test]
fn sub_shot_rin_beyond_tolerance_is_an_error() {
    let mut m = RinMeasurement::synthesize(1e-3, 1064e-9, 0.0);
    m.rin_psd_at_omega_m *= 0.97;
    assert!(cqq_from_rin(&m, DEFAULT_RIN_TOLERANCE).is_ok());
    m.rin_psd_at_omega_m *= 0.9;
    assert!(matches!(cqq_from_rin(&m, DEFAULT_RIN_TOLERANCE), Err(omk::Error::NegativeExcess { .. })));
}
