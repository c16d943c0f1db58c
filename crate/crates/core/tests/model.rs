use std::f64::consts::TAU;

use num_complex::Complex64 as C64;
use omk::model::*;
use proptest::prelude::*;

fn reference() -> SystemParams {
    SystemParams::from_cooperativity(TAU * 4.3e6, TAU * 7.0, TAU * 1e9, 0.3, 1e4, 6.85e4)
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
}

fn params() -> impl Strategy<Value = SystemParams> {
    (1e5f64..1e7, 1.0f64..1e3, 1e8f64..1e10, 1e-3f64..1.0, 1e2f64..1e5, -0.05f64..0.05).prop_map(
        |(wm, gm, k, c0, nc, dfrac)| {
            let mut p = SystemParams::from_cooperativity(TAU * wm, TAU * gm, TAU * k, c0, nc, 10.0);
            p.delta = dfrac * p.kappa;
            p
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn susceptibilities_obey_reality(p in params(), x in -3.0f64..3.0) {
        let w = x * p.omega_m;
        // conjugate of the definition: Ω → −Ω and i → −i
        let m = C64::new(0.5 * p.gamma_m, -(w + p.omega_m)).inv();
        prop_assert!(rel(chi_m(w, &p).conj(), C64::new(0.5 * p.gamma_m, w - p.omega_m).inv()) < 1e-13);
        prop_assert!(rel(chi_m(-w, &p).conj(), m) < 1e-13);
        let c = C64::new(0.5 * p.kappa, w + p.delta).inv();
        prop_assert!(rel(chi_c(w, &p).conj(), c) < 1e-13);
    }

    #[test]
    fn self_energy_and_dressing_are_hermitian(p in params(), x in -3.0f64..3.0) {
        let w = x * p.omega_m;
        prop_assert!(rel(self_energy(w, &p), self_energy(-w, &p).conj()) < 1e-12);
        prop_assert!(rel(dressing(w, &p), dressing(-w, &p).conj()) < 1e-12);
    }

    #[test]
    fn optical_damping_matches_detuning_form(p in params()) {
        let g2 = p.coupling().powi(2);
        let l = |x: f64| 1.0 / (p.kappa * p.kappa / 4.0 + x * x);
        let damping = g2 * p.kappa * (l(p.omega_m + p.delta) - l(p.omega_m - p.delta));
        let spring = g2 * (p.omega_m + p.delta) * l(p.omega_m + p.delta)
            - g2 * (p.omega_m - p.delta) * l(p.omega_m - p.delta);
        let (s, d) = dynamical_backaction(&p);
        let scale = g2 / p.kappa;
        prop_assert!((d - damping).abs() <= 1e-9 * scale, "damping {d} vs {damping}");
        prop_assert!((s - spring).abs() <= 1e-9 * scale, "spring {s} vs {spring}");
    }
}

/// Largest relative coefficient deviation over a few offsets around both sidebands.
fn approx_deviation(p: &SystemParams) -> f64 {
    let mut worst: f64 = 0.0;
    for x in [-1.0, -0.999, 0.999, 1.0, 1.001] {
        let w = x * p.omega_m;
        let e = exact_coefficients(w, p).as_array();
        let a = approx_coefficients(w, p).as_array();
        for (e, a) in e.iter().zip(&a) {
            if e.norm() > 0.0 {
                worst = worst.max(rel(*e, *a));
            }
        }
    }
    worst
}

#[test]
fn approximation_error_is_first_order_in_omega_m_over_kappa() {
    // κ swept over two decades at fixed Ωm, Γm and multi-photon cooperativity; g/κ is kept
    // well below Ωm/κ so the bad-cavity term dominates
    let ratios = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4];
    let pts: Vec<(f64, f64)> = ratios
        .iter()
        .map(|&r| {
            let wm = TAU * 4.3e6;
            let p = SystemParams::from_cooperativity(wm, TAU * 7.0, wm / r, 1e-6, 1e4, 0.0);
            p.validate().unwrap();
            assert!(p.coupling() / p.kappa < 0.05 * r);
            (r.ln(), approx_deviation(&p).ln())
        })
        .collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope - 1.0).abs() <= 0.1, "log-log slope {slope}");
}

#[test]
fn efficient_operating_point() {
    // n_ba = C0 n_c for ideal noise, so n_th is the remainder of n_tot = 7e4
    let p = reference();
    let n = NoiseParams::ideal();
    let n_ba = backaction_occupation(&p, &n, BackActionModel::Exact);
    assert!((n_ba - 3000.0).abs() < 1e-6);
    assert!((total_occupation(&p, &n, BackActionModel::Exact) - (p.n_th + 3000.0)).abs() < 1e-9);
    assert!((p.c0() - 0.3).abs() < 1e-12);
    assert!(approximation_scale(&p) < 0.01);
    Regime::default().check(&p).unwrap();
}

#[test]
fn regime_limits_are_inclusive_thresholds() {
    let mut p = reference();
    p.kappa = 10.0 * p.omega_m;
    assert!(Regime::default().check(&p).is_ok());
    p.kappa *= 0.99;
    assert!(matches!(Regime::default().check(&p), Err(omk::Error::ApproxOutOfRegime { .. })));
    assert!(Regime::unchecked().check(&p).is_ok());
}
