//! Classical laser noise: inference from measurements and bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{NoiseParams, SystemParams};

pub const HBAR: f64 = 1.054_571_817e-34;
pub const C_LIGHT: f64 = 299_792_458.0;

/// Photon flux of a beam of power `power` (W) at `wavelength` (m).
pub fn photon_flux(power: f64, wavelength: f64) -> f64 {
    power * wavelength / (std::f64::consts::TAU * HBAR * C_LIGHT)
}

/// Relative intensity noise at Ωm (single-sided, referred to power).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RinMeasurement {
    pub mean_power: f64,
    pub wavelength: f64,
    pub rin_psd_at_omega_m: f64,
}

impl RinMeasurement {
    pub fn photon_flux(&self) -> f64 {
        photon_flux(self.mean_power, self.wavelength)
    }

    /// The RIN a beam with excess amplitude noise `c_qq` would show.
    pub fn synthesize(mean_power: f64, wavelength: f64, c_qq: f64) -> Self {
        let flux = photon_flux(mean_power, wavelength);
        RinMeasurement {
            mean_power,
            wavelength,
            rin_psd_at_omega_m: 2.0 * (1.0 + 2.0 * c_qq) / flux,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyNoiseMeasurement {
    /// Excess frequency noise at Ωm, (rad/s)²/Hz.
    pub s_omega_excess_at_omega_m: f64,
    pub signal_photon_flux: f64,
    pub mean_detuning_fraction: f64,
    /// Variance of the slow detuning jitter, (rad/s)².
    pub detuning_variance: f64,
}

/// Default tolerance below shot noise before a RIN reading is rejected.
pub const DEFAULT_RIN_TOLERANCE: f64 = 0.05;

/// `C_qq = ((ṅ/2) S_RIN − 1)/2`. Fails if the RIN sits more than `tolerance` (fraction of
/// the shot level) below shot noise.
pub fn cqq_from_rin(m: &RinMeasurement, tolerance: f64) -> Result<f64> {
    for (name, v) in [
        ("mean_power", m.mean_power),
        ("wavelength", m.wavelength),
        ("rin_psd_at_omega_m", m.rin_psd_at_omega_m),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::invalid(name, "must be > 0"));
        }
    }
    let rel = 0.5 * m.photon_flux() * m.rin_psd_at_omega_m;
    if rel < 1.0 - tolerance {
        return Err(Error::NegativeExcess {
            excess: 1.0 - rel,
            tolerance,
        });
    }
    Ok((rel - 1.0) / 2.0)
}

/// `C_pp = ṅ S_ω / Ωm²`, the summed laser and cavity excess phase noise.
pub fn cpp_from_freq_noise(m: &FrequencyNoiseMeasurement, omega_m: f64) -> Result<f64> {
    if m.s_omega_excess_at_omega_m < 0.0 || m.signal_photon_flux < 0.0 {
        return Err(Error::invalid("frequency_noise", "values must be >= 0"));
    }
    if !(omega_m > 0.0) {
        return Err(Error::invalid("omega_m", "must be > 0"));
    }
    Ok(m.signal_photon_flux * m.s_omega_excess_at_omega_m / (omega_m * omega_m))
}

/// Phonon-equivalent phase-noise contamination `(Δ/κ)(4Ωm/κ) C_pp`.
pub fn n_phi(p: &SystemParams, c_pp: f64, delta_fraction: f64) -> f64 {
    delta_fraction * 4.0 * p.omega_m / p.kappa * c_pp
}

/// Chebyshev bound on `Pr(|n_φ − n̄_φ| > n̄_φ)`.
pub fn excursion_probability_bound(
    p: &SystemParams,
    c_pp: f64,
    n_phi_mean: f64,
    detuning_variance: f64,
) -> f64 {
    if detuning_variance == 0.0 {
        return 0.0;
    }
    let r = 4.0 * p.omega_m / p.kappa * c_pp / n_phi_mean;
    r * r * detuning_variance / (p.kappa * p.kappa)
}

/// Largest `|C_qp|` compatible with a physical input state.
pub fn cqp_bound(c_qq: f64, c_pp: f64) -> f64 {
    (c_qq * c_pp + 0.5 * (c_qq + c_pp)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceCheck {
    pub valid: bool,
    pub trace: f64,
    /// `det V`; equals 1/4 for vacuum.
    pub det: f64,
    /// `det V − 1/4 = C_qq C_pp + (C_qq + C_pp)/2 − C_qp²`, whose zero set is [`cqp_bound`].
    pub excess_det: f64,
    pub witness: String,
}

/// Checks that `V = [[1/2 + C_qq, C_qp], [C_qp, 1/2 + C_pp]]` describes a physical state:
/// `tr V ≥ 0` and `det V ≥ 1/4`.
pub fn covariance_valid(n: &NoiseParams) -> CovarianceCheck {
    let a = 0.5 + n.c_qq;
    let d = 0.5 + n.c_pp;
    let trace = a + d;
    let det = a * d - n.c_qp * n.c_qp;
    let excess_det = n.c_qq * n.c_pp + 0.5 * (n.c_qq + n.c_pp) - n.c_qp * n.c_qp;
    let witness = if trace < 0.0 {
        format!("trace = {trace:.6e} < 0")
    } else if excess_det < 0.0 {
        format!(
            "det - 1/4 = {excess_det:.6e} < 0 (|c_qp| = {:.6e} > bound {:.6e})",
            n.c_qp.abs(),
            cqp_bound(n.c_qq, n.c_pp)
        )
    } else {
        String::from("none")
    };
    CovarianceCheck {
        valid: trace >= 0.0 && excess_det >= 0.0,
        trace,
        det,
        excess_det,
        witness,
    }
}

/// User thresholds for the "classical noise negligible" verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub max_c_qq: f64,
    pub max_n_phi: f64,
    pub max_excursion_probability: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            max_c_qq: 0.01,
            max_n_phi: 0.01,
            max_excursion_probability: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseBudget {
    pub c_qq: f64,
    pub c_pp: f64,
    pub c_qp: f64,
    pub c_qp_bound: f64,
    pub n_phi: f64,
    pub excursion_probability_bound: f64,
    pub covariance: CovarianceCheck,
    pub pass_c_qq: bool,
    pub pass_n_phi: bool,
    pub pass_excursion: bool,
    pub verdict: String,
}

/// Full budget from the two measurements and an assumed `C_qp`.
pub fn budget(
    p: &SystemParams,
    rin: &RinMeasurement,
    freq: &FrequencyNoiseMeasurement,
    c_qp: f64,
    thresholds: &Thresholds,
) -> Result<NoiseBudget> {
    let c_qq = cqq_from_rin(rin, DEFAULT_RIN_TOLERANCE)?;
    let c_pp = cpp_from_freq_noise(freq, p.omega_m)?;
    let nphi = n_phi(p, c_pp, freq.mean_detuning_fraction);
    let excursion = if nphi == 0.0 {
        0.0
    } else {
        excursion_probability_bound(p, c_pp, nphi, freq.detuning_variance)
    };
    let covariance = covariance_valid(&NoiseParams {
        c_qq: c_qq.max(0.0),
        c_pp,
        c_qp,
        alpha: 1.0,
        beta: 1.0,
    });
    let pass_c_qq = c_qq < thresholds.max_c_qq;
    let pass_n_phi = nphi.abs() < thresholds.max_n_phi;
    let pass_excursion = excursion < thresholds.max_excursion_probability;
    let verdict = if !covariance.valid {
        "invalid covariance"
    } else if pass_c_qq && pass_n_phi && pass_excursion {
        "classical noise negligible"
    } else {
        "classical noise significant"
    };
    Ok(NoiseBudget {
        c_qq,
        c_pp,
        c_qp,
        c_qp_bound: cqp_bound(c_qq.max(0.0), c_pp),
        n_phi: nphi,
        excursion_probability_bound: excursion,
        covariance,
        pass_c_qq,
        pass_n_phi,
        pass_excursion,
        verdict: verdict.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn reference() -> SystemParams {
        SystemParams::from_cooperativity(TAU * 4.3e6, TAU * 7.0, TAU * 1e9, 0.3, 1e4, 0.0)
    }

    #[test]
    fn shot_limited_rin_has_no_excess() {
        let m = RinMeasurement::synthesize(1e-6, 780e-9, 0.0);
        assert!(cqq_from_rin(&m, DEFAULT_RIN_TOLERANCE).unwrap().abs() < 1e-12);
        let flux = m.photon_flux();
        let doubled = RinMeasurement { rin_psd_at_omega_m: 4.0 / flux, ..m };
        assert!((cqq_from_rin(&doubled, DEFAULT_RIN_TOLERANCE).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sub_shot_rin_is_rejected() {
        let m = RinMeasurement::synthesize(1e-6, 780e-9, 0.0);
        let low = RinMeasurement { rin_psd_at_omega_m: 0.8 * m.rin_psd_at_omega_m, ..m };
        assert!(matches!(
            cqq_from_rin(&low, DEFAULT_RIN_TOLERANCE),
            Err(Error::NegativeExcess { .. })
        ));
    }

    #[test]
    fn cpp_near_thirty() {
        let flux = photon_flux(100e-9, 774e-9);
        let m = FrequencyNoiseMeasurement {
            s_omega_excess_at_omega_m: (TAU * 35.0).powi(2),
            signal_photon_flux: flux,
            mean_detuning_fraction: 0.01,
            detuning_variance: 0.0,
        };
        let c = cpp_from_freq_noise(&m, TAU * 4.3e6).unwrap();
        assert!(c > 20.0 && c < 40.0, "{c}");
        let m2 = FrequencyNoiseMeasurement { signal_photon_flux: 2.0 * flux, ..m };
        assert!((cpp_from_freq_noise(&m2, TAU * 4.3e6).unwrap() - 2.0 * c).abs() < 1e-9 * c);
    }

    #[test]
    fn nphi_value_and_sign() {
        let p = reference();
        let v = n_phi(&p, 30.0, 0.01);
        assert!((v - 0.00516).abs() < 1e-4, "{v}");
        assert_eq!(n_phi(&p, 30.0, -0.01), -v);
        assert_eq!(n_phi(&p, 30.0, 0.0), 0.0);
    }

    #[test]
    fn cqp_bound_values() {
        assert_eq!(cqp_bound(0.0, 0.0), 0.0);
        assert!((cqp_bound(0.01, 30.0) - 3.912).abs() < 1e-3);
        let big = cqp_bound(1e3, 1e3) / 1e3;
        assert!((big - 1.0).abs() < 1e-3);
    }

    #[test]
    fn covariance_boundary() {
        let vac = covariance_valid(&NoiseParams::ideal());
        assert!(vac.valid && (vac.det - 0.25).abs() < 1e-15);
        let b = cqp_bound(0.01, 30.0);
        let n = NoiseParams { c_qq: 0.01, c_pp: 30.0, c_qp: b * (1.0 + 1e-6), ..NoiseParams::ideal() };
        assert!(!covariance_valid(&n).valid);
        let n = NoiseParams { c_qp: 3.9, ..n };
        assert!(covariance_valid(&n).valid);
    }
}
