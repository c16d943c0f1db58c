//! Parameter sets matching the experiment's operating points.

use std::f64::consts::TAU;

use crate::model::{backaction_occupation, DetectionConfig, NoiseParams, SystemParams};
use crate::spectra::{Conventions, FeedbackConfig};

/// Everything needed to evaluate a spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setup {
    pub system: SystemParams,
    pub noise: NoiseParams,
    pub detection: DetectionConfig,
    pub feedback: FeedbackConfig,
    pub conventions: Conventions,
}

impl Setup {
    /// Sets `n_th` so that `n_th + n_ba = n_tot`.
    pub fn with_n_tot(mut self, n_tot: f64) -> Self {
        let n_ba = backaction_occupation(&self.system, &self.noise, self.conventions.backaction);
        self.system.n_th = (n_tot - n_ba).max(0.0);
        self
    }

    /// Picks `eta_hom` so that `(16 η C0 n_c)⁻¹ = n_imp`.
    pub fn with_n_imp_hom(mut self, n_imp: f64) -> Self {
        self.detection.eta_hom = 1.0 / (16.0 * self.system.cooperativity() * n_imp);
        self
    }

    /// Picks `eta_het` so that `(4 η C0 n_c)⁻¹ = n_imp`.
    pub fn with_n_imp_het(mut self, n_imp: f64) -> Self {
        self.detection.eta_het = 1.0 / (4.0 * self.system.cooperativity() * n_imp);
        self
    }

    pub fn with_gain(mut self, g_fb: f64) -> Self {
        self.feedback.g_fb = g_fb;
        self
    }
}

fn base() -> Setup {
    let system = SystemParams::from_cooperativity(TAU * 4.3e6, TAU * 7.0, TAU * 1e9, 0.3, 1e4, 0.0);
    Setup {
        system,
        noise: NoiseParams::ideal(),
        detection: DetectionConfig {
            eta_hom: 0.2,
            eta_het: 0.03,
            theta: std::f64::consts::FRAC_PI_2,
            omega_if: TAU * 50e6,
        },
        feedback: FeedbackConfig::viscous(0.0),
        conventions: Conventions::default(),
    }
}

/// Efficient feedback: `n_tot = 7·10⁴`, `n_imp_hom = 1.2·10⁻⁴`, `n_imp_het = 2.9·10⁻³`.
pub fn fig2() -> Setup {
    base()
        .with_n_tot(7e4)
        .with_n_imp_hom(1.2e-4)
        .with_n_imp_het(2.9e-3)
}

/// Inefficient feedback: lower homodyne efficiency, `n_imp_hom = 6.9·10⁻⁴`, giving a
/// cold-damping optimum at `n_m ≈ 13.4`.
pub fn fig3() -> Setup {
    fig2().with_n_imp_hom(6.9e-4)
}

/// Ponderomotive squeezing: `η_hom = 0.2`, `θ = 0.1 rad`.
pub fn squeezing() -> Setup {
    let mut s = fig2();
    s.detection.eta_hom = 0.2;
    s.detection.theta = 0.1;
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::total_occupation;
    use crate::spectra::{n_imp_het, n_imp_hom};

    #[test]
    fn fig2_numbers() {
        let s = fig2();
        let n_tot = total_occupation(&s.system, &s.noise, s.conventions.backaction);
        assert!((n_tot - 7e4).abs() < 1e-6);
        assert!((n_imp_hom(&s.system, &s.detection) - 1.2e-4).abs() < 1e-12);
        assert!((n_imp_het(&s.system, &s.detection) - 2.9e-3).abs() < 1e-12);
        assert!((s.system.c0() - 0.3).abs() < 1e-12);
    }
}
