use super::{Conventions, Normalization, Sidedness, Spectrum};
use crate::error::Result;
use crate::model::{chi_m, total_occupation, DetectionConfig, NoiseParams, Regime, SystemParams};

/// Imprecision-back-action correlation term of the θ-homodyne spectrum at `omega`.
pub fn homodyne_correlation_term(omega: f64, p: &SystemParams, d: &DetectionConfig) -> f64 {
    let x = omega - p.omega_m;
    let h = 0.5 * p.gamma_m;
    2.0 * p.cooperativity() * d.eta_hom * p.gamma_m * x / (x * x + h * h) * (2.0 * d.theta).sin()
}

/// Single-sided homodyne photocurrent spectrum at quadrature angle `d.theta`, shot-noise units.
///
/// `1 + 4C0 n_c η Γm²|χm|²(n_tot + 1/2) sin²θ + 2C0 n_c η Γm(Ω−Ωm)/((Ω−Ωm)² + Γm²/4) sin2θ`;
/// at θ = π/2 and resonance this is `1 + (n_tot + 1/2)/n_imp_hom`.
pub fn homodyne_theta_spectrum(
    grid: &[f64],
    p: &SystemParams,
    n: &NoiseParams,
    d: &DetectionConfig,
    include_correlation: bool,
) -> Result<Spectrum> {
    homodyne_theta_spectrum_with(
        grid,
        p,
        n,
        d,
        include_correlation,
        &Regime::default(),
        &Conventions::default(),
    )
}

pub fn homodyne_theta_spectrum_with(
    grid: &[f64],
    p: &SystemParams,
    n: &NoiseParams,
    d: &DetectionConfig,
    include_correlation: bool,
    regime: &Regime,
    conv: &Conventions,
) -> Result<Spectrum> {
    p.validate()?;
    n.validate()?;
    regime.check(p)?;
    let n_tot = total_occupation(p, n, conv.backaction);
    let s2 = d.theta.sin().powi(2);
    let k = 4.0 * p.cooperativity() * d.eta_hom;
    let values = grid
        .iter()
        .map(|&om| {
            let motion = p.gamma_m * p.gamma_m * chi_m(om, p).norm_sqr() * (n_tot + 0.5);
            let corr = if include_correlation {
                homodyne_correlation_term(om, p, d)
            } else {
                0.0
            };
            1.0 + k * motion * s2 + corr
        })
        .collect();
    Spectrum::new(grid.to_vec(), values, Sidedness::Single, Normalization::ShotNoise)
}
