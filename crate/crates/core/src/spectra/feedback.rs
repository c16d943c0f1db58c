use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{Conventions, Normalization, OccupancyModel, Sidedness, Spectrum};
use crate::error::{Error, Result};
use crate::model::{backaction_occupation, total_occupation, DetectionConfig, NoiseParams, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LoopModel {
    /// Force `−Γfb ẏ` with no delay or bandwidth limit.
    IdealViscous,
    /// Force `−k0 q`, `q̇ = ω_c (y(t − τ) − q)`; `k0` makes `|K(Ωm)| = ΩmΓfb`.
    DelayedBandlimited { delay: f64, bandwidth: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackConfig {
    pub g_fb: f64,
    pub loop_model: LoopModel,
}

impl FeedbackConfig {
    pub fn viscous(g_fb: f64) -> Self {
        FeedbackConfig {
            g_fb,
            loop_model: LoopModel::IdealViscous,
        }
    }

    /// Single pole at `10 Ωm` and the delay that makes the force at Ωm purely viscous.
    pub fn delayed_bandlimited(g_fb: f64, omega_m: f64) -> Self {
        let bandwidth = 10.0 * omega_m;
        FeedbackConfig {
            g_fb,
            loop_model: LoopModel::DelayedBandlimited {
                delay: viscous_delay(omega_m, bandwidth),
                bandwidth,
            },
        }
    }

    pub fn gamma_fb(&self, p: &SystemParams) -> f64 {
        self.g_fb * p.gamma_m
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g_fb >= 0.0) || !self.g_fb.is_finite() {
            return Err(Error::invalid("g_fb", "must be finite and >= 0"));
        }
        if let LoopModel::DelayedBandlimited { delay, bandwidth } = self.loop_model {
            if !(delay >= 0.0) || !(bandwidth > 0.0) {
                return Err(Error::invalid("loop_model", "delay >= 0 and bandwidth > 0 required"));
            }
        }
        Ok(())
    }
}

/// Delay τ with `Ωm τ = 3π/2 − atan(Ωm/ω_c)`.
pub fn viscous_delay(omega_m: f64, bandwidth: f64) -> f64 {
    (1.5 * std::f64::consts::PI - (omega_m / bandwidth).atan()) / omega_m
}

/// Feedback kernel `K(Ω)`: acceleration `−K y` per unit readout.
pub fn feedback_kernel(omega: f64, p: &SystemParams, fb: &FeedbackConfig) -> C64 {
    let gfb = fb.gamma_fb(p);
    match fb.loop_model {
        LoopModel::IdealViscous => C64::new(0.0, -omega * gfb),
        LoopModel::DelayedBandlimited { delay, bandwidth } => {
            let r = p.omega_m / bandwidth;
            let k0 = p.omega_m * gfb * (1.0 + r * r).sqrt();
            k0 * C64::from_polar(1.0, omega * delay) / C64::new(1.0, -omega / bandwidth)
        }
    }
}

/// Mechanical response to acceleration, `1/(Ωm² − Ω² − iΩΓm)`.
fn mech(omega: f64, p: &SystemParams) -> C64 {
    C64::new(p.omega_m * p.omega_m - omega * omega, -omega * p.gamma_m).inv()
}

/// Open-loop gain `G = K·H`.
pub fn open_loop_gain(omega: f64, p: &SystemParams, fb: &FeedbackConfig) -> C64 {
    feedback_kernel(omega, p, fb) * mech(omega, p)
}

/// Loop transfer `L = G/(1 + G)`; `1 − L` shapes the in-loop imprecision.
pub fn loop_transfer(omega: f64, p: &SystemParams, fb: &FeedbackConfig) -> C64 {
    let g = open_loop_gain(omega, p, fb);
    g / (1.0 + g)
}

/// Net damping at Ωm and the phase error of the feedback force relative to viscous.
pub fn loop_damping(p: &SystemParams, fb: &FeedbackConfig) -> (f64, f64) {
    let k = feedback_kernel(p.omega_m, p, fb);
    let ideal = -std::f64::consts::FRAC_PI_2;
    let mut err = k.arg() - ideal;
    while err > std::f64::consts::PI {
        err -= std::f64::consts::TAU;
    }
    while err < -std::f64::consts::PI {
        err += std::f64::consts::TAU;
    }
    let net = p.gamma_m + fb.gamma_fb(p) * err.cos();
    (net, err)
}

pub fn check_loop(p: &SystemParams, fb: &FeedbackConfig) -> Result<()> {
    let (net, err) = loop_damping(p, fb);
    if net <= 0.0 {
        return Err(Error::UnstableLoop {
            net_damping: net,
            phase_margin: std::f64::consts::FRAC_PI_2 - err.abs(),
        });
    }
    Ok(())
}

/// `ΩmΓm/((Ωm² − Ω²) + iΩ(Γm + Γfb))`.
pub fn chi_eff(omega: f64, p: &SystemParams, fb: &FeedbackConfig) -> C64 {
    let g_eff = p.gamma_m + fb.gamma_fb(p);
    p.omega_m * p.gamma_m / C64::new(p.omega_m * p.omega_m - omega * omega, omega * g_eff)
}

/// `(16 η_hom C0 n_c)⁻¹`.
pub fn n_imp_hom(p: &SystemParams, d: &DetectionConfig) -> f64 {
    1.0 / (16.0 * d.eta_hom * p.cooperativity())
}

/// `(4 η_het C0 n_c)⁻¹`.
pub fn n_imp_het(p: &SystemParams, d: &DetectionConfig) -> f64 {
    1.0 / (4.0 * d.eta_het * p.cooperativity())
}

/// Single-sided homodyne imprecision PSD `2 n_imp S_zp`.
pub fn imprecision_psd(p: &SystemParams, d: &DetectionConfig) -> f64 {
    2.0 * n_imp_hom(p, d) * p.s_zp()
}

/// Cold-damped occupation `n_m` for gain `g`.
pub fn cooled_occupation(n_tot: f64, n_imp: f64, g: f64, model: OccupancyModel) -> Result<f64> {
    match model {
        OccupancyModel::HighGain => {
            if g == 0.0 {
                return Err(Error::ZeroGain);
            }
            Ok(n_tot / g + g * n_imp - 0.5)
        }
        OccupancyModel::ClosedLoop => Ok((n_tot + 0.5 + g * g * n_imp) / (1.0 + g) - 0.5),
    }
}

/// Physical displacement PSD, single-sided, in `x_zp²/Hz`.
pub fn colddamp_displacement_spectrum(
    grid: &[f64],
    p: &SystemParams,
    n: &NoiseParams,
    d: &DetectionConfig,
    fb: &FeedbackConfig,
) -> Result<Spectrum> {
    p.validate()?;
    fb.validate()?;
    let n_tot = total_occupation(p, n, Default::default());
    let drive = 2.0 * n_tot + 1.0 + 2.0 * n_imp_hom(p, d) * fb.g_fb * fb.g_fb;
    let s_zp = p.s_zp();
    let values = grid
        .iter()
        .map(|&w| chi_eff(w, p, fb).norm_sqr() * drive * s_zp)
        .collect();
    Spectrum::new(grid.to_vec(), values, Sidedness::Single, Normalization::DisplacementPerHz)
}

/// `∫₀^∞ S(Ω) dΩ/2π` for a function peaked at `center` with width `width`.
pub fn integrate_resonant(f: impl Fn(f64) -> f64, center: f64, width: f64, nodes: usize) -> f64 {
    let h = 0.5 * width;
    let phi0 = (-center / h).atan();
    let phi1 = std::f64::consts::FRAC_PI_2;
    let n = nodes.max(3) | 1;
    let step = (phi1 - phi0) / (n - 1) as f64;
    let g = |phi: f64| {
        let c = phi.cos();
        if c <= 0.0 {
            return 0.0;
        }
        let w = center + h * phi.tan();
        f(w) * h / (c * c)
    };
    let mut s = g(phi0) + g(phi1);
    for i in 1..n - 1 {
        s += g(phi0 + i as f64 * step) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * step / 3.0 / std::f64::consts::TAU
}

/// Occupation obtained by integrating the cold-damped displacement spectrum.
pub fn integrated_occupation(
    p: &SystemParams,
    n: &NoiseParams,
    d: &DetectionConfig,
    fb: &FeedbackConfig,
) -> Result<f64> {
    p.validate()?;
    let n_tot = total_occupation(p, n, Default::default());
    let drive = 2.0 * n_tot + 1.0 + 2.0 * n_imp_hom(p, d) * fb.g_fb * fb.g_fb;
    let s_zp = p.s_zp();
    let width = p.gamma_m + fb.gamma_fb(p);
    let var = integrate_resonant(
        |w| chi_eff(w, p, fb).norm_sqr() * drive * s_zp,
        p.omega_m,
        width,
        200_001,
    );
    Ok(0.5 * (var / (p.x_zp * p.x_zp) - 1.0))
}

/// Occupation from the loop equations, `x = H F/(1 + G) − L x_imp`, for any loop model:
/// `∫ (|χ_cl|²(2n_tot + 1) S_zp + |L|² S_imp) dΩ/2π`. Equals [`integrated_occupation`]
/// for an ideal viscous loop.
pub fn closed_loop_occupation(
    p: &SystemParams,
    n: &NoiseParams,
    d: &DetectionConfig,
    fb: &FeedbackConfig,
) -> Result<f64> {
    p.validate()?;
    fb.validate()?;
    check_loop(p, fb)?;
    let n_tot = total_occupation(p, n, Default::default());
    let s_imp = imprecision_psd(p, d);
    let s_zp = p.s_zp();
    let width = loop_damping(p, fb).0;
    let var = integrate_resonant(
        |w| {
            let g = open_loop_gain(w, p, fb);
            let chi_cl = p.omega_m * p.gamma_m * mech(w, p) / (1.0 + g);
            chi_cl.norm_sqr() * (2.0 * n_tot + 1.0) * s_zp + (g / (1.0 + g)).norm_sqr() * s_imp
        },
        p.omega_m,
        width,
        200_001,
    );
    Ok(0.5 * (var / (p.x_zp * p.x_zp) - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InLoopMode {
    /// Imprecision + total motion + the displayed correlation term, taken literally.
    ThreeTerm,
    /// `|1 − L|² S_imp + |χ_cl|²(2n_tot + 1) S_zp` from the loop equations.
    ClosedLoopConsistent,
}

/// In-loop homodyne displacement spectrum, single-sided, `x_zp²/Hz`.
pub fn inloop_spectrum(
    grid: &[f64],
    p: &SystemParams,
    n: &NoiseParams,
    d: &DetectionConfig,
    fb: &FeedbackConfig,
    mode: InLoopMode,
) -> Result<Spectrum> {
    p.validate()?;
    fb.validate()?;
    let n_tot = total_occupation(p, n, Default::default());
    let s_imp = imprecision_psd(p, d);
    let s_zp = p.s_zp();
    let n_imp = n_imp_hom(p, d);
    let values = match mode {
        InLoopMode::ThreeTerm => grid
            .iter()
            .map(|&w| {
                let c2 = chi_eff(w, p, fb).norm_sqr();
                let motion = c2 * (2.0 * n_tot + 1.0 + 2.0 * n_imp * fb.g_fb * fb.g_fb) * s_zp;
                let corr = -c2 * 2.0 * n_imp * fb.g_fb * s_zp;
                s_imp + motion + corr
            })
            .collect(),
        InLoopMode::ClosedLoopConsistent => {
            check_loop(p, fb)?;
            grid.iter()
                .map(|&w| {
                    let one_plus_g = 1.0 + open_loop_gain(w, p, fb);
                    let chi_cl = p.omega_m * p.gamma_m * mech(w, p) / one_plus_g;
                    s_imp / one_plus_g.norm_sqr() + chi_cl.norm_sqr() * (2.0 * n_tot + 1.0) * s_zp
                })
                .collect()
        }
    };
    Spectrum::new(grid.to_vec(), values, Sidedness::Single, Normalization::DisplacementPerHz)
}

/// Resonant in-loop value relative to the imprecision floor (closed-loop-consistent mode).
pub fn squashing_ratio(
    p: &SystemParams,
    n: &NoiseParams,
    d: &DetectionConfig,
    fb: &FeedbackConfig,
) -> Result<f64> {
    let s = inloop_spectrum(&[p.omega_m], p, n, d, fb, InLoopMode::ClosedLoopConsistent)?;
    Ok(s.values[0] / imprecision_psd(p, d))
}

/// Gain above which the resonant in-loop spectrum falls below the imprecision floor,
/// found by bisection in `ln g`.
pub fn squashing_boundary(
    p: &SystemParams,
    n: &NoiseParams,
    d: &DetectionConfig,
    template: &FeedbackConfig,
) -> Result<f64> {
    let g_opt = optimal_gain(p, n, d);
    let at = |g: f64| -> Result<f64> {
        let fb = match template.loop_model {
            LoopModel::IdealViscous => FeedbackConfig::viscous(g),
            LoopModel::DelayedBandlimited { .. } => FeedbackConfig { g_fb: g, ..*template },
        };
        Ok(squashing_ratio(p, n, d, &fb)? - 1.0)
    };
    let (mut lo, mut hi) = ((g_opt * 1e-3).ln(), (g_opt * 1e3).ln());
    if at(lo.exp())? <= 0.0 || at(hi.exp())? >= 0.0 {
        return Err(Error::Numerical("squashing boundary not bracketed".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid.exp())? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccupancyReport {
    pub n_th: f64,
    pub n_ba: f64,
    pub n_tot: f64,
    pub n_fb: f64,
    pub n_imp_hom: f64,
    pub n_imp_het: f64,
    pub n_m: f64,
    pub gamma_fb: f64,
}

pub fn colddamp_occupation(
    p: &SystemParams,
    n: &NoiseParams,
    d: &DetectionConfig,
    fb: &FeedbackConfig,
) -> Result<OccupancyReport> {
    colddamp_occupation_with(p, n, d, fb, &Conventions::default())
}

pub fn colddamp_occupation_with(
    p: &SystemParams,
    n: &NoiseParams,
    d: &DetectionConfig,
    fb: &FeedbackConfig,
    conv: &Conventions,
) -> Result<OccupancyReport> {
    p.validate()?;
    fb.validate()?;
    let n_ba = backaction_occupation(p, n, conv.backaction);
    let n_tot = p.n_th + n_ba;
    let imp = n_imp_hom(p, d);
    Ok(OccupancyReport {
        n_th: p.n_th,
        n_ba,
        n_tot,
        n_fb: fb.g_fb * fb.g_fb * imp,
        n_imp_hom: imp,
        n_imp_het: n_imp_het(p, d),
        n_m: cooled_occupation(n_tot, imp, fb.g_fb, conv.occupancy)?,
        gamma_fb: fb.gamma_fb(p),
    })
}

/// `√(n_tot/n_imp_hom)`.
pub fn optimal_gain(p: &SystemParams, n: &NoiseParams, d: &DetectionConfig) -> f64 {
    (total_occupation(p, n, Default::default()) / n_imp_hom(p, d)).sqrt()
}

/// Golden-section minimisation of `f` over `ln x ∈ [ln a, ln b]`.
pub fn minimize_log(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (a.ln(), b.ln());
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1.exp()), f(x2.exp()));
    while hi - lo > rel_tol {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1.exp());
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2.exp());
        }
    }
    (0.5 * (lo + hi)).exp()
}

/// Gain minimising the occupation, found numerically.
pub fn minimize_occupation(
    p: &SystemParams,
    n: &NoiseParams,
    d: &DetectionConfig,
    model: OccupancyModel,
) -> f64 {
    let n_tot = total_occupation(p, n, Default::default());
    let imp = n_imp_hom(p, d);
    let g0 = (n_tot / imp).sqrt();
    minimize_log(
        |g| cooled_occupation(n_tot, imp, g, model).unwrap_or(f64::INFINITY),
        g0 * 1e-3,
        g0 * 1e3,
        1e-12,
    )
}

/// Both sides of `S_FF · S_xx^imp ≥ ħ²/2 + (2 Re S_F,x_imp)²` in units of ħ².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyProduct {
    pub lhs: f64,
    pub rhs: f64,
}

impl UncertaintyProduct {
    pub fn relative_gap(&self) -> f64 {
        (self.lhs - self.rhs) / self.lhs
    }
}

/// `S_FF` is the thermal plus back-action force, the correlator is that of the
/// feedback force with the in-loop imprecision.
pub fn uncertainty_product(
    p: &SystemParams,
    n: &NoiseParams,
    d: &DetectionConfig,
    fb: &FeedbackConfig,
) -> UncertaintyProduct {
    let n_tot = total_occupation(p, n, Default::default());
    let imp = n_imp_hom(p, d);
    let corr = 4.0 * fb.g_fb * imp;
    UncertaintyProduct {
        lhs: 16.0 * imp * (n_tot + 0.5),
        rhs: 0.5 + corr * corr,
    }
}
