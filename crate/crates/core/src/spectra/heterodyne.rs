use serde::{Deserialize, Serialize};

use super::{
    cooled_occupation, n_imp_hom, Conventions, FeedbackConfig, Normalization, Sidedness, Spectrum,
};
use crate::error::{Error, Result};
use crate::model::{total_occupation, DetectionConfig, NoiseParams, SystemParams};

/// The IF must exceed this multiple of Ωm unless overridden.
pub const DEFAULT_IF_FACTOR: f64 = 10.0;

pub fn check_if(p: &SystemParams, d: &DetectionConfig, factor: f64) -> Result<()> {
    if d.omega_if >= factor * p.omega_m * (1.0 - 1e-12) {
        Ok(())
    } else {
        Err(Error::IfTooLow {
            omega_if: d.omega_if,
            omega_m: p.omega_m,
            factor,
        })
    }
}

/// Phase-noise term `(4ΔΩm/κ²) C_pp` common to both sidebands.
pub fn phase_noise_occupation(p: &SystemParams, n: &NoiseParams) -> f64 {
    4.0 * p.delta * p.omega_m / (p.kappa * p.kappa) * n.c_pp
}

/// Sideband weights in phonons, named by optical frequency.
///
/// The lower (Stokes) sideband carries `n + 1` and appears at IF offset `+Ωm`;
/// the upper (anti-Stokes) sideband carries `n` and appears at `−Ωm`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidebandWeights {
    pub lower: f64,
    pub upper: f64,
}

impl SidebandWeights {
    /// `upper − lower`, equal to `−(α + 2C_qq)`.
    pub fn difference(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn sum(&self) -> f64 {
        self.upper + self.lower
    }

    pub fn ratio(&self) -> f64 {
        self.upper / self.lower
    }
}

/// Occupancy entering the heterodyne sidebands: `n_tot` open loop, `n_m` with feedback.
pub fn motional_occupation(
    p: &SystemParams,
    n: &NoiseParams,
    d: &DetectionConfig,
    fb: Option<&FeedbackConfig>,
    conv: &Conventions,
) -> Result<f64> {
    let n_tot = total_occupation(p, n, conv.backaction);
    match fb {
        Some(fb) if fb.g_fb > 0.0 => {
            cooled_occupation(n_tot, n_imp_hom(p, d), fb.g_fb, conv.occupancy)
        }
        _ => Ok(n_tot),
    }
}

/// Bracketed weights of the heterodyne spectrum for an open-loop oscillator.
pub fn sideband_weights(
    p: &SystemParams,
    n: &NoiseParams,
    _d: &DetectionConfig,
    n_m_override: Option<f64>,
) -> SidebandWeights {
    let n_m = n_m_override
        .unwrap_or_else(|| total_occupation(p, n, Conventions::default().backaction));
    weights_for(n_m, p, n)
}

/// As [`sideband_weights`], with feedback and explicit conventions.
pub fn sideband_weights_with(
    p: &SystemParams,
    n: &NoiseParams,
    d: &DetectionConfig,
    fb: Option<&FeedbackConfig>,
    conv: &Conventions,
) -> Result<SidebandWeights> {
    Ok(weights_for(motional_occupation(p, n, d, fb, conv)?, p, n))
}

fn weights_for(n_m: f64, p: &SystemParams, n: &NoiseParams) -> SidebandWeights {
    let common = n_m + 0.5 * n.beta + phase_noise_occupation(p, n);
    let corr = 0.5 * n.alpha + n.c_qq;
    SidebandWeights {
        lower: common + corr,
        upper: common - corr,
    }
}

/// Spectrum units per phonon of sideband area: `4 C0 n_c η_het · πΓm/2`.
pub fn phonon_area_scale(p: &SystemParams, d: &DetectionConfig) -> f64 {
    4.0 * p.cooperativity() * d.eta_het * std::f64::consts::PI * p.gamma_m / 2.0
}

/// Double-sided heterodyne photocurrent spectrum about the IF, shot-noise units.
pub fn heterodyne_spectrum(
    grid: &[f64],
    p: &SystemParams,
    n: &NoiseParams,
    d: &DetectionConfig,
) -> Result<Spectrum> {
    heterodyne_spectrum_with(grid, p, n, d, None, &Conventions::default())
}

/// Heterodyne spectrum, optionally of a cold-damped oscillator.
///
/// With feedback the sidebands broaden to `Γm(1 + g_fb)` while their phonon-unit
/// areas follow the cooled occupation.
pub fn heterodyne_spectrum_with(
    grid: &[f64],
    p: &SystemParams,
    n: &NoiseParams,
    d: &DetectionConfig,
    fb: Option<&FeedbackConfig>,
    conv: &Conventions,
) -> Result<Spectrum> {
    p.validate()?;
    n.validate()?;
    check_if(p, d, DEFAULT_IF_FACTOR)?;
    let w = sideband_weights_with(p, n, d, fb, conv)?;
    let gamma_eff = p.gamma_m * (1.0 + fb.map_or(0.0, |f| f.g_fb));
    let scale = 4.0 * p.cooperativity() * d.eta_het;
    let h = 0.5 * gamma_eff;
    let lor = |x: f64| p.gamma_m * gamma_eff / 4.0 / (h * h + x * x);
    let values = grid
        .iter()
        .map(|&om| {
            n.alpha + scale * (lor(om + p.omega_m) * w.upper + lor(om - p.omega_m) * w.lower)
        })
        .collect();
    Spectrum::new(grid.to_vec(), values, Sidedness::Double, Normalization::ShotNoise)
}

/// Meter-induced correlation contributions to the (lower, upper) sidebands, in units of
/// the zero-point spectrum: `(η(α/2 + C_qq + n_φ), −η(α/2 + C_qq − n_φ))`.
pub fn heterodyne_correlator(p: &SystemParams, n: &NoiseParams, d: &DetectionConfig) -> (f64, f64) {
    let nphi = phase_noise_occupation(p, n);
    let c = 0.5 * n.alpha + n.c_qq;
    (d.eta_het * (c + nphi), -d.eta_het * (c - nphi))
}

/// `ξ = (1 − R)/(1 + R)`.
pub fn visibility(r: f64) -> f64 {
    (1.0 - r) / (1.0 + r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FloorEstimator {
    /// Least-squares `floor + a/(δ₊² + w₊²/4) + b/(δ₋² + w₋²/4)` over far points, with the
    /// widths from the half-maximum scan; tails beyond the grid added analytically.
    TailFit,
    /// Median of far points.
    Median,
    Fixed(f64),
    /// No subtraction.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaOptions {
    pub floor: FloorEstimator,
    /// Far points sit at least this many linewidths from both sidebands.
    pub min_far_linewidths: f64,
}

impl Default for AreaOptions {
    fn default() -> Self {
        AreaOptions {
            floor: FloorEstimator::TailFit,
            min_far_linewidths: 20.0,
        }
    }
}

/// Integrated sideband areas (spectrum units × rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidebandAreas {
    pub lower: f64,
    pub upper: f64,
    pub floor: f64,
    pub lower_center: f64,
    pub upper_center: f64,
    pub lower_fwhm: f64,
    pub upper_fwhm: f64,
}

impl SidebandAreas {
    pub fn ratio(&self) -> f64 {
        self.upper / self.lower
    }

    pub fn in_phonons(&self, scale: f64) -> SidebandWeights {
        SidebandWeights {
            lower: self.lower / scale,
            upper: self.upper / scale,
        }
    }
}

/// `R = upper/lower` from integrated sideband areas of a double-sided spectrum.
pub fn sideband_ratio(spectrum: &Spectrum, floor_subtraction: bool) -> Result<f64> {
    let opts = AreaOptions {
        floor: if floor_subtraction {
            FloorEstimator::TailFit
        } else {
            FloorEstimator::None
        },
        ..AreaOptions::default()
    };
    Ok(sideband_areas(spectrum, &opts)?.ratio())
}

struct Peak {
    center: f64,
    fwhm: f64,
}

fn locate(x: &[f64], y: &[f64], base: f64) -> Result<Peak> {
    let (imax, ymax) = y
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, (i, v)| if v > a.1 { (i, v) } else { a });
    let half = base + 0.5 * (ymax - base);
    let cross = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = imax;
        for i in range {
            if y[i] < half {
                let t = (y[prev] - half) / (y[prev] - y[i]);
                return Some(x[prev] + t * (x[i] - x[prev]));
            }
            prev = i;
        }
        None
    };
    let left = cross(&mut (0..imax).rev());
    let right = cross(&mut (imax + 1..x.len()));
    match (left, right) {
        (Some(l), Some(r)) => Ok(Peak {
            center: x[imax],
            fwhm: r - l,
        }),
        _ => Err(Error::InsufficientResolution {
            points_per_fwhm: 0.0,
            needed: 2.0,
        }),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Lorentzian tail `a/(δ² + (fwhm/2)²)` with unit `a`.
fn tail(peak: &Peak, x: f64) -> f64 {
    let h = 0.5 * peak.fwhm;
    1.0 / ((x - peak.center).powi(2) + h * h)
}

/// `∫ tail` over `|δ| > dist` on one side.
fn tail_beyond(peak: &Peak, dist: f64) -> f64 {
    let h = 0.5 * peak.fwhm;
    (std::f64::consts::FRAC_PI_2 - (dist / h).atan()) / h
}

/// Floor and tail amplitudes `(f, a_lower, a_upper)`.
fn tail_fit(x: &[f64], y: &[f64], lo: &Peak, up: &Peak) -> Option<(f64, f64, f64)> {
    use nalgebra::{Matrix3, Vector3};
    // columns scaled to O(1) at the nearest far point for conditioning
    let (s_lo, s_up) = (lo.fwhm * lo.fwhm, up.fwhm * up.fwhm);
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    for (&xi, &yi) in x.iter().zip(y) {
        let row = Vector3::new(1.0, s_lo * tail(lo, xi), s_up * tail(up, xi));
        ata += row * row.transpose();
        atb += row * yi;
    }
    let sol = ata.lu().solve(&atb)?;
    Some((sol[0], sol[1] * s_lo, sol[2] * s_up))
}

/// Floor-subtracted sideband areas. The lower sideband is the one at positive offset.
pub fn sideband_areas(spectrum: &Spectrum, opts: &AreaOptions) -> Result<SidebandAreas> {
    let split = spectrum.grid.partition_point(|&w| w < 0.0);
    let (xn, yn) = (&spectrum.grid[..split], &spectrum.values[..split]);
    let first_pos = spectrum.grid.partition_point(|&w| w <= 0.0);
    let (xp, yp) = (&spectrum.grid[first_pos..], &spectrum.values[first_pos..]);
    if xn.len() < 8 || xp.len() < 8 {
        return Err(Error::invalid("grid", "both sideband halves must be sampled"));
    }
    let base_n = yn.iter().copied().fold(f64::INFINITY, f64::min);
    let base_p = yp.iter().copied().fold(f64::INFINITY, f64::min);
    let up = locate(xn, yn, base_n)?;
    let lo = locate(xp, yp, base_p)?;

    let far: Vec<usize> = (0..spectrum.len())
        .filter(|&i| {
            let w = spectrum.grid[i];
            (w - lo.center).abs() >= opts.min_far_linewidths * lo.fwhm
                && (w - up.center).abs() >= opts.min_far_linewidths * up.fwhm
        })
        .collect();
    let far_x: Vec<f64> = far.iter().map(|&i| spectrum.grid[i]).collect();
    let far_y: Vec<f64> = far.iter().map(|&i| spectrum.values[i]).collect();

    let (floor, a_lo, a_up) = match opts.floor {
        FloorEstimator::None => (0.0, 0.0, 0.0),
        FloorEstimator::Fixed(f) => (f, 0.0, 0.0),
        FloorEstimator::Median | FloorEstimator::TailFit if far.len() < 3 => {
            return Err(Error::InsufficientResolution {
                points_per_fwhm: far.len() as f64,
                needed: 3.0,
            })
        }
        FloorEstimator::Median => (median(far_y), 0.0, 0.0),
        FloorEstimator::TailFit => {
            if far.len() >= 6 {
                tail_fit(&far_x, &far_y, &lo, &up).unwrap_or((median(far_y), 0.0, 0.0))
            } else {
                (median(far_y), 0.0, 0.0)
            }
        }
    };

    let area = |x: &[f64], y: &[f64], own: &Peak, a_own: f64, other: &Peak, a_other: f64| {
        let r: Vec<f64> = x
            .iter()
            .zip(y)
            .map(|(&xi, &yi)| yi - floor - a_other * tail(other, xi))
            .collect();
        let inner = super::trapezoid(x, &r);
        let lo_edge = x[0];
        let hi_edge = x[x.len() - 1];
        inner + a_own * (tail_beyond(own, own.center - lo_edge) + tail_beyond(own, hi_edge - own.center))
    };
    let lower = area(xp, yp, &lo, a_lo, &up, a_up);
    let upper = area(xn, yn, &up, a_up, &lo, a_lo);
    if !(lower > 0.0) {
        return Err(Error::FloorExceedsPeak { which: "lower", area: lower });
    }
    if !(upper > 0.0) {
        return Err(Error::FloorExceedsPeak { which: "upper", area: upper });
    }
    Ok(SidebandAreas {
        lower,
        upper,
        floor,
        lower_center: lo.center,
        upper_center: up.center,
        lower_fwhm: lo.fwhm,
        upper_fwhm: up.fwhm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::SidebandGrid;
    use std::f64::consts::TAU;

    fn setup(n_th: f64) -> (SystemParams, NoiseParams, DetectionConfig) {
        let p = SystemParams::from_cooperativity(TAU * 4.3e6, TAU * 7.0, TAU * 1e9, 0.3, 10.0, n_th);
        let d = DetectionConfig {
            eta_hom: 1.0,
            eta_het: 1.0,
            theta: 0.0,
            omega_if: TAU * 43e6,
        };
        (p, NoiseParams::ideal(), d)
    }

    #[test]
    fn quantum_tags_off_gives_symmetric_sidebands() {
        let (p, n, d) = setup(5.0);
        for beta in [0.0, 1.0] {
            let w = sideband_weights(&p, &n.with_tags(0.0, beta), &d, None);
            assert_eq!(w.lower, w.upper);
        }
    }

    #[test]
    fn ground_state_only_scatters_into_lower() {
        let (p, n, d) = setup(0.0);
        let w = sideband_weights(&p, &n, &d, Some(0.0));
        assert_eq!((w.lower, w.upper), (1.0, 0.0));
    }

    #[test]
    fn floor_is_alpha_far_away() {
        let (p, n, d) = setup(3.0);
        let s = heterodyne_spectrum(&[-0.5 * p.omega_m, 0.0, 0.5 * p.omega_m], &p, &n, &d).unwrap();
        for v in s.values {
            assert!((v - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn area_extraction_recovers_weights() {
        let (p, n, d) = setup(6.3);
        let grid = SidebandGrid::new(p.omega_m, p.gamma_m).build();
        let s = heterodyne_spectrum(&grid, &p, &n, &d).unwrap();
        let a = sideband_areas(&s, &AreaOptions::default()).unwrap();
        let w = a.in_phonons(phonon_area_scale(&p, &d));
        let exact = sideband_weights(&p, &n, &d, None);
        assert!((w.lower / exact.lower - 1.0).abs() < 1e-4, "{w:?} {exact:?}");
        assert!((w.upper / exact.upper - 1.0).abs() < 1e-4, "{w:?} {exact:?}");
    }

    #[test]
    fn if_too_low() {
        let (p, n, mut d) = setup(1.0);
        d.omega_if = 5.0 * p.omega_m;
        assert!(matches!(heterodyne_spectrum(&[0.0], &p, &n, &d), Err(Error::IfTooLow { .. })));
    }

    #[test]
    fn visibility_limits() {
        assert_eq!(visibility(1.0), 0.0);
        assert_eq!(visibility(0.0), 1.0);
        assert!((visibility(7.3 / 8.3) - 1.0 / 15.6).abs() < 1e-12);
    }
}
