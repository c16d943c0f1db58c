//! Experiment-style analysis: synthetic acquisitions, sideband fits, occupancy
//! extraction and gain sweeps.

mod fit;
mod lm;
mod synth;

pub use fit::*;
pub use lm::*;
pub use synth::*;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::total_occupation;
use crate::presets::Setup;
use crate::spectra::{
    cooled_occupation, heterodyne_spectrum_with, n_imp_hom, phonon_area_scale, sideband_weights_with,
    FeedbackConfig, OccupancyModel,
};

/// `R`, both occupancy estimates and their 1σ errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub r: f64,
    pub dr: f64,
    /// `R/(1 − R)`; `+∞` when `R ≥ 1`, in which case only a lower bound is known.
    pub n_m_from_r: f64,
    pub dn_m_from_r: f64,
    /// Lower-sideband area in phonons minus one.
    pub n_m_from_area: f64,
    pub dn_m_from_area: f64,
    /// `R ≥ 1` was measured. Kept, never clamped.
    pub r_above_one: bool,
}

/// From areas already in phonon units, with their variances and covariance.
pub fn extract_from_areas(lower: f64, upper: f64, var_lower: f64, var_upper: f64, cov: f64) -> Extraction {
    let r = upper / lower;
    // first-order propagation of R = U/L
    let var_r = r * r * (var_upper / (upper * upper) + var_lower / (lower * lower) - 2.0 * cov / (upper * lower));
    let dr = var_r.max(0.0).sqrt();
    let (n_r, dn_r) = if r < 1.0 {
        (r / (1.0 - r), dr / (1.0 - r).powi(2))
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    Extraction {
        r,
        dr,
        n_m_from_r: n_r,
        dn_m_from_r: dn_r,
        n_m_from_area: lower - 1.0,
        dn_m_from_area: var_lower.max(0.0).sqrt(),
        r_above_one: r >= 1.0,
    }
}

/// `R = upper.area/lower.area` and occupancies; `scale` converts areas to phonons
/// (see [`phonon_area_scale`]).
pub fn extract_r_nm(lower: &SidebandFit, upper: &SidebandFit, scale: f64) -> Extraction {
    extract_with_cross(lower, upper, 0.0, scale)
}

fn extract_with_cross(lower: &SidebandFit, upper: &SidebandFit, cross: f64, scale: f64) -> Extraction {
    let s2 = scale * scale;
    extract_from_areas(
        lower.area / scale,
        upper.area / scale,
        lower.covariance[2][2] / s2,
        upper.covariance[2][2] / s2,
        cross / s2,
    )
}

impl SidebandFitPair {
    pub fn extract(&self, scale: f64) -> Extraction {
        extract_with_cross(&self.lower, &self.upper, self.area_cross_covariance, scale)
    }
}

/// Scatter of `R` over repeated acquisitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub count: usize,
    pub mean_r: f64,
    /// Sample standard deviation of `R`.
    pub std_r: f64,
    /// Mean of the per-fit errors.
    pub mean_fit_err: f64,
    /// Equal-weight quadrature sum of the two.
    pub combined: f64,
}

pub fn statistical_r_spread(fits: &[Extraction]) -> Spread {
    let n = fits.len();
    if n == 0 {
        return Spread { count: 0, mean_r: f64::NAN, std_r: f64::NAN, mean_fit_err: f64::NAN, combined: f64::NAN };
    }
    let mean = fits.iter().map(|f| f.r).sum::<f64>() / n as f64;
    let var = if n > 1 {
        fits.iter().map(|f| (f.r - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let fit_err = fits.iter().map(|f| f.dr).sum::<f64>() / n as f64;
    Spread {
        count: n,
        mean_r: mean,
        std_r: var.sqrt(),
        mean_fit_err: fit_err,
        combined: (var + fit_err * fit_err).sqrt(),
    }
}

/// Where the spectra of a sweep come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum PipelineMode {
    /// Exact sideband weights, no noise, no fit.
    ClosedForm,
    /// Closed-form spectrum, periodogram noise, Lorentzian fit.
    Synthetic { acquisition: Acquisition, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pipeline {
    pub setup: Setup,
    pub mode: PipelineMode,
    pub fit: FitOptions,
}

impl Pipeline {
    pub fn closed_form(setup: Setup) -> Self {
        Pipeline { setup, mode: PipelineMode::ClosedForm, fit: Self::default_fit() }
    }

    pub fn synthetic(setup: Setup, acquisition: Acquisition, seed: u64) -> Self {
        Pipeline { setup, mode: PipelineMode::Synthetic { acquisition, seed }, fit: Self::default_fit() }
    }

    /// Both sidebands carry the closed-loop linewidth, so sweeps fit one shared width.
    pub fn default_fit() -> FitOptions {
        FitOptions { shared_width: true, ..FitOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoolingCurvePoint {
    pub g_fb: f64,
    /// rad/s.
    pub gamma_fb: f64,
    pub r: f64,
    pub dr: f64,
    pub n_m_from_r: f64,
    pub dn_m_from_r: f64,
    pub n_m_from_area: f64,
    pub dn_m_from_area: f64,
    /// `n_tot/g + g n_imp − 1/2`.
    pub n_m_high_gain: f64,
    /// `(n_tot + 1/2 + g² n_imp)/(1 + g) − 1/2`.
    pub n_m_closed_loop: f64,
    /// `ok`, `r-above-one`, or the error that stopped this point.
    pub status: String,
}

impl CoolingCurvePoint {
    pub fn is_ok(&self) -> bool {
        self.status == "ok" || self.status == "r-above-one"
    }
}

/// The acquisition actually used at a given linewidth: the RBW is narrowed to keep at
/// least 20 bins per FWHM (the averaging time stays fixed).
pub fn adapted_acquisition(acq: &Acquisition, fwhm: f64) -> Acquisition {
    let max_rbw = fwhm / (std::f64::consts::TAU * 20.0);
    Acquisition { rbw: acq.rbw.min(max_rbw), ..*acq }
}

fn run_point(index: usize, g: f64, pipe: &Pipeline) -> Result<Extraction> {
    let s = &pipe.setup;
    let (p, n, d, conv) = (&s.system, &s.noise, &s.detection, &s.conventions);
    let fb = FeedbackConfig { g_fb: g, ..s.feedback };
    match pipe.mode {
        PipelineMode::ClosedForm => {
            let w = sideband_weights_with(p, n, d, Some(&fb), conv)?;
            Ok(extract_from_areas(w.lower, w.upper, 0.0, 0.0, 0.0))
        }
        PipelineMode::Synthetic { acquisition, seed } => {
            let fwhm = p.gamma_m * (1.0 + g);
            let acq = adapted_acquisition(&acquisition, fwhm);
            acq.validate()?;
            let grid = acq.grid(p.omega_m, fwhm);
            let clean = heterodyne_spectrum_with(&grid, p, n, d, Some(&fb), conv)?;
            let noisy = synthesize(&clean, acq.averages(), seed, index as u64)?;
            let opts = FitOptions { averages: Some(acq.averages()), ..pipe.fit };
            let pair = fit_sidebands(&noisy, None, &opts)?;
            Ok(pair.extract(phonon_area_scale(p, d)))
        }
    }
}

/// One point per gain, evaluated in parallel. Failures are recorded per point.
pub fn cooling_curve(gains: &[f64], pipe: &Pipeline) -> Vec<CoolingCurvePoint> {
    let s = &pipe.setup;
    let n_tot = total_occupation(&s.system, &s.noise, s.conventions.backaction);
    let imp = n_imp_hom(&s.system, &s.detection);
    gains
        .par_iter()
        .enumerate()
        .map(|(i, &g)| {
            let high = cooled_occupation(n_tot, imp, g, OccupancyModel::HighGain).unwrap_or(f64::NAN);
            let closed = cooled_occupation(n_tot, imp, g, OccupancyModel::ClosedLoop).unwrap_or(f64::NAN);
            let base = CoolingCurvePoint {
                g_fb: g,
                gamma_fb: g * s.system.gamma_m,
                r: f64::NAN,
                dr: f64::NAN,
                n_m_from_r: f64::NAN,
                dn_m_from_r: f64::NAN,
                n_m_from_area: f64::NAN,
                dn_m_from_area: f64::NAN,
                n_m_high_gain: high,
                n_m_closed_loop: closed,
                status: String::new(),
            };
            match run_point(i, g, pipe) {
                Ok(e) => CoolingCurvePoint {
                    r: e.r,
                    dr: e.dr,
                    n_m_from_r: e.n_m_from_r,
                    dn_m_from_r: e.dn_m_from_r,
                    n_m_from_area: e.n_m_from_area,
                    dn_m_from_area: e.dn_m_from_area,
                    status: if e.r_above_one { "r-above-one".into() } else { "ok".into() },
                    ..base
                },
                Err(err) => CoolingCurvePoint { status: format!("error: {err}"), ..base },
            }
        })
        .collect()
}
