//! File-driven run configuration.
//!
//! TOML, SI units with explicit suffixes. Frequencies given in Hz (`*_hz`) are
//! converted to angular rates on load; angles are in radians.
//!
//! ```toml
//! seed = 7
//!
//! [system]
//! omega_m_hz = 4.3e6
//! gamma_m_hz = 7.0
//! kappa_hz = 1e9
//! c0 = 0.3            # or g0_hz; if both are given they must agree
//! n_c = 1e4
//! n_tot = 7e4         # or n_th
//!
//! [detection]
//! n_imp_hom = 1.2e-4  # or eta_hom
//! n_imp_het = 2.9e-3  # or eta_het
//! omega_if_hz = 50e6
//!
//! [feedback]
//! g_fb = 100.0
//! loop = "ideal-viscous"   # or "delayed-bandlimited"
//! ```
//!
//! The delayed-bandlimited loop defaults to a single pole at `10 Ωm` and the delay that
//! makes the force at Ωm purely viscous. Both are engineering choices, not measured
//! properties of any particular setup.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimate::{Acquisition, FitOptions};
use crate::model::{backaction_occupation, DetectionConfig, NoiseParams, SystemParams};
use crate::noisebudget::{FrequencyNoiseMeasurement, RinMeasurement, Thresholds};
use crate::oracle::Scheme;
use crate::presets::Setup;
use crate::spectra::{optimal_gain, viscous_delay, Conventions, FeedbackConfig, LoopModel};

/// Smallest accepted grid.
pub const MIN_GRID_POINTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub system: SystemSection,
    #[serde(default)]
    pub noise: NoiseSection,
    pub detection: DetectionSection,
    #[serde(default)]
    pub feedback: FeedbackSection,
    #[serde(default)]
    pub conventions: Conventions,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub trajectory: TrajectorySection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_budget: Option<NoiseBudgetSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub omega_m_hz: f64,
    pub gamma_m_hz: f64,
    pub kappa_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g0_hz: Option<f64>,
    pub n_c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_th: Option<f64>,
    /// Alternative to `n_th`: thermal plus back-action occupation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_tot: Option<f64>,
    #[serde(default)]
    pub delta_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_zp_m: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub c_qq: f64,
    pub c_pp: f64,
    pub c_qp: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        let n = NoiseParams::ideal();
        NoiseSection { c_qq: n.c_qq, c_pp: n.c_pp, c_qp: n.c_qp, alpha: n.alpha, beta: n.beta }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_hom: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_imp_hom: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_het: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_imp_het: Option<f64>,
    #[serde(default = "half_pi")]
    pub theta_rad: f64,
    pub omega_if_hz: f64,
}

fn half_pi() -> f64 {
    std::f64::consts::FRAC_PI_2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoopKind {
    #[default]
    IdealViscous,
    DelayedBandlimited,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackSection {
    #[serde(default)]
    pub g_fb: f64,
    #[serde(default, rename = "loop")]
    pub loop_kind: LoopKind,
    /// Delayed loop only; defaults to the viscous delay.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_s: Option<f64>,
    /// Delayed loop only; defaults to `10 Ωm`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_hz: Option<f64>,
}

/// Two windows at `±center` for heterodyne, one at `+center` for homodyne.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Defaults to Ωm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_hz: Option<f64>,
    /// Defaults to 40 (closed-loop) linewidths.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span_hz: Option<f64>,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_points() -> usize {
    2001
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { center_hz: None, span_hz: None, points: default_points() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    #[default]
    ClosedForm,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Defaults to `g_opt/1000`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_min: Option<f64>,
    /// Defaults to `10 g_opt`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_max: Option<f64>,
    #[serde(default = "default_gains")]
    pub points: usize,
    #[serde(default)]
    pub mode: SweepMode,
    #[serde(default)]
    pub acquisition: AcquisitionSection,
    #[serde(default)]
    pub shared_floor: bool,
    #[serde(default = "yes")]
    pub shared_width: bool,
}

fn yes() -> bool {
    true
}

fn default_gains() -> usize {
    20
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            g_min: None,
            g_max: None,
            points: default_gains(),
            mode: SweepMode::default(),
            acquisition: AcquisitionSection::default(),
            shared_floor: false,
            shared_width: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcquisitionSection {
    pub duration_s: f64,
    pub rbw_hz: f64,
    pub span_fwhm: f64,
}

impl Default for AcquisitionSection {
    fn default() -> Self {
        let a = Acquisition::default();
        AcquisitionSection { duration_s: a.duration, rbw_hz: a.rbw, span_fwhm: a.span_fwhm }
    }
}

impl AcquisitionSection {
    pub fn to_acquisition(&self) -> Acquisition {
        Acquisition { duration: self.duration_s, rbw: self.rbw_hz, span_fwhm: self.span_fwhm }
    }
}

/// Time-domain oracle settings. Unset times scale with the closed-loop decay time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySection {
    /// Gain simulated by `oracle-check`; defaults to `feedback.g_fb`, or `g_opt` if that is 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_fb: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in_s: Option<f64>,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
}

fn default_seeds() -> usize {
    8
}

impl Default for TrajectorySection {
    fn default() -> Self {
        TrajectorySection {
            g_fb: None,
            dt_s: None,
            duration_s: None,
            burn_in_s: None,
            scheme: Scheme::default(),
            seeds: default_seeds(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseBudgetSection {
    /// TOML file with `[rin]` and `[frequency_noise]` tables, relative to the config.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rin: Option<RinSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency_noise: Option<FrequencyNoiseSection>,
    #[serde(default)]
    pub c_qp: f64,
    #[serde(default)]
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RinSection {
    pub mean_power_w: f64,
    pub wavelength_m: f64,
    /// Single-sided relative intensity noise at Ωm, 1/Hz.
    pub rin_per_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyNoiseSection {
    /// Excess laser frequency noise at Ωm, Hz²/Hz.
    pub excess_hz2_per_hz: f64,
    pub signal_photon_flux_per_s: f64,
    /// Mean detuning over κ.
    pub mean_detuning_fraction: f64,
    /// Standard deviation of slow detuning jitter.
    #[serde(default)]
    pub detuning_sd_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementFile {
    pub rin: RinSection,
    pub frequency_noise: FrequencyNoiseSection,
}

impl RinSection {
    pub fn to_measurement(&self) -> RinMeasurement {
        RinMeasurement {
            mean_power: self.mean_power_w,
            wavelength: self.wavelength_m,
            rin_psd_at_omega_m: self.rin_per_hz,
        }
    }
}

impl FrequencyNoiseSection {
    pub fn to_measurement(&self) -> FrequencyNoiseMeasurement {
        FrequencyNoiseMeasurement {
            s_omega_excess_at_omega_m: TAU * TAU * self.excess_hz2_per_hz,
            signal_photon_flux: self.signal_photon_flux_per_s,
            mean_detuning_fraction: self.mean_detuning_fraction,
            detuning_variance: (TAU * self.detuning_sd_hz).powi(2),
        }
    }
}

/// Prefixes the field of a validation error with its section.
fn within(section: &str, e: Error) -> Error {
    match e {
        Error::InvalidParams { field, reason } => Error::InvalidParams {
            field: format!("{section}.{field}"),
            reason,
        },
        other => other,
    }
}

fn positive(field: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::invalid(field, format!("must be finite and > 0, got {v}")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.setup()?;
        cfg.check_sections()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Resolves units and alternatives into validated model parameters.
    pub fn setup(&self) -> Result<Setup> {
        let s = &self.system;
        let omega_m = TAU * positive("system.omega_m_hz", s.omega_m_hz)?;
        let gamma_m = TAU * positive("system.gamma_m_hz", s.gamma_m_hz)?;
        let kappa = TAU * positive("system.kappa_hz", s.kappa_hz)?;
        let g0 = match (s.c0, s.g0_hz) {
            (None, None) => return Err(Error::invalid("system.c0", "give c0 or g0_hz")),
            (Some(c0), None) => (c0 * kappa * gamma_m / 4.0).sqrt(),
            (None, Some(g)) => TAU * g,
            (Some(c0), Some(g)) => {
                let g0 = TAU * g;
                let implied = 4.0 * g0 * g0 / (kappa * gamma_m);
                if !((implied - c0).abs() <= 1e-6 * c0.abs().max(implied.abs())) {
                    return Err(Error::invalid(
                        "system.c0",
                        format!("c0 = {c0} disagrees with g0_hz, which implies {implied:.6e}"),
                    ));
                }
                g0
            }
        };
        if !(g0 >= 0.0) {
            return Err(Error::invalid("system.c0", "must be >= 0"));
        }
        let mut system = SystemParams {
            omega_m,
            gamma_m,
            kappa,
            g0,
            delta: TAU * s.delta_hz,
            n_c: s.n_c,
            n_th: 0.0,
            x_zp: s.x_zp_m.unwrap_or(1.0),
        };
        let nz = &self.noise;
        let noise = NoiseParams { c_qq: nz.c_qq, c_pp: nz.c_pp, c_qp: nz.c_qp, alpha: nz.alpha, beta: nz.beta };
        noise.validate().map_err(|e| within("noise", e))?;
        system.n_th = match (s.n_th, s.n_tot) {
            (Some(n), None) => n,
            (None, Some(n_tot)) => {
                let n_th = n_tot - backaction_occupation(&system, &noise, self.conventions.backaction);
                if !(n_th >= 0.0) {
                    return Err(Error::invalid("system.n_tot", "smaller than the back-action occupation"));
                }
                n_th
            }
            _ => return Err(Error::invalid("system.n_th", "give exactly one of n_th and n_tot")),
        };
        system.validate().map_err(|e| within("system", e))?;

        let d = &self.detection;
        let cn = system.cooperativity();
        let eta = |field: &str, eta: Option<f64>, n_imp: Option<f64>, k: f64| -> Result<f64> {
            match (eta, n_imp) {
                (Some(e), None) => Ok(e),
                (None, Some(n)) => Ok(1.0 / (k * cn * positive(&format!("detection.n_imp_{field}"), n)?)),
                _ => Err(Error::invalid(
                    format!("detection.eta_{field}"),
                    format!("give exactly one of eta_{field} and n_imp_{field}"),
                )),
            }
        };
        let detection = DetectionConfig {
            eta_hom: eta("hom", d.eta_hom, d.n_imp_hom, 16.0)?,
            eta_het: eta("het", d.eta_het, d.n_imp_het, 4.0)?,
            theta: d.theta_rad,
            omega_if: TAU * d.omega_if_hz,
        };
        detection.validate(&system).map_err(|e| within("detection", e))?;

        let f = &self.feedback;
        let loop_model = match f.loop_kind {
            LoopKind::IdealViscous => {
                if f.delay_s.is_some() || f.bandwidth_hz.is_some() {
                    return Err(Error::invalid("feedback.loop", "delay_s/bandwidth_hz need loop = \"delayed-bandlimited\""));
                }
                LoopModel::IdealViscous
            }
            LoopKind::DelayedBandlimited => {
                let bandwidth = f.bandwidth_hz.map_or(10.0 * omega_m, |b| TAU * b);
                LoopModel::DelayedBandlimited {
                    delay: f.delay_s.unwrap_or_else(|| viscous_delay(omega_m, bandwidth)),
                    bandwidth,
                }
            }
        };
        let feedback = FeedbackConfig { g_fb: f.g_fb, loop_model };
        feedback.validate().map_err(|e| within("feedback", e))?;
        Ok(Setup { system, noise, detection, feedback, conventions: self.conventions })
    }

    fn check_sections(&self) -> Result<()> {
        if self.grid.points < MIN_GRID_POINTS {
            return Err(Error::invalid("grid.points", format!("must be >= {MIN_GRID_POINTS}")));
        }
        if let Some(c) = self.grid.center_hz {
            positive("grid.center_hz", c)?;
        }
        if let Some(s) = self.grid.span_hz {
            positive("grid.span_hz", s)?;
        }
        if self.sweep.points == 0 {
            return Err(Error::invalid("sweep.points", "must be >= 1"));
        }
        for (name, v) in [("sweep.g_min", self.sweep.g_min), ("sweep.g_max", self.sweep.g_max)] {
            if let Some(v) = v {
                positive(name, v)?;
            }
        }
        if let (Some(a), Some(b)) = (self.sweep.g_min, self.sweep.g_max) {
            if b < a {
                return Err(Error::invalid("sweep.g_max", "must be >= g_min"));
            }
        }
        self.sweep
            .acquisition
            .to_acquisition()
            .validate()
            .map_err(|e| within("sweep", e))?;
        let t = &self.trajectory;
        for (name, v) in [
            ("trajectory.dt_s", t.dt_s),
            ("trajectory.duration_s", t.duration_s),
            ("trajectory.g_fb", t.g_fb),
        ] {
            if let Some(v) = v {
                positive(name, v)?;
            }
        }
        if t.seeds == 0 {
            return Err(Error::invalid("trajectory.seeds", "must be >= 1"));
        }
        Ok(())
    }

    /// Log-spaced gains of the sweep.
    pub fn gains(&self) -> Result<Vec<f64>> {
        let s = self.setup()?;
        let g_opt = optimal_gain(&s.system, &s.noise, &s.detection);
        let lo = self.sweep.g_min.unwrap_or(g_opt * 1e-3);
        let hi = self.sweep.g_max.unwrap_or(g_opt * 10.0);
        if !(lo > 0.0 && hi.is_finite()) {
            return Err(Error::invalid("sweep.g_min", "gain range undefined (set g_min and g_max)"));
        }
        if self.sweep.points == 1 {
            return Ok(vec![lo]);
        }
        Ok(crate::spectra::logspace(lo, hi, self.sweep.points))
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            shared_floor: self.sweep.shared_floor,
            shared_width: self.sweep.shared_width,
            ..FitOptions::default()
        }
    }

    /// Inline measurements, or the referenced measurement file resolved against `base`.
    pub fn measurements(&self, base: Option<&Path>) -> Result<(RinMeasurement, FrequencyNoiseMeasurement)> {
        let nb = self
            .noise_budget
            .as_ref()
            .ok_or_else(|| Error::Config("missing [noise_budget] section".into()))?;
        match (&nb.measurement_file, nb.rin, nb.frequency_noise) {
            (Some(file), None, None) => {
                let path: PathBuf = match base {
                    Some(b) => b.join(file),
                    None => PathBuf::from(file),
                };
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                let m: MeasurementFile = toml::from_str(&text)
                    .map_err(|e| Error::Config(format!("malformed measurement file {}: {e}", path.display())))?;
                Ok((m.rin.to_measurement(), m.frequency_noise.to_measurement()))
            }
            (None, Some(r), Some(f)) => Ok((r.to_measurement(), f.to_measurement())),
            _ => Err(Error::invalid(
                "noise_budget",
                "give either measurement_file or both [noise_budget.rin] and [noise_budget.frequency_noise]",
            )),
        }
    }
}

/// The efficient-feedback operating point as a config (feedback off).
pub fn fig2_config() -> RunConfig {
    RunConfig {
        seed: 0,
        system: SystemSection {
            omega_m_hz: 4.3e6,
            gamma_m_hz: 7.0,
            kappa_hz: 1e9,
            c0: Some(0.3),
            g0_hz: None,
            n_c: 1e4,
            n_th: None,
            n_tot: Some(7e4),
            delta_hz: 0.0,
            x_zp_m: None,
        },
        noise: NoiseSection::default(),
        detection: DetectionSection {
            eta_hom: None,
            n_imp_hom: Some(1.2e-4),
            eta_het: None,
            n_imp_het: Some(2.9e-3),
            theta_rad: half_pi(),
            omega_if_hz: 50e6,
        },
        feedback: FeedbackSection::default(),
        conventions: Conventions::default(),
        grid: GridSection::default(),
        sweep: SweepSection::default(),
        trajectory: TrajectorySection::default(),
        noise_budget: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig2_matches_preset() {
        let s = fig2_config().setup().unwrap();
        let p = crate::presets::fig2();
        assert!((s.system.g0 / p.system.g0 - 1.0).abs() < 1e-12);
        assert!((s.system.n_th / p.system.n_th - 1.0).abs() < 1e-12);
        assert!((s.detection.eta_hom / p.detection.eta_hom - 1.0).abs() < 1e-12);
        assert!((s.detection.eta_het / p.detection.eta_het - 1.0).abs() < 1e-12);
    }

    #[test]
    fn round_trip() {
        let c = fig2_config();
        let text = c.to_toml().unwrap();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash().unwrap(), c.hash().unwrap());
    }

    #[test]
    fn inconsistent_coupling() {
        let mut c = fig2_config();
        c.system.g0_hz = Some(1.0);
        let e = c.setup().unwrap_err();
        assert!(matches!(e, Error::InvalidParams { ref field, .. } if field == "system.c0"), "{e}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn small_grid_rejected() {
        let mut text = fig2_config().to_toml().unwrap();
        text = text.replace("points = 2001", "points = 10");
        assert!(RunConfig::from_toml(&text).is_err());
    }
}
