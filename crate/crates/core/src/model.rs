//! Plant parameters and frequency-domain response functions.
//!
//! Conventions: Fourier transforms use `x[Ω] = ∫ x(t) e^{iΩt} dt`, all rates are
//! angular (rad/s), and `χ*[−Ω]` means the complex conjugate of `χ` evaluated at `−Ω`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Mechanical, optical and coupling constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub omega_m: f64,
    pub gamma_m: f64,
    pub kappa: f64,
    pub g0: f64,
    /// Mean laser-cavity detuning Δ.
    pub delta: f64,
    pub n_c: f64,
    pub n_th: f64,
    #[serde(default = "one")]
    pub x_zp: f64,
}

fn one() -> f64 {
    1.0
}

impl SystemParams {
    /// Builds parameters from a single-photon cooperativity instead of `g0`.
    pub fn from_cooperativity(
        omega_m: f64,
        gamma_m: f64,
        kappa: f64,
        c0: f64,
        n_c: f64,
        n_th: f64,
    ) -> Self {
        SystemParams {
            omega_m,
            gamma_m,
            kappa,
            g0: (c0 * kappa * gamma_m / 4.0).sqrt(),
            delta: 0.0,
            n_c,
            n_th,
            x_zp: 1.0,
        }
    }

    /// Single-photon cooperativity `4 g0² / (κ Γm)`.
    pub fn c0(&self) -> f64 {
        4.0 * self.g0 * self.g0 / (self.kappa * self.gamma_m)
    }

    /// Multi-photon cooperativity `C0 n_c`.
    pub fn cooperativity(&self) -> f64 {
        self.c0() * self.n_c
    }

    /// Dressed coupling `g = g0 √n_c` (taken real).
    pub fn coupling(&self) -> f64 {
        self.g0 * self.n_c.sqrt()
    }

    /// Single-sided zero-point displacement PSD on resonance, `4 x_zp² / Γm`.
    pub fn s_zp(&self) -> f64 {
        4.0 * self.x_zp * self.x_zp / self.gamma_m
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("omega_m", self.omega_m),
            ("gamma_m", self.gamma_m),
            ("kappa", self.kappa),
            ("g0", self.g0),
            ("n_c", self.n_c),
            ("n_th", self.n_th),
            ("x_zp", self.x_zp),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !self.delta.is_finite() {
            return Err(Error::invalid("delta", "must be finite"));
        }
        if self.gamma_m <= 0.0 {
            return Err(Error::invalid("gamma_m", "must be > 0"));
        }
        if self.kappa <= 0.0 {
            return Err(Error::invalid("kappa", "must be > 0"));
        }
        if self.gamma_m >= self.omega_m {
            return Err(Error::invalid("gamma_m", "high-Q oscillator required (gamma_m < omega_m)"));
        }
        Ok(())
    }
}

/// Excess classical noise of the meter field and the commutator tags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub c_qq: f64,
    pub c_pp: f64,
    pub c_qp: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self::ideal()
    }
}

impl NoiseParams {
    /// Vacuum input, quantum commutators on.
    pub fn ideal() -> Self {
        NoiseParams {
            c_qq: 0.0,
            c_pp: 0.0,
            c_qp: 0.0,
            alpha: 1.0,
            beta: 1.0,
        }
    }

    pub fn with_tags(mut self, alpha: f64, beta: f64) -> Self {
        self.alpha = alpha;
        self.beta = beta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if v != 0.0 && v != 1.0 {
                return Err(Error::invalid(name, format!("tag must be 0 or 1, got {v}")));
            }
        }
        for (name, v) in [("c_qq", self.c_qq), ("c_pp", self.c_pp)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !self.c_qp.is_finite() {
            return Err(Error::invalid("c_qp", "must be finite"));
        }
        if self.alpha == 1.0 {
            let v = crate::noisebudget::covariance_valid(self);
            if !v.valid {
                return Err(Error::invalid(
                    "c_qp",
                    format!("input covariance is not a valid quantum state ({})", v.witness),
                ));
            }
        }
        Ok(())
    }
}

/// Detector efficiencies, homodyne angle and heterodyne IF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub eta_hom: f64,
    pub eta_het: f64,
    pub theta: f64,
    pub omega_if: f64,
}

impl DetectionConfig {
    pub fn validate(&self, p: &SystemParams) -> Result<()> {
        for (name, v) in [("eta_hom", self.eta_hom), ("eta_het", self.eta_het)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(name, format!("efficiency must lie in [0, 1], got {v}")));
            }
        }
        if !self.theta.is_finite() {
            return Err(Error::invalid("theta", "must be finite"));
        }
        if !(self.omega_if > p.omega_m) {
            return Err(Error::IfTooLow {
                omega_if: self.omega_if,
                omega_m: p.omega_m,
                factor: 1.0,
            });
        }
        Ok(())
    }
}

/// How the measurement back-action occupation is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackActionModel {
    /// `C0 n_c (α + 2C_qq + 2(2Δ/κ)² C_pp)`, the value the full linear model produces.
    #[default]
    Exact,
    /// `C0 n_c (α/2 + C_qq + (4ΔΩm/κ²)² C_pp)`, the half-weight expanded form.
    Expanded,
}

/// Measurement back-action heating in phonons.
pub fn backaction_occupation(p: &SystemParams, n: &NoiseParams, model: BackActionModel) -> f64 {
    let cn = p.cooperativity();
    match model {
        BackActionModel::Exact => {
            let r = 2.0 * p.delta / p.kappa;
            cn * (n.alpha + 2.0 * n.c_qq + 2.0 * r * r * n.c_pp)
        }
        BackActionModel::Expanded => {
            let r = 4.0 * p.delta * p.omega_m / (p.kappa * p.kappa);
            cn * (0.5 * n.alpha + n.c_qq + r * r * n.c_pp)
        }
    }
}

/// Total bath occupation `n_th + n_ba`.
pub fn total_occupation(p: &SystemParams, n: &NoiseParams, model: BackActionModel) -> f64 {
    p.n_th + backaction_occupation(p, n, model)
}

/// Bare mechanical susceptibility `[Γm/2 − i(Ω − Ωm)]⁻¹`.
pub fn chi_m(omega: f64, p: &SystemParams) -> C64 {
    C64::new(0.5 * p.gamma_m, -(omega - p.omega_m)).inv()
}

/// Bare cavity susceptibility `[κ/2 − i(Ω + Δ)]⁻¹`.
pub fn chi_c(omega: f64, p: &SystemParams) -> C64 {
    C64::new(0.5 * p.kappa, -(omega + p.delta)).inv()
}

/// Mechanical self-energy `Σ[Ω] = −i|g|²(χc[Ω] − χc*[−Ω])`.
pub fn self_energy(omega: f64, p: &SystemParams) -> C64 {
    let g2 = p.g0 * p.g0 * p.n_c;
    -I * g2 * (chi_c(omega, p) - chi_c(-omega, p).conj())
}

/// `𝒩[Ω] = χm⁻¹[Ω] χm*⁻¹[−Ω] + 2Ωm Σ[Ω]`.
pub fn dressing(omega: f64, p: &SystemParams) -> C64 {
    let inv_m = C64::new(0.5 * p.gamma_m, -(omega - p.omega_m));
    let inv_m_mirror = C64::new(0.5 * p.gamma_m, -(omega + p.omega_m));
    inv_m * inv_m_mirror + 2.0 * p.omega_m * self_energy(omega, p)
}

/// Optical spring shift and optical damping at Ωm: `(Re Σ, −2 Im Σ)`.
pub fn dynamical_backaction(p: &SystemParams) -> (f64, f64) {
    let s = self_energy(p.omega_m, p);
    (s.re, -2.0 * s.im)
}

/// Thresholds for the weak-coupling, bad-cavity approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub max_omega_m_over_kappa: f64,
    pub max_delta_over_kappa: f64,
    pub max_g_over_kappa: f64,
}

impl Default for Regime {
    fn default() -> Self {
        Regime {
            max_omega_m_over_kappa: 0.1,
            max_delta_over_kappa: 0.1,
            max_g_over_kappa: 0.1,
        }
    }
}

impl Regime {
    /// Everything is allowed.
    pub fn unchecked() -> Self {
        Regime {
            max_omega_m_over_kappa: f64::INFINITY,
            max_delta_over_kappa: f64::INFINITY,
            max_g_over_kappa: f64::INFINITY,
        }
    }

    pub fn check(&self, p: &SystemParams) -> Result<()> {
        let checks = [
            ("omega_m/kappa", p.omega_m / p.kappa, self.max_omega_m_over_kappa),
            ("|delta|/kappa", p.delta.abs() / p.kappa, self.max_delta_over_kappa),
            ("|g|/kappa", p.coupling() / p.kappa, self.max_g_over_kappa),
        ];
        for (quantity, ratio, limit) in checks {
            if ratio > limit {
                return Err(Error::ApproxOutOfRegime { quantity, ratio, limit });
            }
        }
        Ok(())
    }
}

/// Small parameter of the closed forms, `Ωm/κ + |Δ|/κ + |g|/κ`.
pub fn approximation_scale(p: &SystemParams) -> f64 {
    (p.omega_m + p.delta.abs() + p.coupling()) / p.kappa
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientMode {
    Exact,
    Approx,
}

/// Coefficients of `δa_out[Ω]` on `(δa_in, δa_in†, δb_in, δb_in†)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
}

impl Coefficients {
    pub fn as_array(&self) -> [C64; 4] {
        [self.a, self.b, self.c, self.d]
    }
}

/// Unapproximated output coefficients.
pub fn exact_coefficients(omega: f64, p: &SystemParams) -> Coefficients {
    let g = p.coupling();
    let g2 = g * g;
    let k = p.kappa;
    let cc = chi_c(omega, p);
    let cc_mirror = chi_c(-omega, p).conj();
    let nn = dressing(omega, p);
    let inv_m = C64::new(0.5 * p.gamma_m, -(omega - p.omega_m));
    let inv_m_mirror = C64::new(0.5 * p.gamma_m, -(omega + p.omega_m));
    let mech = -I * g * (k * p.gamma_m).sqrt() * cc / nn;
    Coefficients {
        a: 1.0 - k * cc - 2.0 * I * g2 * k * p.omega_m * cc * cc / nn,
        b: -2.0 * I * g2 * k * p.omega_m * cc * cc_mirror / nn,
        c: mech * inv_m_mirror,
        d: mech * inv_m,
    }
}

/// Bad-cavity, weak-coupling forms of the output coefficients.
pub fn approx_coefficients(omega: f64, p: &SystemParams) -> Coefficients {
    let cn = p.cooperativity();
    let nn = dressing(omega, p);
    let det = C64::new(1.0, 2.0 * p.delta / p.kappa);
    let corr = 2.0 * I * cn * p.omega_m * p.gamma_m / nn;
    let amp = -I * cn.sqrt() * det * p.gamma_m;
    Coefficients {
        a: -C64::new(1.0, 4.0 * p.delta / p.kappa) * (1.0 + corr),
        b: -corr,
        c: amp * chi_m(omega, p),
        d: amp * chi_m(-omega, p).conj(),
    }
}

pub fn output_coefficients(
    omega: f64,
    p: &SystemParams,
    mode: CoefficientMode,
    regime: &Regime,
) -> Result<Coefficients> {
    match mode {
        CoefficientMode::Exact => Ok(exact_coefficients(omega, p)),
        CoefficientMode::Approx => {
            regime.check(p)?;
            Ok(approx_coefficients(omega, p))
        }
    }
}

/// Rows `(δa_out[Ω], δa_out†[Ω])` in the basis `(δa_in, δa_in†, δb_in, δb_in†)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix(pub [[C64; 4]; 2]);

pub fn transfer_matrix(omega: f64, p: &SystemParams) -> TransferMatrix {
    let c = exact_coefficients(omega, p);
    let m = exact_coefficients(-omega, p);
    TransferMatrix([
        [c.a, c.b, c.c, c.d],
        [m.b.conj(), m.a.conj(), m.d.conj(), m.c.conj()],
    ])
}
