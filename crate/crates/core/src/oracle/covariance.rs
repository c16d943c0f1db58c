use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{chi_c, exact_coefficients, Coefficients, DetectionConfig, NoiseParams, SystemParams};
use crate::spectra::{Normalization, Sidedness, Spectrum};

/// White-noise cross-spectra `⟨u_i u_j⟩` among `u = (δa_in, δa_in†, δb_in, δb_in†)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputCorrelatorMatrix(pub [[C64; 4]; 4]);

impl InputCorrelatorMatrix {
    pub fn new(n: &NoiseParams, n_th: f64) -> Self {
        let z = C64::new(0.0, 0.0);
        let mut m = [[z; 4]; 4];
        let diff = 0.5 * (n.c_qq - n.c_pp);
        let sum = 0.5 * (n.c_qq + n.c_pp);
        m[0][0] = C64::new(diff, n.c_qp);
        m[0][1] = C64::new(n.alpha + sum, 0.0);
        m[1][0] = C64::new(sum, 0.0);
        m[1][1] = C64::new(diff, -n.c_qp);
        m[2][3] = C64::new(n_th + n.beta, 0.0);
        m[3][2] = C64::new(n_th, 0.0);
        InputCorrelatorMatrix(m)
    }

    /// Commutators `[a, a†]` and `[b, b†]` read back from the matrix, plus whether the
    /// squeezing entries are conjugate mirrors of each other.
    pub fn structure(&self) -> (f64, f64, bool) {
        let m = &self.0;
        let ca = (m[0][1] - m[1][0]).re;
        let cb = (m[2][3] - m[3][2]).re;
        let mirror = m[0][0].conj() == m[1][1]
            && m[0][1].im == 0.0
            && m[1][0].im == 0.0
            && m[2][3].im == 0.0
            && m[3][2].im == 0.0;
        (ca, cb, mirror)
    }

    fn contract(&self, left: &[C64; 4], right: &[C64; 4]) -> C64 {
        let mut s = C64::new(0.0, 0.0);
        for (i, l) in left.iter().enumerate() {
            for (j, r) in right.iter().enumerate() {
                let m = self.0[i][j];
                if m.re != 0.0 || m.im != 0.0 {
                    s += l * m * r;
                }
            }
        }
        s
    }
}

/// Deliberate corruptions of the oracle's transfer rows, used to prove that the
/// oracle-vs-closed-form check has power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fault {
    /// Multiply the Stokes-path coefficient `C` by a factor.
    ScaleC(f64),
    /// Evaluate the coefficients at `−Ω`, exchanging the roles of the two sidebands.
    MirrorOmega,
    /// Keep only the empty-cavity part `1 − κχc` of `A`, removing the back-action
    /// resonance that carries the sideband asymmetry.
    DropAResonance,
}

impl Fault {
    pub const NAMES: [&'static str; 3] = ["scale-c", "mirror-omega", "drop-a-resonance"];

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "scale-c" => Ok(Fault::ScaleC(1.5)),
            "mirror-omega" => Ok(Fault::MirrorOmega),
            "drop-a-resonance" => Ok(Fault::DropAResonance),
            other => Err(Error::Config(format!(
                "unknown fault `{other}`; expected one of {}",
                Fault::NAMES.join(", ")
            ))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Fault::ScaleC(k) => format!("scale-c({k})"),
            Fault::MirrorOmega => "mirror-omega".into(),
            Fault::DropAResonance => "drop-a-resonance".into(),
        }
    }

    fn apply(&self, omega: f64, p: &SystemParams, c: Coefficients) -> Coefficients {
        match *self {
            Fault::ScaleC(k) => Coefficients { c: c.c * k, ..c },
            Fault::MirrorOmega => exact_coefficients(-omega, p),
            Fault::DropAResonance => Coefficients { a: 1.0 - p.kappa * chi_c(omega, p), ..c },
        }
    }
}

struct Rows {
    plus: [C64; 4],
    minus: [C64; 4],
}

/// Rows of `δa_out[Ω]` and `δa_out†[Ω]`.
fn rows(omega: f64, p: &SystemParams, fault: Option<Fault>) -> Rows {
    let coef = |w: f64| {
        let c = exact_coefficients(w, p);
        fault.map_or(c, |f| f.apply(w, p, c))
    };
    let c = coef(omega);
    let m = coef(-omega);
    Rows {
        plus: [c.a, c.b, c.c, c.d],
        minus: [m.b.conj(), m.a.conj(), m.d.conj(), m.c.conj()],
    }
}

/// Heterodyne photocurrent spectrum at IF offset `nu`, shot-noise units.
///
/// With `μ = 2Ω_IF + ν` the photocurrent correlator is
/// `½[S_{a†a}(ν) + S_{aa†}(−ν) + S_{aa†}(μ) + S_{a†a}(−μ)]`, where
/// `S_{a†a}(Ω) = row†(Ω)·M·row(−Ω)` and `S_{aa†}(Ω) = row(Ω)·M·row†(−Ω)`.
pub fn heterodyne_point(
    nu: f64,
    p: &SystemParams,
    n: &NoiseParams,
    d: &DetectionConfig,
    fault: Option<Fault>,
) -> f64 {
    let m = InputCorrelatorMatrix::new(n, p.n_th);
    let mu = 2.0 * d.omega_if + nu;
    let (rn, rmn) = (rows(nu, p, fault), rows(-nu, p, fault));
    let (rm, rmm) = (rows(mu, p, fault), rows(-mu, p, fault));
    let raw = 0.5
        * (m.contract(&rn.minus, &rmn.plus)
            + m.contract(&rmn.plus, &rn.minus)
            + m.contract(&rm.plus, &rmm.minus)
            + m.contract(&rmm.minus, &rm.plus));
    n.alpha + d.eta_het * (raw.re - n.alpha)
}

/// Exact heterodyne spectrum from covariance propagation; no bad-cavity or
/// weak-coupling approximation is made.
pub fn covariance_spectrum(
    grid: &[f64],
    p: &SystemParams,
    n: &NoiseParams,
    d: &DetectionConfig,
) -> Result<Spectrum> {
    covariance_spectrum_with(grid, p, n, d, None)
}

pub fn covariance_spectrum_with(
    grid: &[f64],
    p: &SystemParams,
    n: &NoiseParams,
    d: &DetectionConfig,
    fault: Option<Fault>,
) -> Result<Spectrum> {
    p.validate()?;
    n.validate()?;
    d.validate(p)?;
    let values = grid
        .par_iter()
        .map(|&nu| heterodyne_point(nu, p, n, d, fault))
        .collect();
    Spectrum::new(grid.to_vec(), values, Sidedness::Double, Normalization::ShotNoise)
}
