use thiserror::Error;

/// Everything that can go wrong inside the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParams { field: String, reason: String },

    #[error("approximation out of regime: {quantity} = {ratio:.3e} exceeds {limit:.3e}")]
    ApproxOutOfRegime {
        quantity: &'static str,
        ratio: f64,
        limit: f64,
    },

    #[error("intermediate frequency {omega_if:.4e} rad/s must exceed {factor} x omega_m = {omega_m:.4e} rad/s")]
    IfTooLow {
        omega_if: f64,
        omega_m: f64,
        factor: f64,
    },

    #[error("floor subtraction leaves a nonpositive area for the {which} sideband ({area:.3e})")]
    FloorExceedsPeak { which: &'static str, area: f64 },

    #[error("feedback gain is zero; the high-gain occupation formula does not apply")]
    ZeroGain,

    #[error("feedback loop is unstable: net damping {net_damping:.3e} rad/s, phase margin {phase_margin:.3} rad")]
    UnstableLoop { net_damping: f64, phase_margin: f64 },

    #[error("record too short: {len} samples, need at least {needed}")]
    TooShort { len: usize, needed: usize },

    #[error("measured RIN is {excess:.3e} of shot noise below the shot-noise level (tolerance {tolerance:.3e})")]
    NegativeExcess { excess: f64, tolerance: f64 },

    #[error("fit diverged: {reason}")]
    FitDiverged { reason: String },

    #[error("insufficient resolution: {points_per_fwhm:.1} points per FWHM, need {needed}")]
    InsufficientResolution { points_per_fwhm: f64, needed: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParams {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code: 2 config, 3 regime, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParams { .. }
            | Error::IfTooLow { .. }
            | Error::ZeroGain
            | Error::TooShort { .. }
            | Error::NegativeExcess { .. }
            | Error::Config(_)
            | Error::Io(_) => 2,
            Error::ApproxOutOfRegime { .. } => 3,
            Error::FloorExceedsPeak { .. }
            | Error::UnstableLoop { .. }
            | Error::FitDiverged { .. }
            | Error::InsufficientResolution { .. }
            | Error::Numerical(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
