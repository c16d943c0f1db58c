use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::{linspace, Spectrum};

/// Spectrum-analyzer settings for a synthetic acquisition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Acquisition {
    /// Total averaging time, seconds.
    pub duration: f64,
    /// Resolution bandwidth and bin spacing, Hz.
    pub rbw: f64,
    /// Half width recorded around each sideband, in FWHM.
    pub span_fwhm: f64,
}

impl Default for Acquisition {
    fn default() -> Self {
        Acquisition {
            duration: 30.0,
            rbw: 100.0,
            span_fwhm: 15.0,
        }
    }
}

impl Acquisition {
    /// Independent periodogram averages per bin, `duration × rbw`.
    pub fn averages(&self) -> f64 {
        self.duration * self.rbw
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) || !(self.rbw > 0.0) || !(self.span_fwhm > 0.0) {
            return Err(Error::invalid("acquisition", "duration, rbw and span_fwhm must be > 0"));
        }
        if self.averages() < 1.0 {
            return Err(Error::invalid("acquisition", "duration x rbw must be at least 1"));
        }
        Ok(())
    }

    /// Bins around both sidebands at `±offset` (rad/s), spaced by the RBW. The span is
    /// clamped so the two windows never meet.
    pub fn grid(&self, offset: f64, fwhm: f64) -> Vec<f64> {
        let step = std::f64::consts::TAU * self.rbw;
        let half = (self.span_fwhm * fwhm).min(0.9 * offset);
        let k = (half / step).floor() as usize;
        let side = linspace(offset - k as f64 * step, offset + k as f64 * step, 2 * k + 1);
        let mut out: Vec<f64> = side.iter().rev().map(|w| -w).collect();
        out.extend(side);
        out
    }
}

/// Replaces every bin by the mean of `averages` exponential periodogram ordinates,
/// i.e. a Gamma(K, S/K) draw. Stream `stream` of the seeded generator is used, so points
/// of a sweep can be drawn in any order.
pub fn synthesize(spectrum: &Spectrum, averages: f64, seed: u64, stream: u64) -> Result<Spectrum> {
    if !(averages >= 1.0) {
        return Err(Error::invalid("averages", "must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let shape = Gamma::new(averages, 1.0 / averages).map_err(|e| Error::Numerical(e.to_string()))?;
    let values = spectrum.values.iter().map(|s| s * shape.sample(&mut rng)).collect();
    Spectrum::new(spectrum.grid.clone(), values, spectrum.sidedness, spectrum.normalization)
}
