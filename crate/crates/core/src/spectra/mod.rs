//! Closed-form spectra and figures of merit.

mod feedback;
mod grid;
mod heterodyne;
mod homodyne;

pub use feedback::*;
pub use grid::*;
pub use heterodyne::*;
pub use homodyne::*;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BackActionModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sidedness {
    Single,
    Double,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    ShotNoise,
    Phonon,
    /// Displacement² per Hz; integrate over `dΩ/2π` for the variance.
    DisplacementPerHz,
}

/// Values on a strictly increasing grid of angular frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub sidedness: Sidedness,
    pub normalization: Normalization,
}

impl Spectrum {
    pub fn new(
        grid: Vec<f64>,
        values: Vec<f64>,
        sidedness: Sidedness,
        normalization: Normalization,
    ) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::invalid("grid", "grid and values differ in length"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("grid", "must be strictly increasing"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite spectrum value at {:.6e} rad/s",
                grid[i]
            )));
        }
        Ok(Spectrum {
            grid,
            values,
            sidedness,
            normalization,
        })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Trapezoid integral over `dΩ` across the whole grid.
    pub fn integrate(&self) -> f64 {
        trapezoid(&self.grid, &self.values)
    }

    /// Index and value of the smallest entry.
    pub fn min(&self) -> (usize, f64) {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |a, (i, v)| if v < a.1 { (i, v) } else { a })
    }

    pub fn max(&self) -> (usize, f64) {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |a, (i, v)| if v > a.1 { (i, v) } else { a })
    }

    pub fn scaled(&self, k: f64) -> Spectrum {
        Spectrum {
            values: self.values.iter().map(|v| v * k).collect(),
            ..self.clone()
        }
    }
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Which high-gain occupancy formula to use for cooled spectra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OccupancyModel {
    /// `n_m + 1/2 = n_tot/g + g n_imp` (Γm + Γfb ≈ Γfb).
    #[default]
    HighGain,
    /// `n_m + 1/2 = (n_tot + 1/2 + g² n_imp)/(1 + g)`.
    ClosedLoop,
}

/// Model-level choices shared by the closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Conventions {
    #[serde(default)]
    pub backaction: BackActionModel,
    #[serde(default)]
    pub occupancy: OccupancyModel,
}
