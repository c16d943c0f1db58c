use std::f64::consts::TAU;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::spectra::{Normalization, Sidedness, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Rectangular,
    Hann,
}

impl Window {
    fn weights(&self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            // periodic Hann, so 50% overlap sums to a constant
            Window::Hann => (0..n)
                .map(|k| 0.5 - 0.5 * (TAU * k as f64 / n as f64).cos())
                .collect(),
        }
    }

    /// Segment hop: contiguous for the rectangular window, half-overlapped for Hann.
    fn hop(&self, n: usize) -> usize {
        match self {
            Window::Rectangular => n,
            Window::Hann => (n / 2).max(1),
        }
    }
}

/// Number of Welch segments a record of `len` samples yields.
pub fn segment_count(len: usize, segment_length: usize, window: Window) -> usize {
    if segment_length == 0 || len < segment_length {
        return 0;
    }
    (len - segment_length) / window.hop(segment_length) + 1
}

/// Welch-averaged single-sided PSD of a real record sampled every `dt` seconds.
///
/// Values are per Hz on an angular-frequency grid `2πk/(N dt)`, `k = 0..=N/2`, so the
/// record's mean square is the integral over `dΩ/2π`.
pub fn periodogram(record: &[f64], dt: f64, segment_length: usize, window: Window) -> Result<Spectrum> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid("dt", "must be finite and > 0"));
    }
    if segment_length < 2 {
        return Err(Error::invalid("segment_length", "must be at least 2"));
    }
    let segments = segment_count(record.len(), segment_length, window);
    if segments < 4 {
        return Err(Error::TooShort {
            len: record.len(),
            needed: segment_length + 3 * window.hop(segment_length),
        });
    }
    let n = segment_length;
    let w = window.weights(n);
    let norm: f64 = w.iter().map(|v| v * v).sum();
    let hop = window.hop(n);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let half = n / 2;

    let acc = (0..segments)
        .into_par_iter()
        .map(|s| {
            let chunk = &record[s * hop..s * hop + n];
            let mut buf: Vec<Complex<f64>> = chunk
                .iter()
                .zip(&w)
                .map(|(x, w)| Complex::new(x * w, 0.0))
                .collect();
            fft.process(&mut buf);
            buf[..=half].iter().map(|c| c.norm_sqr()).collect::<Vec<f64>>()
        })
        .reduce(
            || vec![0.0; half + 1],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );

    let base = dt / (norm * segments as f64);
    let values = acc
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let fold = if k == 0 || (n % 2 == 0 && k == half) { 1.0 } else { 2.0 };
            fold * base * v
        })
        .collect();
    let grid = (0..=half).map(|k| TAU * k as f64 / (n as f64 * dt)).collect();
    Spectrum::new(grid, values, Sidedness::Single, Normalization::DisplacementPerHz)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn too_short() {
        let r = vec![0.0; 300];
        assert!(matches!(periodogram(&r, 1.0, 100, Window::Rectangular), Err(Error::TooShort { .. })));
        assert!(periodogram(&r, 1.0, 75, Window::Rectangular).is_ok());
    }

    #[test]
    fn sinusoid_power() {
        let dt = 1e-3;
        let n = 1000;
        // exactly on a bin: f = 50 Hz, 1 s segments
        let rec: Vec<f64> = (0..8 * n).map(|k| 3.0 * (TAU * 50.0 * k as f64 * dt).sin()).collect();
        let s = periodogram(&rec, dt, n, Window::Rectangular).unwrap();
        let (i, _) = s.max();
        assert!((s.grid[i] - TAU * 50.0).abs() < 1e-9);
        let df = 1.0 / (n as f64 * dt);
        assert!((s.values[i] * df - 4.5).abs() < 0.045);
    }
}
