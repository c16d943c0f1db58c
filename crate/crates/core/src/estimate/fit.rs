use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt, LmOptions, LmResult};
use crate::error::{Error, Result};
use crate::spectra::Spectrum;

/// One fitted sideband: `floor + area·(fwhm/2π)/((Ω − center)² + fwhm²/4)`.
///
/// Parameter order in `covariance` is `(center, fwhm, area, floor)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidebandFit {
    pub center: f64,
    pub fwhm: f64,
    /// Spectrum units × rad/s.
    pub area: f64,
    pub floor: f64,
    pub covariance: [[f64; 4]; 4],
}

impl SidebandFit {
    pub fn area_err(&self) -> f64 {
        self.covariance[2][2].max(0.0).sqrt()
    }

    pub fn peak_height(&self) -> f64 {
        2.0 * self.area / (PI * self.fwhm)
    }

    pub fn eval(&self, omega: f64) -> f64 {
        lorentzian(omega, self.center, self.fwhm, self.area, &mut [0.0; 3]) + self.floor
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// One floor for both sidebands instead of one each.
    pub shared_floor: bool,
    /// One linewidth for both sidebands. Both lines have the closed-loop width, and a
    /// common width cancels from `R`, which keeps its error first-order accurate at low SNR.
    pub shared_width: bool,
    /// Number of averaged periodograms behind each bin; sets `σ = model/√K`. Without it
    /// the weights are relative and the covariance is scaled by the reduced χ².
    pub averages: Option<f64>,
    pub min_points_per_fwhm: f64,
    /// Fit window half width around each sideband, in initial FWHM.
    pub window_fwhm: f64,
    /// Reduced χ² above which the fit is flagged (known noise only).
    pub flag_reduced_chi2: Option<f64>,
    /// Reduced χ² above which the fit is rejected as diverged (known noise only).
    pub max_reduced_chi2: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            shared_floor: false,
            shared_width: false,
            averages: None,
            min_points_per_fwhm: 10.0,
            window_fwhm: 15.0,
            flag_reduced_chi2: None,
            max_reduced_chi2: 100.0,
        }
    }
}

/// Both sidebands; `lower` is the one at positive IF offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidebandFitPair {
    pub lower: SidebandFit,
    pub upper: SidebandFit,
    /// Covariance of the two areas (nonzero only for the shared-floor fit).
    pub area_cross_covariance: f64,
    pub reduced_chi2: f64,
    pub dof: usize,
    /// Residual above the flag threshold; the model does not describe the data.
    pub flagged: bool,
}

/// Value and `(∂c, ∂w, ∂A)` of a unit-normalized Lorentzian.
fn lorentzian(x: f64, c: f64, w: f64, a: f64, grad: &mut [f64; 3]) -> f64 {
    let d = x - c;
    let den = d * d + 0.25 * w * w;
    let shape = w / (2.0 * PI * den);
    grad[0] = a * shape * 2.0 * d / den;
    grad[1] = a / (2.0 * PI) * (1.0 / den - 0.5 * w * w / (den * den));
    grad[2] = shape;
    a * shape
}

fn moving_average(y: &[f64], half: usize) -> Vec<f64> {
    let n = y.len();
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + y[i];
    }
    (0..n)
        .map(|i| {
            let a = i.saturating_sub(half);
            let b = (i + half + 1).min(n);
            (prefix[b] - prefix[a]) / (b - a) as f64
        })
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Initial guess from one half of the spectrum: smoothed argmax, half-max crossing
/// scan, off-resonant median floor.
fn initial_guess(x: &[f64], y: &[f64]) -> Result<SidebandFit> {
    if x.len() < 16 {
        return Err(Error::InsufficientResolution {
            points_per_fwhm: 0.0,
            needed: 10.0,
        });
    }
    let s = moving_average(y, (x.len() / 100).max(1));
    let (imax, ymax) = s
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, (i, v)| if v > a.1 { (i, v) } else { a });
    let base = median(s.clone());
    let half = base + 0.5 * (ymax - base);
    let left = (0..imax).rev().find(|&i| s[i] < half);
    let right = (imax + 1..x.len()).find(|&i| s[i] < half);
    let (Some(l), Some(r)) = (left, right) else {
        return Err(Error::FitDiverged {
            reason: "sideband has no half-maximum crossing inside the window".into(),
        });
    };
    let interp = |i: usize, j: usize| x[i] + (half - s[i]) / (s[j] - s[i]) * (x[j] - x[i]);
    let fwhm = interp(r, r - 1) - interp(l, l + 1);
    let center = x[imax];
    let far: Vec<f64> = x
        .iter()
        .zip(y)
        .filter(|(xi, _)| (*xi - center).abs() > 5.0 * fwhm)
        .map(|(_, yi)| *yi)
        .collect();
    let floor = if far.len() >= 10 { median(far) } else { base };
    Ok(SidebandFit {
        center,
        fwhm,
        area: (ymax - floor) * PI * fwhm / 2.0,
        floor,
        covariance: [[0.0; 4]; 4],
    })
}

fn spacing_near(x: &[f64], c: f64) -> f64 {
    let i = x.partition_point(|&v| v < c).clamp(1, x.len() - 1);
    x[i] - x[i - 1]
}

struct Window {
    x: Vec<f64>,
    y: Vec<f64>,
}

fn window(x: &[f64], y: &[f64], c: f64, half: f64) -> Window {
    let (x, y): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(xi, _)| (*xi - c).abs() <= half)
        .map(|(a, b)| (*a, *b))
        .unzip();
    Window { x, y }
}

/// Least-squares double-Lorentzian fit of a double-sided heterodyne spectrum.
pub fn fit_sidebands(
    spectrum: &Spectrum,
    init: Option<(SidebandFit, SidebandFit)>,
    opts: &FitOptions,
) -> Result<SidebandFitPair> {
    let split = spectrum.grid.partition_point(|&w| w < 0.0);
    let first_pos = spectrum.grid.partition_point(|&w| w <= 0.0);
    let (xn, yn) = (&spectrum.grid[..split], &spectrum.values[..split]);
    let (xp, yp) = (&spectrum.grid[first_pos..], &spectrum.values[first_pos..]);
    // normalize so the fit is invariant under rescaling of the spectrum
    let scale = {
        let m = median(spectrum.values.clone());
        if m > 0.0 && m.is_finite() { m } else { 1.0 }
    };
    let yn: Vec<f64> = yn.iter().map(|v| v / scale).collect();
    let yp: Vec<f64> = yp.iter().map(|v| v / scale).collect();
    let (lo0, up0) = match init {
        Some((l, u)) => (
            SidebandFit { area: l.area / scale, floor: l.floor / scale, ..l },
            SidebandFit { area: u.area / scale, floor: u.floor / scale, ..u },
        ),
        None => (initial_guess(xp, &yp)?, initial_guess(xn, &yn)?),
    };
    for (g, x) in [(&lo0, xp), (&up0, xn)] {
        if x.len() < 2 {
            return Err(Error::InsufficientResolution { points_per_fwhm: 0.0, needed: opts.min_points_per_fwhm });
        }
        // the initial width is noisy; the full requirement is checked on the fitted width
        let ppf = g.fwhm / spacing_near(x, g.center);
        if !(ppf >= 0.25 * opts.min_points_per_fwhm) {
            return Err(Error::InsufficientResolution {
                points_per_fwhm: ppf,
                needed: opts.min_points_per_fwhm,
            });
        }
    }
    let wl = window(xp, &yp, lo0.center, opts.window_fwhm * lo0.fwhm);
    let wu = window(xn, &yn, up0.center, opts.window_fwhm * up0.fwhm);

    let mut pair = if opts.shared_floor || opts.shared_width {
        fit_joint(&wl, &wu, &lo0, &up0, opts)?
    } else {
        let (l, rl) = fit_single(&wl, &lo0, opts)?;
        let (u, ru) = fit_single(&wu, &up0, opts)?;
        let dof = rl.dof + ru.dof;
        SidebandFitPair {
            lower: l,
            upper: u,
            area_cross_covariance: 0.0,
            reduced_chi2: (rl.chi2 + ru.chi2) / dof as f64,
            dof,
            flagged: false,
        }
    };
    if opts.averages.is_some() {
        if !(pair.reduced_chi2 <= opts.max_reduced_chi2) {
            return Err(Error::FitDiverged {
                reason: format!("reduced chi2 {:.3} above {}", pair.reduced_chi2, opts.max_reduced_chi2),
            });
        }
        let flag = opts
            .flag_reduced_chi2
            .unwrap_or(1.0 + 5.0 * (2.0 / pair.dof as f64).sqrt());
        pair.flagged = pair.reduced_chi2 > flag;
    }
    for f in [&mut pair.lower, &mut pair.upper] {
        f.area *= scale;
        f.floor *= scale;
        for (i, row) in f.covariance.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let k = |m: usize| if m >= 2 { scale } else { 1.0 };
                *v *= k(i) * k(j);
            }
        }
    }
    pair.area_cross_covariance *= scale * scale;
    for (name, f, x) in [("lower", &pair.lower, xp), ("upper", &pair.upper, xn)] {
        if !(f.fwhm > 0.0) || !f.area.is_finite() {
            return Err(Error::FitDiverged {
                reason: format!("{name} sideband fit left the physical domain (fwhm {:.3e})", f.fwhm),
            });
        }
        // insufficient only if significant: noisy fits scatter in width
        let spacing = spacing_near(x, f.center);
        let width_bound = f.fwhm + 2.0 * f.covariance[1][1].max(0.0).sqrt();
        if !(width_bound / spacing >= opts.min_points_per_fwhm) {
            return Err(Error::InsufficientResolution {
                points_per_fwhm: f.fwhm / spacing,
                needed: opts.min_points_per_fwhm,
            });
        }
    }
    Ok(pair)
}

/// Runs the weighted fit twice (three times with known noise), each pass taking its
/// weights from the previous model.
fn reweighted<F>(x: &[f64], y: &[f64], init: Vec<f64>, model: F, opts: &FitOptions) -> Result<LmResult>
where
    F: Fn(&[f64], f64, &mut [f64]) -> f64,
{
    let k = opts.averages.unwrap_or(1.0);
    let smooth = moving_average(y, 2);
    let mut sigma: Vec<f64> = smooth.iter().map(|v| v.abs().max(1e-300) / k.sqrt()).collect();
    let mut params = init;
    let mut grad = vec![0.0; params.len()];
    let passes = if opts.averages.is_some() { 3 } else { 2 };
    let mut last = None;
    for _ in 0..passes {
        let r = levenberg_marquardt(x, y, &sigma, &params, &model, &LmOptions::default())?;
        params = r.params.clone();
        sigma = x
            .iter()
            .map(|&xi| model(&params, xi, &mut grad).abs().max(1e-300) / k.sqrt())
            .collect();
        last = Some(r);
    }
    let mut r = last.expect("at least one pass");
    if opts.averages.is_none() {
        // weights were only relative: scale by the observed residual
        r.covariance *= r.reduced_chi2();
    }
    Ok(r)
}

/// The center is fitted as `u = 1 + (c − c0)/w0`: order one, so the relative step test
/// applies, and its resolution is far below the linewidth (an absolute center at tens of
/// Mrad/s is quantized at ~1e-10 of a narrow line).
#[derive(Clone, Copy)]
struct CenterMap {
    c0: f64,
    w0: f64,
}

impl CenterMap {
    fn new(g: &SidebandFit) -> Self {
        CenterMap { c0: g.center, w0: g.fwhm.abs().max(f64::MIN_POSITIVE) }
    }

    fn center(&self, u: f64) -> f64 {
        self.c0 + self.w0 * (u - 1.0)
    }
}

fn fit_single(w: &Window, g: &SidebandFit, opts: &FitOptions) -> Result<(SidebandFit, LmResult)> {
    let m = CenterMap::new(g);
    let model = |p: &[f64], x: f64, grad: &mut [f64]| {
        let mut gl = [0.0; 3];
        let v = lorentzian(x, m.center(p[0]), p[1], p[2], &mut gl);
        grad[..3].copy_from_slice(&gl);
        grad[0] *= m.w0;
        grad[3] = 1.0;
        v + p[3]
    };
    let r = reweighted(&w.x, &w.y, vec![1.0, g.fwhm, g.area, g.floor], model, opts)?;
    let unit = |i: usize| if i == 0 { m.w0 } else { 1.0 };
    let mut cov = [[0.0; 4]; 4];
    for (i, row) in cov.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = r.covariance[(i, j)] * unit(i) * unit(j);
        }
    }
    let p = &r.params;
    Ok((
        SidebandFit {
            center: m.center(p[0]),
            fwhm: p[1].abs(),
            area: p[2],
            floor: p[3],
            covariance: cov,
        },
        r,
    ))
}

/// Indices of `(u, fwhm, area, floor)` of each sideband in the joint parameter vector.
struct JointLayout {
    lower: [usize; 4],
    upper: [usize; 4],
    len: usize,
}

impl JointLayout {
    fn new(shared_floor: bool, shared_width: bool) -> Self {
        let (upper_w, upper_a) = if shared_width { (1, 4) } else { (4, 5) };
        let lower_f = upper_a + 1;
        let upper_f = if shared_floor { lower_f } else { lower_f + 1 };
        JointLayout {
            lower: [0, 1, 2, lower_f],
            upper: [3, upper_w, upper_a, upper_f],
            len: upper_f + 1,
        }
    }
}

fn fit_joint(wl: &Window, wu: &Window, lo: &SidebandFit, up: &SidebandFit, opts: &FitOptions) -> Result<SidebandFitPair> {
    let mut x = wu.x.clone();
    x.extend_from_slice(&wl.x);
    let mut y = wu.y.clone();
    y.extend_from_slice(&wl.y);
    let (ml, mu) = (CenterMap::new(lo), CenterMap::new(up));
    let lay = JointLayout::new(opts.shared_floor, opts.shared_width);
    let (il, iu) = (lay.lower, lay.upper);
    let model = |p: &[f64], xi: f64, grad: &mut [f64]| {
        let (mut gl, mut gu) = ([0.0; 3], [0.0; 3]);
        let vl = lorentzian(xi, ml.center(p[il[0]]), p[il[1]], p[il[2]], &mut gl);
        let vu = lorentzian(xi, mu.center(p[iu[0]]), p[iu[1]], p[iu[2]], &mut gu);
        grad.fill(0.0);
        for k in 0..3 {
            grad[il[k]] += gl[k];
            grad[iu[k]] += gu[k];
        }
        grad[il[0]] *= ml.w0;
        grad[iu[0]] *= mu.w0;
        // the lower sideband sits at positive offsets
        let f = if xi > 0.0 { il[3] } else { iu[3] };
        grad[f] += 1.0;
        vl + vu + p[f]
    };
    let mut init = vec![0.0; lay.len];
    let width = if opts.shared_width { 0.5 * (lo.fwhm + up.fwhm) } else { lo.fwhm };
    for (idx, g, w) in [(il, lo, width), (iu, up, if opts.shared_width { width } else { up.fwhm })] {
        init[idx[0]] = 1.0;
        init[idx[1]] = w;
        init[idx[2]] = g.area;
    }
    if opts.shared_floor {
        init[il[3]] = 0.5 * (lo.floor + up.floor);
    } else {
        init[il[3]] = lo.floor;
        init[iu[3]] = up.floor;
    }
    let r = reweighted(&x, &y, init, model, opts)?;
    let unit = |i: usize| {
        if i == il[0] {
            ml.w0
        } else if i == iu[0] {
            mu.w0
        } else {
            1.0
        }
    };
    let c = &r.covariance;
    let pick = |idx: [usize; 4]| {
        let mut m = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = c[(idx[i], idx[j])] * unit(idx[i]) * unit(idx[j]);
            }
        }
        m
    };
    let p = &r.params;
    let side = |idx: [usize; 4], m: &CenterMap| SidebandFit {
        center: m.center(p[idx[0]]),
        fwhm: p[idx[1]].abs(),
        area: p[idx[2]],
        floor: p[idx[3]],
        covariance: pick(idx),
    };
    Ok(SidebandFitPair {
        lower: side(il, &ml),
        upper: side(iu, &mu),
        area_cross_covariance: c[(il[2], iu[2])],
        reduced_chi2: r.reduced_chi2(),
        dof: r.dof,
        flagged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::{linspace, Normalization, Sidedness};

    fn synthetic(lo: (f64, f64, f64), up: (f64, f64, f64), floor: f64) -> Spectrum {
        let mut grid = linspace(-up.0 - 15.0 * up.1, -up.0 + 15.0 * up.1, 601);
        grid.extend(linspace(lo.0 - 15.0 * lo.1, lo.0 + 15.0 * lo.1, 601));
        let values = grid
            .iter()
            .map(|&w| {
                floor
                    + lorentzian(w, lo.0, lo.1, lo.2, &mut [0.0; 3])
                    + lorentzian(w, -up.0, up.1, up.2, &mut [0.0; 3])
            })
            .collect();
        Spectrum::new(grid, values, Sidedness::Double, Normalization::ShotNoise).unwrap()
    }

    #[test]
    fn noiseless_recovery() {
        let s = synthetic((1e6, 300.0, 8.3e3), (1e6 + 7.0, 310.0, 7.3e3), 1.0);
        for shared in [false, true] {
            let f = fit_sidebands(&s, None, &FitOptions { shared_floor: shared, ..Default::default() }).unwrap();
            let rel = |a: f64, b: f64| ((a - b) / b).abs();
            assert!(rel(f.lower.area, 8.3e3) < 1e-6, "{:?}", f.lower);
            assert!(rel(f.upper.area, 7.3e3) < 1e-6, "{:?}", f.upper);
            assert!(rel(f.lower.fwhm, 300.0) < 1e-6);
            assert!(rel(f.upper.center, -1e6 - 7.0) < 1e-9);
            assert!(rel(f.lower.floor, 1.0) < 1e-6);
        }
    }

    #[test]
    fn coarse_grid_rejected() {
        let mut grid = linspace(-2e6, -0.5e6, 400);
        grid.extend(linspace(0.5e6, 2e6, 400));
        let values = grid
            .iter()
            .map(|&w| 1.0 + lorentzian(w.abs(), 1e6, 300.0, 1e4, &mut [0.0; 3]))
            .collect();
        let s = Spectrum::new(grid, values, Sidedness::Double, Normalization::ShotNoise).unwrap();
        assert!(fit_sidebands(&s, None, &FitOptions::default()).is_err());
    }
}
