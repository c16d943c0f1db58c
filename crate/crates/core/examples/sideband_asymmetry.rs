//! Heterodyne sideband asymmetry at the efficient-feedback operating point.
//!
//! Prints the lower/upper sideband weights, the ratio R, the visibility, and the same
//! ratio recovered by integrating the spectrum with floor subtraction.

use omk::presets;
use omk::spectra::{
    heterodyne_spectrum_with, optimal_gain, phonon_area_scale, sideband_areas, sideband_weights_with, visibility,
    AreaOptions, FeedbackConfig, SidebandGrid,
};

fn main() -> omk::Result<()> {
    let s = presets::fig2();
    let (p, n, d) = (&s.system, &s.noise, &s.detection);
    let g = optimal_gain(p, n, d);
    let fb = FeedbackConfig::viscous(g);
    println!("g_opt = {g:.1}, cooled linewidth = {:.1} kHz", p.gamma_m * (1.0 + g) / std::f64::consts::TAU / 1e3);

    let w = sideband_weights_with(p, n, d, Some(&fb), &s.conventions)?;
    println!("weights: lower {:.4}, upper {:.4}", w.lower, w.upper);
    println!("R = {:.6}, 1 - R = {:.3}%, visibility = {:.4}", w.ratio(), 100.0 * (1.0 - w.ratio()), visibility(w.ratio()));

    let fwhm = p.gamma_m * (1.0 + g);
    let grid = SidebandGrid::new(p.omega_m, fwhm).points_per_linewidth(20.0).half_span_linewidths(40.0).far_points(60).build();
    let spectrum = heterodyne_spectrum_with(&grid, p, n, d, Some(&fb), &s.conventions)?;
    let areas = sideband_areas(&spectrum, &AreaOptions::default())?;
    let ph = areas.in_phonons(phonon_area_scale(p, d));
    println!(
        "integrated ({} points): lower {:.4}, upper {:.4}, R = {:.6}",
        grid.len(),
        ph.lower,
        ph.upper,
        areas.ratio()
    );
    Ok(())
}
