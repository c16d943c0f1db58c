//! One synthetic heterodyne acquisition, Lorentzian fits of both sidebands, and the
//! occupancy recovered from them.

use omk::estimate::{adapted_acquisition, fit_sidebands, synthesize, Acquisition, FitOptions};
use omk::presets;
use omk::spectra::{heterodyne_spectrum_with, optimal_gain, phonon_area_scale, sideband_weights_with, FeedbackConfig};

fn main() -> omk::Result<()> {
    let s = presets::fig3();
    let (p, n, d) = (&s.system, &s.noise, &s.detection);
    let fb = FeedbackConfig::viscous(optimal_gain(p, n, d));
    let fwhm = p.gamma_m * (1.0 + fb.g_fb);
    let acq = adapted_acquisition(&Acquisition::default(), fwhm);
    let grid = acq.grid(p.omega_m, fwhm);
    let clean = heterodyne_spectrum_with(&grid, p, n, d, Some(&fb), &s.conventions)?;
    let noisy = synthesize(&clean, acq.averages(), 42, 0)?;

    let opts = FitOptions { averages: Some(acq.averages()), ..FitOptions::default() };
    let pair = fit_sidebands(&noisy, None, &opts)?;
    let e = pair.extract(phonon_area_scale(p, d));
    let truth = sideband_weights_with(p, n, d, Some(&fb), &s.conventions)?;

    println!("{} bins, {:.0} averages per bin, reduced chi2 {:.3}", grid.len(), acq.averages(), pair.reduced_chi2);
    for (name, f) in [("lower", pair.lower), ("upper", pair.upper)] {
        println!(
            "{name}: center {:.1} Hz, fwhm {:.1} ± {:.1} Hz, area {:.4e} ± {:.1e}",
            f.center / std::f64::consts::TAU,
            f.fwhm / std::f64::consts::TAU,
            f.covariance[1][1].sqrt() / std::f64::consts::TAU,
            f.area,
            f.area_err()
        );
    }
    println!("R = {:.5} ± {:.5} (true {:.5})", e.r, e.dr, truth.ratio());
    println!("n_m from R = {:.3} ± {:.3}, from area = {:.3} ± {:.3}, true {:.3}", e.n_m_from_r, e.dn_m_from_r, e.n_m_from_area, e.dn_m_from_area, truth.upper);
    Ok(())
}
