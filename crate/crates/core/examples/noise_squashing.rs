//! In-loop spectrum above and below the squashing boundary.

use omk::presets;
use omk::spectra::{
    inloop_spectrum, linspace, optimal_gain, squashing_boundary, squashing_ratio, FeedbackConfig, InLoopMode,
};

fn main() -> omk::Result<()> {
    let s = presets::fig2();
    let (p, n, d) = (&s.system, &s.noise, &s.detection);
    let g_opt = optimal_gain(p, n, d);
    let template = FeedbackConfig::viscous(1.0);
    let g_b = squashing_boundary(p, n, d, &template)?;
    println!("g_opt = {g_opt:.1}, squashing boundary g_b = {g_b:.1}");

    for k in [0.3, 0.5, 3.0] {
        let fb = FeedbackConfig::viscous(k * g_opt);
        let r = squashing_ratio(p, n, d, &fb)?;
        println!("g = {k} g_opt: S_inloop(Omega_m)/S_imp = {r:.3}{}", if r < 1.0 { "  (squashed)" } else { "" });
    }

    let fb = FeedbackConfig::viscous(3.0 * g_opt);
    let width = p.gamma_m * (1.0 + fb.g_fb);
    let grid = linspace(p.omega_m - 5.0 * width, p.omega_m + 5.0 * width, 11);
    let sy = inloop_spectrum(&grid, p, n, d, &fb, InLoopMode::ClosedLoopConsistent)?;
    let imp = omk::spectra::imprecision_psd(p, d) / (p.x_zp * p.x_zp);
    println!("in-loop spectrum at 3 g_opt, relative to the imprecision floor:");
    for (w, v) in grid.iter().zip(&sy.values) {
        println!("  {:>+6.1} linewidths  {:.3}", (w - p.omega_m) / width, v / (p.x_zp * p.x_zp) / imp);
    }
    Ok(())
}
