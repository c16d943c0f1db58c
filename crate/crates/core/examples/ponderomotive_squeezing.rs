//! Homodyne spectrum at a small quadrature angle dips below shot noise.

use std::f64::consts::TAU;

use omk::presets;
use omk::spectra::{homodyne_theta_spectrum, linspace};

fn main() -> omk::Result<()> {
    let s = presets::squeezing();
    let (p, n, d) = (&s.system, &s.noise, &s.detection);
    // offsets from the mechanical resonance, ±400 kHz
    let grid: Vec<f64> = linspace(-TAU * 400e3, TAU * 400e3, 8001).iter().map(|x| p.omega_m + x).collect();
    let with = homodyne_theta_spectrum(&grid, p, n, d, true)?;
    let without = homodyne_theta_spectrum(&grid, p, n, d, false)?;
    let (i, v) = with.min();
    println!("theta = {} rad, eta_hom = {}", d.theta, d.eta_hom);
    println!(
        "minimum {:.5} (shot noise = 1) at Omega - Omega_m = {:.1} kHz",
        v,
        (grid[i] - p.omega_m) / TAU / 1e3
    );
    println!("without the correlation term: minimum {:.5}", without.min().1);
    for k in (400..grid.len()).step_by(800) {
        println!("{:>9.1} kHz  {:.5}  {:.5}", (grid[k] - p.omega_m) / TAU / 1e3, with.values[k], without.values[k]);
    }
    Ok(())
}
