//! Stochastic simulation of the feedback loop; the averaged periodogram of the in-loop
//! record is compared with the closed-form in-loop spectrum.
//!
//! `cargo run --release --example timedomain_periodogram [gain_over_gopt] [delayed]`

use omk::oracle::{timedomain_check, TimeDomainOptions};
use omk::presets;
use omk::spectra::{optimal_gain, FeedbackConfig};

fn main() -> omk::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let k: f64 = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(1.0);
    let delayed = args.get(2).is_some_and(|a| a == "delayed");

    let s = presets::fig2();
    let (p, n, d) = (&s.system, &s.noise, &s.detection);
    let g = k * optimal_gain(p, n, d);
    let fb = if delayed { FeedbackConfig::delayed_bandlimited(g, p.omega_m) } else { FeedbackConfig::viscous(g) };
    let opts = TimeDomainOptions { seeds: (0..4).collect(), ..TimeDomainOptions::default() };
    let r = timedomain_check(p, n, d, &fb, &opts)?;
    println!("g = {:.1} ({} loop), dt = {:.3e} s, {} seeds x {:.0} decay times", g, if delayed { "delayed" } else { "viscous" }, r.dt, r.seeds, r.decay_times / r.seeds as f64);
    println!("n_m simulated {:.4}, closed form {:.4}, deviation {:.2}%", r.n_m_simulated, r.n_m_closed_form, 100.0 * r.n_m_rel_dev);
    println!("periodogram: {} segments, {} bins, RMS deviation {:.2}%", r.segments, r.bins, 100.0 * r.inloop_rms_dev);
    println!("pass: {}", r.pass);
    Ok(())
}
