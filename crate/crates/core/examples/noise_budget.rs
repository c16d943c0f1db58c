//! Classical laser noise budget from a RIN and a frequency-noise measurement.

use std::f64::consts::TAU;

use omk::noisebudget::{budget, cqp_bound, photon_flux, FrequencyNoiseMeasurement, RinMeasurement, Thresholds};
use omk::presets;

fn main() -> omk::Result<()> {
    let p = presets::fig2().system;
    let rin = RinMeasurement::synthesize(1e-4, 774e-9, 1e-3);
    println!("photon flux {:.4e} /s, RIN {:.4e} /Hz", photon_flux(1e-4, 774e-9), rin.rin_psd_at_omega_m);

    // C_pp = 30 at this signal flux
    let flux = 3.896e11;
    let freq = FrequencyNoiseMeasurement {
        s_omega_excess_at_omega_m: 30.0 * p.omega_m * p.omega_m / flux,
        signal_photon_flux: flux,
        mean_detuning_fraction: 0.01,
        detuning_variance: (TAU * 1e4).powi(2),
    };
    let b = budget(&p, &rin, &freq, 0.0, &Thresholds::default())?;
    println!("{}", serde_json::to_string_pretty(&b).expect("serializable"));

    let bound = cqp_bound(b.c_qq, b.c_pp);
    let bad = budget(&p, &rin, &freq, bound * 1.01, &Thresholds::default())?;
    println!("c_qp = 1.01 x bound: {} ({})", bad.verdict, bad.covariance.witness);
    Ok(())
}
