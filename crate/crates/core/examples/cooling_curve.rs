//! Cold-damping sweep: occupancy against gain from the closed form and from synthetic
//! noisy acquisitions fitted like measured data.

use omk::estimate::{cooling_curve, Acquisition, Pipeline};
use omk::presets;
use omk::spectra::{logspace, optimal_gain};

fn main() {
    let s = presets::fig3();
    let g_opt = optimal_gain(&s.system, &s.noise, &s.detection);
    let gains = logspace(g_opt * 1e-2, g_opt * 10.0, 12);

    let exact = cooling_curve(&gains, &Pipeline::closed_form(s));
    let acq = Acquisition { duration: 10.0, ..Acquisition::default() };
    let noisy = cooling_curve(&gains, &Pipeline::synthetic(s, acq, 7));

    println!("g_opt = {g_opt:.1}");
    println!("{:>10} {:>10} {:>10} {:>16} {:>10}", "g", "n_m exact", "n_m model", "n_m fit (R)", "status");
    for (e, f) in exact.iter().zip(&noisy) {
        println!(
            "{:>10.2} {:>10.3} {:>10.3} {:>9.3}±{:<6.3} {:>10}",
            e.g_fb, e.n_m_from_r, e.n_m_high_gain, f.n_m_from_r, f.dn_m_from_r, f.status
        );
    }
}
