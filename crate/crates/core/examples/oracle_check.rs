//! Covariance oracle against the closed-form heterodyne spectrum, with and without an
//! injected fault.

use omk::oracle::{equivalence_check, Fault};
use omk::presets;

fn main() -> omk::Result<()> {
    let s = presets::fig2();
    let (p, n, d, c) = (&s.system, &s.noise, &s.detection, &s.conventions);
    let mut faults = vec![None];
    faults.extend(Fault::NAMES.iter().map(|f| Some(Fault::from_name(f).unwrap())));
    println!("{:<18} {:>12} {:>10} {:>12} {:>12}  pass", "fault", "max rel dev", "bound", "D closed", "D oracle");
    for f in faults {
        let r = equivalence_check(p, n, d, c, f)?;
        println!(
            "{:<18} {:>12.3e} {:>10.3e} {:>12.5} {:>12.5}  {}",
            f.map_or("none".into(), |f| f.name()),
            r.max_rel_dev,
            r.bound,
            r.difference_closed_form,
            r.difference_oracle,
            r.pass
        );
    }
    Ok(())
}
