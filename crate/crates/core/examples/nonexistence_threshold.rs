//! Threshold on `inf V` for `M = 1 + t^2`, `N = 3`, `l = 4`, then Newton
//! probes above it.

use kirchhoff::kirchhoff_map::KirchhoffFunction;
use kirchhoff::nonexistence::{probe_nonexistence, probe_seeded, v0_threshold, ProbeOptions, SigmaOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = KirchhoffFunction::power(1.0, 1.0, 2.0);
    let r = v0_threshold(&m, 3, 4.0, 0.0, 1.0, &SigmaOptions::default(), 0)?;
    println!(
        "sigma = {:.12}, C_l = {:.8}, bound = {:.8}, battery max = {:.8}",
        r.sigma, r.c_ell, r.v0_bound, r.gn.max_ratio
    );
    let opts = ProbeOptions {
        chain: Some((r.sigma, r.c_ell, r.eta)),
        ..ProbeOptions::default()
    };
    let probe = probe_nonexistence(&m, 2.0 * r.v0_bound, 4.0, 10, 0, &opts)?;
    println!("V = 2 x bound: {}/{} trials collapsed", probe.collapsed(), probe.trials.len());
    let seeded = probe_seeded(&m, 0.01, 4.0, &opts)?;
    match (&seeded.seed_error, &seeded.trial) {
        (Some(e), _) => println!("V = 0.01 seeded probe: no seed ({e})"),
        (None, Some(t)) => println!("V = 0.01 seeded probe: {:?}, norm {:.3e}", t.outcome, t.final_norm),
        _ => {}
    }
    Ok(())
}
